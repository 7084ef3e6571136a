#include <doctest.h>

#include <endocert/arc_dynamics.hpp>
#include <endocert/error.hpp>
#include <endocert/homology_and_growth.hpp>
#include <endocert/map_io.hpp>

#include <cmath>
#include <numbers>
#include <random>

using namespace endocert;

namespace {

// Lift that forgets to add the lattice: x -> x + 0.1 sin(pi x) is not periodic.
class BrokenLift final : public TorusMap {
 public:
  LiftPoint lift(const LiftPoint& p) const override { return {p.x + 0.1 * std::sin(std::numbers::pi * p.x), p.y}; }
  Mat2 jacobian(const LiftPoint& p) const override {
    return {1 + 0.1 * std::numbers::pi * std::cos(std::numbers::pi * p.x), 0, 0, 1};
  }
  const LinearPart& linear_part() const override { return lp_; }
  const std::string& name() const override { return name_; }
  std::string canonical_text() const override { return "broken"; }

 private:
  LinearPart lp_{};
  std::string name_ = "broken";
};

}  // namespace

TEST_CASE("homology_matrix of the canonical maps") {
  const auto cat = homology_matrix(canonical_map("cat"));
  CHECK(cat.matrix == LinearPart{2, 1, 1, 1});
  CHECK(cat.spectral_radius == doctest::Approx((3 + std::sqrt(5.0)) / 2).epsilon(1e-12));
  CHECK(cat.max_residual < 1e-12);
  CHECK(homology_matrix(canonical_map("idhom")).spectral_radius == doctest::Approx(1.0));
  CHECK(homology_matrix(canonical_map("shearcrit")).spectral_radius == doctest::Approx(2.0));
  CHECK(homology_matrix(canonical_map("diag")).spectral_radius == doctest::Approx(2.0));
  CHECK_THROWS_AS(homology_matrix(BrokenLift{}), Error);
  try {
    homology_matrix(BrokenLift{});
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::kNonIntegerDisplacement);
  }
}

TEST_CASE("property: homology is blind to periodic perturbations") {
  std::mt19937_64 rng(7);
  std::uniform_real_distribution<double> amp(-0.3, 0.3), ph(0, kTwoPi);
  std::uniform_int_distribution<int> freq(-3, 3), coord(1, 2);
  for (int trial = 0; trial < 20; ++trial) {
    TrigPerturbation per;
    for (int k = 0; k < 3; ++k)
      per.terms.push_back({coord(rng), amp(rng), freq(rng), freq(rng), ph(rng), k % 2 ? TrigMode::kCos : TrigMode::kSin});
    const SurfaceEndomorphism f(LinearPart{2, 1, 1, 1}, per, "cat+");
    const auto h = homology_matrix(f, 20, trial + 1);
    CHECK(h.matrix == LinearPart{2, 1, 1, 1});
    CHECK(h.max_residual < 1e-9);
  }
}

TEST_CASE("spectral_obstruction verdicts") {
  const auto idh = homology_matrix(canonical_map("idhom"));
  const auto plain = spectral_obstruction(idh, false);
  CHECK(plain.verdict == HomologyVerdict::kConsistent);
  REQUIRE(plain.notes.size() == 1);
  CHECK(plain.notes[0].find("not robustly transitive") != std::string::npos);
  const auto injected = spectral_obstruction(idh, true);
  CHECK(injected.verdict == HomologyVerdict::kObstructed);
  CHECK(to_string(injected.verdict) == "OBSTRUCTED");
  const auto cat = spectral_obstruction(homology_matrix(canonical_map("cat")), true);
  CHECK(cat.verdict == HomologyVerdict::kConsistent);
  CHECK(cat.notes.empty());
}

TEST_CASE("area of a straight segment neighborhood") {
  // Stadium: 2 eps L + pi eps^2.
  const double eps = 0.05, len = 1.3;
  const std::vector<LiftPoint> seg{{0.2, 0.3}, {0.2 + len * 0.6, 0.3 + len * 0.8}};
  const auto r = area_length_consistency(seg, eps);
  const double exact = 2 * eps * len + std::numbers::pi * eps * eps;
  CHECK(r.area == doctest::Approx(exact).epsilon(0.02));
  CHECK(std::abs(r.area - exact) < 5 * r.std_error + 1e-12);
  CHECK(r.length == doctest::Approx(len));
  // Same answer with more threads.
  AreaConfig cfg;
  cfg.threads = 4;
  CHECK(area_length_consistency(seg, eps, cfg).hits == r.hits);
}

TEST_CASE("area rejects non-simple arcs") {
  const std::vector<LiftPoint> bow{{0, 0}, {1, 1}, {1, 0}, {0, 1}};
  CHECK(polyline_self_intersects(bow));
  CHECK_THROWS_AS(area_length_consistency(bow, 0.05), Error);
  const std::vector<LiftPoint> zig{{0, 0}, {1, 0.1}, {2, 0}, {3, 0.1}};
  CHECK_FALSE(polyline_self_intersects(zig));
}

TEST_CASE("iterated cat arc keeps area / length above 1.5 eps") {
  const auto cat = canonical_map("cat");
  const UArc arc = make_u_arc({0.1, 0.1}, {1, 0}, 0.1, nullptr);
  const auto it = iterate_arc(cat, arc, 6);
  const auto r = area_length_consistency(it.final_arc.nodes, 0.05);
  CHECK(r.ratio_over_epsilon >= 1.5);
  CHECK(r.ratio_over_epsilon <= 2.0 + 4 * r.std_error / (r.length * 0.05) + 0.05);
}

TEST_CASE("diameter growth") {
  const auto cat = diameter_growth(canonical_map("cat"), {0.1, 0.2}, 0.1, 10);
  CHECK(cat.exponent == doctest::Approx(std::log((3 + std::sqrt(5.0)) / 2)).epsilon(0.03));
  CHECK_FALSE(cat.sub_exponential);
  const auto shift = diameter_growth(translation_map({0.3, 0.7}), {0.1, 0.2}, 0.1, 10);
  for (double d : shift.diameters) CHECK(d == doctest::Approx(0.2).epsilon(1e-9));
  CHECK(shift.sub_exponential);
  const auto idh = diameter_growth(canonical_map("idhom"), {0.1, 0.2}, 0.1, 60);
  MESSAGE("idhom diameter exponent " << idh.exponent);
  CHECK(idh.sub_exponential);
}

TEST_CASE("growth_report arc exponent stays below log of the spectral radius") {
  GrowthConfig cfg;
  cfg.area.samples = 200000;
  for (const char* name : {"cat", "diag", "shearcrit"}) {
    const auto f = canonical_map(name);
    const auto rep = growth_report(f, cfg);
    const double bound = std::log(homology_matrix(f).spectral_radius) + 0.1;
    CAPTURE(name);
    CHECK(rep.arc_exponent <= bound);
    CHECK(rep.area_constant > 0);
    CHECK(rep.area_series.size() >= 2);
  }
}
