#include <doctest.h>

#include <endocert/cone_certifier.hpp>
#include <endocert/map_io.hpp>

#include <random>

using namespace endocert;

namespace {

const double kSqrt5 = std::sqrt(5.0);
const double kLamPlus = (3 + kSqrt5) / 2;
const double kLamMinus = (3 - kSqrt5) / 2;
const Vec2 kCatUnstable = normalized(Vec2{1, kLamPlus - 2});
const Vec2 kCatStable = normalized(Vec2{1, kLamMinus - 2});
const double kYStar = std::acos(-2.0 / 3.0) / kTwoPi;

// Brute force: min |M u| over 20001 directions in the cone.
double brute_min(const Mat2& m, const Vec2& core, double eta) {
  double best = 1e300;
  const double t0 = std::atan2(core.y, core.x);
  for (int i = 0; i <= 20000; ++i) {
    const double t = t0 - eta + 2 * eta * i / 20000.0;
    best = std::min(best, norm(m * unit_at(t)));
  }
  return best;
}

}  // namespace

TEST_CASE("build_cone") {
  const auto c = build_cone({1, 0}, 0.2);
  CHECK(c.contains({0.3, 0.2}, {1, std::tan(0.1)}));
  CHECK_FALSE(c.contains({0.3, 0.2}, {1, std::tan(0.25)}));
  CHECK(c.contains({0.3, 0.2}, {-1, 0.01}));  // lines, not rays
  CHECK_THROWS_AS(build_cone({1, 0}, 0.0), Error);
  CHECK_THROWS_AS(build_cone({1, 0}, kPi / 4), Error);

  const auto u = build_cone(kCatUnstable, 0.1);
  CHECK(line_angle(u.core({0.5, 0.5}), {1, (kSqrt5 - 1) / 2}) < 1e-15);

  // Sampled E field of shearcrit: on the critical circle the core is the kernel line.
  const auto shear = canonical_map("shearcrit");
  const auto cr = locate_critical_set(shear, 64, 1e-12);
  SplittingConfig sc;
  sc.critical = &cr;
  const int res = 16;
  std::vector<SplittingSample> samples;
  for (int j = 0; j < res; ++j)
    for (int i = 0; i < res; ++i) {
      // Put grid rows on the critical circle so the kernel formula is exercised.
      const TorusPoint p(double(i) / res, j == 6 ? kYStar : double(j) / res);
      const auto seg = full_orbit(shear, p, 3, 3, DeterministicBranch{});
      samples.push_back(compute_splitting(shear, seg, 0, sc));
    }
  const auto e = build_cone_from_samples(samples, res, false, 0.15);
  CHECK(line_angle(e.core({0.25, 6.0 / res}), {1, -2}) < 1e-8);
}

TEST_CASE("min_norm_on_cone matches brute force") {
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> u(-3, 3);
  for (int i = 0; i < 200; ++i) {
    const Mat2 m{u(rng), u(rng), u(rng), u(rng)};
    const Vec2 core = unit_at(u(rng));
    const double eta = 0.05 + 0.7 * std::abs(u(rng)) / 3;
    CHECK(min_norm_on_cone(m, core, eta) == doctest::Approx(brute_min(m, core, eta)).epsilon(1e-6));
  }
}

TEST_CASE("cone invariance") {
  const auto cat = canonical_map("cat");
  const auto good = check_cone_invariance(cat, build_cone(kCatUnstable, 0.2), 1, 16);
  CHECK(good.passed);
  // tan(angle') = (lambda-/lambda+) tan(angle) for a boundary ray.
  CHECK(good.raw == doctest::Approx(0.2 - std::atan(kLamMinus / kLamPlus * std::tan(0.2))).epsilon(1e-12));
  CHECK(good.slack == 0.0);

  const auto bad = check_cone_invariance(cat, build_cone(kCatStable, 0.2), 1, 16);
  CHECK_FALSE(bad.passed);
  CHECK(bad.margin < 0);
  // Re-evaluating the reported worst point reproduces the sign.
  CHECK(invariance_clearance(cat, build_cone(kCatStable, 0.2), 1, bad.worst) < 0);

  const auto id = check_cone_invariance(linear_map({1, 0, 0, 1}, "identity"), build_cone({0.3, 1}, 0.3), 3, 8);
  CHECK(id.raw == doctest::Approx(0.0).epsilon(1e-15));
  CHECK_FALSE(id.passed);

  // Monotone in k for cat.
  double last = -1;
  for (int k = 1; k <= 5; ++k) {
    const double m = check_cone_invariance(cat, build_cone(kCatUnstable, 0.3), k, 8).margin;
    CHECK(m >= last);
    last = m;
  }
}

TEST_CASE("transversality") {
  const auto cat = canonical_map("cat");
  for (int n : {1, 3, 5}) {
    const auto t = check_transversality(cat, build_cone({0.2, 1}, 0.4), n, 8);
    CHECK(t.passed);
    CHECK(t.margin >= std::pow(kLamMinus, n) * (1 - 1e-12));
  }
  const auto shear = canonical_map("shearcrit");
  const double eta = 0.2;
  const auto th = check_transversality(shear, build_cone({1, 0}, eta), 3, 32);
  CHECK(th.passed);
  CHECK(th.raw >= 2 * std::cos(eta) - std::sin(eta) - 1e-12);  // |2 cos t + sin t| on the first step

  const auto tk = check_transversality(shear, build_cone({1, -2}, 0.1), 1, 64);
  CHECK_FALSE(tk.passed);
  CHECK(transversality_value(shear, build_cone({1, -2}, 0.1), 1, {0.3, kYStar}) < 1e-12);
}

TEST_CASE("expansion") {
  const auto cat = canonical_map("cat");
  const auto e = check_expansion(cat, build_cone(kCatUnstable, 0.1), 1, 16);
  const double bound = std::hypot(kLamPlus * std::cos(0.1), kLamMinus * std::sin(0.1));
  CHECK(e.margin == doctest::Approx(bound).epsilon(1e-12));
  CHECK(e.margin >= 2.4);

  const auto exp = canonical_map("exp");
  const double mu = (5 + kSqrt5) / 2;
  const Vec2 exp_unstable = normalized(Vec2{1, mu - 3});
  CHECK(line_angle(exp_unstable, {1, (kSqrt5 - 1) / 2}) < 1e-15);
  CHECK(check_expansion(exp, build_cone(exp_unstable, 0.2), 1, 16).margin >= 3.0);

  const auto idhom = canonical_map("idhom");
  CHECK_FALSE(check_expansion(idhom, build_cone({1, 1}, 0.2), 1, 32).passed);
  CHECK_FALSE(check_expansion(idhom, build_cone({1, -1}, 0.2), 1, 32).passed);
}

TEST_CASE("certify_partial_hyperbolicity") {
  CertifyConfig cfg;
  cfg.grid = 32;
  cfg.core_grid = 8;
  const auto cat = certify_partial_hyperbolicity(canonical_map("cat"), cfg);
  CHECK(cat.valid);
  CHECK(cat.domination.worst_ratio == doctest::Approx(kLamMinus / kLamPlus).epsilon(1e-9));
  CHECK(cat.expansion.margin == doctest::Approx(std::hypot(kLamPlus * std::cos(cat.eta), kLamMinus * std::sin(cat.eta)))
                                    .epsilon(1e-9));

  const auto exp = certify_partial_hyperbolicity(canonical_map("exp"), cfg);
  CHECK(exp.valid);
  bool noted = false;
  for (const auto& n : exp.notes) noted = noted || n.find("expanding map") != std::string::npos;
  CHECK(noted);

  const auto idhom = certify_partial_hyperbolicity(canonical_map("idhom"), cfg);
  CHECK_FALSE(idhom.valid);
  CHECK(idhom.failed_clause != "");
}

TEST_CASE("property: cone criterion agrees with domination on linear maps") {
  SplittingConfig sc;
  for (const char* name : {"cat", "diag", "exp"}) {
    CAPTURE(name);
    const auto f = canonical_map(name);
    const auto s = grid_splitting(f, 4, sc);
    const auto prof = angle_profile(s);
    const double eta = std::min(0.5 * prof.min, kPi / 4 * 0.999);
    const auto cone = build_cone_from_samples(s, 4, true, eta);
    for (int ell = 1; ell <= 3; ++ell) {
      const bool dom = check_domination(f, s, ell, 0.0).valid;
      const bool inv = check_cone_invariance(f, cone, ell, 8).passed;
      CHECK(dom == inv);
    }
  }
}

TEST_CASE("property: expansion does not exceed the F Lyapunov average") {
  SplittingConfig sc;
  for (const char* name : {"cat", "exp"}) {
    const auto f = canonical_map(name);
    const auto s = grid_splitting(f, 4, sc);
    const auto cone = build_cone_from_samples(s, 4, true, 0.1);
    const double lambda = check_expansion(f, cone, 1, 16).margin;
    const auto seg = full_orbit(f, {0.31, 0.42}, 40, 0, DeterministicBranch{});
    CHECK(lambda <= std::exp(lyapunov_along_F(f, seg, 100, sc).value) + 0.05);
  }
}

TEST_CASE("dichotomy_search") {
  DichotomyConfig cfg;
  cfg.epsilon = 0.05;
  cfg.grid = 8;
  const auto cat = dichotomy_search(canonical_map("cat"), cfg);
  CHECK(cat.arm == DichotomyArm::kCertificate);
  REQUIRE(cat.certificate.has_value());
  CHECK_FALSE(cat.witness.has_value());

  // Jordan block [[2,1],[0,2]]: E and F both tend to the x-axis, angle ~ 2/N + 2/M.
  const auto jordan = linear_map({2, 1, 0, 2}, "jordan");
  cfg.epsilon = 0.1;
  cfg.pool_size = 4;
  const auto w = dichotomy_search(jordan, cfg);
  CHECK(w.arm == DichotomyArm::kWitness);
  CHECK_FALSE(w.certificate.has_value());
  REQUIRE(w.witness.has_value());
  CHECK(w.witness->steps <= 2);
  for (double a : w.witness->angles) CHECK(std::abs(a) < 0.1);
  CHECK(w.witness->final_gap < 1e-12);

  cfg.epsilon = 0.05;
  const auto id = dichotomy_search(canonical_map("idhom"), cfg);
  CHECK(id.arm != DichotomyArm::kCertificate);
  CHECK_FALSE(id.explanation.empty());
  DichotomyConfig zero;
  zero.epsilon = 0.0;
  CHECK_THROWS_AS(dichotomy_search(canonical_map("cat"), zero), Error);
}
