#include <doctest.h>

#include <endocert/error.hpp>
#include <endocert/map_io.hpp>
#include <endocert/surface_map.hpp>

#include <random>

using namespace endocert;

namespace {

constexpr double kShearAmp = 3.0 / (2.0 * 3.14159265358979323846);

// arccos(-2/3) / 2pi and its mirror: zeros of 2 + 3 cos(2 pi y).
const double kYStar = std::acos(-2.0 / 3.0) / kTwoPi;

double max_diff(const Mat2& a, const Mat2& b) { return (a - b).max_abs_entry(); }

}  // namespace

TEST_CASE("linalg: 2x2 SVD reconstructs random matrices") {
  std::mt19937_64 rng(7);
  std::uniform_real_distribution<double> u(-3, 3);
  for (int i = 0; i < 500; ++i) {
    const Mat2 m{u(rng), u(rng), u(rng), u(rng)};
    const auto s = m.svd();
    CHECK(s.sigma1 >= s.sigma2);
    const Mat2 r = Mat2::outer(s.u1, s.v1) * s.sigma1 + Mat2::outer(s.u2, s.v2) * s.sigma2;
    CHECK(max_diff(r, m) < 1e-12);
    CHECK(std::abs(s.sigma1 * s.sigma2 - std::abs(m.det())) < 1e-11);
  }
}

TEST_CASE("evaluate: worked examples") {
  const auto cat = canonical_map("cat");
  CHECK(evaluate(cat, {0, 0}) == TorusPoint(0, 0));
  const auto q = evaluate(cat, {0.5, 0.5});
  CHECK(q.x() == doctest::Approx(0.5));
  CHECK(q.y() == doctest::Approx(0.0));

  const auto shear = canonical_map("shearcrit");
  const auto r = evaluate(shear, {0.0, 0.25});
  CHECK(r.x() == doctest::Approx(0.25).epsilon(1e-14));
  CHECK(r.y() == doctest::Approx(0.5 + 3.0 / kTwoPi).epsilon(1e-14));
}

TEST_CASE("TorusPoint reduces into [0,1)") {
  const TorusPoint p(-1e-18, 3.75);
  CHECK(p.x() >= 0.0);
  CHECK(p.x() < 1.0);
  CHECK(p.y() == doctest::Approx(0.75));
  CHECK(TorusPoint(-0.25, 1.0) == TorusPoint(0.75, 0.0));
}

TEST_CASE("evaluate_lift: worked examples") {
  const auto cat = canonical_map("cat");
  CHECK(evaluate_lift(cat, {1, 0}) == Vec2{2, 1});
  const Vec2 d = evaluate_lift(cat, {1, 1}) - evaluate_lift(cat, {0, 0});
  CHECK(d == Vec2{3, 2});
  const auto idhom = canonical_map("idhom");
  const Vec2 v = evaluate_lift(idhom, {0.25, 0.0});
  CHECK(v.x == doctest::Approx(0.25).epsilon(1e-15));
  CHECK(v.y == doctest::Approx(0.1).epsilon(1e-15));
}

TEST_CASE("derivative: closed forms") {
  const auto cat = canonical_map("cat");
  CHECK(derivative(cat, {0.3, 0.8}).value() == Mat2{2, 1, 1, 1});

  const auto shear = canonical_map("shearcrit");
  for (double y : {0.0, 0.1, 0.37, 0.9}) {
    const Mat2 d = derivative(shear, {0.42, y}).value();
    CHECK(max_diff(d, Mat2{2, 1, 0, 2 + 3 * std::cos(kTwoPi * y)}) < 1e-14);
  }
  CHECK(std::abs(derivative(shear, {0.1, kYStar}).value().det()) < 1e-14);
  CHECK(kYStar == doctest::Approx(0.36614).epsilon(1e-5));
}

TEST_CASE("derivative_power: worked examples") {
  const auto cat = canonical_map("cat");
  CHECK(derivative_power(cat, {0.2, 0.7}, 2).value() == Mat2{5, 3, 3, 2});
  const auto diag = canonical_map("diag");
  CHECK(derivative_power(diag, {0.2, 0.7}, 3).value() == Mat2{8, 0, 0, 1});

  const auto shear = canonical_map("shearcrit");
  const auto d = derivative_power(shear, {0.6, kYStar}, 1);
  CHECK(kernel_dimension(d) == 1);
  const Vec2 k = d.matrix.svd().v2;
  CHECK(line_angle(k, {1, -2}) < 1e-12);
}

TEST_CASE("derivative_power: long products are rescaled, not overflowed") {
  const auto cat = canonical_map("cat");
  const auto d = derivative_power(cat, {0.1, 0.2}, 2000);
  CHECK(d.rescaled());
  CHECK(std::isfinite(d.matrix.max_abs_entry()));
  const double expected = 2000 * std::log((3 + std::sqrt(5.0)) / 2);
  CHECK(std::log(d.matrix.operator_norm()) + d.log_scale == doctest::Approx(expected).epsilon(1e-9));
  CHECK(kernel_dimension(d) == 1);  // sigma2/sigma1 ~ e^-1925 is numerically zero
}

TEST_CASE("kernel_dimension: worked examples") {
  const auto cat = canonical_map("cat");
  for (int n : {1, 3, 10}) CHECK(kernel_dimension(cat, {0.3, 0.3}, n) == 0);
  const auto shear = canonical_map("shearcrit");
  CHECK(kernel_dimension(shear, {0.25, kYStar}, 1) == 1);
  CHECK(kernel_dimension(shear, {0.25, 0.1}, 1) == 0);
  DerivativeMatrix zero{Mat2::zero(), {}, 0.0, 0.0, 2};
  CHECK(kernel_dimension(zero) == 2);
}

TEST_CASE("locate_critical_set: cat is empty, shearcrit lies on two circles") {
  CHECK(locate_critical_set(canonical_map("cat"), 32, 1e-10).empty());

  const auto shear = canonical_map("shearcrit");
  const double tol = 1e-10;
  const auto cr = locate_critical_set(shear, 64, tol);
  REQUIRE(cr.samples.size() >= 64);
  int lower = 0, upper = 0;
  for (const auto& s : cr.samples) {
    const double y = s.point.y();
    const bool near_lower = std::abs(y - kYStar) < 1e-9;
    const bool near_upper = std::abs(y - (1 - kYStar)) < 1e-9;
    CHECK((near_lower || near_upper));
    lower += near_lower;
    upper += near_upper;
    CHECK(std::abs(s.det) <= tol);
    CHECK(s.kernel_dimension == 1);
    REQUIRE(s.kernel.has_value());
    const Vec2 image = shear.jacobian(s.point.lift()) * *s.kernel;
    CHECK(norm(image) <= 10 * tol);
    CHECK(line_angle(*s.kernel, {1, -2}) < 1e-9);
  }
  CHECK(lower > 0);
  CHECK(upper > 0);
}

TEST_CASE("critical_distance") {
  const auto shear = canonical_map("shearcrit");
  const auto cr = locate_critical_set(shear, 32, 1e-12);
  CHECK(critical_distance(shear, cr, {0.3, kYStar}) < 1e-12);
  CHECK(critical_distance(shear, cr, {0.3, kYStar + 1e-4}) == doctest::Approx(1e-4).epsilon(1e-3));
  CHECK(critical_distance(shear, cr, {0.3, 0.05}) > 0.1);
  CHECK(std::isinf(critical_distance(canonical_map("cat"), locate_critical_set(canonical_map("cat"), 16, 1e-12),
                                     {0.1, 0.1})));
}

TEST_CASE("property: lattice equivariance, finite differences, chain rule") {
  std::mt19937_64 rng(20261019);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (const auto& name : canonical_map_names()) {
    CAPTURE(name);
    const auto f = canonical_map(name);
    const Mat2 a = f.linear_part().matrix();
    double worst_lattice = 0, worst_fd = 0, worst_chain = 0;
    for (int i = 0; i < 1000; ++i) {
      const LiftPoint p{u(rng) * 4 - 2, u(rng) * 4 - 2};
      for (Vec2 v : {Vec2{1, 0}, Vec2{0, 1}, Vec2{1, 1}})
        worst_lattice = std::max(worst_lattice, norm(f.lift(p + v) - f.lift(p) - a * v));

      const double h = 1e-5;
      const Vec2 dx = (f.lift(p + Vec2{h, 0}) - f.lift(p - Vec2{h, 0})) / (2 * h);
      const Vec2 dy = (f.lift(p + Vec2{0, h}) - f.lift(p - Vec2{0, h})) / (2 * h);
      worst_fd = std::max(worst_fd, max_diff(Mat2{dx.x, dy.x, dx.y, dy.y}, f.jacobian(p)));

      const TorusPoint tp(p);
      const int n = 1 + static_cast<int>(u(rng) * 4), m = 1 + static_cast<int>(u(rng) * 4);
      TorusPoint fm = tp;
      for (int k = 0; k < m; ++k) fm = evaluate(f, fm);
      const Mat2 whole = derivative_power(f, tp, n + m).value();
      const Mat2 split = derivative_power(f, fm, n).value() * derivative_power(f, tp, m).value();
      worst_chain = std::max(worst_chain, max_diff(whole, split) / std::max(1.0, whole.max_abs_entry()));
    }
    CHECK(worst_lattice < 1e-12);
    CHECK(worst_fd < 1e-6);
    CHECK(worst_chain < 1e-10);
  }
}

TEST_CASE("map files: parse, format, errors") {
  const char* text = R"(# sample
name = "shearcrit"
linear = [[2, 1], [0, 2]]

[[term]]
coord = 2
amplitude = 0.477464829275686
freq = [0, 1]
phase = 0
mode = "sin"
)";
  const auto f = parse_map(text);
  CHECK(f.name() == "shearcrit");
  CHECK(f.linear_part() == LinearPart{2, 1, 0, 2});
  REQUIRE(f.perturbation().terms.size() == 1);
  CHECK(f.perturbation().terms[0].amplitude == doctest::Approx(kShearAmp).epsilon(1e-14));

  // Formatting is lossless for every shipped map.
  for (const auto& name : canonical_map_names()) {
    const auto g = canonical_map(name);
    const auto back = parse_map(format_map(g));
    CHECK(back.canonical_text() == g.canonical_text());
    CHECK(map_hash(back) == map_hash(g));
  }
  CHECK(map_hash(canonical_map("cat")) != map_hash(canonical_map("exp")));

  CHECK_THROWS_AS(parse_map("linear = [[2, 1], [1]]"), Error);
  CHECK_THROWS_AS(parse_map("linear = [[2.5, 1], [1, 1]]"), Error);
  CHECK_THROWS_AS(parse_map("name = \"x\""), Error);
  CHECK_THROWS_AS(parse_map("linear = [[1,0],[0,1]]\n[[term]]\ncoord = 3\namplitude=1\nfreq=[0,1]\nmode=\"sin\""),
                  Error);
  CHECK_THROWS_AS(resolve_map("/nonexistent/map.toml"), Error);
}

TEST_CASE("translation map has constant derivative identity") {
  const auto t = translation_map({0.25, 0.5});
  CHECK(t.jacobian({0.3, 0.1}) == Mat2::identity());
  const auto q = evaluate(t, {0.5, 0.75});
  CHECK(q.x() == doctest::Approx(0.75));
  CHECK(q.y() == doctest::Approx(0.25));
}

TEST_CASE("shipped map files match the built-in maps") {
  const std::filesystem::path dir = std::filesystem::path(ENDOCERT_SOURCE_DIR) / "maps";
  for (const auto& n : canonical_map_names())
    CHECK(load_map(dir / (n + ".toml")).canonical_text() == canonical_map(n).canonical_text());
  for (const auto& n : demo_map_names())
    CHECK(load_map(dir / (n + ".toml")).canonical_text() == demo_map(n).canonical_text());
  CHECK(resolve_map((dir / "cat.toml").string()).linear_part() == LinearPart{2, 1, 1, 1});
}
