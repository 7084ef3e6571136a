#include <doctest.h>

#include <endocert/error.hpp>
#include <endocert/map_io.hpp>
#include <endocert/perturbation_lab.hpp>

#include <cmath>
#include <random>

using namespace endocert;

namespace {

std::shared_ptr<const TorusMap> shared(SurfaceEndomorphism f) {
  return std::make_shared<SurfaceEndomorphism>(std::move(f));
}

ErrorCode code_of(auto&& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e.code();
  }
  FAIL("no error raised");
  return ErrorCode::kConfig;
}

// Written out separately from BumpProfile: 1 - smoothstep on [r, R].
double cutoff(double s, double r, double R) {
  if (s <= r) return 1;
  if (s >= R) return 0;
  const double t = (s - r) / (R - r);
  return 1 - 3 * t * t + 2 * t * t * t;
}

const TorusPoint kP1{0.74089565520714512853, 0.63155830914876897354};
const TorusPoint kP2{0.11334961956305923059, 0.66205688989303260801};
const TorusPoint kZ{0.8887561290191510692, 0.96338339716884299014};

}  // namespace

TEST_CASE("bump profile") {
  const BumpProfile b{0.05, 0.1};
  CHECK(b.value(0.0) == 1.0);
  CHECK(b.value(0.05) == 1.0);
  CHECK(b.value(0.1) == 0.0);
  double worst = 0;
  for (int i = 0; i <= 1000; ++i) {
    const double s = 0.05 + 0.05 * i / 1000.0;
    CHECK(b.value(s) == doctest::Approx(cutoff(s, 0.05, 0.1)).epsilon(1e-12));
    worst = std::max(worst, std::abs(b.derivative(s)));
    if (i > 0 && i < 1000) {
      const double fd = (b.value(s + 1e-7) - b.value(s - 1e-7)) / 2e-7;
      CHECK(b.derivative(s) == doctest::Approx(fd).epsilon(1e-5));
    }
  }
  CHECK(worst <= b.derivative_bound() + 1e-12);
  CHECK(worst == doctest::Approx(b.derivative_bound()).epsilon(1e-4));
}

TEST_CASE("no-op surgery on cat") {
  const auto cat = shared(canonical_map("cat"));
  const TorusPoint c{0.3, 0.6};
  const auto g = franks_surgery(cat, {{c, cat->jacobian(c.lift()), 0.05}}, 0.01);
  CHECK(g.surgeries()[0].identity);
  CHECK(g.measured_c1_distance == 0.0);
  CHECK(c1_distance(*cat, *cat) == 0.0);
  const std::vector<TorusPoint> starts{{0.123, 0.456}};
  const auto a = transitivity_probe(*cat, starts, 20000, 32);
  const auto b = transitivity_probe(g, starts, 20000, 32);
  CHECK(a.visits == b.visits);
  // Budget zero is fine for a no-op, not for a real change.
  CHECK_NOTHROW(franks_surgery(cat, {{c, cat->jacobian(c.lift()), 0.05}}, 0.0));
  CHECK(code_of([&] { franks_surgery(cat, {{c, cat->jacobian(c.lift()) * 0.99, 0.05}}, 0.0); }) ==
        ErrorCode::kBudgetExceeded);
}

TEST_CASE("surgery locality and derivative pin") {
  const auto f = shared(canonical_map("shearcrit"));
  const std::vector<SurgeryRequest> req{{{0.2, 0.3}, Mat2{1.9, 1.1, 0.05, 1.5}, 0.04},
                                        {{0.7, 0.8}, Mat2{2.0, 1.0, 0.0, 0.7}, 0.03, 0.08}};
  // Budget generous enough for these targets.
  const auto g = franks_surgery(f, req, 5.0);
  for (const auto& q : req) {
    const Mat2 d = g.jacobian(q.center.lift());
    CHECK(std::abs(d.a11 - q.target.a11) <= 1e-12);
    CHECK(std::abs(d.a12 - q.target.a12) <= 1e-12);
    CHECK(std::abs(d.a21 - q.target.a21) <= 1e-12);
    CHECK(std::abs(d.a22 - q.target.a22) <= 1e-12);
    CHECK(g.lift(q.center.lift()) == f->lift(q.center.lift()));
    // Lattice translates too.
    const Mat2 d2 = g.jacobian(q.center.lift() + Vec2{-3, 2});
    CHECK(std::abs(d2.a21 - q.target.a21) <= 1e-12);
  }
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> u(-2, 2);
  int outside = 0;
  while (outside < 10000) {
    const LiftPoint p{u(rng), u(rng)};
    if (torus_distance(TorusPoint(p), req[0].center) < 0.08 || torus_distance(TorusPoint(p), req[1].center) < 0.08)
      continue;
    ++outside;
    const LiftPoint a = g.lift(p), b = f->lift(p);
    REQUIRE(a.x == b.x);
    REQUIRE(a.y == b.y);
  }
  // Finite differences of the blended lift against the analytic Jacobian.
  std::uniform_real_distribution<double> ang(0, kTwoPi), rad(0.04, 0.08);
  for (int k = 0; k < 200; ++k) {
    const LiftPoint p = req[0].center.lift() + unit_at(ang(rng)) * rad(rng);
    const double h = 1e-6;
    const Vec2 cx = (g.lift(p + Vec2{h, 0}) - g.lift(p - Vec2{h, 0})) * (0.5 / h);
    const Vec2 cy = (g.lift(p + Vec2{0, h}) - g.lift(p - Vec2{0, h})) * (0.5 / h);
    const Mat2 fd{cx.x, cy.x, cx.y, cy.y};
    CHECK((fd - g.jacobian(p)).operator_norm() < 1e-6);
  }
}

TEST_CASE("0.99 A on cat matches the closed-form blended bound") {
  const auto cat = shared(canonical_map("cat"));
  const Mat2 a = cat->linear_part().matrix();
  const double r = 0.05, R = 0.1;
  const auto g = franks_surgery(cat, {{{0.4, 0.4}, a * 0.99, r, R}}, 0.05);
  // Along the top singular direction the change is -0.01 sigma1 [(beta + beta' s) u v^T + ...]:
  // displacement beta s, derivative max(beta, |beta + beta' s|).
  double over = 0;
  for (int i = 0; i <= 200000; ++i) {
    const double s = R * i / 200000.0;
    const double db = (cutoff(s + 1e-8, r, R) - cutoff(s - 1e-8, r, R)) / 2e-8;
    const double beta = cutoff(s, r, R);
    over = std::max(over, beta * s + std::max(beta, std::abs(beta + db * s)));
  }
  const double analytic = 0.01 * a.operator_norm() * over;
  MESSAGE("measured " << g.measured_c1_distance << " analytic " << analytic << " overhead " << g.max_overhead);
  CHECK(g.measured_c1_distance == doctest::Approx(analytic).epsilon(0.05));
  CHECK(g.max_overhead == doctest::Approx(over).epsilon(1e-3));
  CHECK(g.measured_c1_distance <= g.allowance);
}

TEST_CASE("overlapping balls") {
  const auto cat = shared(canonical_map("cat"));
  const Mat2 a = cat->linear_part().matrix();
  CHECK(code_of([&] { franks_surgery(cat, {{{0.1, 0.1}, a, 0.05}, {{0.2, 0.1}, a, 0.05}}, 0.1); }) ==
        ErrorCode::kBallOverlap);
  // Across the seam.
  CHECK(code_of([&] { franks_surgery(cat, {{{0.98, 0.5}, a, 0.03}, {{0.05, 0.5}, a, 0.03}}, 0.1); }) ==
        ErrorCode::kBallOverlap);
}

TEST_CASE("shearcycle orbit oracle") {
  const auto f = demo_map("shearcycle");
  CHECK(torus_distance(evaluate(f, kP1), kP2) < 1e-12);
  CHECK(torus_distance(evaluate(f, kP2), kZ) < 1e-12);
  CHECK(torus_distance(evaluate(f, kZ), kP1) < 1e-12);
  // det Df = 2(2 + 3 cos 2 pi y) - 2 pi b cos 2 pi x vanishes at p1 and p2, kernel (1, -2).
  const double b = 0.1788881091609762831;
  for (const auto& p : {kP1, kP2}) {
    const double det = 2 * (2 + 3 * std::cos(kTwoPi * p.y())) - kTwoPi * b * std::cos(kTwoPi * p.x());
    CHECK(std::abs(det) < 1e-12);
    CHECK(std::abs(f.jacobian(p.lift()).det()) < 1e-12);
    const Vec2 k = f.jacobian(p.lift()) * Vec2{1, -2};
    CHECK(norm(k) < 1e-12);
  }
}

TEST_CASE("full kernel surgery collapses a ball") {
  const auto f = shared(demo_map("shearcycle"));
  CHECK(code_of([&] { build_collapse_witness(canonical_map("cat"), {0.1, 0.2}, 2); }) ==
        ErrorCode::kPreconditionUnmet);
  const auto w = build_collapse_witness(*f, kP1, 2);
  REQUIRE(w.chain.size() == 2);
  CHECK(torus_distance(w.chain[1], kP2) < 1e-12);
  CHECK(std::abs(w.rotation_angle) > 0);
  // Rotated image of L_0 is the kernel (1, -2) of Df(p2).
  CHECK(line_angle(w.targets[0].svd().u1, Vec2{1, -2}) < 1e-12);
  const double r = 0.05;
  const auto res = full_kernel_surgery(f, w, r, 5.0);
  MESSAGE("alignment cost " << w.alignment_cost << " rotation " << w.rotation_angle << " C1 "
                            << res.map->measured_c1_distance);
  CHECK(res.m == 2);
  CHECK(res.derivative_norm <= 1e-10);
  CHECK(kernel_dimension(*res.map, kP1, 2) == 2);
  CHECK(image_diameter(*res.map, kP1, r / 2, 2) <= 1e-8);
  // Too small a budget for the rotation.
  CHECK(code_of([&] { full_kernel_surgery(f, w, r, 0.5); }) == ErrorCode::kBudgetExceeded);

  std::mt19937_64 rng(11);
  std::uniform_real_distribution<double> ang(0, kTwoPi), rad(0, r / 2);
  std::vector<TorusPoint> inside;
  for (int i = 0; i < 8; ++i) inside.emplace_back(kP1.lift() + unit_at(ang(rng)) * rad(rng));
  const auto after = transitivity_probe(*res.map, inside, 100000, 64, 4);
  const auto before = transitivity_probe(*f, inside, 100000, 64, 4);
  MESSAGE("coverage before " << before.coverage << " after " << after.coverage);
  CHECK(after.coverage <= 0.05);
  CHECK(before.coverage >= 0.9);
  CHECK(after.note == kProbeNote);
}

TEST_CASE("sink surgery") {
  const auto f = shared(demo_map("neutralcrit"));
  const TorusPoint p{0, 0};
  for (double eps : {0.02, 0.05}) {
    const auto s = sink_surgery(f, p, 1, eps);
    CAPTURE(eps);
    CHECK(s.omega == doctest::Approx(1.02).epsilon(1e-12));
    CHECK(s.spectral_radius <= 0.99);
    CHECK(s.spectral_radius == doctest::Approx(1 - eps * 1.02).epsilon(1e-12));
    std::mt19937_64 rng(5);
    std::uniform_real_distribution<double> ang(0, kTwoPi), rad(0, 0.02);
    int converged = 0;
    for (int i = 0; i < 100; ++i) {
      TorusPoint x(p.lift() + unit_at(ang(rng)) * rad(rng));
      for (int n = 0; n < 1000; ++n) x = evaluate(*s.map, x);
      if (torus_distance(x, p) < 1e-6) ++converged;
    }
    CHECK(converged == 100);
  }
  CHECK(code_of([&] { sink_surgery(shared(canonical_map("cat")), {0, 0}, 1, 0.05); }) == ErrorCode::kGapTooLarge);

  // Already attracting: scaling clips to 1, still a sink.
  TrigPerturbation phi;
  phi.terms.push_back({1, -0.05, 1, 0, 0.0, TrigMode::kSin});
  phi.terms.push_back({2, -0.05, 0, 1, 0.0, TrigMode::kSin});
  const auto s = sink_surgery(shared(SurfaceEndomorphism({1, 0, 0, 1}, phi, "attract")), p, 1, 0.01);
  CHECK(s.step_scale == 1.0);
  CHECK(s.spectral_radius == doctest::Approx(1 - 0.1 * std::numbers::pi).epsilon(1e-12));
  // Target is Df(p), but the nonlinear map is linearized inside the ball.
  CHECK(s.map->measured_c1_distance <= s.map->allowance);
}

TEST_CASE("cat coverage probe") {
  const auto cat = canonical_map("cat");
  std::mt19937_64 rng(2);
  std::uniform_real_distribution<double> u(0, 1);
  const auto pr = transitivity_probe(cat, {{u(rng), u(rng)}}, 1000000, 64);
  CHECK(pr.coverage >= 0.99);
  CHECK(pr.visits.size() == 64u * 64u);
}
