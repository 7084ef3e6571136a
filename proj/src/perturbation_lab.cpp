#include <endocert/error.hpp>
#include <endocert/parallel.hpp>
#include <endocert/perturbation_lab.hpp>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <sstream>

namespace endocert {

namespace {
constexpr const char* kModule = "perturbation_lab";

std::string fmt(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

// Rank-one part sigma1 u1 v1^T.
Mat2 rank_one(const Mat2& m) {
  const auto s = m.svd();
  return Mat2::outer(s.u1, s.v1) * s.sigma1;
}

// Both the tight overhead and the general bound sample s on the same grid.
template <class Fn>
double max_over_profile(const BumpProfile& b, Fn&& fn) {
  const int n = 20000;
  double best = fn(b.inner, b.value(b.inner), 0.0);
  for (int i = 0; i <= n; ++i) {
    const double s = b.outer * i / n;
    best = std::max(best, fn(s, b.value(s), std::abs(b.derivative(s))));
  }
  return best;
}

// General bound: |beta M + beta' (M d) d^T / s| <= (beta + |beta'| s)|M|.
double safe_overhead(const BumpProfile& b) {
  return max_over_profile(b, [](double s, double beta, double db) { return beta * s + beta + db * s; });
}

}  // namespace

double BumpProfile::value(double s) const {
  if (s <= inner) return 1.0;
  if (s >= outer) return 0.0;
  const double t = (s - inner) / (outer - inner);
  return 1.0 - t * t * (3.0 - 2.0 * t);
}

double BumpProfile::derivative(double s) const {
  if (s <= inner || s >= outer) return 0.0;
  const double t = (s - inner) / (outer - inner);
  return -6.0 * t * (1.0 - t) / (outer - inner);
}

double BumpProfile::overhead() const {
  return max_over_profile(*this, [](double s, double beta, double db) {
    return beta * s + std::max(beta, std::abs(beta - db * s));
  });
}

PerturbedMap::PerturbedMap(std::shared_ptr<const TorusMap> base, std::vector<LocalSurgery> surgeries,
                           std::string name)
    : base_(std::move(base)), surgeries_(std::move(surgeries)), name_(std::move(name)) {}

const LocalSurgery* PerturbedMap::active(const LiftPoint& p, Vec2* d) const {
  for (const auto& s : surgeries_) {
    const Vec2 w = wrap_displacement(p - s.center.lift());
    if (norm(w) < s.outer_radius) {
      *d = w;
      return &s;
    }
  }
  return nullptr;
}

LiftPoint PerturbedMap::lift(const LiftPoint& p) const {
  Vec2 d;
  const LocalSurgery* s = active(p, &d);
  if (!s || s->identity) return base_->lift(p);
  const LiftPoint c = p - d;  // lift of the center nearest p
  const double dist = norm(d);
  if (dist <= s->inner_radius) return base_->lift(c) + s->target * d;
  const LiftPoint fp = base_->lift(p);
  const Vec2 bracket = base_->lift(c) + s->target * d - fp;
  return fp + bracket * BumpProfile{s->inner_radius, s->outer_radius}.value(dist);
}

Mat2 PerturbedMap::jacobian(const LiftPoint& p) const {
  Vec2 d;
  const LocalSurgery* s = active(p, &d);
  if (!s || s->identity) return base_->jacobian(p);
  const double dist = norm(d);
  if (dist <= s->inner_radius) return s->target;
  const BumpProfile b{s->inner_radius, s->outer_radius};
  const LiftPoint c = p - d;
  const Mat2 df = base_->jacobian(p);
  const Vec2 bracket = base_->lift(c) + s->target * d - base_->lift(p);
  return df + (s->target - df) * b.value(dist) + Mat2::outer(bracket, d * (b.derivative(dist) / dist));
}

std::string PerturbedMap::canonical_text() const {
  std::ostringstream os;
  os << base_->canonical_text();
  for (const auto& s : surgeries_) {
    os << "[[surgery]]\ncenter = [" << fmt(s.center.x()) << ", " << fmt(s.center.y()) << "]\n"
       << "inner = " << fmt(s.inner_radius) << "\nouter = " << fmt(s.outer_radius) << "\n"
       << "target = [[" << fmt(s.target.a11) << ", " << fmt(s.target.a12) << "], [" << fmt(s.target.a21) << ", "
       << fmt(s.target.a22) << "]]\n";
  }
  return os.str();
}

double c1_distance(const TorusMap& f, const TorusMap& g, const C1SamplePlan& plan) {
  std::vector<LiftPoint> pts;
  for (int i = 0; i < plan.grid; ++i)
    for (int j = 0; j < plan.grid; ++j) pts.push_back({(i + 0.5) / plan.grid, (j + 0.5) / plan.grid});
  for (std::size_t k = 0; k < plan.focus.size(); ++k) {
    const double rad = k < plan.focus_radius.size() ? plan.focus_radius[k] : 0.1;
    pts.push_back(plan.focus[k].lift());
    for (int ring = 1; ring <= plan.rings; ++ring)
      for (int a = 0; a < plan.per_ring; ++a)
        pts.push_back(plan.focus[k].lift() + unit_at(kTwoPi * (a + 0.5 * (ring % 2)) / plan.per_ring) *
                                                 (rad * ring / plan.rings));
  }
  double worst = 0.0;
  for (const auto& p : pts) {
    const double disp = norm(wrap_displacement(g.lift(p) - f.lift(p)));
    const double dd = (g.jacobian(p) - f.jacobian(p)).operator_norm();
    worst = std::max(worst, disp + dd);
  }
  return worst;
}

double second_derivative_bound(const TorusMap& f) {
  if (const auto* pm = dynamic_cast<const PerturbedMap*>(&f)) return second_derivative_bound(pm->base());
  const auto* se = dynamic_cast<const SurfaceEndomorphism*>(&f);
  if (!se) return 0.0;
  double k[2] = {0.0, 0.0};
  for (const auto& t : se->perturbation().terms)
    k[t.coord - 1] += std::abs(t.amplitude) * kTwoPi * kTwoPi * double(t.p * t.p + t.q * t.q);
  return std::hypot(k[0], k[1]);
}

PerturbedMap franks_surgery(std::shared_ptr<const TorusMap> f, const std::vector<SurgeryRequest>& requests,
                            double epsilon) {
  if (!f) throw Error(ErrorCode::kConfig, kModule, "null base map");
  std::vector<LocalSurgery> out;
  for (const auto& q : requests) {
    LocalSurgery s;
    s.center = q.center;
    s.inner_radius = q.inner_radius;
    s.outer_radius = q.outer_radius > 0 ? q.outer_radius : 2.0 * q.inner_radius;
    if (!(s.inner_radius > 0) || !(s.outer_radius > s.inner_radius) || s.outer_radius >= 0.5)
      throw Error(ErrorCode::kConfig, kModule, "surgery radii need 0 < r < R < 1/2");
    s.target = q.target;
    const BumpProfile b{s.inner_radius, s.outer_radius};
    s.derivative_bound = b.derivative_bound();
    s.overhead = b.overhead();
    s.cost = (q.target - f->jacobian(q.center.lift())).operator_norm();
    if (s.cost > 0 && s.cost >= epsilon)
      throw Error(ErrorCode::kBudgetExceeded, kModule,
                  "|L - Df| = " + fmt(s.cost) + " at (" + fmt(s.center.x()) + ", " + fmt(s.center.y()) +
                      ") is not below epsilon = " + fmt(epsilon));
    out.push_back(s);
  }
  for (std::size_t i = 0; i < out.size(); ++i)
    for (std::size_t j = i + 1; j < out.size(); ++j)
      if (torus_distance(out[i].center, out[j].center) < out[i].outer_radius + out[j].outer_radius)
        throw Error(ErrorCode::kBallOverlap, kModule,
                    "surgery balls " + std::to_string(i) + " and " + std::to_string(j) + " intersect");

  const double k2 = second_derivative_bound(*f);
  for (auto& s : out) s.identity = s.cost == 0.0 && k2 == 0.0 && dynamic_cast<const SurfaceEndomorphism*>(f.get());
  std::string name = f->name();
  if (!out.empty()) name += "+surgery";
  PerturbedMap g(f, out, name);
  C1SamplePlan plan;
  double allowance = 0.0;
  for (const auto& s : out) {
    plan.focus.push_back(s.center);
    plan.focus_radius.push_back(s.outer_radius);
    const double r = s.inner_radius, R = s.outer_radius;
    const double curvature = k2 * R * (1.0 + 0.75 * R / (R - r) + R / 2.0);
    allowance = std::max(allowance, epsilon * safe_overhead({r, R}) + curvature);
    g.max_overhead = std::max(g.max_overhead, s.overhead);
  }
  g.allowance = allowance;
  g.measured_c1_distance = out.empty() ? 0.0 : c1_distance(*f, g, plan);
  if (g.measured_c1_distance > allowance * (1 + 1e-9) + 1e-14)
    throw Error(ErrorCode::kBudgetExceeded, kModule,
                "measured C1 distance " + fmt(g.measured_c1_distance) + " exceeds allowance " + fmt(allowance));
  return g;
}

CollapseWitness build_collapse_witness(const TorusMap& f, const TorusPoint& start, int m, double critical_tolerance) {
  if (m < 2) throw Error(ErrorCode::kConfig, kModule, "collapse chain needs m >= 2");
  CollapseWitness w;
  w.chain.push_back(start);
  for (int i = 1; i < m; ++i) w.chain.push_back(evaluate(f, w.chain.back()));
  auto critical = [&](const TorusPoint& x) {
    const Mat2 d = f.jacobian(x.lift());
    const double n = d.operator_norm();
    return n > 0 && std::abs(d.det()) <= critical_tolerance * n * n;
  };
  if (!critical(w.chain.front()) || !critical(w.chain.back()))
    throw Error(ErrorCode::kPreconditionUnmet, kModule,
                "chain ends must be critical points (|det Df| <= " + fmt(critical_tolerance) + " |Df|^2)");

  for (int i = 0; i < m; ++i) {
    const Mat2 d = f.jacobian(w.chain[i].lift());
    w.targets.push_back(i == 0 || i == m - 1 ? rank_one(d) : d);
  }
  Mat2 q = Mat2::identity();
  for (int i = 0; i < m - 1; ++i) q = w.targets[i] * q;
  const Vec2 image = q.svd().u1;
  const Vec2 kernel = f.jacobian(w.chain.back().lift()).svd().v2;
  w.rotation_index = m - 2;
  w.rotation_angle = signed_line_angle(image, kernel);
  w.targets[w.rotation_index] = Mat2::rotation(w.rotation_angle) * w.targets[w.rotation_index];
  for (int i = 0; i < m; ++i)
    w.alignment_cost =
        std::max(w.alignment_cost, (w.targets[i] - f.jacobian(w.chain[i].lift())).operator_norm());
  return w;
}

KernelSurgeryResult full_kernel_surgery(std::shared_ptr<const TorusMap> f, const CollapseWitness& w, double r,
                                        double epsilon) {
  const int m = static_cast<int>(w.chain.size());
  if (m < 2 || static_cast<int>(w.targets.size()) != m)
    throw Error(ErrorCode::kWitnessInvalid, kModule, "witness chain and targets disagree");
  KernelSurgeryResult res;
  res.witness = w;
  res.m = m;
  std::vector<SurgeryRequest> req;
  Mat2 q = Mat2::identity();
  for (int i = 0; i < m; ++i) {
    const double ri = i == 0 ? r : std::max(1.2 * q.operator_norm() * r / 2.0, 1e-6);
    res.inner_radii.push_back(ri);
    req.push_back({w.chain[i], w.targets[i], ri, 2.0 * ri});
    q = w.targets[i] * q;
  }
  auto g = std::make_shared<PerturbedMap>(franks_surgery(f, req, epsilon));
  res.derivative_norm = derivative_power(*g, w.chain.front(), m).value().operator_norm();
  if (res.derivative_norm > 1e-10)
    throw Error(ErrorCode::kWitnessInvalid, kModule, "|Dg^m| = " + fmt(res.derivative_norm) + " after surgery");
  res.map = std::move(g);
  return res;
}

double image_diameter(const TorusMap& g, const TorusPoint& center, double radius, int m, int rings, int per_ring) {
  std::vector<LiftPoint> pts{center.lift()};
  for (int ring = 1; ring <= rings; ++ring)
    for (int a = 0; a < per_ring; ++a)
      pts.push_back(center.lift() + unit_at(kTwoPi * a / per_ring) * (radius * ring / rings));
  for (int k = 0; k < m; ++k)
    for (auto& p : pts) p = g.lift(p);
  double d2 = 0.0;
  for (std::size_t i = 0; i < pts.size(); ++i)
    for (std::size_t j = i + 1; j < pts.size(); ++j) {
      const Vec2 d = pts[i] - pts[j];
      d2 = std::max(d2, dot(d, d));
    }
  return std::sqrt(d2);
}

SinkResult sink_surgery(std::shared_ptr<const TorusMap> f, const TorusPoint& p, int l, double epsilon, double r) {
  if (l < 1) throw Error(ErrorCode::kConfig, kModule, "period must be >= 1");
  SinkResult res;
  res.orbit.push_back(p);
  for (int i = 1; i < l; ++i) res.orbit.push_back(evaluate(*f, res.orbit.back()));
  const double ret = torus_distance(evaluate(*f, res.orbit.back()), p);
  if (ret > 1e-9)
    throw Error(ErrorCode::kPreconditionUnmet, kModule, "point does not return after l steps (off by " + fmt(ret) + ")");
  res.omega = eigenvalues(derivative_power(*f, p, l).value()).spectral_radius();
  if (res.omega >= 1.0) {
    const double gap = 1.0 - 1.0 / res.omega;
    if (gap >= epsilon)
      throw Error(ErrorCode::kGapTooLarge, kModule,
                  "1 - 1/|omega| = " + fmt(gap) + " with |omega| = " + fmt(res.omega) + " is not below epsilon = " +
                      fmt(epsilon));
    res.step_scale = std::min(1.0, std::pow(1.0 / res.omega - epsilon, 1.0 / l));
  }
  // Per-step cost is (1 - scale)|Df| < 2 eps |Df|; that is the budget handed on.
  double max_df = 0.0;
  std::vector<SurgeryRequest> req;
  Mat2 q = Mat2::identity();
  for (int i = 0; i < l; ++i) {
    const Mat2 d = f->jacobian(res.orbit[i].lift());
    max_df = std::max(max_df, d.operator_norm());
    const Mat2 target = d * res.step_scale;
    const double ri = i == 0 ? r : 1.2 * q.operator_norm() * r;
    req.push_back({res.orbit[i], target, ri, 2.0 * ri});
    q = target * q;
  }
  auto h = std::make_shared<PerturbedMap>(franks_surgery(f, req, std::max(2.0 * epsilon * max_df, 1e-300)));
  res.spectral_radius = eigenvalues(derivative_power(*h, p, l).value()).spectral_radius();
  res.map = std::move(h);
  return res;
}

TransitivityProbe transitivity_probe(const TorusMap& g, const std::vector<TorusPoint>& starts, long orbit_length,
                                     int grid, int threads) {
  if (grid < 1 || orbit_length < 0) throw Error(ErrorCode::kConfig, kModule, "probe needs grid >= 1, length >= 0");
  TransitivityProbe out;
  out.orbit_length = orbit_length;
  out.grid = grid;
  out.note = kProbeNote;
  const std::size_t cells = std::size_t(grid) * grid;
  std::vector<std::vector<std::uint64_t>> visits(starts.size());
  out.start_coverage.assign(starts.size(), 0.0);
  parallel_for(starts.size(), static_cast<unsigned>(threads), [&](std::size_t s) {
    std::vector<std::uint64_t> v(cells, 0);
    TorusPoint x = starts[s];
    auto mark = [&](const TorusPoint& p) {
      const int i = std::min(grid - 1, static_cast<int>(p.x() * grid));
      const int j = std::min(grid - 1, static_cast<int>(p.y() * grid));
      ++v[std::size_t(j) * grid + i];
    };
    mark(x);
    for (long n = 0; n < orbit_length; ++n) {
      x = evaluate(g, x);
      mark(x);
    }
    out.start_coverage[s] = double(std::count_if(v.begin(), v.end(), [](auto c) { return c > 0; })) / double(cells);
    visits[s] = std::move(v);
  });
  for (std::size_t s = 0; s < starts.size(); ++s)
    if (out.start_coverage[s] > out.coverage) {
      out.coverage = out.start_coverage[s];
      out.best_start = s;
    }
  if (!starts.empty()) out.visits = std::move(visits[out.best_start]);
  return out;
}

}  // namespace endocert
