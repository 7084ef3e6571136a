#include <endocert/surface_map.hpp>

#include <cstdio>
#include <limits>
#include <sstream>

namespace endocert {

namespace {

constexpr double kRescaleHigh = 1e150;
constexpr double kRescaleLow = 1e-150;

double term_argument(const TrigTerm& t, const LiftPoint& pt) {
  return kTwoPi * (t.p * pt.x + t.q * pt.y) + t.phase;
}

void multiply_into(DerivativeMatrix& acc, const Mat2& factor) {
  acc.matrix = factor * acc.matrix;
  const double fn = factor.operator_norm();
  acc.log_factor_norms += fn > 0.0 ? std::log(fn) : -745.0;
  acc.steps += 1;
  const double m = acc.matrix.max_abs_entry();
  if (m > kRescaleHigh || (m < kRescaleLow && m > 0.0)) {
    acc.matrix = acc.matrix * (1.0 / m);
    acc.log_scale += std::log(m);
  }
}

}  // namespace

Vec2 TrigPerturbation::value(const LiftPoint& pt) const {
  Vec2 out;
  for (const auto& t : terms) {
    const double arg = term_argument(t, pt);
    const double v = t.amplitude * (t.mode == TrigMode::kSin ? std::sin(arg) : std::cos(arg));
    (t.coord == 1 ? out.x : out.y) += v;
  }
  return out;
}

Mat2 TrigPerturbation::jacobian(const LiftPoint& pt) const {
  Mat2 out = Mat2::zero();
  for (const auto& t : terms) {
    const double arg = term_argument(t, pt);
    const double d = t.amplitude * kTwoPi * (t.mode == TrigMode::kSin ? std::cos(arg) : -std::sin(arg));
    if (t.coord == 1) {
      out.a11 += d * t.p;
      out.a12 += d * t.q;
    } else {
      out.a21 += d * t.p;
      out.a22 += d * t.q;
    }
  }
  return out;
}

Vec2 TrigPerturbation::amplitude_bound() const {
  Vec2 out;
  for (const auto& t : terms) (t.coord == 1 ? out.x : out.y) += std::abs(t.amplitude);
  return out;
}

Vec2 TorusMap::det_gradient(const LiftPoint& p) const {
  const double h = 1e-6;
  auto d = [&](double dx, double dy) { return jacobian({p.x + dx, p.y + dy}).det(); };
  return {(d(h, 0) - d(-h, 0)) / (2 * h), (d(0, h) - d(0, -h)) / (2 * h)};
}

SurfaceEndomorphism::SurfaceEndomorphism(LinearPart linear, TrigPerturbation perturbation,
                                         std::string name)
    : linear_(linear), perturbation_(std::move(perturbation)), name_(std::move(name)) {}

LiftPoint SurfaceEndomorphism::lift(const LiftPoint& p) const {
  return linear_.matrix() * p + perturbation_.value(p);
}

Mat2 SurfaceEndomorphism::jacobian(const LiftPoint& p) const {
  return linear_.matrix() + perturbation_.jacobian(p);
}

std::string SurfaceEndomorphism::canonical_text() const {
  std::ostringstream os;
  char buf[64];
  os << "linear " << linear_.a11 << ' ' << linear_.a12 << ' ' << linear_.a21 << ' ' << linear_.a22
     << '\n';
  for (const auto& t : perturbation_.terms) {
    os << "term " << t.coord << ' ';
    std::snprintf(buf, sizeof buf, "%.17g", t.amplitude);
    os << buf << ' ' << t.p << ' ' << t.q << ' ';
    std::snprintf(buf, sizeof buf, "%.17g", t.phase);
    os << buf << ' ' << (t.mode == TrigMode::kSin ? "sin" : "cos") << '\n';
  }
  return os.str();
}

TorusPoint evaluate(const TorusMap& f, const TorusPoint& p) { return TorusPoint(f.lift(p.lift())); }

LiftPoint evaluate_lift(const TorusMap& f, const LiftPoint& p) { return f.lift(p); }

DerivativeMatrix derivative(const TorusMap& f, const TorusPoint& p) {
  DerivativeMatrix d{Mat2::identity(), p};
  multiply_into(d, f.jacobian(p.lift()));
  return d;
}

DerivativeMatrix derivative_power(const TorusMap& f, const TorusPoint& p, int n) {
  DerivativeMatrix d{Mat2::identity(), p};
  TorusPoint x = p;
  for (int i = 0; i < n; ++i) {
    multiply_into(d, f.jacobian(x.lift()));
    if (i + 1 < n) x = evaluate(f, x);
  }
  return d;
}

DerivativeMatrix derivative_along(const TorusMap& f, std::span<const TorusPoint> orbit) {
  DerivativeMatrix d{Mat2::identity(), orbit.empty() ? TorusPoint{} : orbit.front()};
  for (const auto& x : orbit) multiply_into(d, f.jacobian(x.lift()));
  return d;
}

int kernel_dimension(const DerivativeMatrix& d, double tolerance) {
  const auto s = d.matrix.svd();
  // Compare in log space: sigma * e^log_scale against tol * e^log_factor_norms.
  const double threshold_log = std::log(tolerance) + d.log_factor_norms - d.log_scale;
  auto below = [&](double sigma) { return sigma == 0.0 || std::log(sigma) <= threshold_log; };
  if (below(s.sigma1)) return 2;
  if (below(s.sigma2)) return 1;
  return 0;
}

int kernel_dimension(const TorusMap& f, const TorusPoint& p, int n, double tolerance) {
  return kernel_dimension(derivative_power(f, p, n), tolerance);
}

double det_derivative(const TorusMap& f, const TorusPoint& p) { return f.jacobian(p.lift()).det(); }

namespace {

CriticalSample make_sample(const TorusMap& f, const TorusPoint& p, double det_tolerance) {
  CriticalSample s;
  s.point = p;
  const Mat2 j = f.jacobian(p.lift());
  s.det = j.det();
  const auto sv = j.svd();
  if (sv.sigma1 <= det_tolerance) {
    s.kernel_dimension = 2;
  } else if (std::abs(s.det) <= det_tolerance) {
    s.kernel_dimension = 1;
    s.kernel = canonical_line(sv.v2);
  }
  return s;
}

/// Bisection on det along the lift segment a -> b, where det(a) and det(b)
/// have opposite signs.
LiftPoint bisect_det(const TorusMap& f, LiftPoint a, LiftPoint b, double tol) {
  double da = f.jacobian(a).det();
  for (int it = 0; it < 200; ++it) {
    const LiftPoint m = 0.5 * (a + b);
    const double dm = f.jacobian(m).det();
    if (std::abs(dm) <= tol * 1e-3 || norm(b - a) < 1e-16) return m;
    if ((dm < 0) == (da < 0)) {
      a = m;
      da = dm;
    } else {
      b = m;
    }
  }
  return 0.5 * (a + b);
}

}  // namespace

CriticalSet locate_critical_set(const TorusMap& f, int resolution, double det_tolerance) {
  CriticalSet out;
  out.det_tolerance = det_tolerance;
  out.resolution = resolution;
  const int n = resolution;
  const double h = 1.0 / n;
  std::vector<double> det(static_cast<std::size_t>(n) * n);
  auto at = [&](int i, int j) -> double& { return det[static_cast<std::size_t>(i) * n + j]; };
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) at(i, j) = f.jacobian({i * h, j * h}).det();

  auto push = [&](const LiftPoint& lp) {
    const TorusPoint tp(lp);
    if (std::abs(f.jacobian(tp.lift()).det()) > det_tolerance) return;
    out.samples.push_back(make_sample(f, tp, det_tolerance));
  };

  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < n; ++j) {
      const double d0 = at(i, j);
      if (std::abs(d0) <= det_tolerance) {
        push({i * h, j * h});
        continue;
      }
      // Edges to the right and up neighbours; wrapping indices cover the torus once.
      const double dx = at((i + 1) % n, j);
      const double dy = at(i, (j + 1) % n);
      if ((d0 < 0) != (dx < 0) && std::abs(dx) > det_tolerance)
        push(bisect_det(f, {i * h, j * h}, {(i + 1) * h, j * h}, det_tolerance));
      if ((d0 < 0) != (dy < 0) && std::abs(dy) > det_tolerance)
        push(bisect_det(f, {i * h, j * h}, {i * h, (j + 1) * h}, det_tolerance));
    }
  }
  return out;
}

double critical_distance(const TorusMap& f, const CriticalSet& cr, const TorusPoint& p) {
  if (cr.empty()) return std::numeric_limits<double>::infinity();
  const double tol = std::max(cr.det_tolerance, 1e-13);
  LiftPoint q = p.lift();
  for (int it = 0; it < 30; ++it) {
    const double d = f.jacobian(q).det();
    if (std::abs(d) <= tol) {
      const double dist = norm(q - p.lift());
      if (dist < 0.05) return dist;
      break;
    }
    const Vec2 g = f.det_gradient(q);
    const double g2 = dot(g, g);
    if (g2 < 1e-24) break;
    q -= g * (d / g2);
    if (norm(q - p.lift()) > 0.25) break;
  }
  double best = std::numeric_limits<double>::infinity();
  for (const auto& s : cr.samples) best = std::min(best, torus_distance(s.point, p));
  return best;
}

}  // namespace endocert
