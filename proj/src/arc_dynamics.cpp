#include <endocert/arc_dynamics.hpp>
#include <endocert/splitting.hpp>

#include <algorithm>
#include <cmath>
#include <limits>

namespace endocert {

namespace {

double polyline_length(const std::vector<LiftPoint>& pts) {
  double s = 0.0;
  for (std::size_t i = 1; i < pts.size(); ++i) s += norm(pts[i] - pts[i - 1]);
  return s;
}

}  // namespace

double UArc::length() const { return polyline_length(nodes); }
double StableCurve::length() const { return polyline_length(points); }

UArc make_u_arc(const LiftPoint& start, const Vec2& direction, double length, std::shared_ptr<const ConeField> cone,
                int nodes) {
  if (!(length > 0.0) || nodes < 2) throw Error(ErrorCode::kConfig, "arc_dynamics", "arc needs positive length and >= 2 nodes");
  const Vec2 d = normalized(direction);
  UArc arc;
  arc.cone = std::move(cone);
  arc.max_segment = length / (nodes - 1) * 1.0000001;
  for (int i = 0; i < nodes; ++i) arc.nodes.push_back(start + d * (length * i / (nodes - 1)));
  if (arc.cone)
    for (int i = 0; i + 1 < nodes; ++i)
      if (!arc.cone->contains(TorusPoint(arc.nodes[i]), d))
        throw Error(ErrorCode::kConeViolation, "arc_dynamics",
                    "direction leaves the cone at node " + std::to_string(i) + " (angle " +
                        std::to_string(line_angle(arc.cone->core(TorusPoint(arc.nodes[i])), d)) + " > eta " +
                        std::to_string(arc.cone->eta()) + ")");
  return arc;
}

UArc apply_to_arc(const TorusMap& f, const UArc& arc, const ArcIterationConfig& cfg, bool* blowup) {
  UArc out;
  out.max_segment = arc.max_segment;
  out.cone = arc.cone;
  if (arc.nodes.empty()) return out;
  bool hit_budget = false;
  std::vector<LiftPoint>& nodes = out.nodes;
  nodes.push_back(f.lift(arc.nodes.front()));
  // Splits [a, b] until the image chord is short and straight.
  auto refine = [&](auto&& self, const LiftPoint& a, const LiftPoint& b, const LiftPoint& fa, const LiftPoint& fb,
                    int depth) -> void {
    if (depth < cfg.max_depth && !hit_budget) {
      const LiftPoint m = (a + b) * 0.5;
      const LiftPoint fm = f.lift(m);
      const bool long_chord = norm(fb - fa) > arc.max_segment;
      const bool bent = norm(fm - (fa + fb) * 0.5) > cfg.chord_tolerance;
      if (long_chord || bent) {
        if (nodes.size() + 2 > cfg.node_budget) {
          hit_budget = true;
        } else {
          self(self, a, m, fa, fm, depth + 1);
          self(self, m, b, fm, fb, depth + 1);
          return;
        }
      }
    }
    nodes.push_back(fb);
  };
  LiftPoint fa = nodes.front();
  for (std::size_t i = 1; i < arc.nodes.size(); ++i) {
    const LiftPoint fb = f.lift(arc.nodes[i]);
    refine(refine, arc.nodes[i - 1], arc.nodes[i], fa, fb, 0);
    fa = fb;
  }
  if (blowup) *blowup = hit_budget;
  return out;
}

double fit_slope(const std::vector<double>& y) {
  const std::size_t n = y.size();
  if (n < 2) return 0.0;
  double mx = 0, my = 0;
  for (std::size_t i = 0; i < n; ++i) {
    mx += static_cast<double>(i);
    my += y[i];
  }
  mx /= n;
  my /= n;
  double sxy = 0, sxx = 0;
  for (std::size_t i = 0; i < n; ++i) {
    sxy += (static_cast<double>(i) - mx) * (y[i] - my);
    sxx += (static_cast<double>(i) - mx) * (static_cast<double>(i) - mx);
  }
  return sxy / sxx;
}

namespace {

std::size_t count_cone_violations(const UArc& arc) {
  if (!arc.cone) return 0;
  std::size_t bad = 0;
  for (std::size_t i = 0; i + 1 < arc.nodes.size(); ++i) {
    const Vec2 d = arc.nodes[i + 1] - arc.nodes[i];
    if (norm(d) > 0 && !arc.cone->contains(TorusPoint(arc.nodes[i]), d)) ++bad;
  }
  return bad;
}

}  // namespace

ArcIteration iterate_arc(const TorusMap& f, const UArc& arc, int n, const ArcIterationConfig& cfg) {
  ArcIteration it;
  it.final_arc = arc;
  auto& s = it.series;
  s.lengths.push_back(arc.length());
  for (int k = 1; k <= n; ++k) {
    bool blow = false;
    it.final_arc = apply_to_arc(f, it.final_arc, cfg, &blow);
    s.lengths.push_back(it.final_arc.length());
    s.cone_violations += count_cone_violations(it.final_arc);
    if (blow) {
      s.blowup = true;
      break;
    }
  }
  std::vector<double> logs;
  for (double l : s.lengths) logs.push_back(std::log(l));
  s.exponent = fit_slope(logs);
  double target = 2 * s.lengths.front();
  for (std::size_t k = 1; k < s.lengths.size(); ++k)
    while (s.lengths[k] >= target) {
      s.doubling_times.push_back(static_cast<int>(k));
      target *= 2;
    }
  return it;
}

DeltaArcResult detect_delta_u_arc(const TorusMap& f, const UArc& arc, double delta, int n_max,
                                  const ArcIterationConfig& cfg) {
  DeltaArcResult r;
  UArc cur = arc;
  r.lengths.push_back(cur.length());
  if (r.lengths.back() > delta) {
    r.bounded = false;
    r.escaped_at = 0;
    return r;
  }
  for (int n = 1; n <= n_max; ++n) {
    cur = apply_to_arc(f, cur, cfg);
    r.lengths.push_back(cur.length());
    if (r.lengths.back() > delta) {
      r.bounded = false;
      r.escaped_at = n;
      return r;
    }
  }
  return r;
}

LineField singular_E_field(const TorusMap& f, int horizon) {
  return [&f, horizon](const TorusPoint& p) { return singular_limit_E(f, p, horizon).direction; };
}

StableCurve integrate_stable_curve(const LineField& e_field, const LiftPoint& x, double halfwidth, double step) {
  if (!(halfwidth > 0.0) || !(step > 0.0))
    throw Error(ErrorCode::kConfig, "arc_dynamics", "stable curve needs positive halfwidth and step");
  StableCurve c;
  c.halfwidth = halfwidth;
  c.step = step;
  const double flip_cos = std::cos(kPi / 4);
  // Field oriented along `ref`; nullopt when it turned by more than pi/4.
  auto oriented = [&](const LiftPoint& p, const Vec2& ref) -> std::optional<Vec2> {
    Vec2 e = normalized(e_field(TorusPoint(p)));
    if (dot(e, ref) < 0) e = -e;
    if (dot(e, ref) < flip_cos) return std::nullopt;
    return e;
  };
  auto run = [&](Vec2 dir) {
    std::vector<LiftPoint> pts;
    LiftPoint p = x;
    double t = 0.0;
    while (t < halfwidth - 1e-15) {
      const double h = std::min(step, halfwidth - t);
      const auto k1 = oriented(p, dir);
      const auto k2 = k1 ? oriented(p + *k1 * (h / 2), *k1) : std::nullopt;
      const auto k3 = k2 ? oriented(p + *k2 * (h / 2), *k2) : std::nullopt;
      const auto k4 = k3 ? oriented(p + *k3 * h, *k3) : std::nullopt;
      if (!k4) {
        c.orientation_flip = true;
        break;
      }
      p = p + (*k1 + *k2 * 2 + *k3 * 2 + *k4) * (h / 6);
      dir = *k1;
      t += h;
      pts.push_back(p);
    }
    return pts;
  };
  const Vec2 e0 = canonical_line(e_field(TorusPoint(x)));
  auto back = run(-e0);
  auto fwd = run(e0);
  c.points.assign(back.rbegin(), back.rend());
  c.base_index = c.points.size();
  c.points.push_back(x);
  c.points.insert(c.points.end(), fwd.begin(), fwd.end());
  return c;
}

ContractionReport stable_contraction_check(const TorusMap& f, const StableCurve& xi, int n) {
  ContractionReport r;
  std::vector<LiftPoint> pts = xi.points;
  r.lengths.push_back(polyline_length(pts));
  for (int j = 1; j <= n; ++j) {
    for (auto& p : pts) p = f.lift(p);
    r.lengths.push_back(polyline_length(pts));
    r.ratios.push_back(r.lengths[j - 1] > 0 ? r.lengths[j] / r.lengths[j - 1] : 0.0);
  }
  std::vector<double> logs;
  for (double l : r.lengths) logs.push_back(std::log(std::max(l, 1e-300)));
  r.rate = std::exp(fit_slope(logs));
  return r;
}

int polyline_crossings(const std::vector<LiftPoint>& a, const std::vector<LiftPoint>& b) {
  std::vector<LiftPoint> hits;
  const double eps = 1e-12;
  for (std::size_t i = 0; i + 1 < a.size(); ++i)
    for (std::size_t j = 0; j + 1 < b.size(); ++j) {
      const Vec2 r = a[i + 1] - a[i], s = b[j + 1] - b[j];
      const double den = cross(r, s);
      if (std::abs(den) < 1e-300) continue;  // parallel
      const Vec2 q = b[j] - a[i];
      const double t = cross(q, s) / den, u = cross(q, r) / den;
      if (t < -eps || t > 1 + eps || u < -eps || u > 1 + eps) continue;
      const LiftPoint p = a[i] + r * t;
      bool seen = false;
      for (const auto& h : hits) seen = seen || norm(h - p) < 1e-10;
      if (!seen) hits.push_back(p);
    }
  return static_cast<int>(hits.size());
}

NuBox build_nu_box(const UArc& center, double nu, const LineField& e_field, int fibers, double step) {
  if (center.nodes.size() < 2) throw Error(ErrorCode::kConfig, "arc_dynamics", "box needs a center arc");
  if (step <= 0.0) step = nu / 20;
  NuBox box;
  box.center = center.nodes;
  box.nu = nu;
  fibers = std::max(fibers, 2);
  const std::size_t last = center.nodes.size() - 1;
  box.single_crossings = true;
  for (int k = 0; k < fibers; ++k) {
    const std::size_t idx = static_cast<std::size_t>(std::llround(double(last) * k / (fibers - 1)));
    auto fib = integrate_stable_curve(e_field, center.nodes[idx], nu, step);
    if (polyline_crossings(fib.points, box.center) != 1) box.single_crossings = false;
    box.fibers.push_back(std::move(fib));
  }
  box.bottom = box.fibers.front();
  box.top = box.fibers.back();
  return box;
}

namespace {

// Dense solve with partial pivoting; a is n x n row-major.
std::vector<double> solve_dense(std::vector<double> a, std::vector<double> b) {
  const std::size_t n = b.size();
  for (std::size_t c = 0; c < n; ++c) {
    std::size_t piv = c;
    for (std::size_t r = c + 1; r < n; ++r)
      if (std::abs(a[r * n + c]) > std::abs(a[piv * n + c])) piv = r;
    if (a[piv * n + c] == 0.0) throw Error(ErrorCode::kContractionStall, "arc_dynamics", "singular shooting system");
    if (piv != c) {
      for (std::size_t k = 0; k < n; ++k) std::swap(a[c * n + k], a[piv * n + k]);
      std::swap(b[c], b[piv]);
    }
    for (std::size_t r = c + 1; r < n; ++r) {
      const double m = a[r * n + c] / a[c * n + c];
      if (m == 0.0) continue;
      for (std::size_t k = c; k < n; ++k) a[r * n + k] -= m * a[c * n + k];
      b[r] -= m * b[c];
    }
  }
  std::vector<double> x(n);
  for (std::size_t i = n; i-- > 0;) {
    double s = b[i];
    for (std::size_t k = i + 1; k < n; ++k) s -= a[i * n + k] * x[k];
    x[i] = s / a[i * n + i];
  }
  return x;
}

Vec2 round_vec(const Vec2& v) { return {std::round(v.x), std::round(v.y)}; }

}  // namespace

PeriodicPoint find_periodic_point(const TorusMap& f, const TorusPoint& x, double nu, const PeriodicConfig& cfg) {
  PeriodicPoint out;
  // Hypothesis: E contracts along the orbit of x.
  // |Df^n|E(x)| as a product of one-step factors |Df(x_i) E(x_i)|; pushing a
  // single vector forward would be swamped by the unstable direction.
  {
    double log_sum = 0.0;
    TorusPoint y = x;
    for (int i = 0; i < cfg.e_horizon; ++i) {
      const Vec2 e = singular_limit_E(f, y, cfg.e_horizon).direction;
      log_sum += std::log(std::max(norm(f.jacobian(y.lift()) * e), 1e-300));
      y = evaluate(f, y);
    }
    out.contraction_rate = std::exp(log_sum / cfg.e_horizon);
  }
  if (out.contraction_rate >= cfg.stall_rate)
    throw Error(ErrorCode::kContractionStall, "arc_dynamics",
                "|Df^n|E|^(1/n) = " + std::to_string(out.contraction_rate) + " along the orbit: no stable contraction");

  // Near-return.
  std::vector<TorusPoint> orbit{x};
  int l = 0;
  for (int k = 1; k <= cfg.orbit_budget; ++k) {
    const TorusPoint y = evaluate(f, orbit.back());
    if (k >= cfg.min_period && torus_distance(y, x) < nu / 2) {
      l = k;
      break;
    }
    orbit.push_back(y);
  }
  if (l == 0)
    throw Error(ErrorCode::kNoReturnFound, "arc_dynamics",
                "no return within nu/2 in " + std::to_string(cfg.orbit_budget) + " steps");
  if (l > 600)
    throw Error(ErrorCode::kNoReturnFound, "arc_dynamics",
                "first return at l = " + std::to_string(l) + " exceeds the shooting size limit 600");

  // Cyclic shooting: G_i = f(P_i) - P_{i+1} - k_i, indices mod l, in the lift.
  std::vector<LiftPoint> P;
  for (const auto& p : orbit) P.push_back(p.lift());
  std::vector<Vec2> k(static_cast<std::size_t>(l));
  for (int i = 0; i < l; ++i) k[i] = round_vec(f.lift(P[i]) - P[(i + 1) % l]);
  const std::size_t n = 2 * static_cast<std::size_t>(l);
  double res = std::numeric_limits<double>::infinity();
  for (int it = 0; it < cfg.max_newton; ++it) {
    std::vector<double> a(n * n, 0.0), b(n);
    double r = 0.0;
    for (int i = 0; i < l; ++i) {
      const int j = (i + 1) % l;
      const Vec2 g = f.lift(P[i]) - P[j] - k[i];
      r = std::max(r, norm(g));
      const Mat2 J = f.jacobian(P[i]);
      const std::size_t row = 2 * static_cast<std::size_t>(i);
      a[row * n + 2 * i] += J.a11;
      a[row * n + 2 * i + 1] += J.a12;
      a[(row + 1) * n + 2 * i] += J.a21;
      a[(row + 1) * n + 2 * i + 1] += J.a22;
      a[row * n + 2 * j] -= 1.0;
      a[(row + 1) * n + 2 * j + 1] -= 1.0;
      b[row] = -g.x;
      b[row + 1] = -g.y;
    }
    if (r < 1e-13) {
      res = r;
      break;
    }
    if (it > 5 && r > 0.5 * res)
      throw Error(ErrorCode::kContractionStall, "arc_dynamics", "shooting residual stalled at " + std::to_string(r));
    res = r;
    const auto delta = solve_dense(std::move(a), std::move(b));
    for (int i = 0; i < l; ++i) P[i] = P[i] + Vec2{delta[2 * i], delta[2 * i + 1]};
  }
  out.point = TorusPoint(P[0]);
  out.period = l;
  TorusPoint y = out.point;
  for (int i = 0; i < l; ++i) {
    const double s = torus_distance(TorusPoint(P[i]), orbit[i]);
    out.shadowing.push_back(s);
    out.max_shadowing = std::max(out.max_shadowing, s);
    y = evaluate(f, y);
  }
  out.residual = torus_distance(y, out.point);
  return out;
}

std::vector<TorusPoint> periodic_points(const TorusMap& f, int l, int seed_resolution) {
  if (l < 1) throw Error(ErrorCode::kConfig, "arc_dynamics", "period must be >= 1");
  auto lift_power = [&](LiftPoint p) {
    for (int i = 0; i < l; ++i) p = f.lift(p);
    return p;
  };
  std::vector<TorusPoint> found;
  for (int j = 0; j < seed_resolution; ++j)
    for (int i = 0; i < seed_resolution; ++i) {
      LiftPoint p{(i + 0.5) / seed_resolution, (j + 0.5) / seed_resolution};
      const Vec2 k = round_vec(lift_power(p) - p);
      bool ok = false;
      for (int it = 0; it < 50; ++it) {
        const Vec2 g = lift_power(p) - p - k;
        if (norm(g) < 1e-12) {
          ok = true;
          break;
        }
        const Mat2 m = derivative_power(f, TorusPoint(p), l).value() - Mat2::identity();
        if (std::abs(m.det()) < 1e-14) break;
        Vec2 step = m.inverse() * g;
        if (norm(step) > 0.25) step = step * (0.25 / norm(step));
        p = p - step;
      }
      if (!ok) continue;
      const TorusPoint t(p);
      bool dup = false;
      for (const auto& q : found) dup = dup || torus_distance(q, t) < 1e-7;
      if (!dup) found.push_back(t);
    }
  std::sort(found.begin(), found.end(), [](const TorusPoint& a, const TorusPoint& b) {
    return a.x() < b.x() || (a.x() == b.x() && a.y() < b.y());
  });
  return found;
}

}  // namespace endocert
