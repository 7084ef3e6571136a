#include <endocert/orbit.hpp>

#include <algorithm>
#include <cmath>
#include <random>

namespace endocert {

bool PreimageSet::near_critical_value() const {
  return std::any_of(solutions.begin(), solutions.end(), [](const auto& s) { return s.near_critical; });
}

OrbitSegment::OrbitSegment(std::vector<TorusPoint> points, int first_index, std::vector<int> branch)
    : points_(std::move(points)), first_(first_index), branch_(std::move(branch)) {}

const TorusPoint& OrbitSegment::at(int i) const {
  if (!contains(i))
    throw Error(ErrorCode::kPreconditionUnmet, "orbit_engine", "index " + std::to_string(i) + " outside window");
  return points_[static_cast<std::size_t>(i - first_)];
}

std::span<const TorusPoint> OrbitSegment::slice(int from, int to) const {
  if (from > to) return {};
  if (!contains(from) || !contains(to))
    throw Error(ErrorCode::kPreconditionUnmet, "orbit_engine", "slice outside window");
  return std::span<const TorusPoint>(points_).subspan(static_cast<std::size_t>(from - first_),
                                                      static_cast<std::size_t>(to - from + 1));
}

double OrbitSegment::max_residual(const TorusMap& f) const {
  double worst = 0.0;
  for (std::size_t i = 0; i + 1 < points_.size(); ++i)
    worst = std::max(worst, torus_distance(evaluate(f, points_[i]), points_[i + 1]));
  return worst;
}

OrbitSegment forward_orbit(const TorusMap& f, const TorusPoint& p, int n) {
  std::vector<TorusPoint> pts;
  pts.reserve(static_cast<std::size_t>(n) + 1);
  pts.push_back(p);
  for (int i = 0; i < n; ++i) pts.push_back(evaluate(f, pts.back()));
  return OrbitSegment(std::move(pts), 0, {});
}

namespace {

struct NewtonResult {
  LiftPoint point;
  double residual;
  bool converged;
};

NewtonResult newton_preimage(const TorusMap& f, LiftPoint s, const TorusPoint& q) {
  for (int it = 0; it < 60; ++it) {
    const Vec2 r = wrap_displacement(f.lift(s) - q.lift());
    const double rn = norm(r);
    if (rn < 1e-15) return {s, rn, true};
    const Mat2 j = f.jacobian(s);
    const double det = j.det();
    if (std::abs(det) < 1e-14 * std::max(1.0, j.max_abs_entry() * j.max_abs_entry())) break;
    Vec2 step = j.inverse() * r;
    const double sn = norm(step);
    if (sn > 0.25) step = step * (0.25 / sn);
    s -= step;
  }
  const double rn = norm(wrap_displacement(f.lift(s) - q.lift()));
  return {s, rn, rn <= kPreimageTolerance};
}

bool lex_less(const TorusPoint& a, const TorusPoint& b) {
  return a.x() < b.x() || (a.x() == b.x() && a.y() < b.y());
}

}  // namespace

PreimageSet preimages(const TorusMap& f, const TorusPoint& q, int seed_resolution) {
  PreimageSet out;
  out.target = q;
  out.expected_degree = std::abs(f.linear_part().det());
  const int res = std::max<int>(seed_resolution, static_cast<int>(std::max<std::int64_t>(4 * out.expected_degree, 8)));
  const double h = 1.0 / res;
  for (int i = 0; i < res; ++i) {
    for (int j = 0; j < res; ++j) {
      const auto r = newton_preimage(f, {(i + 0.5) * h, (j + 0.5) * h}, q);
      if (!r.converged) continue;
      const TorusPoint tp(r.point);
      auto dup = std::find_if(out.solutions.begin(), out.solutions.end(),
                              [&](const auto& s) { return torus_distance(s.point, tp) < kPreimageDedup; });
      if (dup != out.solutions.end()) {
        if (r.residual < dup->residual) {
          dup->point = tp;
          dup->residual = r.residual;
        }
        continue;
      }
      out.solutions.push_back({tp, r.residual, false});
    }
  }
  for (auto& s : out.solutions) {
    const Mat2 j = f.jacobian(s.point.lift());
    const auto sv = j.svd();
    s.near_critical = sv.sigma2 <= 1e-8 * std::max(1.0, sv.sigma1);
    s.residual = torus_distance(evaluate(f, s.point), q);
  }
  std::sort(out.solutions.begin(), out.solutions.end(),
            [](const auto& a, const auto& b) { return lex_less(a.point, b.point); });
  return out;
}

namespace {

class BranchChooser {
 public:
  explicit BranchChooser(const BranchSelector& s) : selector_(s) {
    if (const auto* r = std::get_if<RandomBranch>(&selector_)) rng_.seed(r->seed);
  }

  int choose(std::size_t step, std::size_t count) {
    if (std::holds_alternative<DeterministicBranch>(selector_)) return 0;
    if (std::holds_alternative<RandomBranch>(selector_)) {
      std::uniform_int_distribution<std::size_t> d(0, count - 1);
      return static_cast<int>(d(rng_));
    }
    const auto& idx = std::get<IndexListBranch>(selector_).indices;
    if (step >= idx.size())
      throw Error(ErrorCode::kConfig, "orbit_engine", "index list shorter than backward window");
    if (idx[step] < 0 || static_cast<std::size_t>(idx[step]) >= count)
      throw Error(ErrorCode::kConfig, "orbit_engine",
                  "branch index " + std::to_string(idx[step]) + " out of range (" + std::to_string(count) +
                      " preimages)");
    return idx[step];
  }

 private:
  BranchSelector selector_;
  std::mt19937_64 rng_;
};

/// Preimage chain from p: returns x_{-1}, x_{-2}, ... plus choices.
void walk_back(const TorusMap& f, const TorusPoint& p, int m, BranchChooser& chooser, int seed_resolution,
               std::vector<TorusPoint>& back, std::vector<int>& choices) {
  TorusPoint cur = p;
  for (int k = 0; k < m; ++k) {
    const auto pre = preimages(f, cur, seed_resolution);
    if (pre.solutions.empty()) {
      std::vector<TorusPoint> pts(back.rbegin(), back.rend());
      pts.push_back(p);
      throw NoPreimageFoundError("no preimage of (" + std::to_string(cur.x()) + ", " + std::to_string(cur.y()) +
                                     ") at backward step " + std::to_string(k + 1),
                                 OrbitSegment(std::move(pts), -static_cast<int>(back.size()), choices));
    }
    const int c = chooser.choose(static_cast<std::size_t>(k), pre.solutions.size());
    choices.push_back(c);
    cur = pre.solutions[static_cast<std::size_t>(c)].point;
    back.push_back(cur);
  }
}

}  // namespace

OrbitSegment backward_branch(const TorusMap& f, const TorusPoint& p, int m, const BranchSelector& selector,
                             int seed_resolution) {
  return full_orbit(f, p, m, 0, selector, seed_resolution);
}

OrbitSegment full_orbit(const TorusMap& f, const TorusPoint& p, int m, int n, const BranchSelector& selector,
                        int seed_resolution) {
  BranchChooser chooser(selector);
  std::vector<TorusPoint> back;
  std::vector<int> choices;
  walk_back(f, p, m, chooser, seed_resolution, back, choices);
  std::vector<TorusPoint> pts(back.rbegin(), back.rend());
  pts.push_back(p);
  for (int i = 0; i < n; ++i) pts.push_back(evaluate(f, pts.back()));
  return OrbitSegment(std::move(pts), -m, std::move(choices));
}

OrbitSegment extend_orbit(const TorusMap& f, const OrbitSegment& seg, int back_steps, int ahead,
                          const BranchSelector& selector, int seed_resolution) {
  BranchChooser chooser(selector);
  std::vector<TorusPoint> back;
  std::vector<int> choices;
  walk_back(f, seg.at(seg.first()), back_steps, chooser, seed_resolution, back, choices);
  std::vector<TorusPoint> pts(back.rbegin(), back.rend());
  for (const auto& x : seg.points()) pts.push_back(x);
  for (int i = 0; i < ahead; ++i) pts.push_back(evaluate(f, pts.back()));
  // Branch record keeps the x_{-1}, x_{-2}, ... order.
  std::vector<int> branch = seg.branch();
  const int missing = -seg.first() - static_cast<int>(branch.size());
  for (int i = 0; i < missing; ++i) branch.push_back(-1);
  branch.insert(branch.end(), choices.begin(), choices.end());
  return OrbitSegment(std::move(pts), seg.first() - back_steps, std::move(branch));
}

bool is_critical(const TorusMap& f, const CriticalSet& cr, const TorusPoint& p, double margin) {
  return critical_distance(f, cr, p) <= margin;
}

EntryTimes entry_times(const TorusMap& f, const OrbitSegment& seg, const CriticalSet& cr, double margin) {
  EntryTimes out;
  out.margin = margin;
  if (cr.empty()) return out;
  for (int i = std::max(0, seg.first()); i <= seg.last(); ++i) {
    if (is_critical(f, cr, seg.at(i), margin)) {
      out.tau_plus = i;
      break;
    }
  }
  bool next_critical = seg.contains(0) && is_critical(f, cr, seg.at(0), margin);
  for (int i = -1; i >= seg.first(); --i) {
    const bool here = is_critical(f, cr, seg.at(i), margin);
    if (here && !next_critical) {
      out.tau_minus = i;
      break;
    }
    next_critical = here;
  }
  return out;
}

std::optional<TorusPoint> project_to_critical(const TorusMap& f, const LiftPoint& start, double det_tolerance) {
  LiftPoint q = start;
  for (int it = 0; it < 60; ++it) {
    const double d = f.jacobian(q).det();
    if (std::abs(d) <= det_tolerance) return TorusPoint(q);
    const Vec2 g = f.det_gradient(q);
    const double g2 = dot(g, g);
    if (g2 < 1e-24) return std::nullopt;
    q -= g * (d / g2);
    if (norm(q - start) > 0.2) return std::nullopt;
  }
  return std::nullopt;
}

namespace {

std::optional<OrbitSegment> try_connection(const TorusMap& f, const CriticalSet& cr, const LambdaSampleConfig& cfg,
                                           std::mt19937_64& rng) {
  std::uniform_int_distribution<std::size_t> pick(0, cr.samples.size() - 1);
  const TorusPoint c = cr.samples[pick(rng)].point;
  const Vec2 grad = f.det_gradient(c.lift());
  if (norm(grad) == 0.0) return std::nullopt;
  // Short segment across the critical curve; its points are within the margin.
  const Vec2 normal = normalized(grad);
  const double half = 0.5 * cfg.margin;
  const int w = cfg.window;
  const int horizon = 2 * w;
  auto point_at = [&](double s) { return TorusPoint(c.lift() + normal * s); };

  // dets[k][n-1] = det Df at f^n(point_at(s_k)).
  const int samples = std::max(8, cfg.connection_samples);
  std::vector<double> s_values(static_cast<std::size_t>(samples) + 1);
  std::vector<std::vector<double>> dets(s_values.size());
  for (int k = 0; k <= samples; ++k) {
    s_values[k] = -half + 2 * half * k / samples;
    TorusPoint y = point_at(s_values[k]);
    dets[k].reserve(static_cast<std::size_t>(horizon));
    for (int n = 1; n <= horizon; ++n) {
      y = evaluate(f, y);
      dets[k].push_back(det_derivative(f, y));
    }
  }
  std::vector<std::pair<int, int>> crossings;  // (n, k)
  for (int n = 1; n <= horizon; ++n)
    for (int k = 0; k < samples; ++k)
      if ((dets[k][n - 1] < 0) != (dets[k + 1][n - 1] < 0)) crossings.emplace_back(n, k);
  if (crossings.empty()) return std::nullopt;
  const auto [n, k] = crossings[std::uniform_int_distribution<std::size_t>(0, crossings.size() - 1)(rng)];

  auto image_det = [&](double s) {
    TorusPoint y = point_at(s);
    for (int i = 0; i < n; ++i) y = evaluate(f, y);
    return det_derivative(f, y);
  };
  double lo = s_values[k], hi = s_values[k + 1];
  double glo = dets[k][n - 1];
  for (int it = 0; it < 200; ++it) {
    const double mid = 0.5 * (lo + hi);
    if (point_at(mid) == point_at(lo) || point_at(mid) == point_at(hi)) break;
    const double gm = image_det(mid);
    if (gm == 0.0) {
      lo = hi = mid;
      break;
    }
    if ((gm < 0) == (glo < 0)) {
      lo = mid;
      glo = gm;
    } else {
      hi = mid;
    }
  }
  const double s = std::abs(image_det(lo)) <= std::abs(image_det(hi)) ? lo : hi;
  const TorusPoint start = point_at(s);

  // start is critical within the margin and its n-th image is critical. x_0 goes
  // a steps after start, past any intermediate near-hit, so x_{tau+} is the
  // bisected point.
  int last_near = 0;
  {
    TorusPoint y = start;
    for (int i = 1; i < n; ++i) {
      y = evaluate(f, y);
      if (is_critical(f, cr, y, cfg.margin)) last_near = i;
    }
  }
  const int a_min = std::max({1, n - w, last_near + 1}), a_max = std::min(n, w);
  if (a_min > a_max) return std::nullopt;
  const int a = std::uniform_int_distribution<int>(a_min, a_max)(rng);
  OrbitSegment around = full_orbit(f, start, w - a, w + a, RandomBranch{rng()});
  std::vector<TorusPoint> pts(around.points().begin(), around.points().end());
  std::vector<int> branch(static_cast<std::size_t>(w), -1);
  for (std::size_t i = 0; i < around.branch().size(); ++i) branch[static_cast<std::size_t>(a) + i] = around.branch()[i];
  return OrbitSegment(std::move(pts), -w, std::move(branch));
}

}  // namespace

std::vector<OrbitSegment> sample_lambda_set(const TorusMap& f, const CriticalSet& cr, const LambdaSampleConfig& cfg) {
  if (cr.empty())
    throw Error(ErrorCode::kLambdaSearchExhausted, "orbit_engine", "map has no critical points");
  std::mt19937_64 rng(cfg.seed);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::vector<OrbitSegment> out;
  const int random_attempts =
      cfg.random_attempts >= 0 ? std::min(cfg.random_attempts, cfg.attempt_budget) : std::min(200, cfg.attempt_budget / 10);
  int attempts = 0;
  auto accept = [&](const OrbitSegment& seg) {
    const auto t = entry_times(f, seg, cr, cfg.margin);
    if (t.tau_minus && t.tau_plus) out.push_back(seg);
  };
  for (; attempts < random_attempts && static_cast<int>(out.size()) < cfg.count; ++attempts) {
    const TorusPoint p(unit(rng), unit(rng));
    accept(full_orbit(f, p, cfg.window, cfg.window, RandomBranch{rng()}));
  }
  for (; attempts < cfg.attempt_budget && static_cast<int>(out.size()) < cfg.count; ++attempts) {
    if (auto seg = try_connection(f, cr, cfg, rng)) accept(*seg);
  }
  if (static_cast<int>(out.size()) < cfg.count)
    throw Error(ErrorCode::kLambdaSearchExhausted, "orbit_engine",
                "found " + std::to_string(out.size()) + " of " + std::to_string(cfg.count) + " segments in " +
                    std::to_string(attempts) + " attempts");
  return out;
}

}  // namespace endocert
