#include <endocert/parallel.hpp>
#include <endocert/splitting.hpp>

#include <cmath>
#include <limits>

namespace endocert {

std::string to_string(EProvenance p) { return p == EProvenance::kKernelFormula ? "kernel-formula" : "singular-limit"; }
std::string to_string(FProvenance p) {
  return p == FProvenance::kImageFormula ? "image-formula" : "push-forward-limit";
}

namespace {

bool has_critical(const SplittingConfig& cfg) { return cfg.critical != nullptr && !cfg.critical->empty(); }

// Keeps a running product finite; the overall scale is irrelevant for directions.
void renormalize(Mat2& m) {
  const double s = m.max_abs_entry();
  if (s > 1e100 || (s < 1e-100 && s > 0.0)) m = m * (1.0 / s);
}

}  // namespace

std::optional<int> forward_entry(const TorusMap& f, const OrbitSegment& seg, int j, const CriticalSet& cr,
                                 double margin) {
  if (cr.empty()) return std::nullopt;
  for (int i = j; i <= seg.last(); ++i)
    if (is_critical(f, cr, seg.at(i), margin)) return i;
  return std::nullopt;
}

std::optional<int> backward_exit(const TorusMap& f, const OrbitSegment& seg, int j, const CriticalSet& cr,
                                 double margin) {
  if (cr.empty() || j <= seg.first()) return std::nullopt;
  bool next = is_critical(f, cr, seg.at(j), margin);
  for (int i = j - 1; i >= seg.first(); --i) {
    const bool here = is_critical(f, cr, seg.at(i), margin);
    if (here && !next) return i;
    next = here;
  }
  return std::nullopt;
}

EEstimate kernel_formula_E(const TorusMap& f, const OrbitSegment& seg, int j, int tau_plus, double rank_tolerance) {
  if (tau_plus < j || !seg.contains(tau_plus) || !seg.contains(j))
    throw Error(ErrorCode::kPreconditionUnmet, "splitting", "tau+ outside the window");
  const auto d = derivative_along(f, seg.slice(j, tau_plus));
  if (kernel_dimension(d, rank_tolerance) == 2)
    throw Error(ErrorCode::kDegenerateKernel, "splitting",
                "Df^" + std::to_string(d.steps) + " vanishes at x_" + std::to_string(j));
  EEstimate out;
  out.direction = canonical_line(d.matrix.svd().v2);
  out.provenance = EProvenance::kKernelFormula;
  out.horizon = d.steps;
  return out;
}

EEstimate singular_limit_E(const TorusMap& f, const TorusPoint& p, int horizon, double convergence) {
  EEstimate out;
  Mat2 prod = Mat2::identity();
  TorusPoint x = p;
  Vec2 prev{};
  bool have = false;
  for (int n = 1; n <= horizon; ++n) {
    prod = f.jacobian(x.lift()) * prod;
    renormalize(prod);
    x = evaluate(f, x);
    if (prod.max_abs_entry() == 0.0) break;  // everything collapsed; keep the last line
    const Vec2 v = canonical_line(prod.svd().v2);
    out.last_change = have ? line_angle(prev, v) : kPi / 2;
    prev = v;
    have = true;
    out.horizon = n;
  }
  out.direction = have ? prev : Vec2{0, 1};
  out.converged = have && out.last_change < convergence;
  return out;
}

FEstimate image_formula_F(const TorusMap& f, const OrbitSegment& seg, int j, int tau_minus, double rank_tolerance) {
  if (tau_minus >= j || !seg.contains(tau_minus) || !seg.contains(j))
    throw Error(ErrorCode::kPreconditionUnmet, "splitting", "tau- outside the window");
  const auto d = derivative_along(f, seg.slice(tau_minus, j - 1));
  if (kernel_dimension(d, rank_tolerance) == 2)
    throw Error(ErrorCode::kRankZeroImage, "splitting",
                "Df^" + std::to_string(d.steps) + " vanishes at x_" + std::to_string(tau_minus));
  FEstimate out;
  out.direction = canonical_line(d.matrix.svd().u1);
  out.provenance = FProvenance::kImageFormula;
  out.horizon = d.steps;
  out.branch = seg.branch();
  return out;
}

FEstimate push_forward_F(const TorusMap& f, const OrbitSegment& seg, int j, int horizon, double convergence) {
  const int m = std::min(horizon, j - seg.first());
  if (m < 1)
    throw Error(ErrorCode::kPreconditionUnmet, "splitting",
                "no backward points before x_" + std::to_string(j) + " for the push-forward");
  FEstimate out;
  out.branch = seg.branch();
  Mat2 prod = Mat2::identity();
  Vec2 prev{};
  bool have = false;
  for (int n = 1; n <= m; ++n) {
    prod = prod * f.jacobian(seg.at(j - n).lift());
    renormalize(prod);
    if (prod.max_abs_entry() == 0.0) break;
    const Vec2 u = canonical_line(prod.svd().u1);
    out.last_change = have ? line_angle(prev, u) : kPi / 2;
    prev = u;
    have = true;
    out.horizon = n;
  }
  if (!have)
    throw Error(ErrorCode::kRankZeroImage, "splitting", "push-forward product vanishes at x_" + std::to_string(j));
  out.direction = prev;
  out.converged = out.last_change < convergence;
  return out;
}

EEstimate compute_E(const TorusMap& f, const OrbitSegment& seg, int j, const SplittingConfig& cfg) {
  if (has_critical(cfg))
    if (auto t = forward_entry(f, seg, j, *cfg.critical, cfg.margin))
      return kernel_formula_E(f, seg, j, *t, cfg.rank_tolerance);
  return singular_limit_E(f, seg.at(j), cfg.horizon_e, cfg.convergence);
}

FEstimate compute_F(const TorusMap& f, const OrbitSegment& seg, int j, const SplittingConfig& cfg) {
  if (has_critical(cfg))
    if (auto t = backward_exit(f, seg, j, *cfg.critical, cfg.margin))
      return image_formula_F(f, seg, j, *t, cfg.rank_tolerance);
  return push_forward_F(f, seg, j, cfg.horizon_f, cfg.convergence);
}

SplittingSample compute_splitting(const TorusMap& f, const OrbitSegment& seg, int j, const SplittingConfig& cfg) {
  const auto e = compute_E(f, seg, j, cfg);
  const auto fl = compute_F(f, seg, j, cfg);
  SplittingSample s;
  s.base = seg.at(j);
  s.index = j;
  s.e = e.direction;
  s.f = fl.direction;
  s.angle = line_angle(s.e, s.f);
  s.e_provenance = e.provenance;
  s.f_provenance = fl.provenance;
  s.branch = fl.branch;
  return s;
}

std::vector<SplittingSample> splitting_along(const TorusMap& f, const OrbitSegment& seg, int from, int to,
                                             const SplittingConfig& cfg) {
  std::vector<SplittingSample> out;
  for (int j = from; j <= to; ++j) out.push_back(compute_splitting(f, seg, j, cfg));
  return out;
}

std::vector<SplittingSample> grid_splitting(const TorusMap& f, int resolution, const SplittingConfig& cfg,
                                            int threads) {
  const std::size_t n = static_cast<std::size_t>(resolution) * static_cast<std::size_t>(resolution);
  std::vector<SplittingSample> out(n);
  parallel_for(n, static_cast<unsigned>(threads), [&](std::size_t idx) {
    const TorusPoint p(double(idx % resolution) / resolution, double(idx / resolution) / resolution);
    const auto seg = full_orbit(f, p, cfg.horizon_f, 0, DeterministicBranch{});
    out[idx] = compute_splitting(f, seg, 0, cfg);
  });
  return out;
}

InvarianceReport check_invariance(const TorusMap& f, const std::vector<SplittingSample>& samples, double tolerance) {
  InvarianceReport r;
  for (std::size_t i = 0; i + 1 < samples.size(); ++i) {
    const Mat2 d = f.jacobian(samples[i].base.lift());
    const double scale = std::max(1.0, d.operator_norm());
    const Vec2 ei = d * samples[i].e;
    if (norm(ei) <= 1e-9 * scale) {
      ++r.zero_images;
    } else {
      const double a = line_angle(ei, samples[i + 1].e);
      if (a > r.worst_e) {
        r.worst_e = a;
        r.worst_e_index = samples[i].index;
      }
    }
    const Vec2 fi = d * samples[i].f;
    const double b = norm(fi) <= 1e-9 * scale ? kPi / 2 : line_angle(fi, samples[i + 1].f);
    if (b > r.worst_f) {
      r.worst_f = b;
      r.worst_f_index = samples[i].index;
    }
    ++r.checked;
  }
  r.passed = r.worst_e <= tolerance && r.worst_f <= tolerance;
  return r;
}

DominationCertificate check_domination(const TorusMap& f, const std::vector<SplittingSample>& samples, int ell,
                                       double alpha, std::string grid) {
  DominationCertificate c;
  c.ell = ell;
  c.alpha = alpha;
  c.grid = std::move(grid);
  c.sample_count = samples.size();
  c.min_angle = samples.empty() ? 0.0 : kPi / 2;
  for (const auto& s : samples) {
    const Mat2 p = derivative_power(f, s.base, ell).matrix;  // common scale cancels in the ratio
    const double ne = norm(p * s.e), nf = norm(p * s.f);
    const double ratio = nf > 0.0 ? ne / nf : std::numeric_limits<double>::infinity();
    if (ratio >= c.worst_ratio) {
      c.worst_ratio = ratio;
      c.worst_point = s.base;
    }
    c.min_angle = std::min(c.min_angle, s.angle);
  }
  c.valid = !samples.empty() && c.worst_ratio <= 0.5 && c.min_angle >= alpha;
  return c;
}

CrosscheckReport uniqueness_crosscheck(const TorusMap& f, const OrbitSegment& seg, int j, const SplittingConfig& cfg) {
  CrosscheckReport r;
  const int n = cfg.horizon_e;
  std::optional<int> tp, tm;
  if (has_critical(cfg)) {
    tp = forward_entry(f, seg, j, *cfg.critical, cfg.margin);
    tm = backward_exit(f, seg, j, *cfg.critical, cfg.margin);
  }
  const auto limit_e = singular_limit_E(f, seg.at(j), n, cfg.convergence);
  if (tp) {
    const auto k = kernel_formula_E(f, seg, j, *tp, cfg.rank_tolerance);
    r.e_first = EProvenance::kKernelFormula;
    r.e_discrepancy = line_angle(k.direction, limit_e.direction);
    r.e_horizons[0] = k.horizon;
    r.e_horizons[1] = n;
  } else {
    const auto longer = singular_limit_E(f, seg.at(j), 2 * n, cfg.convergence);
    r.e_discrepancy = line_angle(limit_e.direction, longer.direction);
    r.e_horizons[0] = n;
    r.e_horizons[1] = 2 * n;
  }
  const int m = std::min(cfg.horizon_f, j - seg.first());
  if (m >= 1) {
    const auto limit_f = push_forward_F(f, seg, j, m, cfg.convergence);
    if (tm) {
      const auto im = image_formula_F(f, seg, j, *tm, cfg.rank_tolerance);
      r.f_first = FProvenance::kImageFormula;
      r.f_discrepancy = line_angle(im.direction, limit_f.direction);
      r.f_horizons[0] = im.horizon;
    } else {
      const int half = std::max(1, m / 2);
      r.f_discrepancy = line_angle(push_forward_F(f, seg, j, half, cfg.convergence).direction, limit_f.direction);
      r.f_horizons[0] = half;
    }
    r.f_horizons[1] = limit_f.horizon;
  }
  return r;
}

AngleProfile angle_profile(const std::vector<SplittingSample>& samples, int bins) {
  if (samples.empty()) throw Error(ErrorCode::kPreconditionUnmet, "splitting", "angle profile of an empty sample set");
  AngleProfile p;
  p.histogram.assign(static_cast<std::size_t>(std::max(1, bins)), 0);
  p.min = kPi / 2;
  double sum = 0.0;
  for (const auto& s : samples) {
    p.min = std::min(p.min, s.angle);
    p.max = std::max(p.max, s.angle);
    sum += s.angle;
    int b = static_cast<int>(s.angle / (kPi / 2) * static_cast<double>(p.histogram.size()));
    b = std::clamp(b, 0, static_cast<int>(p.histogram.size()) - 1);
    ++p.histogram[static_cast<std::size_t>(b)];
  }
  p.count = samples.size();
  p.mean = sum / static_cast<double>(samples.size());
  p.degenerate = p.min < 1e-8;
  return p;
}

LyapunovEstimate lyapunov_along_F(const TorusMap& f, const OrbitSegment& seg, int k, const SplittingConfig& cfg) {
  const auto f0 = compute_F(f, seg, 0, cfg);
  LyapunovEstimate out;
  out.k = k;
  out.provenance = f0.provenance;
  Vec2 u = f0.direction;
  TorusPoint x = seg.at(0);
  double sum = 0.0;
  for (int i = 0; i < k; ++i) {
    const Vec2 v = f.jacobian(x.lift()) * u;
    const double nv = norm(v);
    if (nv == 0.0) {
      out.value = -std::numeric_limits<double>::infinity();
      return out;
    }
    sum += std::log(nv);
    u = v / nv;
    x = evaluate(f, x);
  }
  out.value = k > 0 ? sum / k : 0.0;
  return out;
}

}  // namespace endocert
