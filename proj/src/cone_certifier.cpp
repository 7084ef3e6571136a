#include <endocert/cone_certifier.hpp>
#include <endocert/map_io.hpp>
#include <endocert/parallel.hpp>

#include <cmath>
#include <limits>
#include <random>

namespace endocert {

SampledLineField::SampledLineField(int resolution, std::vector<Vec2> lines) : res_(resolution), lines_(std::move(lines)) {
  if (res_ < 1 || lines_.size() != static_cast<std::size_t>(res_) * static_cast<std::size_t>(res_))
    throw Error(ErrorCode::kConfig, "cone_certifier", "line field size does not match its grid");
  doubled_.reserve(lines_.size());
  for (auto& l : lines_) {
    l = canonical_line(l);
    const double t = std::atan2(l.y, l.x);
    doubled_.push_back({std::cos(2 * t), std::sin(2 * t)});
  }
}

Vec2 SampledLineField::operator()(const TorusPoint& p) const {
  const double gx = p.x() * res_, gy = p.y() * res_;
  const int i0 = static_cast<int>(std::floor(gx)) % res_, j0 = static_cast<int>(std::floor(gy)) % res_;
  const int i1 = (i0 + 1) % res_, j1 = (j0 + 1) % res_;
  const double tx = gx - std::floor(gx), ty = gy - std::floor(gy);
  auto at = [&](int i, int j) { return doubled_[static_cast<std::size_t>(j) * res_ + i]; };
  const Vec2 d = at(i0, j0) * ((1 - tx) * (1 - ty)) + at(i1, j0) * (tx * (1 - ty)) + at(i0, j1) * ((1 - tx) * ty) +
                 at(i1, j1) * (tx * ty);
  if (norm(d) < 1e-12) return lines_[static_cast<std::size_t>(j0) * res_ + i0];  // opposite lines cancel
  return unit_at(0.5 * std::atan2(d.y, d.x));
}

ConeField::ConeField(CoreFunction core, double eta, std::string description)
    : core_(std::move(core)), eta_(eta), description_(std::move(description)) {
  if (!(eta_ > 0.0 && eta_ < kPi / 4))
    throw Error(ErrorCode::kConfig, "cone_certifier", "cone half-angle must lie in (0, pi/4)");
}

std::pair<Vec2, Vec2> ConeField::boundary(const TorusPoint& p) const {
  const Vec2 c = core(p);
  const Mat2 minus = Mat2::rotation(-eta_), plus = Mat2::rotation(eta_);
  return {minus * c, plus * c};
}

ConeField build_cone(const Vec2& constant_core, double eta) {
  const Vec2 c = normalized(constant_core);
  char buf[96];
  std::snprintf(buf, sizeof buf, "constant core (%.6f, %.6f)", c.x, c.y);
  return ConeField([c](const TorusPoint&) { return c; }, eta, buf);
}

ConeField build_cone(CoreFunction core, double eta, std::string description) {
  return ConeField(std::move(core), eta, std::move(description));
}

ConeField build_cone_from_samples(const std::vector<SplittingSample>& samples, int resolution, bool use_f,
                                  double eta) {
  std::vector<Vec2> lines;
  lines.reserve(samples.size());
  for (const auto& s : samples) lines.push_back(use_f ? s.f : s.e);
  auto field = std::make_shared<SampledLineField>(resolution, std::move(lines));
  return ConeField([field](const TorusPoint& p) { return (*field)(p); }, eta,
                   std::string(use_f ? "F" : "E") + " field sampled on " + std::to_string(resolution) + "x" +
                       std::to_string(resolution));
}

double min_norm_on_cone(const Mat2& m, const Vec2& core, double eta) {
  // |M u(t)|^2 = p + q cos 2t + r sin 2t for u(t) = cos t c + sin t c_perp.
  const Vec2 c = normalized(core), cp = perp(c);
  const Vec2 mc = m * c, mp = m * cp;
  const double a = dot(mc, mc), d = dot(mp, mp), b = dot(mc, mp);
  auto value = [&](double t) {
    return 0.5 * (a + d) + 0.5 * (a - d) * std::cos(2 * t) + b * std::sin(2 * t);
  };
  double best = std::min(value(-eta), value(eta));
  // Interior minimum at 2t = atan2(2b, a - d) + pi (mod 2 pi).
  double t = 0.5 * (std::atan2(2 * b, a - d) + kPi);
  for (double cand : {t - kPi, t, t + kPi})
    if (cand >= -eta && cand <= eta) best = std::min(best, value(cand));
  return std::sqrt(std::max(0.0, best));
}

namespace {

struct GridValues {
  std::vector<double> v;
  int res;
};

// Worst value, its point, and a Lipschitz slack from neighbour differences.
GridCheck reduce_grid(const GridValues& g, bool minimum) {
  GridCheck out;
  out.resolution = g.res;
  const double h = 1.0 / g.res;
  std::size_t worst = 0;
  double lip = 0.0;
  bool finite = true;
  for (int j = 0; j < g.res; ++j)
    for (int i = 0; i < g.res; ++i) {
      const std::size_t idx = static_cast<std::size_t>(j) * g.res + i;
      const double v = g.v[idx];
      if (!std::isfinite(v)) finite = false;
      if (minimum ? v < g.v[worst] : v > g.v[worst]) worst = idx;
      const double r = g.v[static_cast<std::size_t>(j) * g.res + (i + 1) % g.res];
      const double u = g.v[static_cast<std::size_t>((j + 1) % g.res) * g.res + i];
      lip = std::max({lip, std::abs(r - v) / h, std::abs(u - v) / h});
    }
  out.raw = g.v[worst];
  out.slack = finite ? lip * h / std::sqrt(2.0) : std::numeric_limits<double>::infinity();
  out.margin = minimum ? out.raw - out.slack : out.raw + out.slack;
  out.worst = TorusPoint(double(worst % g.res) / g.res, double(worst / g.res) / g.res);
  return out;
}

template <class Fn>
GridValues sample_grid(int resolution, int threads, Fn&& fn) {
  if (resolution < 2) throw Error(ErrorCode::kConfig, "cone_certifier", "grid resolution must be at least 2");
  GridValues g{std::vector<double>(static_cast<std::size_t>(resolution) * resolution), resolution};
  parallel_for(g.v.size(), static_cast<unsigned>(std::max(1, threads)), [&](std::size_t idx) {
    const TorusPoint p(double(idx % resolution) / resolution, double(idx / resolution) / resolution);
    g.v[idx] = fn(p);
  });
  return g;
}

}  // namespace

double invariance_clearance(const TorusMap& f, const ConeField& c, int k, const TorusPoint& x) {
  if (k < 1) throw Error(ErrorCode::kConfig, "cone_certifier", "invariance iterate k must be >= 1");
  const Mat2 p = derivative_power(f, x, k).matrix;
  TorusPoint y = x;
  for (int i = 0; i < k; ++i) y = evaluate(f, y);
  const Vec2 cy = c.core(y);
  const auto [rm, rp] = c.boundary(x);
  const Vec2 wc = p * c.core(x), wm = p * rm, wp = p * rp;
  // Orientation of the image nappe, from the core image when it survives.
  Vec2 ref = norm(wc) > 0 ? wc : (norm(wp) > 0 ? wp : wm);
  if (norm(ref) == 0.0) return c.eta();  // cone collapses to the zero vector
  const Vec2 target = dot(ref, cy) >= 0 ? cy : -cy;
  double worst = 0.0;
  for (const Vec2& w : {wm, wp}) {
    if (norm(w) == 0.0) continue;
    worst = std::max(worst, std::atan2(std::abs(cross(w, target)), dot(w, target)));  // in [0, pi]
  }
  return c.eta() - worst;
}

GridCheck check_cone_invariance(const TorusMap& f, const ConeField& c, int k, int resolution, int threads) {
  auto out = reduce_grid(
      sample_grid(resolution, threads, [&](const TorusPoint& p) { return invariance_clearance(f, c, k, p); }), true);
  out.passed = out.margin > 0.0;
  return out;
}

double transversality_value(const TorusMap& f, const ConeField& c, int n_max, const TorusPoint& x) {
  if (n_max < 1) throw Error(ErrorCode::kConfig, "cone_certifier", "n_max must be >= 1");
  const Vec2 core = c.core(x);
  double best = std::numeric_limits<double>::infinity();
  for (int n = 1; n <= n_max; ++n) {
    const auto d = derivative_power(f, x, n);
    best = std::min(best, min_norm_on_cone(d.matrix, core, c.eta()) * std::exp(d.log_scale));
  }
  return best;
}

GridCheck check_transversality(const TorusMap& f, const ConeField& c, int n_max, int resolution, int threads) {
  auto out = reduce_grid(
      sample_grid(resolution, threads, [&](const TorusPoint& p) { return transversality_value(f, c, n_max, p); }),
      true);
  out.passed = out.margin > 0.0;
  return out;
}

double expansion_value(const TorusMap& f, const ConeField& c, int ell, const TorusPoint& x) {
  if (ell < 1) throw Error(ErrorCode::kConfig, "cone_certifier", "expansion iterate must be >= 1");
  const auto d = derivative_power(f, x, ell);
  const double m = min_norm_on_cone(d.matrix, c.core(x), c.eta());
  if (m == 0.0) return 0.0;
  return std::exp((std::log(m) + d.log_scale) / ell);
}

GridCheck check_expansion(const TorusMap& f, const ConeField& c, int ell, int resolution, int threads) {
  auto out = reduce_grid(
      sample_grid(resolution, threads, [&](const TorusPoint& p) { return expansion_value(f, c, ell, p); }), true);
  out.passed = out.margin > 1.0;
  return out;
}

ConeCertificate certify_partial_hyperbolicity(const TorusMap& f, const CertifyConfig& cfg) {
  ConeCertificate cert;
  cert.map_hash = map_hash(f);
  cert.grid = cfg.grid;
  cert.core_grid = cfg.core_grid;
  cert.n_max = cfg.n_max;

  const auto samples = grid_splitting(f, cfg.core_grid, cfg.splitting, cfg.threads);
  cert.angles = angle_profile(samples);
  cert.eta = std::min({cfg.eta, 0.5 * cert.angles.min, kPi / 4 * 0.999});
  cert.domination = check_domination(f, samples, 1, cert.eta,
                                     std::to_string(cfg.core_grid) + "x" + std::to_string(cfg.core_grid));
  if (!(cert.eta > 1e-9)) {
    cert.failed_clause = "angle";
    cert.notes.push_back("E and F collapse somewhere on the core grid; no cone fits between them");
    return cert;
  }
  const auto cone = build_cone_from_samples(samples, cfg.core_grid, true, cert.eta);
  cert.cone = cone.description();

  for (int k = 1; k <= cfg.k_max; ++k) {
    cert.k = k;
    cert.invariance = check_cone_invariance(f, cone, k, cfg.grid, cfg.threads);
    if (cert.invariance.passed) break;
  }
  cert.transversality = check_transversality(f, cone, cfg.n_max, cfg.grid, cfg.threads);
  for (int ell = 1; ell <= cfg.ell_max; ++ell) {
    cert.ell = ell;
    cert.expansion = check_expansion(f, cone, ell, cfg.grid, cfg.threads);
    if (cert.expansion.passed) break;
  }

  if (!cert.invariance.passed) {
    cert.failed_clause = "invariance";
  } else if (!cert.transversality.passed) {
    cert.failed_clause = "transversality";
  } else if (!cert.expansion.passed) {
    cert.failed_clause = "expansion";
    cert.domination_only = true;
    cert.notes.push_back("cone is invariant and transversal to the kernel but lambda <= 1: domination only");
  }
  cert.valid = cert.failed_clause.empty();

  // Expanding maps: the E side expands too.
  const auto e_cone = build_cone_from_samples(samples, cfg.core_grid, false, cert.eta);
  const auto e_exp = check_expansion(f, e_cone, 1, cfg.grid, cfg.threads);
  if (e_exp.passed) {
    char buf[128];
    std::snprintf(buf, sizeof buf, "expanding map: cone about E also expands, lambda_E = %.6f", e_exp.margin);
    cert.notes.push_back(buf);
  }
  return cert;
}

std::string to_string(DichotomyArm a) {
  switch (a) {
    case DichotomyArm::kCertificate:
      return "certificate";
    case DichotomyArm::kWitness:
      return "witness";
    case DichotomyArm::kInconclusive:
      return "inconclusive";
  }
  return "?";
}

std::optional<RotationWitness> find_rotation_witness(const TorusMap& f, const OrbitSegment& seg, int j, double alpha,
                                                     int max_steps, const SplittingConfig& cfg) {
  if (!(alpha > 0.0)) throw Error(ErrorCode::kConfig, "cone_certifier", "rotation bound must be positive");
  RotationWitness w;
  w.segment = seg;
  w.start = j;
  Vec2 v = compute_F(f, seg, j, cfg).direction;
  const double step_bound = alpha * (1 - 1e-9);
  const int steps = std::min(max_steps, seg.last() - j);
  for (int i = 0; i < steps; ++i) {
    const Mat2 d = f.jacobian(seg.at(j + i).lift());
    Vec2 image = d * v;
    if (norm(image) == 0.0) return std::nullopt;  // F fell into the kernel: no rotation needed, but no witness either
    image = normalized(image);
    const Vec2 e = compute_E(f, seg, j + i + 1, cfg).direction;
    const double gap = signed_line_angle(image, e);
    const double delta = std::abs(gap) < step_bound ? gap : std::copysign(step_bound, gap);
    w.angles.push_back(delta);
    w.franks_cost = std::max(w.franks_cost, 2 * std::sin(std::abs(delta) / 2) * d.operator_norm());
    v = Mat2::rotation(delta) * image;
    w.final_gap = line_angle(v, e);
    if (std::abs(gap) < step_bound) {
      w.steps = i + 1;
      return w;
    }
  }
  return std::nullopt;
}

DichotomyOutcome dichotomy_search(const TorusMap& f, const DichotomyConfig& cfg, const std::vector<OrbitSegment>& pool) {
  if (!(cfg.epsilon > 0.0)) throw Error(ErrorCode::kConfig, "cone_certifier", "epsilon must be positive");
  DichotomyOutcome out;
  out.alpha = cfg.alpha > 0.0 ? cfg.alpha : cfg.epsilon;

  const auto samples = grid_splitting(f, cfg.grid, cfg.splitting, cfg.threads);
  double max_df = 0.0;
  for (const auto& s : samples) max_df = std::max(max_df, f.jacobian(s.base.lift()).operator_norm());
  out.implied_bound = max_df * 2 * std::sin(out.alpha / 2);
  out.best_ratio = std::numeric_limits<double>::infinity();
  for (int ell = 1; ell <= cfg.ell_max; ++ell) {
    auto c = check_domination(f, samples, ell, out.alpha, std::to_string(cfg.grid) + "x" + std::to_string(cfg.grid));
    out.best_ratio = std::min(out.best_ratio, c.worst_ratio);
    if (c.valid) {
      out.arm = DichotomyArm::kCertificate;
      out.certificate = c;
      out.min_angle = c.min_angle;
      out.explanation = "domination holds at l = " + std::to_string(ell);
      return out;
    }
  }

  std::vector<OrbitSegment> segs = pool;
  if (segs.empty()) {
    std::mt19937_64 rng(cfg.seed);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    for (int i = 0; i < cfg.pool_size; ++i) {
      const TorusPoint p(u(rng), u(rng));
      segs.push_back(full_orbit(f, p, cfg.window, cfg.window, RandomBranch{rng()}));
    }
  }
  out.min_angle = kPi / 2;
  for (const auto& s : segs) {
    // The window start has the shortest backward history; begin halfway back.
    const int j = std::max(s.first() + 1, s.first() / 2);
    const double a = line_angle(compute_E(f, s, j, cfg.splitting).direction, compute_F(f, s, j, cfg.splitting).direction);
    out.min_angle = std::min(out.min_angle, a);
    auto w = find_rotation_witness(f, s, j, out.alpha, cfg.max_steps, cfg.splitting);
    if (w && (!out.witness || w->steps < out.witness->steps)) out.witness = std::move(w);
  }
  if (out.witness) {
    out.arm = DichotomyArm::kWitness;
    out.explanation = "rotations below alpha carry F onto E in " + std::to_string(out.witness->steps) + " step(s)";
    return out;
  }
  out.arm = DichotomyArm::kInconclusive;
  char buf[256];
  std::snprintf(buf, sizeof buf,
                "no domination up to l = %d (best ratio %.4g) and no rotation witness within %d steps at alpha = %.4g",
                cfg.ell_max, out.best_ratio, cfg.max_steps, out.alpha);
  out.explanation = buf;
  return out;
}

}  // namespace endocert
