#include <endocert/arc_dynamics.hpp>
#include <endocert/homology_and_growth.hpp>
#include <endocert/error.hpp>
#include <endocert/parallel.hpp>

#include <algorithm>
#include <cmath>
#include <random>
#include <optional>
#include <unordered_map>

namespace endocert {

HomologyAction homology_matrix(const TorusMap& f, int samples, std::uint64_t seed) {
  if (samples < 1) throw Error(ErrorCode::kConfig, "homology_and_growth", "need at least one sample");
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(-10.0, 10.0);
  HomologyAction h;
  h.samples = samples;
  std::optional<std::array<double, 4>> first;
  for (int s = 0; s < samples; ++s) {
    const LiftPoint x{u(rng), u(rng)};
    const LiftPoint fx = f.lift(x);
    const Vec2 c1 = f.lift(x + Vec2{1, 0}) - fx;
    const Vec2 c2 = f.lift(x + Vec2{0, 1}) - fx;
    const std::array<double, 4> m{c1.x, c2.x, c1.y, c2.y};
    std::array<double, 4> r{};
    for (int i = 0; i < 4; ++i) {
      r[i] = std::round(m[i]);
      h.max_residual = std::max(h.max_residual, std::abs(m[i] - r[i]));
    }
    if (h.max_residual > 1e-9)
      throw Error(ErrorCode::kNonIntegerDisplacement, "homology_and_growth",
                  "lattice displacement off the integers by " + std::to_string(h.max_residual) + " at (" +
                      std::to_string(x.x) + ", " + std::to_string(x.y) + ")");
    if (first && *first != r)
      throw Error(ErrorCode::kNonIntegerDisplacement, "homology_and_growth", "lattice displacement varies with the base point");
    first = r;
  }
  const auto& r = *first;
  h.matrix = {static_cast<std::int64_t>(r[0]), static_cast<std::int64_t>(r[1]), static_cast<std::int64_t>(r[2]),
              static_cast<std::int64_t>(r[3])};
  if (!(h.matrix == f.linear_part()))
    throw Error(ErrorCode::kNonIntegerDisplacement, "homology_and_growth",
                "measured displacement matrix differs from the declared linear part");
  const double tr = static_cast<double>(h.matrix.a11 + h.matrix.a22);
  const double det = static_cast<double>(h.matrix.det());
  const std::complex<double> root = std::sqrt(std::complex<double>(tr * tr - 4 * det, 0.0));
  h.eigenvalues = {(tr + root) / 2.0, (tr - root) / 2.0};
  h.spectral_radius = std::max(std::abs(h.eigenvalues[0]), std::abs(h.eigenvalues[1]));
  return h;
}

std::string to_string(HomologyVerdict v) { return v == HomologyVerdict::kObstructed ? "OBSTRUCTED" : "CONSISTENT"; }

HomologyReport spectral_obstruction(const HomologyAction& h, bool certificate_valid) {
  HomologyReport r;
  r.action = h;
  r.certificate_valid = certificate_valid;
  const bool small = h.spectral_radius <= 1.0 + 1e-12;
  if (small && certificate_valid) {
    r.verdict = HomologyVerdict::kObstructed;
    r.notes.push_back("map cannot be transitive: partially hyperbolic certificate with no homology eigenvalue of modulus > 1");
  }
  if (small)
    r.notes.push_back("spectral radius " + std::to_string(h.spectral_radius) +
                      " <= 1 (e.g. homotopic to the identity): not robustly transitive");
  return r;
}

namespace {

double point_segment_distance(const LiftPoint& p, const LiftPoint& a, const LiftPoint& b) {
  const Vec2 d = b - a;
  const double dd = dot(d, d);
  const double t = dd > 0 ? std::clamp(dot(p - a, d) / dd, 0.0, 1.0) : 0.0;
  return norm(p - (a + d * t));
}

std::int64_t cell_key(std::int64_t i, std::int64_t j) { return (i << 32) ^ (j & 0xffffffffLL); }

bool segments_intersect(const LiftPoint& p1, const LiftPoint& p2, const LiftPoint& q1, const LiftPoint& q2) {
  const Vec2 r = p2 - p1, s = q2 - q1;
  const double den = cross(r, s);
  const Vec2 qp = q1 - p1;
  if (std::abs(den) < 1e-300) {
    if (std::abs(cross(qp, r)) > 1e-15 * (norm(r) + norm(qp))) return false;  // parallel, apart
    const double rr = dot(r, r);
    if (rr == 0) return false;
    const double t0 = dot(qp, r) / rr, t1 = dot(q2 - p1, r) / rr;
    return std::max(t0, t1) >= 0 && std::min(t0, t1) <= 1;  // collinear overlap
  }
  const double t = cross(qp, s) / den, u = cross(qp, r) / den;
  return t >= 0 && t <= 1 && u >= 0 && u <= 1;
}

// Cells of size h covering the bounding box of [a, b] grown by pad.
template <class Fn>
void for_cells(const LiftPoint& a, const LiftPoint& b, double pad, double h, Fn&& fn) {
  const auto i0 = static_cast<std::int64_t>(std::floor((std::min(a.x, b.x) - pad) / h));
  const auto i1 = static_cast<std::int64_t>(std::floor((std::max(a.x, b.x) + pad) / h));
  const auto j0 = static_cast<std::int64_t>(std::floor((std::min(a.y, b.y) - pad) / h));
  const auto j1 = static_cast<std::int64_t>(std::floor((std::max(a.y, b.y) + pad) / h));
  for (auto i = i0; i <= i1; ++i)
    for (auto j = j0; j <= j1; ++j) fn(i, j);
}

}  // namespace

bool polyline_self_intersects(const std::vector<LiftPoint>& arc) {
  const std::size_t n = arc.size();
  if (n < 4) return false;
  double h = 0;
  for (std::size_t i = 0; i + 1 < n; ++i) h = std::max(h, norm(arc[i + 1] - arc[i]));
  if (h == 0) return true;  // repeated node
  std::unordered_map<std::int64_t, std::vector<std::uint32_t>> grid;
  for (std::size_t i = 0; i + 1 < n; ++i)
    for_cells(arc[i], arc[i + 1], 0.0, h, [&](auto ci, auto cj) { grid[cell_key(ci, cj)].push_back(std::uint32_t(i)); });
  for (const auto& [key, segs] : grid)
    for (std::size_t a = 0; a < segs.size(); ++a)
      for (std::size_t b = a + 1; b < segs.size(); ++b) {
        const auto i = std::min(segs[a], segs[b]), j = std::max(segs[a], segs[b]);
        if (j <= i + 1) continue;  // neighbors share a node
        if (segments_intersect(arc[i], arc[i + 1], arc[j], arc[j + 1])) return true;
      }
  return false;
}

AreaReport area_length_consistency(const std::vector<LiftPoint>& arc, double epsilon, const AreaConfig& cfg) {
  if (arc.size() < 2 || !(epsilon > 0) || cfg.samples == 0)
    throw Error(ErrorCode::kConfig, "homology_and_growth", "area needs a polyline, epsilon > 0 and samples > 0");
  if (polyline_self_intersects(arc))
    throw Error(ErrorCode::kSelfIntersection, "homology_and_growth", "arc is not simple in the lift");
  AreaReport r;
  r.epsilon = epsilon;
  for (std::size_t i = 0; i + 1 < arc.size(); ++i) r.length += norm(arc[i + 1] - arc[i]);

  // Refined arcs carry far more nodes than an epsilon-neighborhood can see, so
  // greedily merge runs of nodes into chords that stay within 1e-4 eps of every
  // skipped node. Then cut into pieces no longer than epsilon.
  const double tol = 1e-4 * epsilon;
  std::vector<LiftPoint> kept{arc.front()};
  for (std::size_t i = 0; i + 1 < arc.size();) {
    std::size_t j = i + 1;
    while (j + 1 < arc.size() && norm(arc[j + 1] - arc[i]) <= epsilon) {
      bool ok = true;
      for (std::size_t m = i + 1; m <= j && ok; ++m) ok = point_segment_distance(arc[m], arc[i], arc[j + 1]) <= tol;
      if (!ok) break;
      ++j;
    }
    kept.push_back(arc[j]);
    i = j;
  }
  std::vector<std::pair<LiftPoint, LiftPoint>> pieces;
  for (std::size_t i = 0; i + 1 < kept.size(); ++i) {
    const int k = std::max(1, static_cast<int>(std::ceil(norm(kept[i + 1] - kept[i]) / epsilon)));
    for (int s = 0; s < k; ++s)
      pieces.emplace_back(kept[i] + (kept[i + 1] - kept[i]) * (double(s) / k),
                          kept[i] + (kept[i + 1] - kept[i]) * (double(s + 1) / k));
  }
  const double h = epsilon;
  std::unordered_map<std::int64_t, std::vector<std::uint32_t>> grid;
  for (std::size_t p = 0; p < pieces.size(); ++p)
    for_cells(pieces[p].first, pieces[p].second, epsilon, h,
              [&](auto ci, auto cj) { grid[cell_key(ci, cj)].push_back(std::uint32_t(p)); });
  std::vector<std::int64_t> keys;
  keys.reserve(grid.size());
  for (const auto& kv : grid) keys.push_back(kv.first);
  std::sort(keys.begin(), keys.end());
  std::vector<const std::vector<std::uint32_t>*> lists;
  for (auto k : keys) lists.push_back(&grid.at(k));
  r.sampled_region = static_cast<double>(keys.size()) * h * h;

  // Fixed blocks with their own generators: the tally does not depend on threads.
  const std::size_t block = 1 << 16;
  const std::size_t blocks = (cfg.samples + block - 1) / block;
  std::vector<std::size_t> hits(blocks, 0);
  parallel_for(blocks, static_cast<unsigned>(cfg.threads), [&](std::size_t b) {
    std::mt19937_64 rng(cfg.seed * 0x9e3779b97f4a7c15ULL + b + 1);
    std::uniform_int_distribution<std::size_t> pick(0, keys.size() - 1);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    const std::size_t count = std::min(block, cfg.samples - b * block);
    std::size_t local = 0;
    for (std::size_t s = 0; s < count; ++s) {
      const std::size_t c = pick(rng);
      const std::int64_t ci = keys[c] >> 32;
      const auto cj = static_cast<std::int64_t>(static_cast<std::int32_t>(keys[c] & 0xffffffffLL));
      const LiftPoint p{(double(ci) + u(rng)) * h, (double(cj) + u(rng)) * h};
      for (auto idx : *lists[c])
        if (point_segment_distance(p, pieces[idx].first, pieces[idx].second) <= epsilon) {
          ++local;
          break;
        }
    }
    hits[b] = local;
  });
  for (auto x : hits) r.hits += x;
  r.samples = cfg.samples;
  const double p = double(r.hits) / double(r.samples);
  r.area = r.sampled_region * p;
  r.std_error = r.sampled_region * std::sqrt(p * (1 - p) / double(r.samples));
  r.ratio = r.length > 0 ? r.area / r.length : 0.0;
  r.ratio_over_epsilon = r.ratio / epsilon;
  return r;
}

namespace {

double point_set_diameter(const std::vector<LiftPoint>& pts) {
  double d2 = 0;
  for (std::size_t i = 0; i < pts.size(); ++i)
    for (std::size_t j = i + 1; j < pts.size(); ++j) {
      const Vec2 d = pts[i] - pts[j];
      d2 = std::max(d2, dot(d, d));
    }
  return std::sqrt(d2);
}

}  // namespace

DiameterGrowth diameter_growth(const TorusMap& f, const LiftPoint& center, double radius, int n, int boundary_points) {
  if (!(radius > 0) || n < 0 || boundary_points < 8)
    throw Error(ErrorCode::kConfig, "homology_and_growth", "diameter growth needs radius > 0, n >= 0, >= 8 points");
  std::vector<LiftPoint> pts{center};
  for (int ring = 1; ring <= 4; ++ring) {
    const int m = ring == 4 ? boundary_points : boundary_points / 2;
    for (int k = 0; k < m; ++k) pts.push_back(center + unit_at(kTwoPi * k / m) * (radius * ring / 4));
  }
  DiameterGrowth g;
  g.diameters.push_back(point_set_diameter(pts));
  for (int i = 1; i <= n; ++i) {
    for (auto& p : pts) p = f.lift(p);
    g.diameters.push_back(point_set_diameter(pts));
  }
  // Late half only: linear growth d ~ c n has log slope ~ 1/n, which the early
  // iterates would inflate.
  std::vector<double> logs;
  for (std::size_t i = g.diameters.size() / 2; i < g.diameters.size(); ++i) logs.push_back(std::log(g.diameters[i]));
  g.exponent = logs.size() >= 2 ? fit_slope(logs) : 0.0;
  g.sub_exponential = g.exponent < 0.05;
  return g;
}

GrowthReport growth_report(const TorusMap& f, const GrowthConfig& cfg) {
  GrowthReport r;
  r.epsilon = cfg.epsilon;
  UArc arc = make_u_arc(cfg.arc_start, cfg.arc_direction, cfg.arc_length, nullptr);
  r.arc_lengths.push_back(arc.length());
  r.area_series.push_back(area_length_consistency(arc.nodes, cfg.epsilon, cfg.area));
  for (int k = 1; k <= cfg.arc_iterates; ++k) {
    arc = apply_to_arc(f, arc, ArcIterationConfig{});
    r.arc_lengths.push_back(arc.length());
    try {
      r.area_series.push_back(area_length_consistency(arc.nodes, cfg.epsilon, cfg.area));
    } catch (const Error& e) {
      if (e.code() != ErrorCode::kSelfIntersection) throw;
      break;  // the lift arc folded onto itself; the series stops here
    }
  }
  std::vector<double> logs;
  for (double l : r.arc_lengths) logs.push_back(std::log(l));
  r.arc_exponent = fit_slope(logs);
  r.area_constant = 1e300;
  for (const auto& a : r.area_series) r.area_constant = std::min(r.area_constant, a.ratio);
  r.diameter = diameter_growth(f, cfg.arc_start, cfg.disk_radius, cfg.disk_iterates);
  return r;
}

}  // namespace endocert
