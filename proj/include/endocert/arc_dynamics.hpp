#pragma once

// u-arcs as lifted polylines, their growth under iteration, stable curves
// integrated along E, nu-boxes, and periodic points near recurrent orbits.

#include <endocert/cone_certifier.hpp>
#include <endocert/surface_map.hpp>

#include <functional>
#include <memory>
#include <optional>
#include <vector>

namespace endocert {

/// Polyline in the lift; length is measured there, so wrapping never shortens it.
struct UArc {
  std::vector<LiftPoint> nodes;
  double max_segment = 0.01;
  std::shared_ptr<const ConeField> cone;  // may be null

  double length() const;
};

/// Straight lift segment of the given length from start. With a cone, every
/// chord must lie in the cone at its left endpoint (ConeViolation otherwise).
UArc make_u_arc(const LiftPoint& start, const Vec2& direction, double length, std::shared_ptr<const ConeField> cone,
                int nodes = 64);

struct ArcIterationConfig {
  double chord_tolerance = 1e-6;  // midpoint deviation that forces a split
  std::size_t node_budget = 2000000;
  int max_depth = 30;
};

struct ArcGrowthSeries {
  std::vector<double> lengths;     // n = 0..N (fewer on blowup)
  std::vector<int> doubling_times; // first n with length >= 2^k length_0, k = 1, 2, ...
  double exponent = 0.0;           // least-squares slope of log length against n
  bool blowup = false;             // node budget hit; series is partial
  std::size_t cone_violations = 0; // chords leaving the cone (when the arc carries one)
};

struct ArcIteration {
  ArcGrowthSeries series;
  UArc final_arc;
};

/// Image of an arc under the lift with midpoint refinement.
UArc apply_to_arc(const TorusMap& f, const UArc& arc, const ArcIterationConfig& cfg, bool* blowup = nullptr);
ArcIteration iterate_arc(const TorusMap& f, const UArc& arc, int n, const ArcIterationConfig& cfg = {});

double fit_slope(const std::vector<double>& log_values);

struct DeltaArcResult {
  bool bounded = true;          // up to n_max
  std::optional<int> escaped_at;
  std::vector<double> lengths;
};

DeltaArcResult detect_delta_u_arc(const TorusMap& f, const UArc& arc, double delta, int n_max,
                                  const ArcIterationConfig& cfg = {});

using LineField = std::function<Vec2(const TorusPoint&)>;
/// E by the singular limit at horizon N.
LineField singular_E_field(const TorusMap& f, int horizon = 40);

struct StableCurve {
  std::vector<LiftPoint> points;  // from xi(-halfwidth) to xi(+halfwidth)
  std::size_t base_index = 0;     // points[base_index] is the base x
  double halfwidth = 0.0;
  double step = 0.0;
  bool orientation_flip = false;  // integration stopped where E turned too fast
  double length() const;
};

/// RK4 on the unit E field, oriented by continuity, in both directions from x.
StableCurve integrate_stable_curve(const LineField& e_field, const LiftPoint& x, double halfwidth, double step);

struct ContractionReport {
  std::vector<double> lengths;  // of f^j(xi), j = 0..n
  std::vector<double> ratios;   // lengths[j+1] / lengths[j]
  double rate = 0.0;            // exp of fitted slope of log length
};

ContractionReport stable_contraction_check(const TorusMap& f, const StableCurve& xi, int n);

struct NuBox {
  std::vector<LiftPoint> center;
  StableCurve bottom;
  StableCurve top;
  std::vector<StableCurve> fibers;  // through sampled center points, bottom and top included
  double nu = 0.0;
  bool single_crossings = false;    // every fiber meets the center polyline exactly once
};

NuBox build_nu_box(const UArc& center, double nu, const LineField& e_field, int fibers = 9, double step = 0.0);

/// Number of proper crossings between two lift polylines.
int polyline_crossings(const std::vector<LiftPoint>& a, const std::vector<LiftPoint>& b);

struct PeriodicConfig {
  int min_period = 1;            // N
  int orbit_budget = 100000;
  int e_horizon = 40;
  double stall_rate = 0.999;     // |Df^j|E|^{1/j} at or above this is no contraction
  int max_newton = 50;
};

struct PeriodicPoint {
  TorusPoint point;
  int period = 0;
  double residual = 0.0;               // |f^l(p) - p| on the torus
  std::vector<double> shadowing;       // d(f^j p, f^j x), j < l
  double max_shadowing = 0.0;
  double contraction_rate = 0.0;       // measured along E at x
};

/// Near-return of x (distance < nu / 2 after l >= N steps), then Newton on the
/// cyclic shooting system f(p_i) = p_{i+1}, p_l = p_0. Throws NoReturnFound or
/// ContractionStall.
PeriodicPoint find_periodic_point(const TorusMap& f, const TorusPoint& x, double nu, const PeriodicConfig& cfg = {});

/// All solutions of f^l(p) = p from a seed grid with Newton; deduplicated.
std::vector<TorusPoint> periodic_points(const TorusMap& f, int l, int seed_resolution = 32);

}  // namespace endocert
