#pragma once

// Local C1 surgeries wrapped around a base map: linear replacement inside a
// ball blended out by a cubic cutoff, the two-ball construction that kills the
// derivative of an iterate, sink creation along a periodic orbit, and an orbit
// coverage probe.

#include <endocert/surface_map.hpp>

#include <cstdint>
#include <memory>
#include <string>
#include <vector>

namespace endocert {

/// beta(s) = 1 - smoothstep((s - r) / (R - r)), smoothstep(t) = 3t^2 - 2t^3.
/// beta = 1 on [0, r], 0 beyond R, and |beta'| <= 1.5 / (R - r).
struct BumpProfile {
  double inner = 0.0;
  double outer = 0.0;

  double value(double s) const;
  double derivative(double s) const;
  double derivative_bound() const { return 1.5 / (outer - inner); }
  /// max over s of beta s + max(beta, |beta - |beta'| s|): the factor by which
  /// a derivative change of size eps can grow once blended out.
  double overhead() const;
};

struct LocalSurgery {
  TorusPoint center;
  double inner_radius = 0.0;
  double outer_radius = 0.0;
  Mat2 target;
  double derivative_bound = 0.0;  // of the cutoff
  double overhead = 0.0;
  double cost = 0.0;              // |target - Df(center)|
  bool identity = false;          // L = Df on an affine base: g is f, evaluated as f
};

struct SurgeryRequest {
  TorusPoint center;
  Mat2 target;
  double inner_radius = 0.05;
  double outer_radius = 0.0;  // 0 means twice the inner radius
};

/// g = f outside every outer ball; inside B(c, r), g~(p) = f~(c) + L (p - c).
class PerturbedMap final : public TorusMap {
 public:
  PerturbedMap(std::shared_ptr<const TorusMap> base, std::vector<LocalSurgery> surgeries, std::string name);

  LiftPoint lift(const LiftPoint& p) const override;
  Mat2 jacobian(const LiftPoint& p) const override;
  const LinearPart& linear_part() const override { return base_->linear_part(); }
  const std::string& name() const override { return name_; }
  std::string canonical_text() const override;

  const TorusMap& base() const { return *base_; }
  std::shared_ptr<const TorusMap> base_ptr() const { return base_; }
  const std::vector<LocalSurgery>& surgeries() const { return surgeries_; }

  double measured_c1_distance = 0.0;
  double allowance = 0.0;        // eps * overhead + curvature term
  double max_overhead = 0.0;

 private:
  const LocalSurgery* active(const LiftPoint& p, Vec2* d) const;

  std::shared_ptr<const TorusMap> base_;
  std::vector<LocalSurgery> surgeries_;
  std::string name_;
};

struct C1SamplePlan {
  int grid = 64;                    // uniform grid over the torus
  std::vector<TorusPoint> focus;    // extra polar samples around these
  std::vector<double> focus_radius;
  int rings = 40;
  int per_ring = 64;
};

/// sup over samples of |g - f| on the torus plus |Dg - Df| in operator norm.
double c1_distance(const TorusMap& f, const TorusMap& g, const C1SamplePlan& plan = {});

/// Bound on |D^2 f~| from the trigonometric amplitudes; 0 for other maps.
double second_derivative_bound(const TorusMap& f);

/// Throws BallOverlap, BudgetExceeded (|L - Df(c)| >= epsilon, or measured
/// distance above the allowance).
PerturbedMap franks_surgery(std::shared_ptr<const TorusMap> f, const std::vector<SurgeryRequest>& requests,
                            double epsilon);

/// Orbit piece x_0 -> ... -> x_{m-1} with x_0 and x_{m-1} critical, plus the
/// single rotation that carries the image line of the composed rank-one
/// product onto the kernel of Df(x_{m-1}).
struct CollapseWitness {
  std::vector<TorusPoint> chain;
  int rotation_index = 0;          // rotation applied after Df at this chain index
  double rotation_angle = 0.0;
  double alignment_cost = 0.0;     // largest |L_i - Df(x_i)|
  std::vector<Mat2> targets;       // L_i
};

/// Follows f from start for m - 1 steps. Throws PreconditionUnmet when either
/// end is not a critical point.
CollapseWitness build_collapse_witness(const TorusMap& f, const TorusPoint& start, int m,
                                       double critical_tolerance = 1e-8);

struct KernelSurgeryResult {
  std::shared_ptr<const PerturbedMap> map;
  CollapseWitness witness;
  int m = 0;
  double derivative_norm = 0.0;  // |Dg^m| at the chain start
  std::vector<double> inner_radii;
};

/// Surgery at every chain point. Inner radii are chained so the affine image of
/// B(x_0, r/2) stays inside the next inner ball. Throws WitnessInvalid when
/// |Dg^m(x_0)| > 1e-10, BudgetExceeded when the alignment costs epsilon or more.
KernelSurgeryResult full_kernel_surgery(std::shared_ptr<const TorusMap> f, const CollapseWitness& w, double r,
                                        double epsilon);

/// Lift diameter of g^m applied to samples of B(center, radius).
double image_diameter(const TorusMap& g, const TorusPoint& center, double radius, int m, int rings = 20,
                      int per_ring = 64);

struct SinkResult {
  std::shared_ptr<const PerturbedMap> map;
  std::vector<TorusPoint> orbit;
  double omega = 0.0;           // max |eigenvalue| of Df^l(p)
  double step_scale = 1.0;      // each L_i = step_scale * Df(x_i)
  double spectral_radius = 0.0; // of Dh^l(p), computed from the pinned factors
};

/// Scales Df by (|omega|^{-1} - eps)^{1/l} at each orbit point so Dh^l(p) has
/// spectral radius (1 - eps|omega|) < 1 (no scaling when already contracting).
/// Throws GapTooLarge when 1 - |omega|^{-1} >= eps.
SinkResult sink_surgery(std::shared_ptr<const TorusMap> f, const TorusPoint& p, int l, double epsilon,
                        double r = 0.02);

struct TransitivityProbe {
  long orbit_length = 0;
  int grid = 0;
  double coverage = 0.0;                 // max over starts
  std::vector<double> start_coverage;
  std::size_t best_start = 0;
  std::vector<std::uint64_t> visits;     // per cell for the best start, row-major in y
  std::string note;
};

inline constexpr const char* kProbeNote =
    "Transitivity probe is a heuristic falsifier only: low coverage refutes density at probe scale; "
    "high coverage proves nothing.";

TransitivityProbe transitivity_probe(const TorusMap& g, const std::vector<TorusPoint>& starts, long orbit_length,
                                     int grid = 64, int threads = 1);

}  // namespace endocert
