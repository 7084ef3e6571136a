#pragma once

// Cone fields on the torus and grid certificates for invariance, transversality
// to the kernel and expansion; dichotomy search between a domination
// certificate and a rotation witness.

#include <endocert/orbit.hpp>
#include <endocert/splitting.hpp>
#include <endocert/surface_map.hpp>

#include <functional>
#include <optional>
#include <string>
#include <vector>

namespace endocert {

/// Line field sampled on a res x res grid, interpolated bilinearly in the
/// doubled angle so that v and -v are the same line.
class SampledLineField {
 public:
  SampledLineField(int resolution, std::vector<Vec2> lines);
  Vec2 operator()(const TorusPoint& p) const;
  int resolution() const { return res_; }
  const std::vector<Vec2>& lines() const { return lines_; }

 private:
  int res_;
  std::vector<Vec2> lines_;    // canonical unit lines, row-major in y
  std::vector<Vec2> doubled_;  // (cos 2t, sin 2t)
};

using CoreFunction = std::function<Vec2(const TorusPoint&)>;

class ConeField {
 public:
  ConeField(CoreFunction core, double eta, std::string description);

  Vec2 core(const TorusPoint& p) const { return normalized(core_(p)); }
  double eta() const { return eta_; }
  const std::string& description() const { return description_; }
  bool contains(const TorusPoint& p, const Vec2& v) const { return line_angle(core(p), v) <= eta_; }
  /// Boundary rays core rotated by -eta and +eta.
  std::pair<Vec2, Vec2> boundary(const TorusPoint& p) const;

 private:
  CoreFunction core_;
  double eta_;
  std::string description_;
};

/// eta must lie in (0, pi/4).
ConeField build_cone(const Vec2& constant_core, double eta);
ConeField build_cone(CoreFunction core, double eta, std::string description);
/// Cone about the F (or E) field of `samples` laid out as grid_splitting returns them.
ConeField build_cone_from_samples(const std::vector<SplittingSample>& samples, int resolution, bool use_f, double eta);

/// min over unit u with angle(u, core) <= eta of |M u|, in closed form.
double min_norm_on_cone(const Mat2& m, const Vec2& core, double eta);

struct GridCheck {
  double raw = 0.0;     // min (or max) of the pointwise quantity over the grid
  double slack = 0.0;   // Lipschitz estimate * h / sqrt(2)
  double margin = 0.0;  // raw - slack
  TorusPoint worst;
  int resolution = 0;
  bool passed = false;
};

/// Angular clearance of Df^k(C(x)) inside C(f^k(x)): eta minus the larger
/// boundary-image angle to the core; negative when the image leaves the cone
/// or folds over to the other nappe.
double invariance_clearance(const TorusMap& f, const ConeField& c, int k, const TorusPoint& x);
GridCheck check_cone_invariance(const TorusMap& f, const ConeField& c, int k, int resolution, int threads = 1);

/// min_{n <= n_max} min_{u in C(x)} |Df^n u|.
double transversality_value(const TorusMap& f, const ConeField& c, int n_max, const TorusPoint& x);
GridCheck check_transversality(const TorusMap& f, const ConeField& c, int n_max, int resolution, int threads = 1);

/// min_{u in C(x)} |Df^l u|^{1/l}; passed means margin > 1.
double expansion_value(const TorusMap& f, const ConeField& c, int ell, const TorusPoint& x);
GridCheck check_expansion(const TorusMap& f, const ConeField& c, int ell, int resolution, int threads = 1);

struct CertifyConfig {
  int grid = 64;              // cone checks
  int core_grid = 32;         // splitting samples for the cone core
  double eta = 0.2;           // upper bound; lowered to half the min E/F angle
  int k_max = 5;
  int ell_max = 5;
  int n_max = 3;
  int threads = 1;
  SplittingConfig splitting;
};

struct ConeCertificate {
  std::string map_hash;
  int grid = 0;
  int core_grid = 0;
  double eta = 0.0;
  std::string cone;
  int k = 0;
  GridCheck invariance;
  int n_max = 0;
  GridCheck transversality;
  int ell = 0;
  GridCheck expansion;        // margin is lambda
  DominationCertificate domination;  // l = 1 on the core samples
  AngleProfile angles;
  bool domination_only = false;
  bool valid = false;
  std::string failed_clause;  // empty when valid
  std::vector<std::string> notes;
};

ConeCertificate certify_partial_hyperbolicity(const TorusMap& f, const CertifyConfig& cfg);

struct RotationWitness {
  OrbitSegment segment;
  int start = 0;              // index of x_j where F is taken
  int steps = 0;              // rotations applied at x_j .. x_{j+steps-1}
  std::vector<double> angles; // signed, each |angle| < alpha
  double final_gap = 0.0;     // angle left between the rotated image and E
  double franks_cost = 0.0;   // max_i |(R_i - I) Df(x_i)|
};

enum class DichotomyArm { kCertificate, kWitness, kInconclusive };
std::string to_string(DichotomyArm a);

struct DichotomyConfig {
  double epsilon = 0.05;
  double alpha = 0.0;         // per-step rotation bound; 0 means alpha = epsilon
  int grid = 16;
  int ell_max = 8;
  int max_steps = 20;
  int pool_size = 64;         // random segments drawn when no pool is given
  int window = 40;
  std::uint64_t seed = 1;
  int threads = 1;
  SplittingConfig splitting;
};

struct DichotomyOutcome {
  DichotomyArm arm = DichotomyArm::kInconclusive;
  std::optional<DominationCertificate> certificate;
  std::optional<RotationWitness> witness;
  double best_ratio = 0.0;    // smallest worst-ratio seen over l
  double min_angle = 0.0;     // smallest E/F angle seen in the pool
  double alpha = 0.0;
  double implied_bound = 0.0; // max |Df| * 2 sin(alpha/2), to compare with epsilon
  std::string explanation;
};

DichotomyOutcome dichotomy_search(const TorusMap& f, const DichotomyConfig& cfg,
                                  const std::vector<OrbitSegment>& pool = {});

/// Greedy rotation sequence carrying F(x_j) onto E(x_{j+n}) with per-step angle
/// below alpha; nullopt when max_steps is not enough.
std::optional<RotationWitness> find_rotation_witness(const TorusMap& f, const OrbitSegment& seg, int j,
                                                     double alpha, int max_steps, const SplittingConfig& cfg);

}  // namespace endocert
