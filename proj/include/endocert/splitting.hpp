#pragma once

// E/F line fields along orbit windows. On windows that meet the critical set
// E is a kernel line and F an image line of a finite derivative product;
// elsewhere both come from singular directions of long products.

#include <endocert/orbit.hpp>
#include <endocert/surface_map.hpp>

#include <optional>
#include <string>
#include <vector>

namespace endocert {

enum class EProvenance { kKernelFormula, kSingularLimit };
enum class FProvenance { kImageFormula, kPushForwardLimit };

std::string to_string(EProvenance p);
std::string to_string(FProvenance p);

struct SplittingConfig {
  int horizon_e = 40;             // N
  int horizon_f = 40;             // M
  double rank_tolerance = kDefaultRankTolerance;
  double convergence = 1e-10;     // angle change between successive horizons
  double margin = 1e-6;           // critical membership
  const CriticalSet* critical = nullptr;  // null or empty: no formula routes
};

struct EEstimate {
  Vec2 direction;  // unit, canonical representative
  EProvenance provenance = EProvenance::kSingularLimit;
  int horizon = 0;            // product length used
  bool converged = true;      // singular-limit route only
  double last_change = 0.0;   // angle between the last two horizons
};

struct FEstimate {
  Vec2 direction;
  FProvenance provenance = FProvenance::kPushForwardLimit;
  int horizon = 0;
  bool converged = true;
  double last_change = 0.0;
  std::vector<int> branch;    // backward choices the estimate depends on
};

struct SplittingSample {
  TorusPoint base;
  int index = 0;  // position in its window
  Vec2 e;
  Vec2 f;
  double angle = 0.0;  // between the lines, in [0, pi/2]
  EProvenance e_provenance = EProvenance::kSingularLimit;
  FProvenance f_provenance = FProvenance::kPushForwardLimit;
  std::vector<int> branch;
};

/// First i >= j with x_i critical within the margin (window only).
std::optional<int> forward_entry(const TorusMap& f, const OrbitSegment& seg, int j, const CriticalSet& cr,
                                 double margin);
/// Last i < j with x_i critical and x_{i+1} not.
std::optional<int> backward_exit(const TorusMap& f, const OrbitSegment& seg, int j, const CriticalSet& cr,
                                 double margin);

/// Kernel line of Df^{t+1} at x_j, t = tau+ - j. Throws DegenerateKernel.
EEstimate kernel_formula_E(const TorusMap& f, const OrbitSegment& seg, int j, int tau_plus,
                           double rank_tolerance = kDefaultRankTolerance);
/// Most contracted direction of Df^n at p, n = 1..horizon.
EEstimate singular_limit_E(const TorusMap& f, const TorusPoint& p, int horizon, double convergence = 1e-10);

/// Image line of the product from x_{tau-} to x_j. Throws RankZeroImage.
FEstimate image_formula_F(const TorusMap& f, const OrbitSegment& seg, int j, int tau_minus,
                          double rank_tolerance = kDefaultRankTolerance);
/// Dominant image direction of the product from x_{j-m} to x_j, m = 1..horizon
/// (shortened to what the window holds; then converged reflects that length).
FEstimate push_forward_F(const TorusMap& f, const OrbitSegment& seg, int j, int horizon,
                         double convergence = 1e-10);

EEstimate compute_E(const TorusMap& f, const OrbitSegment& seg, int j, const SplittingConfig& cfg);
FEstimate compute_F(const TorusMap& f, const OrbitSegment& seg, int j, const SplittingConfig& cfg);
SplittingSample compute_splitting(const TorusMap& f, const OrbitSegment& seg, int j, const SplittingConfig& cfg);

/// Samples at indices from..to of one window.
std::vector<SplittingSample> splitting_along(const TorusMap& f, const OrbitSegment& seg, int from, int to,
                                             const SplittingConfig& cfg);

/// One sample per grid point: x_0 at the cell corner, deterministic backward
/// branch of length M, E from the forward orbit.
std::vector<SplittingSample> grid_splitting(const TorusMap& f, int resolution, const SplittingConfig& cfg,
                                            int threads = 1);

struct InvarianceReport {
  double worst_e = 0.0;  // max angle(Df E(x_i), E(x_{i+1})) over non-zero images
  double worst_f = 0.0;
  int worst_e_index = 0;
  int worst_f_index = 0;
  int zero_images = 0;   // Df E(x_i) numerically zero, accepted as containment
  int checked = 0;
  bool passed = false;
};

/// Samples must be consecutive points of one orbit.
InvarianceReport check_invariance(const TorusMap& f, const std::vector<SplittingSample>& samples,
                                  double tolerance = 1e-8);

struct DominationCertificate {
  int ell = 1;
  double worst_ratio = 0.0;   // max ||Df^l|E|| / ||Df^l|F||; also the best constant achievable
  double min_angle = 0.0;
  double alpha = 0.0;
  std::size_t sample_count = 0;
  TorusPoint worst_point;
  std::string grid;           // description of the sample set
  bool valid = false;         // worst_ratio <= 1/2 and min_angle >= alpha
};

DominationCertificate check_domination(const TorusMap& f, const std::vector<SplittingSample>& samples, int ell,
                                       double alpha, std::string grid = {});

struct CrosscheckReport {
  double e_discrepancy = 0.0;
  double f_discrepancy = 0.0;
  EProvenance e_first = EProvenance::kSingularLimit;  // route compared against the singular limit
  FProvenance f_first = FProvenance::kPushForwardLimit;
  int e_horizons[2] = {0, 0};
  int f_horizons[2] = {0, 0};
};

/// Formula route vs limit route where the window meets the critical set.
/// Elsewhere the limit route at horizon N (M) vs 2N (M/2 vs M, window bound).
CrosscheckReport uniqueness_crosscheck(const TorusMap& f, const OrbitSegment& seg, int j,
                                       const SplittingConfig& cfg);

struct AngleProfile {
  double min = 0.0;
  double mean = 0.0;
  double max = 0.0;
  std::vector<int> histogram;  // equal bins over [0, pi/2]
  std::size_t count = 0;
  bool degenerate = false;     // min below 1e-8
};

AngleProfile angle_profile(const std::vector<SplittingSample>& samples, int bins = 18);

struct LyapunovEstimate {
  int k = 0;
  double value = 0.0;
  FProvenance provenance = FProvenance::kPushForwardLimit;
};

/// (1/k) sum_{i<k} log ||Df(x_i)|F(x_i)||, F(x_0) from the window and carried
/// forward by Df.
LyapunovEstimate lyapunov_along_F(const TorusMap& f, const OrbitSegment& seg, int k, const SplittingConfig& cfg);

}  // namespace endocert
