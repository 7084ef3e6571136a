#pragma once

// Finite orbit windows x_{-m} .. x_n with explicit backward branch choices,
// preimage solving, and first-entry / last-exit times into the critical set.

#include <endocert/error.hpp>
#include <endocert/surface_map.hpp>

#include <cstdint>
#include <optional>
#include <span>
#include <variant>
#include <vector>

namespace endocert {

inline constexpr double kPreimageDedup = 1e-7;
inline constexpr double kPreimageTolerance = 1e-11;

struct PreimageSolution {
  TorusPoint point;
  double residual = 0.0;
  bool near_critical = false;  // Jacobian ill-conditioned at the root
};

struct PreimageSet {
  TorusPoint target;
  std::vector<PreimageSolution> solutions;  // lexicographic (x, then y)
  std::int64_t expected_degree = 0;         // |det A|
  bool near_critical_value() const;
};

/// Window x_first .. x_last with f(x_i) = x_{i+1}.
class OrbitSegment {
 public:
  OrbitSegment() = default;
  OrbitSegment(std::vector<TorusPoint> points, int first_index, std::vector<int> branch);

  int first() const { return first_; }
  int last() const { return first_ + static_cast<int>(points_.size()) - 1; }
  bool contains(int i) const { return i >= first() && i <= last(); }
  const TorusPoint& at(int i) const;
  std::span<const TorusPoint> points() const { return points_; }
  /// Points x_from .. x_to (inclusive) in forward order.
  std::span<const TorusPoint> slice(int from, int to) const;
  /// branch()[k] = preimage index chosen for x_{-(k+1)}.
  const std::vector<int>& branch() const { return branch_; }

  /// Largest residual |f(x_i) - x_{i+1}| over the window (torus metric).
  double max_residual(const TorusMap& f) const;

 private:
  std::vector<TorusPoint> points_;
  int first_ = 0;
  std::vector<int> branch_;
};

class NoPreimageFoundError : public Error {
 public:
  NoPreimageFoundError(const std::string& detail, OrbitSegment partial)
      : Error(ErrorCode::kNoPreimageFound, "orbit_engine", detail), partial_(std::move(partial)) {}
  const OrbitSegment& partial() const { return partial_; }

 private:
  OrbitSegment partial_;
};

struct DeterministicBranch {};
struct RandomBranch {
  std::uint64_t seed = 0;
};
struct IndexListBranch {
  std::vector<int> indices;  // one per backward step; indices into lexicographic order
};
using BranchSelector = std::variant<DeterministicBranch, RandomBranch, IndexListBranch>;

struct EntryTimes {
  std::optional<int> tau_minus;
  std::optional<int> tau_plus;
  double margin = 0.0;
};

/// Window [0..n] by direct evaluation.
OrbitSegment forward_orbit(const TorusMap& f, const TorusPoint& p, int n);

/// Newton on the lift from a seed grid; seed_resolution >= 4 |det A| (raised if lower).
PreimageSet preimages(const TorusMap& f, const TorusPoint& q, int seed_resolution = 0);

/// Window [-m..0] ending at p.
OrbitSegment backward_branch(const TorusMap& f, const TorusPoint& p, int m, const BranchSelector& selector,
                             int seed_resolution = 0);

/// Window [-m..n]: backward branch then forward evaluation from p.
OrbitSegment full_orbit(const TorusMap& f, const TorusPoint& p, int m, int n, const BranchSelector& selector,
                        int seed_resolution = 0);

/// Extends an existing window: `back` more preimage steps before first() and
/// `ahead` more forward points after last().
OrbitSegment extend_orbit(const TorusMap& f, const OrbitSegment& seg, int back, int ahead,
                          const BranchSelector& selector, int seed_resolution = 0);

bool is_critical(const TorusMap& f, const CriticalSet& cr, const TorusPoint& p, double margin);

/// tau+ = min{i >= 0 : x_i critical}, tau- = max{i < 0 : x_i critical, x_{i+1} not}.
EntryTimes entry_times(const TorusMap& f, const OrbitSegment& seg, const CriticalSet& cr, double margin);

struct LambdaSampleConfig {
  int count = 10;
  int window = 20;  // segments span [-window, window]
  double margin = 1e-6;
  std::uint64_t seed = 1;
  int attempt_budget = 20000;
  int random_attempts = -1;      // plain random orbits tried first; -1 = min(200, budget / 10)
  int connection_samples = 256;  // points on each transverse segment
};

/// Segments with at least one critical hit before and one after index 0.
/// Draws random orbits first, then critical-to-critical connections: a
/// segment of length `margin` across the critical curve is pushed forward up
/// to 2*window steps and bisected where an image crosses {det Df = 0}.
std::vector<OrbitSegment> sample_lambda_set(const TorusMap& f, const CriticalSet& cr,
                                            const LambdaSampleConfig& config);

/// Critical point reached by continuing along {det Df = 0} from `start`
/// (Newton projection of start + s * tangent).
std::optional<TorusPoint> project_to_critical(const TorusMap& f, const LiftPoint& start, double det_tolerance);

}  // namespace endocert
