#pragma once

// Action on first homology read off the lift, the spectral obstruction verdict,
// and growth measurements in the universal cover: lift diameters of a disk and
// the area of an arc's epsilon-neighborhood against its length.

#include <endocert/surface_map.hpp>

#include <array>
#include <complex>
#include <cstdint>
#include <string>
#include <vector>

namespace endocert {

struct HomologyAction {
  LinearPart matrix;
  std::array<std::complex<double>, 2> eigenvalues;
  double spectral_radius = 0.0;
  double max_residual = 0.0;  // worst distance of a measured displacement from its rounding
  int samples = 0;
};

/// f(x + e_i) - f(x) at random x, rounded and checked against the declared
/// linear part. Throws NonIntegerDisplacement.
HomologyAction homology_matrix(const TorusMap& f, int samples = 100, std::uint64_t seed = 1);

enum class HomologyVerdict { kConsistent, kObstructed };
std::string to_string(HomologyVerdict v);

struct HomologyReport {
  HomologyAction action;
  bool certificate_valid = false;
  HomologyVerdict verdict = HomologyVerdict::kConsistent;
  std::vector<std::string> notes;
};

/// A transitive partially hyperbolic endomorphism needs an eigenvalue of
/// modulus > 1. So: radius <= 1 with a valid certificate is OBSTRUCTED, radius
/// <= 1 alone adds the not-robustly-transitive note.
HomologyReport spectral_obstruction(const HomologyAction& h, bool certificate_valid);

struct AreaConfig {
  std::size_t samples = 1000000;
  std::uint64_t seed = 1;
  int threads = 1;
};

struct AreaReport {
  double epsilon = 0.0;
  double length = 0.0;
  double area = 0.0;
  double std_error = 0.0;       // one sigma of the Monte-Carlo estimate
  double ratio = 0.0;           // area / length
  double ratio_over_epsilon = 0.0;
  double sampled_region = 0.0;  // area of the hash cells sampled from
  std::size_t samples = 0;
  std::size_t hits = 0;
};

/// Monte-Carlo area of the epsilon-neighborhood of a lift polyline. Samples are
/// drawn only from hash cells within reach of the arc. Throws SelfIntersection.
AreaReport area_length_consistency(const std::vector<LiftPoint>& arc, double epsilon, const AreaConfig& cfg = {});

bool polyline_self_intersects(const std::vector<LiftPoint>& arc);

struct DiameterGrowth {
  std::vector<double> diameters;  // n = 0..N
  double exponent = 0.0;          // fitted slope of log diameter over n in [N/2, N]
  bool sub_exponential = false;   // exponent < 0.05 over the measured range
};

/// Lift diameter of f~^n applied to a disk, sampled on its boundary and a few
/// interior rings.
DiameterGrowth diameter_growth(const TorusMap& f, const LiftPoint& center, double radius, int n,
                               int boundary_points = 256);

struct GrowthConfig {
  LiftPoint arc_start{0.1, 0.1};
  Vec2 arc_direction{1.0, 0.0};
  double arc_length = 0.05;
  int arc_iterates = 8;
  double epsilon = 0.05;
  double disk_radius = 0.1;
  int disk_iterates = 60;
  AreaConfig area;
};

struct GrowthReport {
  double arc_exponent = 0.0;
  std::vector<double> arc_lengths;
  DiameterGrowth diameter;
  double area_constant = 0.0;  // min over iterates of area / length
  double epsilon = 0.0;
  std::vector<AreaReport> area_series;
};

GrowthReport growth_report(const TorusMap& f, const GrowthConfig& cfg = {});

}  // namespace endocert
