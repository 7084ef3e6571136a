#pragma once

// Torus endomorphisms of the form  f~(p) = A p + phi(p)  with A an integer
// matrix and phi a finite Z^2-periodic trigonometric sum, together with the
// derivative machinery (chain-rule powers, numerical rank, critical set).

#include <endocert/linalg.hpp>

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace endocert {

using LiftPoint = Vec2;
using TangentVector = Vec2;

/// Point of R^2/Z^2, always stored reduced into [0,1)^2.
class TorusPoint {
 public:
  TorusPoint() = default;
  TorusPoint(double x, double y) : x_(reduce(x)), y_(reduce(y)) {}
  explicit TorusPoint(const LiftPoint& p) : TorusPoint(p.x, p.y) {}

  double x() const { return x_; }
  double y() const { return y_; }
  LiftPoint lift() const { return {x_, y_}; }
  bool operator==(const TorusPoint&) const = default;

  static double reduce(double t) {
    double r = t - std::floor(t);
    return r >= 1.0 ? 0.0 : r;
  }

 private:
  double x_ = 0.0;
  double y_ = 0.0;
};

/// Shortest representative of a displacement modulo Z^2, in [-1/2, 1/2)^2.
inline Vec2 wrap_displacement(const Vec2& d) {
  auto w = [](double t) { return t - std::floor(t + 0.5); };
  return {w(d.x), w(d.y)};
}

inline double torus_distance(const TorusPoint& a, const TorusPoint& b) {
  return norm(wrap_displacement(a.lift() - b.lift()));
}

struct LinearPart {
  std::int64_t a11 = 1, a12 = 0, a21 = 0, a22 = 1;

  Mat2 matrix() const {
    return {static_cast<double>(a11), static_cast<double>(a12), static_cast<double>(a21),
            static_cast<double>(a22)};
  }
  std::int64_t det() const { return a11 * a22 - a12 * a21; }
  bool operator==(const LinearPart&) const = default;
};

enum class TrigMode { kSin, kCos };

/// amplitude * mode(2 pi (p x + q y) + phase), added to lift coordinate `coord`.
struct TrigTerm {
  int coord = 1;
  double amplitude = 0.0;
  int p = 0;
  int q = 0;
  double phase = 0.0;
  TrigMode mode = TrigMode::kSin;
};

struct TrigPerturbation {
  std::vector<TrigTerm> terms;

  Vec2 value(const LiftPoint& pt) const;
  Mat2 jacobian(const LiftPoint& pt) const;
  /// Sum of |amplitude| per coordinate; bounds |phi| in sup norm.
  Vec2 amplitude_bound() const;
};

/// Anything that can be evaluated as a lift with a well-defined linear part.
/// Surgered maps implement this by wrapping a base map.
class TorusMap {
 public:
  virtual ~TorusMap() = default;

  virtual LiftPoint lift(const LiftPoint& p) const = 0;
  virtual Mat2 jacobian(const LiftPoint& p) const = 0;
  virtual const LinearPart& linear_part() const = 0;
  virtual const std::string& name() const = 0;
  /// Text that identifies the map exactly; hashed into reports.
  virtual std::string canonical_text() const = 0;

  /// Gradient of det Df; central differences unless overridden.
  virtual Vec2 det_gradient(const LiftPoint& p) const;
};

class SurfaceEndomorphism final : public TorusMap {
 public:
  SurfaceEndomorphism(LinearPart linear, TrigPerturbation perturbation, std::string name);

  LiftPoint lift(const LiftPoint& p) const override;
  Mat2 jacobian(const LiftPoint& p) const override;
  const LinearPart& linear_part() const override { return linear_; }
  const std::string& name() const override { return name_; }
  std::string canonical_text() const override;

  const TrigPerturbation& perturbation() const { return perturbation_; }

 private:
  LinearPart linear_;
  TrigPerturbation perturbation_;
  std::string name_;
};

/// Chain-rule product with an exponent kept aside: value() = matrix * e^log_scale.
struct DerivativeMatrix {
  Mat2 matrix;
  TorusPoint base;
  double log_scale = 0.0;
  /// Sum of log ||Df|| over the factors; the natural size of the product
  /// absent cancellation, used as the reference scale for rank decisions.
  double log_factor_norms = 0.0;
  int steps = 0;

  Mat2 value() const { return matrix * std::exp(log_scale); }
  bool rescaled() const { return log_scale != 0.0; }
};

struct CriticalSample {
  TorusPoint point;
  double det = 0.0;
  std::optional<TangentVector> kernel;  // present iff kernel dimension is 1
  int kernel_dimension = 0;
};

struct CriticalSet {
  std::vector<CriticalSample> samples;
  double det_tolerance = 0.0;
  int resolution = 0;

  bool empty() const { return samples.empty(); }
};

TorusPoint evaluate(const TorusMap& f, const TorusPoint& p);
LiftPoint evaluate_lift(const TorusMap& f, const LiftPoint& p);
DerivativeMatrix derivative(const TorusMap& f, const TorusPoint& p);

/// Df^n at p along the forward orbit. Rescales once entries leave [1e-150, 1e150].
DerivativeMatrix derivative_power(const TorusMap& f, const TorusPoint& p, int n);

/// Product Df_{orbit[k-1]} ... Df_{orbit[0]} along an explicit orbit piece, for
/// products along backward branches.
DerivativeMatrix derivative_along(const TorusMap& f, std::span<const TorusPoint> orbit);

inline constexpr double kDefaultRankTolerance = 1e-9;

/// Numerical kernel dimension of a product, singular values compared against
/// tolerance * (product of factor norms).
int kernel_dimension(const DerivativeMatrix& d, double tolerance = kDefaultRankTolerance);
int kernel_dimension(const TorusMap& f, const TorusPoint& p, int n,
                     double tolerance = kDefaultRankTolerance);

double det_derivative(const TorusMap& f, const TorusPoint& p);

/// Grid scan of det Df with edge bisection. resolution >= 16.
CriticalSet locate_critical_set(const TorusMap& f, int resolution, double det_tolerance);

/// Distance from p to the critical set: Newton projection onto {det Df = 0}
/// where it converges nearby, otherwise distance to the nearest stored sample.
/// +infinity when the set is empty.
double critical_distance(const TorusMap& f, const CriticalSet& cr, const TorusPoint& p);

}  // namespace endocert
