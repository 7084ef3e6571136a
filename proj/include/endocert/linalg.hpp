#pragma once

// Fixed-size 2x2 linear algebra used throughout the toolkit. Everything here is
// closed form; no iterative solvers.

#include <algorithm>
#include <array>
#include <cmath>
#include <complex>
#include <numbers>

namespace endocert {

inline constexpr double kPi = std::numbers::pi;
inline constexpr double kTwoPi = 2.0 * std::numbers::pi;

struct Vec2 {
  double x = 0.0;
  double y = 0.0;

  constexpr Vec2 operator+(const Vec2& o) const { return {x + o.x, y + o.y}; }
  constexpr Vec2 operator-(const Vec2& o) const { return {x - o.x, y - o.y}; }
  constexpr Vec2 operator-() const { return {-x, -y}; }
  constexpr Vec2 operator*(double s) const { return {x * s, y * s}; }
  constexpr Vec2 operator/(double s) const { return {x / s, y / s}; }
  constexpr Vec2& operator+=(const Vec2& o) {
    x += o.x;
    y += o.y;
    return *this;
  }
  constexpr Vec2& operator-=(const Vec2& o) {
    x -= o.x;
    y -= o.y;
    return *this;
  }
  constexpr bool operator==(const Vec2&) const = default;
};

inline constexpr Vec2 operator*(double s, const Vec2& v) { return v * s; }
inline constexpr double dot(const Vec2& a, const Vec2& b) { return a.x * b.x + a.y * b.y; }
inline constexpr double cross(const Vec2& a, const Vec2& b) { return a.x * b.y - a.y * b.x; }
inline double norm(const Vec2& v) { return std::hypot(v.x, v.y); }
inline Vec2 perp(const Vec2& v) { return {-v.y, v.x}; }

inline Vec2 normalized(const Vec2& v) {
  const double n = norm(v);
  return n > 0.0 ? v / n : Vec2{0.0, 0.0};
}

/// Unit vector at polar angle `theta`.
inline Vec2 unit_at(double theta) { return {std::cos(theta), std::sin(theta)}; }

/// Lines are unoriented: pick the representative with x > 0, or (0, 1).
inline Vec2 canonical_line(const Vec2& v) {
  Vec2 u = normalized(v);
  if (u.x < 0.0 || (u.x == 0.0 && u.y < 0.0)) u = -u;
  return u;
}

/// Angle in [0, pi/2] between the lines spanned by a and b.
inline double line_angle(const Vec2& a, const Vec2& b) {
  return std::atan2(std::abs(cross(a, b)), std::abs(dot(a, b)));
}

/// Signed angle in (-pi/2, pi/2] rotating line a onto line b.
inline double signed_line_angle(const Vec2& a, const Vec2& b) {
  double t = std::atan2(cross(a, b), dot(a, b));
  if (t > kPi / 2) t -= kPi;
  if (t <= -kPi / 2) t += kPi;
  return t;
}

/// Polar angle of a line, in (-pi/2, pi/2].
inline double line_direction_angle(const Vec2& v) {
  double t = std::atan2(v.y, v.x);
  if (t > kPi / 2) t -= kPi;
  if (t <= -kPi / 2) t += kPi;
  return t;
}

struct SingularValueDecomposition;

struct Mat2 {
  double a11 = 0.0, a12 = 0.0, a21 = 0.0, a22 = 0.0;

  static constexpr Mat2 identity() { return {1.0, 0.0, 0.0, 1.0}; }
  static constexpr Mat2 zero() { return {0.0, 0.0, 0.0, 0.0}; }
  static Mat2 rotation(double theta) {
    const double c = std::cos(theta), s = std::sin(theta);
    return {c, -s, s, c};
  }
  static constexpr Mat2 diag(double d1, double d2) { return {d1, 0.0, 0.0, d2}; }
  /// Outer product u v^T.
  static constexpr Mat2 outer(const Vec2& u, const Vec2& v) {
    return {u.x * v.x, u.x * v.y, u.y * v.x, u.y * v.y};
  }

  constexpr Vec2 operator*(const Vec2& v) const {
    return {a11 * v.x + a12 * v.y, a21 * v.x + a22 * v.y};
  }
  constexpr Mat2 operator*(const Mat2& o) const {
    return {a11 * o.a11 + a12 * o.a21, a11 * o.a12 + a12 * o.a22,
            a21 * o.a11 + a22 * o.a21, a21 * o.a12 + a22 * o.a22};
  }
  constexpr Mat2 operator+(const Mat2& o) const {
    return {a11 + o.a11, a12 + o.a12, a21 + o.a21, a22 + o.a22};
  }
  constexpr Mat2 operator-(const Mat2& o) const {
    return {a11 - o.a11, a12 - o.a12, a21 - o.a21, a22 - o.a22};
  }
  constexpr Mat2 operator*(double s) const { return {a11 * s, a12 * s, a21 * s, a22 * s}; }
  constexpr bool operator==(const Mat2&) const = default;

  constexpr double det() const { return a11 * a22 - a12 * a21; }
  constexpr double trace() const { return a11 + a22; }
  constexpr Mat2 transpose() const { return {a11, a21, a12, a22}; }
  constexpr Mat2 adjugate() const { return {a22, -a12, -a21, a11}; }
  Mat2 inverse() const { return adjugate() * (1.0 / det()); }
  double max_abs_entry() const {
    return std::max({std::abs(a11), std::abs(a12), std::abs(a21), std::abs(a22)});
  }
  constexpr Vec2 column(int j) const { return j == 0 ? Vec2{a11, a21} : Vec2{a12, a22}; }
  constexpr Vec2 row(int i) const { return i == 0 ? Vec2{a11, a12} : Vec2{a21, a22}; }

  SingularValueDecomposition svd() const;
  double operator_norm() const;
};

inline constexpr Mat2 operator*(double s, const Mat2& m) { return m * s; }

/// M = sigma1 u1 v1^T + sigma2 u2 v2^T with sigma1 >= sigma2 >= 0.
struct SingularValueDecomposition {
  double sigma1 = 0.0;
  double sigma2 = 0.0;
  Vec2 u1, u2;  // left singular vectors
  Vec2 v1, v2;  // right singular vectors
};

inline SingularValueDecomposition Mat2::svd() const {
  // Rotation-scaling-rotation form. Scaling first keeps the half-angle formulas
  // well conditioned for very large or very small products.
  const double scale = max_abs_entry();
  SingularValueDecomposition out;
  if (scale == 0.0 || !std::isfinite(scale)) {
    out.u1 = {1.0, 0.0};
    out.u2 = {0.0, 1.0};
    out.v1 = {1.0, 0.0};
    out.v2 = {0.0, 1.0};
    return out;
  }
  const Mat2 m = *this * (1.0 / scale);
  const double e = 0.5 * (m.a11 + m.a22);
  const double f = 0.5 * (m.a11 - m.a22);
  const double g = 0.5 * (m.a21 + m.a12);
  const double h = 0.5 * (m.a21 - m.a12);
  const double q = std::hypot(e, h);
  const double r = std::hypot(f, g);
  const double sx = q + r;
  const double sy = q - r;
  const double alpha1 = std::atan2(g, f);
  const double alpha2 = std::atan2(h, e);
  const double theta = 0.5 * (alpha2 - alpha1);
  const double phi = 0.5 * (alpha2 + alpha1);
  // m = Rot(phi) diag(sx, sy) Rot(theta)
  out.sigma1 = sx * scale;
  out.sigma2 = std::abs(sy) * scale;
  out.u1 = {std::cos(phi), std::sin(phi)};
  out.u2 = {-std::sin(phi), std::cos(phi)};
  if (sy < 0.0) out.u2 = -out.u2;
  out.v1 = {std::cos(theta), -std::sin(theta)};
  out.v2 = {std::sin(theta), std::cos(theta)};
  return out;
}

inline double Mat2::operator_norm() const { return svd().sigma1; }

struct Eigenvalues {
  std::complex<double> first;
  std::complex<double> second;
  double spectral_radius() const { return std::max(std::abs(first), std::abs(second)); }
};

inline Eigenvalues eigenvalues(const Mat2& m) {
  const double tr = m.trace();
  const double disc = 0.25 * tr * tr - m.det();
  if (disc >= 0.0) {
    const double s = std::sqrt(disc);
    // Avoid cancellation in the smaller root.
    const double big = 0.5 * tr + (tr >= 0.0 ? s : -s);
    const double small = big != 0.0 ? m.det() / big : 0.0;
    return {std::complex<double>(big), std::complex<double>(small)};
  }
  const double s = std::sqrt(-disc);
  return {{0.5 * tr, s}, {0.5 * tr, -s}};
}

/// Eigenvector for a real eigenvalue `lambda` of m.
inline Vec2 eigenvector(const Mat2& m, double lambda) {
  const Mat2 s = m - Mat2::identity() * lambda;
  // Null direction of s is perpendicular to its dominant row.
  const Vec2 r0 = s.row(0), r1 = s.row(1);
  const Vec2 r = norm(r0) >= norm(r1) ? r0 : r1;
  if (norm(r) == 0.0) return {1.0, 0.0};
  return canonical_line(perp(r));
}

}  // namespace endocert
