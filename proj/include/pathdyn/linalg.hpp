#pragma once

#include <cmath>

namespace pathdyn {

struct Vec2 {
  double x = 0.0;
  double y = 0.0;

  friend constexpr Vec2 operator+(Vec2 a, Vec2 b) { return {a.x + b.x, a.y + b.y}; }
  friend constexpr Vec2 operator-(Vec2 a, Vec2 b) { return {a.x - b.x, a.y - b.y}; }
  friend constexpr Vec2 operator*(double s, Vec2 a) { return {s * a.x, s * a.y}; }
  friend constexpr Vec2 operator*(Vec2 a, double s) { return {s * a.x, s * a.y}; }
  friend constexpr bool operator==(Vec2, Vec2) = default;
};

inline double norm(Vec2 a) { return std::hypot(a.x, a.y); }

/// Row-major 2x2 matrix [[xx, xy], [yx, yy]].
///
/// For a velocity gradient, row i holds the derivatives of component i:
/// xy = du/dy, yx = dv/dx.
struct Mat2 {
  double xx = 0.0;
  double xy = 0.0;
  double yx = 0.0;
  double yy = 0.0;

  static constexpr Mat2 identity() { return {1.0, 0.0, 0.0, 1.0}; }

  friend constexpr Mat2 operator+(const Mat2& a, const Mat2& b) {
    return {a.xx + b.xx, a.xy + b.xy, a.yx + b.yx, a.yy + b.yy};
  }
  friend constexpr Mat2 operator-(const Mat2& a, const Mat2& b) {
    return {a.xx - b.xx, a.xy - b.xy, a.yx - b.yx, a.yy - b.yy};
  }
  friend constexpr Mat2 operator*(double s, const Mat2& a) {
    return {s * a.xx, s * a.xy, s * a.yx, s * a.yy};
  }
  friend constexpr Mat2 operator*(const Mat2& a, const Mat2& b) {
    return {a.xx * b.xx + a.xy * b.yx, a.xx * b.xy + a.xy * b.yy,
            a.yx * b.xx + a.yy * b.yx, a.yx * b.xy + a.yy * b.yy};
  }
  friend constexpr Vec2 operator*(const Mat2& a, Vec2 v) {
    return {a.xx * v.x + a.xy * v.y, a.yx * v.x + a.yy * v.y};
  }
  friend constexpr bool operator==(const Mat2&, const Mat2&) = default;
};

constexpr Mat2 transpose(const Mat2& a) { return {a.xx, a.yx, a.xy, a.yy}; }
constexpr double trace(const Mat2& a) { return a.xx + a.yy; }
constexpr double det(const Mat2& a) { return a.xx * a.yy - a.xy * a.yx; }

/// Largest eigenvalue of a symmetric matrix (only the upper triangle is read).
inline double max_eigenvalue_sym(const Mat2& s) {
  const double mean = 0.5 * (s.xx + s.yy);
  const double half_diff = 0.5 * (s.xx - s.yy);
  return mean + std::hypot(half_diff, s.xy);
}

/// exp(A) in closed form. A = (tr/2) I + B with B traceless, and B^2 = -det(B) I,
/// so exp(B) is cosh/cos of sqrt(|det B|) times I plus the matching sinc term times B.
inline Mat2 expm(const Mat2& a) {
  const double half_tr = 0.5 * trace(a);
  const Mat2 b{a.xx - half_tr, a.xy, a.yx, a.yy - half_tr};
  const double delta = -det(b);  // B^2 = delta * I
  double c = 1.0;
  double s = 1.0;  // exp(B) = c I + s B
  if (std::abs(delta) < 1e-8) {
    // Taylor series to fourth order in delta; truncation below 1e-34.
    c = 1.0 + delta / 2.0 + delta * delta / 24.0 + delta * delta * delta / 720.0;
    s = 1.0 + delta / 6.0 + delta * delta / 120.0 + delta * delta * delta / 5040.0;
  } else if (delta > 0.0) {
    const double r = std::sqrt(delta);
    c = std::cosh(r);
    s = std::sinh(r) / r;
  } else {
    const double r = std::sqrt(-delta);
    c = std::cos(r);
    s = std::sin(r) / r;
  }
  const double scale = std::exp(half_tr);
  return {scale * (c + s * b.xx), scale * s * b.xy, scale * s * b.yx, scale * (c + s * b.yy)};
}

}  // namespace pathdyn
