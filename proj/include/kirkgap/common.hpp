#pragma once

#include <cmath>
#include <stdexcept>
#include <string>

namespace kg {

// Scalar type for the celestial-mechanics pipeline. Extended precision keeps
// the Jacobi-constant drift of long integrations below 1e-10 comfortably.
using real = long double;

inline constexpr double MU_DEFAULT = 0.95387536e-3;  // Sun-Jupiter mass ratio
inline constexpr double J_LO_DEFAULT = -1.551;
inline constexpr double J_HI_DEFAULT = -1.485;

inline real resonant_L() { return std::pow((real)3.0, (real)(-1.0 / 3.0)); }

inline constexpr real PI = 3.14159265358979323846264338327950288L;
inline constexpr real TWO_PI = 2.0L * PI;

inline real wrap_2pi(real x) {
  real y = std::fmod(x, TWO_PI);
  if (y < 0) y += TWO_PI;
  return y;
}

// signed wrap to (-pi, pi]
inline real wrap_pi(real x) {
  real y = wrap_2pi(x);
  return y > PI ? y - TWO_PI : y;
}

struct Vec2 {
  real x = 0, y = 0;
  Vec2 operator+(Vec2 o) const { return {x + o.x, y + o.y}; }
  Vec2 operator-(Vec2 o) const { return {x - o.x, y - o.y}; }
  Vec2 operator*(real s) const { return {x * s, y * s}; }
  real dot(Vec2 o) const { return x * o.x + y * o.y; }
  real cross(Vec2 o) const { return x * o.y - y * o.x; }
  real norm() const { return std::hypot(x, y); }
};

inline Vec2 rot(real ang, Vec2 v) {
  real c = std::cos(ang), s = std::sin(ang);
  return {c * v.x - s * v.y, s * v.x + c * v.y};
}

// error taxonomy: numerical breakdowns vs violated dynamical hypotheses vs bad input
struct numerical_error : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct collision_error : numerical_error {
  using numerical_error::numerical_error;
};
struct reparam_breakdown : numerical_error {
  using numerical_error::numerical_error;
};
struct convergence_error : numerical_error {
  using numerical_error::numerical_error;
};
struct hypothesis_error : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct config_error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

}  // namespace kg
