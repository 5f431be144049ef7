#pragma once

#include <algorithm>
#include <array>
#include <complex>
#include <functional>
#include <vector>

#include "common.hpp"

namespace kg {

// Solve u - e*sin(u) = ell by Newton with bisection fallback.
inline real solve_kepler(real ell, real e, real tol = 1e-15L) {
  if (e < 0 || e >= 1) throw config_error("eccentricity out of [0,1)");
  real u = ell + e * std::sin(ell);
  for (int it = 0; it < 100; ++it) {
    real f = u - e * std::sin(u) - ell;
    real du = f / (1 - e * std::cos(u));
    u -= du;
    if (std::fabs(du) < tol) return u;
  }
  // bisection fallback on a bracketing interval around ell
  real lo = ell - 1, hi = ell + 1;
  while (lo - e * std::sin(lo) - ell > 0) lo -= 1;
  while (hi - e * std::sin(hi) - ell < 0) hi += 1;
  for (int it = 0; it < 200; ++it) {
    real mid = 0.5L * (lo + hi);
    if (mid - e * std::sin(mid) - ell > 0)
      hi = mid;
    else
      lo = mid;
  }
  return 0.5L * (lo + hi);
}

struct Delaunay {
  real L, ell, G, g;
};

struct Cart {
  Vec2 q, p;
};

// Rotating-frame cartesian state from Delaunay elements. g is the argument of
// perihelion measured in the rotating frame.
inline Cart delaunay_to_cart(const Delaunay& d) {
  real a = d.L * d.L;
  real e2 = 1 - (d.G * d.G) / (d.L * d.L);
  real e = std::sqrt(std::max(e2, (real)0));
  real u = solve_kepler(d.ell, e);
  real cu = std::cos(u), su = std::sin(u);
  real den = 1 - e * cu;
  Vec2 qp{a * (cu - e), d.L * d.G * su};           // perifocal position
  Vec2 pp{-su / (d.L * den), (d.G / (d.L * d.L)) * cu / den};  // perifocal velocity
  return {rot(d.g, qp), rot(d.g, pp)};
}

enum class Frame { rotating, inertial };

// Same conversion with an explicit frame choice; the rotating frame has
// rotated by angle t relative to the inertial one at time t.
inline Cart delaunay_to_cart(const Delaunay& d, Frame frame, real t = 0) {
  Cart c = delaunay_to_cart(d);
  if (frame == Frame::rotating) return c;
  return {rot(t, c.q), rot(t, c.p)};
}

inline Delaunay cart_to_delaunay(const Cart& c) {
  real r = c.q.norm();
  real h2 = 0.5L * c.p.dot(c.p) - 1 / r;  // two-body energy
  if (h2 >= 0) throw numerical_error("state is not on an elliptic two-body orbit");
  real L = 1 / std::sqrt(-2 * h2);
  real G = c.q.cross(c.p);
  real a = L * L;
  real e2 = 1 - G * G / (L * L);
  real e = std::sqrt(std::max(e2, (real)0));
  // eccentricity vector gives the perihelion direction
  real p2 = c.p.dot(c.p), qp = c.q.dot(c.p);
  Vec2 ev{(p2 - 1 / r) * c.q.x - qp * c.p.x, (p2 - 1 / r) * c.q.y - qp * c.p.y};
  real g = std::atan2(ev.y, ev.x);
  real cu = (1 - r / a) / e;
  cu = std::clamp(cu, (real)-1, (real)1);
  real u = std::acos(cu);
  if (qp < 0) u = -u;
  real ell = u - e * std::sin(u);
  return {L, ell, G, g};
}

// d(q)/d(L, ell, G, g), analytic: 2x4, columns in that order.
inline std::array<Vec2, 4> position_jacobian(const Delaunay& d) {
  real L = d.L, G = d.G;
  real a = L * L;
  real e2 = 1 - G * G / (L * L);
  real e = std::sqrt(std::max(e2, (real)1e-300));
  real u = solve_kepler(d.ell, e);
  real cu = std::cos(u), su = std::sin(u);
  real den = 1 - e * cu;
  real X = a * (cu - e), Y = L * G * su;
  real e_L = G * G / (L * L * L * e);
  real e_G = -G / (L * L * e);
  real u_ell = 1 / den;
  real u_e = su / den;
  real X_L = 2 * L * (cu - e) - a * su * u_e * e_L - a * e_L;
  real X_ell = -a * su * u_ell;
  real X_G = -a * su * u_e * e_G - a * e_G;
  real Y_L = G * su + L * G * cu * u_e * e_L;
  real Y_ell = L * G * cu * u_ell;
  real Y_G = L * su + L * G * cu * u_e * e_G;
  return {rot(d.g, {X_L, Y_L}), rot(d.g, {X_ell, Y_ell}), rot(d.g, {X_G, Y_G}),
          rot(d.g + PI / 2, {X, Y})};
}

// Primary separation vector in the rotating frame at time t (mean anomaly of
// the binary; perihelion passage at t=0), for binary eccentricity e0.
inline Vec2 primary_axis(real t, real e0) {
  if (e0 == 0) return {1, 0};
  real E = solve_kepler(t, e0);
  Vec2 q0in{std::cos(E) - e0, std::sqrt(1 - e0 * e0) * std::sin(E)};
  return rot(-t, q0in);
}

inline Vec2 primary_axis_dt(real t, real e0) {
  real E = solve_kepler(t, e0);
  real Ed = 1 / (1 - e0 * std::cos(E));
  Vec2 q0in{std::cos(E) - e0, std::sqrt(1 - e0 * e0) * std::sin(E)};
  Vec2 q0d{-std::sin(E) * Ed, std::sqrt(1 - e0 * e0) * std::cos(E) * Ed};
  // d/dt [R(-t) v(t)] = R(-t) (v' - J v), J = rotation generator
  Vec2 Jq{-q0in.y, q0in.x};
  return rot(-t, q0d - Jq);
}

struct Sys {
  real mu = MU_DEFAULT;
  real collision_floor = 1e-3L;

  void check_dist(real r1, real r2) const {
    if (r1 < collision_floor || r2 < collision_floor)
      throw collision_error("trajectory passed below the collision floor");
  }

  // mu * DH_circ: difference between the Kepler and the circular-problem
  // potentials, a function of position only.
  real W(Vec2 q) const {
    real r = q.norm();
    real r1 = Vec2{q.x + mu, q.y}.norm();
    real r2 = Vec2{q.x - (1 - mu), q.y}.norm();
    check_dist(r1, r2);
    return 1 / r - (1 - mu) / r1 - mu / r2;
  }

  Vec2 gradW(Vec2 q) const {
    real r = q.norm();
    Vec2 v1{q.x + mu, q.y}, v2{q.x - (1 - mu), q.y};
    real r1 = v1.norm(), r2 = v2.norm();
    check_dist(r1, r2);
    real c = -1 / (r * r * r), c1 = (1 - mu) / (r1 * r1 * r1), c2 = mu / (r2 * r2 * r2);
    return {c * q.x + c1 * v1.x + c2 * v2.x, c * q.y + c1 * v1.y + c2 * v2.y};
  }

  real dH_circ(Vec2 q) const { return W(q) / mu; }

  // rotating-frame energy of the circular problem (the Jacobi constant)
  real ham_circ(const Delaunay& d) const {
    Cart c = delaunay_to_cart(d);
    return -1 / (2 * d.L * d.L) - d.G + W(c.q);
  }

  // analytic gradient of ham_circ wrt (L, ell, G, g)
  std::array<real, 4> grad_ham_circ(const Delaunay& d) const {
    Cart c = delaunay_to_cart(d);
    Vec2 gw = gradW(c.q);
    auto Jq = position_jacobian(d);
    return {1 / (d.L * d.L * d.L) + gw.dot(Jq[0]), gw.dot(Jq[1]), -1 + gw.dot(Jq[2]),
            gw.dot(Jq[3])};
  }

  // full perturbation potential at binary eccentricity e0 and time t
  real W_full(Vec2 q, real t, real e0) const {
    Vec2 ax = primary_axis(t, e0);
    Vec2 v1{q.x + mu * ax.x, q.y + mu * ax.y};
    Vec2 v2{q.x - (1 - mu) * ax.x, q.y - (1 - mu) * ax.y};
    real r1 = v1.norm(), r2 = v2.norm();
    check_dist(r1, r2);
    return 1 / q.norm() - (1 - mu) / r1 - mu / r2;
  }

  Vec2 gradW_full(Vec2 q, real t, real e0) const {
    Vec2 ax = primary_axis(t, e0);
    real r = q.norm();
    Vec2 v1{q.x + mu * ax.x, q.y + mu * ax.y};
    Vec2 v2{q.x - (1 - mu) * ax.x, q.y - (1 - mu) * ax.y};
    real r1 = v1.norm(), r2 = v2.norm();
    check_dist(r1, r2);
    real c = -1 / (r * r * r), c1 = (1 - mu) / (r1 * r1 * r1), c2 = mu / (r2 * r2 * r2);
    return {c * q.x + c1 * v1.x + c2 * v2.x, c * q.y + c1 * v1.y + c2 * v2.y};
  }

  // time derivative of W_full at fixed q (primaries move)
  real dW_full_dt(Vec2 q, real t, real e0) const {
    Vec2 ax = primary_axis(t, e0);
    Vec2 axd = primary_axis_dt(t, e0);
    Vec2 v1{q.x + mu * ax.x, q.y + mu * ax.y};
    Vec2 v2{q.x - (1 - mu) * ax.x, q.y - (1 - mu) * ax.y};
    real r1 = v1.norm(), r2 = v2.norm();
    check_dist(r1, r2);
    // d/dt (-(1-mu)/r1): r1 depends on t via +mu*ax
    real d1 = (1 - mu) * v1.dot(axd * mu) / (r1 * r1 * r1);
    real d2 = mu * v2.dot(axd * (-(1 - mu))) / (r2 * r2 * r2);
    return d1 + d2;
  }

  // mu*e0*dH_ell = W_full - W  (exact finite-e0 difference)
  real dH_ell(const Delaunay& d, real t, real e0) const {
    Cart c = delaunay_to_cart(d);
    return (W_full(c.q, t, e0) - W(c.q)) / (mu * e0);
  }

  // dH_ell at e0 = 0, analytic: the t-dependence is exactly a +-1 harmonic
  real dH_ell0(const Delaunay& d, real t) const { return dH_ell0_q(delaunay_to_cart(d).q, t); }

  real dH_ell0_q(Vec2 q, real t) const {
    Vec2 D = ell0_kernel(q);
    return (1 - mu) * (-std::cos(t) * D.x + 2 * std::sin(t) * D.y);
  }

  // coefficient of e^{+it} in dH_ell at e0=0
  std::complex<double> dH_ell0_plus(Vec2 q) const {
    Vec2 D = ell0_kernel(q);
    return {(double)(-(1 - mu) * D.x / 2), (double)(-(1 - mu) * D.y)};
  }

  Vec2 ell0_kernel(Vec2 q) const {
    Vec2 v1{q.x + mu, q.y}, v2{q.x - (1 - mu), q.y};
    real r1 = v1.norm(), r2 = v2.norm();
    check_dist(r1, r2);
    real c1 = 1 / (r1 * r1 * r1), c2 = 1 / (r2 * r2 * r2);
    return {v1.x * c1 - v2.x * c2, v1.y * c1 - v2.y * c2};
  }

  real jacobi(const Cart& c) const {
    return 0.5L * c.p.dot(c.p) - 1 / c.q.norm() - c.q.cross(c.p) + W(c.q);
  }
};

// Eccentricity reached on the resonant circle L = resonant_L() at Jacobi
// constant J (used to translate action intervals to eccentricity intervals).
inline double ecc_of_jacobi(double J, double L = (double)resonant_L()) {
  double G = -J - 1.0 / (2 * L * L);
  double e2 = 1.0 - G * G / (L * L);
  if (e2 < 0 || e2 > 1) throw config_error("Jacobi constant outside the elliptic range");
  return std::sqrt(e2);
}

// t-harmonics of a callable f(t) over [0, 2pi) by DFT with n nodes.
inline std::vector<std::complex<double>> t_harmonics(const std::function<double(double)>& f,
                                                     int kmax, int n = 128) {
  std::vector<std::complex<double>> out(2 * kmax + 1);
  std::vector<double> vals(n);
  for (int j = 0; j < n; ++j) vals[j] = f(2 * M_PI * j / n);
  for (int k = -kmax; k <= kmax; ++k) {
    std::complex<double> s = 0;
    for (int j = 0; j < n; ++j) {
      double ph = -2 * M_PI * k * j / (double)n;
      s += vals[j] * std::complex<double>(std::cos(ph), std::sin(ph));
    }
    out[k + kmax] = s / (double)n;
  }
  return out;
}

}  // namespace kg
