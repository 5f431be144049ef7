#pragma once

#include <boost/numeric/odeint.hpp>

#include "kepler.hpp"

namespace kg {

// State along the reparameterized flow: (ell, L, G, t, I). The independent
// variable s coincides with the section angle g up to the starting offset;
// one section return is exactly s -> s + 2*pi. t runs backward (dt/ds < 0).
using State = std::array<real, 5>;

struct Mat2 {
  real a = 0, b = 0, c = 0, d = 0;  // [[a,b],[c,d]]
  real det() const { return a * d - b * c; }
  real trace() const { return a + d; }
  std::array<real, 2> apply(real x, real y) const { return {a * x + b * y, c * x + d * y}; }
};

struct Flow {
  Sys sys;
  real e0 = 0;
  real g0 = 0;  // g = g0 + s

  // reparameterized right-hand side
  void rhs(const State& y, State& dy, real s) const {
    Delaunay d{y[1], y[0], y[2], g0 + s};
    Cart c = delaunay_to_cart(d);
    Vec2 gw = (e0 == 0) ? sys.gradW(c.q) : sys.gradW_full(c.q, y[3], e0);
    auto Jq = position_jacobian(d);
    real HL = 1 / (d.L * d.L * d.L) + gw.dot(Jq[0]);
    real Hell = gw.dot(Jq[1]);
    real HG = -1 + gw.dot(Jq[2]);
    real Hg = gw.dot(Jq[3]);
    // near perihelion mu*d(DH_circ)/dG is O(mu/r^3), order one at these
    // eccentricities; only a genuine loss of monotonicity is fatal
    if (HG > -0.05L) throw reparam_breakdown("section angle ceased to be monotone");
    dy[0] = HL / HG;
    dy[1] = -Hell / HG;
    dy[2] = -Hg / HG;
    dy[3] = 1 / HG;
    dy[4] = (e0 == 0) ? 0 : -sys.dW_full_dt(c.q, y[3], e0) / HG;
  }
};

namespace detail {
using stepper_t = boost::numeric::odeint::runge_kutta_fehlberg78<State, real, State, real,
                                                                 boost::numeric::odeint::array_algebra>;
}

inline constexpr real ODE_TOL = 1e-15L;

inline void integrate(const Flow& f, State& y, real s0, real s1, real tol = ODE_TOL) {
  auto sys = [&f](const State& y_, State& dy_, real s_) { f.rhs(y_, dy_, s_); };
  auto stepper = boost::numeric::odeint::make_controlled<detail::stepper_t>(tol, tol);
  real h0 = (s1 > s0 ? 1 : -1) * 1e-3L;
  boost::numeric::odeint::integrate_adaptive(stepper, sys, y, s0, s1, h0);
}

// integrate and report the state at every multiple of ds_obs (segment-wise,
// so trial steps never leave the neighborhood of the trajectory)
template <class Obs>
inline void integrate_observed(const Flow& f, State& y, real s0, real s1, real ds_obs, Obs obs,
                               real tol = ODE_TOL) {
  obs(y, s0);
  long nseg = (long)std::llround((double)((s1 - s0) / ds_obs));
  for (long k = 1; k <= nseg; ++k) {
    real a = s0 + (k - 1) * ds_obs, b = s0 + k * ds_obs;
    integrate(f, y, a, b, tol);
    obs(y, b);
  }
}

// Dynamics on the section {g = 0} of the circular problem at fixed Jacobi
// constant J: coordinates (ell, L), with G eliminated through the energy
// constraint. The return map absorbs the 3:1 resonant drift -6*pi in ell.
struct ReducedMap {
  Sys sys;
  real J;
  real tol = ODE_TOL;  // ODE tolerance used by map_state / dmap

  real solve_G(real ell, real L) const {
    real G = -J - 1 / (2 * L * L);  // unperturbed guess
    for (int it = 0; it < 60; ++it) {
      Delaunay d{L, ell, G, 0};
      real f = sys.ham_circ(d) - J;
      real fp = sys.grad_ham_circ(d)[2];
      real dG = f / fp;
      G -= dG;
      if (std::fabs(dG) < 1e-16L) return G;
    }
    throw convergence_error("energy constraint solve failed");
  }

  State lift(real ell, real L) const { return {ell, L, solve_G(ell, L), 0, 0}; }

  // n section returns (n < 0 iterates the inverse map); out[0] includes the
  // +6*pi*n resonance adjustment
  State map_state(const State& y0, int n = 1) const {
    Flow f{sys, 0, 0};
    State y = y0;
    integrate(f, y, 0, TWO_PI * n, tol);
    y[0] += 6 * PI * n;
    return y;
  }

  std::array<real, 2> map(real ell, real L, int n = 1) const {
    State y = map_state(lift(ell, L), n);
    return {y[0], y[1]};
  }

  // derivative of the return map via first-order variational flow; the
  // initial variation keeps the energy constraint, the field Jacobian is
  // applied through centered directional differences.
  Mat2 dmap(real ell, real L, int n = 1) const {
    State y0 = lift(ell, L);
    Delaunay d{L, ell, y0[2], 0};
    auto gh = sys.grad_ham_circ(d);
    // delta G = -(H_ell dell + H_L dL)/H_G on the energy level
    std::array<real, 3> v1{1, 0, -gh[1] / gh[2]};
    std::array<real, 3> v2{0, 1, -gh[0] / gh[2]};
    using Aug = std::array<real, 11>;
    Aug z{};
    for (int i = 0; i < 5; ++i) z[i] = y0[i];
    for (int i = 0; i < 3; ++i) z[5 + i] = v1[i], z[8 + i] = v2[i];
    Flow f{sys, 0, 0};
    auto rhs = [&f](const Aug& z_, Aug& dz_, real s_) {
      State y{z_[0], z_[1], z_[2], z_[3], z_[4]}, dy;
      f.rhs(y, dy, s_);
      for (int i = 0; i < 5; ++i) dz_[i] = dy[i];
      for (int off : {5, 8}) {
        real vn = std::max({std::fabs(z_[off]), std::fabs(z_[off + 1]), std::fabs(z_[off + 2]),
                            (real)1e-30});
        real h = 1e-7L / vn;
        State yp = y, ym = y, dp, dm;
        for (int i = 0; i < 3; ++i) {
          yp[i] += h * z_[off + i];
          ym[i] -= h * z_[off + i];
        }
        f.rhs(yp, dp, s_);
        f.rhs(ym, dm, s_);
        for (int i = 0; i < 3; ++i) dz_[off + i] = (dp[i] - dm[i]) / (2 * h);
      }
    };
    using aug_stepper =
        boost::numeric::odeint::runge_kutta_fehlberg78<Aug, real, Aug, real,
                                                       boost::numeric::odeint::array_algebra>;
    // the differenced variational right-hand side has a noise floor near
    // 1e-13; asking the controller for more makes it thrash on rejected steps
    real vtol = std::max(tol, (real)1e-13L);
    auto stepper = boost::numeric::odeint::make_controlled<aug_stepper>(vtol, vtol);
    boost::numeric::odeint::integrate_adaptive(stepper, rhs, z, (real)0, TWO_PI * n,
                                               (real)(n > 0 ? 1e-3 : -1e-3));
    return {z[5], z[8], z[6], z[9]};
  }
};

}  // namespace kg
