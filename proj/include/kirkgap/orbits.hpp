#pragma once

#include <optional>
#include <vector>

#include "dynamics.hpp"

namespace kg {

struct Eig2 {
  real lam_u = 0, lam_s = 0;       // |lam_u| >= |lam_s|
  std::array<real, 2> vu{}, vs{};  // unit eigenvectors in (ell, L)
};

inline Eig2 eig2(const Mat2& M) {
  real tr = M.trace(), det = M.det();
  real disc = tr * tr - 4 * det;
  if (disc < 0) throw hypothesis_error("monodromy has complex eigenvalues");
  real sq = std::sqrt(disc);
  real l1 = (tr + sq) / 2, l2 = (tr - sq) / 2;
  if (std::fabs(l1) < std::fabs(l2)) std::swap(l1, l2);
  auto vec = [&](real lam) -> std::array<real, 2> {
    real vx, vy;
    if (std::fabs(M.b) > std::fabs(M.c)) {
      vx = M.b;
      vy = lam - M.a;
    } else {
      vx = lam - M.d;
      vy = M.c;
    }
    real n = std::hypot(vx, vy);
    return {vx / n, vy / n};
  };
  return {l1, l2, vec(l1), vec(l2)};
}

struct PeriodicOrbit {
  real J = 0;
  real ell = 0, L = 0, G = 0;  // section point, g = 0
  real T = 0;                  // physical period (original time)
  real nu = 0;                 // T / (2*pi)
  Mat2 M;                      // section-return monodromy
  Eig2 eig;
  real Lambda = 0;    // unstable Floquet multiplier (per return)
  real lambda = 0;    // Floquet exponent, log(Lambda)/T
  real Lmax_dev = 0;  // max |L(t) - 3^(-1/3)| along the orbit
  bool hyperbolic() const { return std::fabs(M.trace()) > 2; }
};

// Damped Newton for a fixed point of the reduced return map.
inline std::optional<std::array<real, 2>> find_fixed_point(const ReducedMap& rm, real ell,
                                                           real L, real tol = 1e-13L,
                                                           int maxit = 25) {
  auto F = [&](real e_, real L_) -> std::array<real, 2> {
    auto y = rm.map(e_, L_);
    return {y[0] - e_, y[1] - L_};
  };
  real x0 = ell, x1 = L;
  auto f = F(x0, x1);
  real fn = std::hypot(f[0], f[1]);
  for (int it = 0; it < maxit; ++it) {
    if (fn < tol) return std::array<real, 2>{x0, x1};
    Mat2 Mj = rm.dmap(x0, x1);
    Mat2 A{Mj.a - 1, Mj.b, Mj.c, Mj.d - 1};
    real det = A.det();
    if (std::fabs(det) < 1e-14L) return std::nullopt;
    real dx0 = (A.d * f[0] - A.b * f[1]) / det;
    real dx1 = (-A.c * f[0] + A.a * f[1]) / det;
    real lam = 1;
    bool moved = false;
    for (int ls = 0; ls < 12; ++ls) {
      real y0 = x0 - lam * dx0, y1 = x1 - lam * dx1;
      try {
        auto f2 = F(y0, y1);
        real f2n = std::hypot(f2[0], f2[1]);
        if (f2n < fn * (1 - 0.25L * lam) || f2n < tol) {
          x0 = y0;
          x1 = y1;
          f = f2;
          fn = f2n;
          moved = true;
          break;
        }
      } catch (const numerical_error&) {
      }
      lam /= 2;
    }
    // a stalled line search at the integrator noise floor still counts as
    // converged when the residual meets the orbit-accuracy contract
    if (!moved) break;
  }
  return fn < 1e-10L ? std::optional<std::array<real, 2>>({x0, x1}) : std::nullopt;
}

// Fixed points on a symmetry axis (ell = 0 or pi) of the reversor
// (ell, L) -> (-ell, L): solve the scalar equation map_ell(axis, L) = axis by
// a safeguarded Newton in L, then verify the L-component closes up too.
inline std::optional<std::array<real, 2>> find_symmetric_fixed_point(const ReducedMap& rm,
                                                                     real axis, real L,
                                                                     real tol = 1e-13L,
                                                                     int maxit = 30) {
  auto h = [&](real L_) { return wrap_pi(rm.map(axis, L_)[0] - axis); };
  real f = h(L);
  real hstep = 1e-8L;
  for (int it = 0; it < maxit; ++it) {
    if (std::fabs(f) < tol) break;
    real fp = (h(L + hstep) - h(L - hstep)) / (2 * hstep);
    if (std::fabs(fp) < 1e-6L) return std::nullopt;
    real dL = f / fp;
    // cap the step: the root slope is O(100), spurious far jumps mean a bad
    // local model
    dL = std::clamp(dL, (real)-2e-3L, (real)2e-3L);
    real Lnew = L - dL, fnew;
    bool moved = false;
    for (int ls = 0; ls < 8; ++ls) {
      try {
        fnew = h(Lnew);
        if (std::fabs(fnew) < std::fabs(f)) {
          L = Lnew;
          f = fnew;
          moved = true;
          break;
        }
      } catch (const numerical_error&) {
      }
      Lnew = (L + Lnew) / 2;
    }
    if (!moved) break;
  }
  if (std::fabs(f) > 1e-10L) return std::nullopt;
  auto y = rm.map(axis, L);
  if (std::fabs(y[1] - L) > 1e-9L) return std::nullopt;  // symmetric 2-cycle, not fixed
  return std::array<real, 2>{axis, L};
}

inline PeriodicOrbit analyze_orbit(const ReducedMap& rm, real ell, real L) {
  PeriodicOrbit po;
  po.J = rm.J;
  po.ell = ell;
  po.L = L;
  po.G = rm.solve_G(ell, L);
  State y = rm.lift(ell, L);
  Flow f{rm.sys, 0, 0};
  real L0 = resonant_L(), dev = 0;
  integrate_observed(f, y, 0, TWO_PI, TWO_PI / 64, [&](const State& yy, real) {
    dev = std::max(dev, std::fabs(yy[1] - L0));
  });
  po.T = -y[3];  // t runs backward along s
  po.nu = po.T / TWO_PI;
  po.Lmax_dev = dev;
  po.M = rm.dmap(ell, L);
  if (po.M.trace() * po.M.trace() >= 4 * po.M.det()) {
    po.eig = eig2(po.M);
    if (po.eig.lam_u > 1) {
      po.Lambda = po.eig.lam_u;
      po.lambda = std::log(po.Lambda) / po.T;
    }
  }
  return po;
}

// Locate the hyperbolic 3:1 resonant orbit at Jacobi constant J. Seeds scan a
// neighborhood of the resonant circle unless a previous solution is supplied.
inline PeriodicOrbit hyperbolic_orbit(const Sys& sys, real J,
                                      std::optional<std::array<real, 2>> seed = std::nullopt) {
  ReducedMap rm{sys, J};
  std::vector<real> seeds;
  if (seed) seeds.push_back((*seed)[1]);
  real L0 = resonant_L();
  // the saddle sits on the symmetry axis ell = 0 at the bottom of the
  // separatrix throat, roughly 20 mu-widths below the resonant circle
  if (!seed)
    for (real dL : {-0.0215L, -0.019L, -0.024L, -0.017L}) seeds.push_back(L0 + dL);
  for (real s : seeds) {
    std::optional<std::array<real, 2>> fp;
    try {
      fp = find_symmetric_fixed_point(rm, 0, s);
    } catch (const numerical_error&) {
      continue;
    }
    if (!fp) continue;
    PeriodicOrbit po = analyze_orbit(rm, (*fp)[0], (*fp)[1]);
    if (po.hyperbolic()) return po;
  }
  throw convergence_error("no hyperbolic resonant orbit found at J=" + std::to_string((double)J));
}

inline PeriodicOrbit elliptic_orbit(const Sys& sys, real J) {
  ReducedMap rm{sys, J};
  auto fp = find_symmetric_fixed_point(rm, PI, resonant_L());
  if (!fp) throw convergence_error("no elliptic resonant orbit found");
  return analyze_orbit(rm, (*fp)[0], (*fp)[1]);
}

struct Ansatz1Report {
  bool period_band = false;   // 9*mu < |T - 2*pi| < 15*mu
  bool L_confined = false;    // |L - 3^(-1/3)| < 19*mu along the orbit
  bool hyperbolic = false;
  bool ok() const { return period_band && L_confined && hyperbolic; }
};

inline Ansatz1Report check_orbit_hypotheses(const Sys& sys, const PeriodicOrbit& po) {
  Ansatz1Report r;
  real dev = std::fabs(po.T - TWO_PI);
  r.period_band = 9 * sys.mu < dev && dev < 15 * sys.mu;
  r.L_confined = po.Lmax_dev < 19 * sys.mu;
  r.hyperbolic = po.hyperbolic();
  return r;
}

// Family of hyperbolic orbits over a J-grid, continued from the midpoint out.
inline std::vector<PeriodicOrbit> continue_family(const Sys& sys, real J_lo, real J_hi,
                                                  real dJ = 1e-3L) {
  int n = (int)std::llround((double)((J_hi - J_lo) / dJ));
  std::vector<PeriodicOrbit> fam(n + 1);
  int mid = n / 2;
  real Jmid = J_lo + mid * dJ;
  fam[mid] = hyperbolic_orbit(sys, Jmid);
  for (int i = mid + 1; i <= n; ++i)
    fam[i] = hyperbolic_orbit(sys, J_lo + i * dJ,
                              std::array<real, 2>{fam[i - 1].ell, fam[i - 1].L});
  for (int i = mid - 1; i >= 0; --i)
    fam[i] = hyperbolic_orbit(sys, J_lo + i * dJ,
                              std::array<real, 2>{fam[i + 1].ell, fam[i + 1].L});
  return fam;
}

}  // namespace kg
