#pragma once

#include <complex>

#include "manifolds.hpp"

namespace kg {

using cplx = std::complex<real>;

// Data of the resonant periodic orbit needed by the quadratures: the physical
// period and the one-period phase integral
//   P1 = int_0^{2pi} f(lambda(sigma)) e^{i lambda~(sigma)} dsigma,
// where f = DH_ell^{1,+} / H_G along the orbit and lambda~ is the t-clock
// with lambda~(0) = 0 at the section point.
struct OrbitQuadrature {
  real T = 0;
  cplx P1{};
  cplx P1_refined{};  // same integral at half the tolerance (error estimate)
};

namespace detail {

// augmented state: (ell, L, G, t, Re Q, Im Q)
using QState = std::array<real, 6>;

struct QuadFlow {
  Sys sys;

  void rhs(const QState& y, QState& dy, real s) const {
    Delaunay d{y[1], y[0], y[2], s};
    Cart c = delaunay_to_cart(d);
    Vec2 gw = sys.gradW(c.q);
    auto Jq = position_jacobian(d);
    real HL = 1 / (d.L * d.L * d.L) + gw.dot(Jq[0]);
    real Hell = gw.dot(Jq[1]);
    real HG = -1 + gw.dot(Jq[2]);
    real Hg = gw.dot(Jq[3]);
    if (HG > -0.05L) throw reparam_breakdown("section angle ceased to be monotone");
    dy[0] = HL / HG;
    dy[1] = -Hell / HG;
    dy[2] = -Hg / HG;
    dy[3] = 1 / HG;
    auto h1 = sys.dH_ell0_plus(c.q);
    cplx f = cplx((real)h1.real(), (real)h1.imag()) / HG;
    cplx val = f * std::polar((real)1, y[3]);
    dy[4] = val.real();
    dy[5] = val.imag();
  }
};

using qstepper_t = boost::numeric::odeint::runge_kutta_fehlberg78<QState, real, QState, real,
                                                                  boost::numeric::odeint::array_algebra>;

// integrate one 2*pi segment of the phase quadrature starting from the
// section point (ell, L, G) with clock offset t0; returns (segment integral,
// final t increment)
inline std::pair<cplx, real> quad_segment(const Sys& sys, const std::array<real, 3>& x, real t0,
                                          int dir, real tol) {
  QuadFlow f{sys};
  QState y{x[0], x[1], x[2], t0, 0, 0};
  auto rhs = [&f](const QState& y_, QState& dy_, real s_) { f.rhs(y_, dy_, s_); };
  auto stepper = boost::numeric::odeint::make_controlled<qstepper_t>(tol, tol);
  boost::numeric::odeint::integrate_adaptive(stepper, rhs, y, (real)0, dir * TWO_PI,
                                             (real)(dir * 1e-3L));
  return {cplx(y[4], y[5]), y[3] - t0};
}

}  // namespace detail

inline OrbitQuadrature orbit_quadrature(const ReducedMap& rm, const PeriodicOrbit& po,
                                        real tol = ODE_TOL) {
  OrbitQuadrature oq;
  std::array<real, 3> x{po.ell, po.L, po.G};
  auto [Q, dt] = detail::quad_segment(rm.sys, x, 0, 1, tol);
  oq.T = -dt;
  oq.P1 = Q;
  auto [Q2, dt2] = detail::quad_segment(rm.sys, x, 0, 1, tol * 0.5L);
  (void)dt2;
  oq.P1_refined = Q2;
  return oq;
}

// One-sided clock-offset limit: the sum over returns of (dt + T) along the
// forward (stable side) or backward (unstable side) branch of the homoclinic
// orbit; converges geometrically at the Floquet rate.
struct AlphaResult {
  real alpha_p = 0, alpha_m = 0, alpha = 0;
  real tail = 0;  // magnitude of the last partial-sum increment
  int n_used = 0;
};

inline AlphaResult melnikov_alpha(const BranchEval& u_ev, real a, const BranchEval& s_ev, real b,
                                  real T, int n_max = 120, real tail_tol = 1e-16L) {
  AlphaResult r;
  // Forward limit along the stable parameterization: the forward step from
  // s.point(b-m) lands on s.point(b-m-1), and its t-increment is minus the
  // increment stored for the chain's inverse step, so each partial-sum term
  // is (forward dt) + T and decays at the Floquet rate.
  {
    real sum = 0, inc = 1;
    int m = 0;
    for (; m < n_max && std::fabs(inc) > tail_tol; ++m) {
      inc = -s_ev.step_dt(b - m) + T;
      sum += inc;
    }
    r.alpha_p = sum;
    r.tail = std::fabs(inc);
    r.n_used = m;
  }
  // Backward limit along the unstable parameterization: backward steps have
  // t-increment minus the stored forward increment, and the linear clock
  // contributes -T per backward step.
  {
    real sum = 0, inc = 1;
    int m = 0;
    for (; m < n_max && std::fabs(inc) > tail_tol; ++m) {
      inc = -u_ev.step_dt(a - m) - T;
      sum += inc;
    }
    r.alpha_m = sum;
    r.tail = std::max(r.tail, std::fabs(inc));
    r.n_used = std::max(r.n_used, m);
  }
  r.alpha = r.alpha_p - r.alpha_m;
  return r;
}

// First-harmonic Melnikov coefficient B = B_in + B_out for one homoclinic
// channel. B_in is the resummed contribution of the periodic orbit itself;
// B_out is the absolutely convergent sum, over the chain of section returns
// of the connecting orbit, of the differences between the homoclinic and the
// (clock-shifted) periodic segment integrals.
struct BResult {
  cplx B{}, B_in{}, B_out{};
  real tail = 0;   // magnitude of the last forward/backward term
  int n_used = 0;  // returns summed on the slower side
};

inline BResult melnikov_B(const BranchEval& u_ev, real a, const BranchEval& s_ev, real b,
                          const PeriodicOrbit& po, const AlphaResult& al,
                          const OrbitQuadrature& oq, real tol = 1e-13L, int n_max = 80,
                          real tail_tol = 1e-16L) {
  const Sys& sys = u_ev.rm.sys;
  const real mu = sys.mu;
  const real T = po.T;
  const cplx iu(0, 1);
  BResult r;

  // resonant denominator: |T - 2pi| is of order 10*mu here, far from zero
  cplx den = (real)1 - std::polar((real)1, TWO_PI * po.nu);
  if (std::abs(den) < 1e-6L) throw hypothesis_error("resonant denominator too small");
  r.B_in = iu * mu * ((real)1 - std::polar((real)1, al.alpha)) / den * oq.P1;

  // forward side: segments start at the successive forward images of the
  // homoclinic point, which live on the stable-branch parameterization
  {
    cplx sum = 0, ephase = std::polar((real)1, al.alpha_p);
    real t0 = 0;
    int m = 0;
    for (; m < n_max; ++m) {
      auto p = s_ev.point(b - m);
      std::array<real, 3> x{p[0], p[1], s_ev.rm.solve_G(p[0], p[1])};
      cplx Im = detail::quad_segment(sys, x, t0, 1, tol).first;
      cplx term = Im - ephase * std::polar((real)1, -m * T) * oq.P1;
      sum += term;
      r.tail = std::abs(term);
      if (r.tail < tail_tol) break;
      t0 += -s_ev.step_dt(b - m);
    }
    r.n_used = m;
    r.B_out += -iu * mu * sum;
  }
  // backward side: segments end at the successive backward images, on the
  // unstable-branch parameterization; quad_segment integrates with the
  // opposite orientation, hence the sign flip on the segment value
  {
    cplx sum = 0, ephase = std::polar((real)1, al.alpha_m);
    real t0 = 0;
    int m = 0;
    for (; m < n_max; ++m) {
      auto p = u_ev.point(a - m);
      std::array<real, 3> x{p[0], p[1], u_ev.rm.solve_G(p[0], p[1])};
      cplx Rm = detail::quad_segment(sys, x, t0, -1, tol).first;
      cplx term = -Rm - ephase * std::polar((real)1, (m + 1) * T) * oq.P1;
      sum += term;
      real mag = std::abs(term);
      if (mag < tail_tol) {
        r.tail = std::max(r.tail, mag);
        break;
      }
      t0 += -u_ev.step_dt(a - m);
    }
    r.n_used = std::max(r.n_used, m);
    r.B_out += -iu * mu * sum;
  }
  r.B = r.B_in + r.B_out;
  return r;
}

// Per-channel Melnikov data at one action value I (I = -J).
struct ChannelMelnikov {
  real a = 0;       // homoclinic curve parameter on the unstable branch
  real ell = 0, L = 0;  // channel point
  real alpha = 0, alpha_p = 0, alpha_m = 0;
  cplx B{}, B_in{}, B_out{};
  real alpha_tail = 0, B_tail = 0;
};

struct MelnikovRow {
  real I = 0;
  real nu = 0, Lambda = 0;
  real T = 0;
  real orbit_ell = 0, orbit_L = 0;
  std::array<ChannelMelnikov, 2> ch{};  // 1 = upper separatrix, 2 = lower
};

// Compute one table row through the symmetric shortcut: both primary
// channels are symmetric, so each homoclinic point is the crossing of an
// unstable branch with the axis ell = sign*pi, and the mirrored stable
// branch passes through the same point at the same curve parameter.
inline MelnikovRow melnikov_row(const Sys& sys, real I,
                                std::optional<std::array<real, 2>> orbit_seed = std::nullopt,
                                real map_tol = 1e-12L, real quad_tol = 1e-12L) {
  real J = -I;
  PeriodicOrbit po = hyperbolic_orbit(sys, J, orbit_seed);
  ReducedMap rm{sys, J, map_tol};
  MelnikovRow row;
  row.I = I;
  row.nu = po.nu;
  row.Lambda = po.Lambda;
  row.T = po.T;
  row.orbit_ell = po.ell;
  row.orbit_L = po.L;
  OrbitQuadrature oq = orbit_quadrature(rm, po, quad_tol);
  ManifoldParams mp;
  for (int k = 0; k < 2; ++k) {
    int sign_u = k == 0 ? 1 : -1;  // upper loop leaves along +v_u
    BranchEval u_ev{rm, po, Side::unstable, sign_u, mp.delta_loc};
    BranchEval s_ev{rm, po, Side::stable, -sign_u, mp.delta_loc};
    auto a = symmetric_homoclinic_parameter(u_ev);
    if (!a) throw convergence_error("no symmetric homoclinic point on branch");
    ChannelMelnikov& cm = row.ch[k];
    cm.a = *a;
    auto z = u_ev.point(*a);
    cm.ell = z[0];
    cm.L = z[1];
    AlphaResult al = melnikov_alpha(u_ev, *a, s_ev, *a, po.T);
    cm.alpha = al.alpha;
    cm.alpha_p = al.alpha_p;
    cm.alpha_m = al.alpha_m;
    cm.alpha_tail = al.tail;
    BResult B = melnikov_B(u_ev, *a, s_ev, *a, po, al, oq, quad_tol);
    cm.B = B.B;
    cm.B_in = B.B_in;
    cm.B_out = B.B_out;
    cm.B_tail = B.tail;
  }
  return row;
}

// Uniform-grid table of the Melnikov data over [I_lo, I_hi], with cubic
// interpolation and spectral derivatives by centered differences.
struct MelnikovTable {
  real I_lo = 0, dI = 1e-3L;
  std::vector<MelnikovRow> rows;

  real I_hi() const { return I_lo + dI * (rows.size() - 1); }

  // Catmull-Rom interpolation of a row-extractor functional
  template <class F>
  real interp(real I, F&& get) const {
    real x = (I - I_lo) / dI;
    long n = (long)rows.size();
    long j = (long)std::floor((double)x);
    j = std::clamp(j, 1L, n - 3);
    real t = x - j;
    real p0 = get(rows[j - 1]), p1 = get(rows[j]), p2 = get(rows[j + 1]), p3 = get(rows[j + 2]);
    return p1 + 0.5L * t * (p2 - p0 +
                            t * (2 * p0 - 5 * p1 + 4 * p2 - p3 + t * (3 * (p1 - p2) + p3 - p0)));
  }
  // centered-difference derivative of a row functional at grid resolution
  template <class F>
  real deriv(real I, F&& get) const {
    real h = dI;
    return (interp(I + h, get) - interp(I - h, get)) / (2 * h);
  }

  real nu(real I) const { return interp(I, [](const MelnikovRow& r) { return r.nu; }); }
  real dnu(real I) const { return deriv(I, [](const MelnikovRow& r) { return r.nu; }); }
  real alpha(int i, real I) const {
    return interp(I, [i](const MelnikovRow& r) { return r.ch[i - 1].alpha; });
  }
  real dalpha(int i, real I) const {
    return deriv(I, [i](const MelnikovRow& r) { return r.ch[i - 1].alpha; });
  }
  cplx B(int i, real I) const {
    return {interp(I, [i](const MelnikovRow& r) { return (real)r.ch[i - 1].B.real(); }),
            interp(I, [i](const MelnikovRow& r) { return (real)r.ch[i - 1].B.imag(); })};
  }
};

inline MelnikovTable build_melnikov_table(const Sys& sys, real I_lo, real I_hi, real dI = 1e-3L,
                                          real map_tol = 1e-12L, real quad_tol = 1e-12L) {
  MelnikovTable tab;
  tab.I_lo = I_lo;
  tab.dI = dI;
  int n = (int)std::llround((double)((I_hi - I_lo) / dI));
  tab.rows.resize(n + 1);
  // continue the periodic orbit from the midpoint outward for robust seeds
  int mid = n / 2;
  std::optional<std::array<real, 2>> seed;
  for (int i = mid; i <= n; ++i) {
    tab.rows[i] = melnikov_row(sys, I_lo + i * dI, seed, map_tol, quad_tol);
    seed = std::array<real, 2>{tab.rows[i].orbit_ell, tab.rows[i].orbit_L};
  }
  seed = std::array<real, 2>{tab.rows[mid].orbit_ell, tab.rows[mid].orbit_L};
  for (int i = mid - 1; i >= 0; --i) {
    tab.rows[i] = melnikov_row(sys, I_lo + i * dI, seed, map_tol, quad_tol);
    seed = std::array<real, 2>{tab.rows[i].orbit_ell, tab.rows[i].orbit_L};
  }
  return tab;
}

// Leading-order variance of the action drift for the two-symbol Bernoulli
// (1/2, 1/2) random iteration: phases beta_i = nu*gbar + alpha_i and first
// harmonics B_i of the action kick.
inline real sigma0_squared(const std::array<cplx, 2>& B, const std::array<real, 2>& beta) {
  cplx e1 = std::polar((real)1, beta[0]), e2 = std::polar((real)1, beta[1]);
  cplx den = (real)2 - e1 - e2;
  cplx c = (B[0] * ((real)1 - e1) + B[1] * ((real)1 - e2)) / den;
  return std::norm(B[0] - c) + std::norm(B[1] - c);
}

// Non-degeneracy report for the Melnikov data over the table range.
struct Ansatz2Report {
  real alpha_abs_max = 0;      // sup |alpha_i|, hypothesis: <= 100*mu
  real alpha_gap_min = 0;      // inf |alpha_1 - alpha_2|, hypothesis: > 0
  real frac_dist_min = 0;      // inf dist(4(alpha_2-alpha_1)/(2pi), Z)
  bool alpha_bound = false;
  bool alpha_gap = false;
  bool nonresonance = false;
};

inline Ansatz2Report check_ansatz2(const MelnikovTable& tab, const Sys& sys,
                                   real delta = 0.05L) {
  Ansatz2Report r;
  r.alpha_gap_min = 1e30L;
  r.frac_dist_min = 1e30L;
  for (auto& row : tab.rows) {
    real a1 = row.ch[0].alpha, a2 = row.ch[1].alpha;
    r.alpha_abs_max = std::max({r.alpha_abs_max, std::fabs(a1), std::fabs(a2)});
    r.alpha_gap_min = std::min(r.alpha_gap_min, std::fabs(a1 - a2));
    real x = 4 * (a2 - a1) / TWO_PI;
    real d = std::fabs(x - std::round((double)x));
    r.frac_dist_min = std::min(r.frac_dist_min, d);
  }
  r.alpha_bound = r.alpha_abs_max <= 100 * sys.mu;
  r.alpha_gap = r.alpha_gap_min > 0;
  r.nonresonance = r.frac_dist_min > delta;
  return r;
}

}  // namespace kg
