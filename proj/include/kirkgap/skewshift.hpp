#pragma once

#include "melnikov.hpp"

namespace kg {

// ---------------------------------------------------------------------------
// Symbol sequences
// ---------------------------------------------------------------------------

// A finite window of the bi-infinite symbol sequence. Indices outside the
// window are a hard error, never a silent wrap.
struct SymbolWindow {
  long lo = 0;                // index of sym[0]
  std::vector<uint8_t> sym;   // values in {0, 1}

  int at(long k) const {
    if (k < lo || k >= lo + (long)sym.size())
      throw hypothesis_error("symbol index outside generated window");
    return sym[(size_t)(k - lo)];
  }
  long hi() const { return lo + (long)sym.size(); }

  static SymbolWindow bernoulli(uint64_t seed, uint64_t id, long lo, long n, double p = 0.5) {
    SymbolWindow w;
    w.lo = lo;
    w.sym.resize(n);
    Rng rng = Rng::stream(seed, id);
    for (long i = 0; i < n; ++i) w.sym[(size_t)i] = rng.uniform() < p ? 0 : 1;
    return w;
  }
};

// ---------------------------------------------------------------------------
// Reduced model
// ---------------------------------------------------------------------------

// The reduced stochastic model on (J, theta): action kicks stored by Fourier
// coefficient (harmonics {+-1} for the first order, {0, +-2} for the second),
// angle shift beta0(J) = nu(J)*gbar + alpha_symbol(J). Remainder terms of the
// lamination map are zero by default; the second-order kick and the angle
// correction are pluggable coefficient sets.
struct ReducedModel {
  const MelnikovTable* tab = nullptr;
  real e0 = 0;
  real gbar = 0;               // inter-channel flight time, ~ |log rho|
  double p = 0.5;              // probability of symbol 0 (channel 1)
  std::array<real, 2> B0{0, 0};     // harmonic-0 second-order kick per symbol
  std::array<cplx, 2> B2{};         // harmonic +2 coefficient per symbol
  std::array<cplx, 2> D1{};         // harmonic +1 angle correction per symbol
  // optional override of the first-harmonic amplitudes (e.g. synthetic
  // models in statistical tests); empty means "from the table"
  std::optional<std::array<cplx, 2>> M1_override{};
  std::optional<std::array<real, 2>> beta_override{};  // J-independent betas
  real range_lo = -1e30L, range_hi = 1e30L;  // admissible actions without a table
  // When false the first-order kick uses the raw amplitude M1 instead of the
  // averaged normal form (the lamination map before the averaging step).
  bool normal_form = true;

  template <class F>
  auto Esym(F&& f) const {
    return (real)p * f(0) + (real)(1 - p) * f(1);
  }

  real beta0(int s, real J) const {
    if (beta_override) return (*beta_override)[s];
    return tab->nu(J) * gbar + tab->alpha(s + 1, J);
  }
  // first-harmonic coefficient of the raw action kick (M^{I,1})
  cplx M1(int s, real J) const {
    if (M1_override) return (*M1_override)[s];
    return tab->B(s + 1, J);
  }

  // first-harmonic coefficient after the averaging normal form:
  // A1 = M1 - E(M1) (1 - e^{i beta0}) / (1 - E(e^{i beta0}))
  cplx A1(int s, real J) const {
    if (!normal_form) return M1(s, J);
    cplx EM = Esym([&](int t) { return M1(t, J); });
    cplx Ee = Esym([&](int t) { return std::polar((real)1, beta0(t, J)); });
    cplx den = (real)1 - Ee;
    if (std::abs(den) < 1e-8L)
      throw hypothesis_error("simultaneous resonance: 1 - E(e^{i beta}) too small");
    return M1(s, J) - EM * ((real)1 - std::polar((real)1, beta0(s, J))) / den;
  }

  // generating-series amplitude S1 = E(M1) / (1 - E(e^{i beta0}))
  cplx S1(real J) const {
    cplx EM = Esym([&](int t) { return M1(t, J); });
    cplx Ee = Esym([&](int t) { return std::polar((real)1, beta0(t, J)); });
    cplx den = (real)1 - Ee;
    if (std::abs(den) < 1e-8L)
      throw hypothesis_error("simultaneous resonance: 1 - E(e^{i beta}) too small");
    return EM / den;
  }

  real sigma0_sq(real J) const {
    return sigma0_squared({M1(0, J), M1(1, J)}, {beta0(0, J), beta0(1, J)});
  }

  // range with a margin for cubic interpolation
  real J_lo() const { return tab ? std::max(tab->I_lo + tab->dI, range_lo) : range_lo; }
  real J_hi() const { return tab ? std::min(tab->I_hi() - 2 * tab->dI, range_hi) : range_hi; }
  bool in_range(real J) const { return J >= J_lo() && J <= J_hi(); }
};

// time-dependent observables evaluated from the spectral storage
inline real eval_harmonic1(const cplx& c1, real theta) {
  return 2 * (c1 * std::polar((real)1, theta)).real();
}

// One step of the reduced map for the given symbol.
inline std::array<real, 2> step(const ReducedModel& m, int sym, real J, real theta) {
  if (!m.in_range(J)) throw hypothesis_error("action left the table range");
  real A = eval_harmonic1(m.A1(sym, J), theta);
  real B = m.B0[sym] + 2 * (m.B2[sym] * std::polar((real)1, 2 * theta)).real();
  real D = eval_harmonic1(m.D1[sym], theta);
  real Jp = J + m.e0 * A + m.e0 * m.e0 * B;
  real th = theta + m.beta0(sym, J) + m.e0 * D;
  th = std::fmod(th, TWO_PI);
  if (th < 0) th += TWO_PI;
  return {Jp, th};
}

// Closed-form circular iterate (e0 = 0): the action is frozen and the angle
// accumulates the per-symbol shifts. Returns the angle mod 2*pi and the
// winding count.
struct CircularIterate {
  real theta = 0;
  long winding = 0;
};

inline CircularIterate circular_iterates(const ReducedModel& m, const SymbolWindow& w, real J,
                                         real theta0, long n) {
  real acc = theta0;
  for (long j = 0; j < n; ++j) acc += m.beta0(w.at(j), J);
  CircularIterate out;
  out.winding = (long)std::floor((double)(acc / TWO_PI));
  out.theta = acc - TWO_PI * out.winding;
  return out;
}

// ---------------------------------------------------------------------------
// Ensembles
// ---------------------------------------------------------------------------

struct EnsembleParams {
  long n_steps = 0;
  long samples = 0;
  uint64_t seed = 1;
  bool uniform_theta = true;   // type-2 initial angle law; else fixed theta0
  real theta0 = 0;
  real J0 = 0;
  bool stop_at_range = true;   // stop a path when J exits [stop_lo, stop_hi]
  real stop_lo = 0, stop_hi = 0;  // defaults to the model range when 0
};

struct EnsembleRun {
  EnsembleParams par;
  std::vector<double> J;        // final (or stopped) action per sample
  std::vector<double> theta;    // final angle per sample
  std::vector<long> stop_idx;   // step of stopping, -1 if ran to completion
};

template <class PerStep>
inline void run_path(const ReducedModel& m, const EnsembleParams& par, uint64_t id, real& J,
                     real& th, long& stopped, PerStep&& cb) {
  Rng rng = Rng::stream(par.seed, id);
  J = par.J0;
  th = par.uniform_theta ? (real)rng.uniform(0, (double)TWO_PI) : par.theta0;
  stopped = -1;
  real lo = par.stop_lo != 0 || par.stop_hi != 0 ? par.stop_lo : m.J_lo();
  real hi = par.stop_lo != 0 || par.stop_hi != 0 ? par.stop_hi : m.J_hi();
  for (long n = 0; n < par.n_steps; ++n) {
    int sym = rng.uniform() < m.p ? 0 : 1;
    std::array<real, 2> nxt;
    try {
      nxt = step(m, sym, J, th);
    } catch (const hypothesis_error&) {
      stopped = n;
      break;
    }
    J = nxt[0];
    th = nxt[1];
    cb(n, J, th);
    if (par.stop_at_range && (J < lo || J > hi)) {
      stopped = n;
      break;
    }
  }
}

inline EnsembleRun run_ensemble(const ReducedModel& m, const EnsembleParams& par) {
  EnsembleRun out;
  out.par = par;
  out.J.resize(par.samples);
  out.theta.resize(par.samples);
  out.stop_idx.resize(par.samples);
  for (long i = 0; i < par.samples; ++i) {
    real J, th;
    long st;
    run_path(m, par, (uint64_t)i, J, th, st, [](long, real, real) {});
    out.J[(size_t)i] = (double)J;
    out.theta[(size_t)i] = (double)th;
    out.stop_idx[(size_t)i] = st;
  }
  return out;
}

// ---------------------------------------------------------------------------
// Greedy fast drift
// ---------------------------------------------------------------------------

struct GreedyDrift {
  long T = 0;            // steps to cross
  bool crossed = false;
  real J_final = 0;
  std::vector<double> J_path;  // sampled sparsely (every record_every steps)
};

inline GreedyDrift greedy_drift(const ReducedModel& m, real J_start, real J_end,
                                long stall_limit = 1000, long record_every = 16) {
  GreedyDrift g;
  real J = J_start, th = 0;
  long stall = 0;
  long max_T = (long)(1e9);
  for (long n = 0; n < max_T; ++n) {
    if (J >= J_end) {
      g.crossed = true;
      break;
    }
    // pick the symbol with the larger action increment
    real best = -1e30L;
    int bsym = 0;
    for (int s : {0, 1}) {
      real dJ = m.e0 * eval_harmonic1(m.A1(s, J), th) +
                m.e0 * m.e0 * (m.B0[s] + 2 * (m.B2[s] * std::polar((real)1, 2 * th)).real());
      if (dJ > best) {
        best = dJ;
        bsym = s;
      }
    }
    auto nxt = step(m, bsym, J, th);
    stall = nxt[0] > J ? 0 : stall + 1;
    if (stall > stall_limit) break;
    J = nxt[0];
    th = nxt[1];
    ++g.T;
    if (n % record_every == 0) g.J_path.push_back((double)J);
  }
  g.J_final = J;
  return g;
}

}  // namespace kg
