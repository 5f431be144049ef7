#pragma once

#include <boost/math/quadrature/gauss_kronrod.hpp>

#include "skewshift.hpp"

namespace kg {

// ===========================================================================
// Drift and variance series of the reduced model
// ===========================================================================

// One entry of the diffusion-coefficient table: the drift b = b1 + b2 + b3
// and variance s2 = s1 + s2 of the action process, together with the
// truncation diagnostics of the correlation series.
struct DiffusionEntry {
  real J = 0;
  real b1 = 0, b2 = 0, b3 = 0, b = 0;
  real sigma1_sq = 0, sigma2_sq = 0, sigma_sq = 0;
  real sigma0_sq = 0;         // leading-order variance (fitted-constant route)
  long k_star = 0;            // series truncation index
  real decay_rate = 0;        // |E e^{i beta}| -- per-term decay factor
  real tail_bound = 0;        // analytic bound on the dropped remainder
  bool exact_expectations = true;  // symbol expectations summed exactly
};

// Factorized one-symbol moments of the model at a fixed action.  Every series
// term is an expectation over an independent symbol window in which each
// factor depends on a single symbol, so the window expectation is an exact
// product of these per-symbol moments (the "window length <= 20" switch of
// the statistics plan never needs Monte Carlo here).
// In the correlation of steps 0 and k the accumulated rotation is
// sum_{j=0}^{k-1} beta_j: the older factor (at omega_0) carries its own
// rotation, the k-1 intermediate symbols contribute plain phase factors, and
// the newest factor (at omega_k) carries none.  The newest-factor moments are
// therefore plain symbol averages.
struct SymbolMoments {
  cplx q;     // E[e^{i beta}]
  cplx EA;    // E[A1]               (newest factor)
  cplx EdA;   // E[dA1/dJ]           (newest factor)
  cplx EAe;   // E[A1 e^{i beta}]          (oldest factor, conj of A^-)
  cplx EAc;   // E[conj(A1) e^{i beta}]    (oldest factor)
  cplx EDc;   // E[conj(D1) e^{i beta}]    (oldest factor)
  cplx Ebp;   // E[dbeta/dJ e^{i beta}]    (intermediate twist factor)
};

inline SymbolMoments symbol_moments(const ReducedModel& m, real J, real hJ = 1e-4L) {
  SymbolMoments sm{};
  auto e = [&](int s) { return std::polar((real)1, m.beta0(s, J)); };
  sm.q = m.Esym([&](int s) { return e(s); });
  sm.EA = m.Esym([&](int s) { return m.A1(s, J); });
  sm.EdA = m.Esym([&](int s) { return (m.A1(s, J + hJ) - m.A1(s, J - hJ)) / (2 * hJ); });
  sm.EAe = m.Esym([&](int s) { return m.A1(s, J) * e(s); });
  sm.EAc = m.Esym([&](int s) { return std::conj(m.A1(s, J)) * e(s); });
  sm.EDc = m.Esym([&](int s) { return std::conj(m.D1[s]) * e(s); });
  sm.Ebp = m.Esym([&](int s) {
    real bp = (m.beta0(s, J + hJ) - m.beta0(s, J - hJ)) / (2 * hJ);
    return bp * e(s);
  });
  return sm;
}

// Drift and variance by summation of the correlation series.  Terms are exact
// symbol-window expectations (factorized, see SymbolMoments); the sum is
// truncated once the analytic geometric remainder drops below `tol`, and the
// dropped remainder is reported.  Throws when the per-term decay factor
// reaches 1 (weak-mixing violation: the series need not converge).
inline DiffusionEntry drift_variance(const ReducedModel& m, real J, real tol = 1e-12L,
                                     long k_cap = 2000000) {
  SymbolMoments sm = symbol_moments(m, J);
  real r = std::abs(sm.q);
  if (r >= 1 - 1e-15L) throw hypothesis_error("weak-mixing violation: |E e^{i beta}| >= 1");

  DiffusionEntry d;
  d.J = J;
  d.decay_rate = r;
  // theta averages of the zeroth/second order terms: only the harmonic-0
  // part of B survives, and E_theta (2 Re A1 e^{i theta})^2 = 2|A1|^2
  d.b1 = m.Esym([&](int s) { return m.B0[s]; });
  d.sigma1_sq = 2 * m.Esym([&](int s) { return std::norm(m.A1(s, J)); });
  d.sigma0_sq = m.sigma0_sq(J);

  const cplx iu(0, 1);
  // per-term coefficients: term_k = Re(c * q^{k-1}) with
  //   b2:       c2 = 2 EdA EAc
  //   sigma2:   cs = 4 EA  EAc
  //   b3 (D):   c3a = 2 (i EA) EDc
  //   b3 (beta'): term_i = Re(c3b (i-1) q^{i-2}), c3b = 2 (i EA) Ebp EA
  cplx c2 = (real)2 * sm.EdA * sm.EAc;
  cplx cs = (real)4 * sm.EA * sm.EAc;
  cplx c3a = (real)2 * (iu * sm.EA) * sm.EDc;
  cplx c3b = (real)2 * (iu * sm.EA) * sm.Ebp * sm.EAe;
  real cmax = std::max({std::abs(c2), std::abs(cs), std::abs(c3a), std::abs(c3b)});

  cplx qk = 1;  // q^{k-1}
  real b2 = 0, s2 = 0, b3a = 0, b3b = 0;
  long k = 1;
  for (; k <= k_cap; ++k) {
    b2 += (c2 * qk).real();
    s2 += (cs * qk).real();
    b3a += (c3a * qk).real();
    // the beta' sum runs over i >= 2 with weight (i-1) q^{i-2}; reindex i=k+1
    b3b += (real)k * (c3b * qk).real();
    qk *= sm.q;
    // remainder bounds: geometric for the plain sums, arithmetico-geometric
    // for the (i-1)-weighted one
    real rk = std::pow(r, (real)k);
    real rem = cmax * rk / (1 - r) + std::abs(c3b) * rk * ((real)k + 1 / (1 - r)) / (1 - r);
    if (rem < tol) {
      d.tail_bound = rem;
      break;
    }
  }
  if (k > k_cap) throw hypothesis_error("drift/variance series did not reach tolerance");
  d.k_star = k;
  d.b2 = b2;
  d.b3 = b3a + b3b;
  d.sigma2_sq = s2;
  d.b = d.b1 + d.b2 + d.b3;
  d.sigma_sq = d.sigma1_sq + d.sigma2_sq;
  return d;
}

// Same coefficients from the analytic limit of the geometric series; used as
// the oracle for the truncated summation.
inline DiffusionEntry drift_variance_closed_form(const ReducedModel& m, real J) {
  SymbolMoments sm = symbol_moments(m, J);
  real r = std::abs(sm.q);
  if (r >= 1 - 1e-15L) throw hypothesis_error("weak-mixing violation: |E e^{i beta}| >= 1");
  DiffusionEntry d;
  d.J = J;
  d.decay_rate = r;
  d.k_star = -1;
  d.b1 = m.Esym([&](int s) { return m.B0[s]; });
  d.sigma1_sq = 2 * m.Esym([&](int s) { return std::norm(m.A1(s, J)); });
  d.sigma0_sq = m.sigma0_sq(J);
  const cplx iu(0, 1);
  cplx g1 = (real)1 / ((real)1 - sm.q);
  d.b2 = ((real)2 * sm.EdA * sm.EAc * g1).real();
  d.sigma2_sq = ((real)4 * sm.EA * sm.EAc * g1).real();
  d.b3 = ((real)2 * (iu * sm.EA) * sm.EDc * g1).real() +
         ((real)2 * (iu * sm.EA) * sm.Ebp * sm.EAe * g1 * g1).real();
  d.b = d.b1 + d.b2 + d.b3;
  d.sigma_sq = d.sigma1_sq + d.sigma2_sq;
  return d;
}

// Diffusion coefficients on a J-grid with cubic interpolation, for use as
// b(J), sigma^2(J) callables in the discrete scheme and the Ito reference.
struct DiffusionTable {
  real J_lo = 0, dJ = 0;
  std::vector<DiffusionEntry> entries;

  real interp(real J, real DiffusionEntry::*fld) const {
    real u = (J - J_lo) / dJ;
    long n = (long)entries.size();
    long j = (long)std::floor(u);
    j = std::clamp(j, (long)1, n - 3);
    real t = u - j;
    real f0 = entries[j - 1].*fld, f1 = entries[j].*fld, f2 = entries[j + 1].*fld,
         f3 = entries[j + 2].*fld;
    real a = -0.5L * f0 + 1.5L * f1 - 1.5L * f2 + 0.5L * f3;
    real b = f0 - 2.5L * f1 + 2 * f2 - 0.5L * f3;
    real c = 0.5L * (f2 - f0);
    return ((a * t + b) * t + c) * t + f1;
  }
  real b(real J) const { return interp(J, &DiffusionEntry::b); }
  real sigma_sq(real J) const { return interp(J, &DiffusionEntry::sigma_sq); }
};

inline DiffusionTable diffusion_table(const ReducedModel& m, real J_lo, real J_hi, real dJ,
                                      real tol = 1e-12L) {
  DiffusionTable t;
  t.J_lo = J_lo;
  t.dJ = dJ;
  for (real J = J_lo; J <= J_hi + dJ / 2; J += dJ) t.entries.push_back(drift_variance(m, J, tol));
  for (auto& e : t.entries)
    if (e.sigma_sq <= 0) throw hypothesis_error("variance not positive on the grid");
  return t;
}

// ===========================================================================
// Twisted transfer operator on finite symbol memory
// ===========================================================================

// Finite-memory approximation of P -> L(e^{im beta} P) on functions of the
// first k future symbols (dimension 2^k).  beta depends on the leading symbol
// only, so each image value mixes exactly two preimage values.
struct TransferSpectrum {
  int k = 0, m = 0;
  real radius = 0;
  cplx leading{};
  real resid = 0;
  int iters = 0;
};

inline void transfer_apply(const std::array<real, 2>& beta, double p, int k, int m,
                           const std::vector<cplx>& in, std::vector<cplx>& out) {
  size_t half = (size_t)1 << (k - 1);
  size_t mask = half - 1;
  cplx w0 = (real)p * std::polar((real)1, (real)m * beta[0]);
  cplx w1 = (real)(1 - p) * std::polar((real)1, (real)m * beta[1]);
  for (size_t w = 0; w < in.size(); ++w) {
    size_t head = (w & mask) << 1;
    out[w] = w0 * in[head] + w1 * in[head | 1];
  }
}

inline TransferSpectrum transfer_spectrum(const std::array<real, 2>& beta, double p, int k, int m,
                                          int max_iter = 400, real tol = 1e-14L) {
  if (k < 1 || k > 20) throw config_error("transfer-operator memory depth out of range");
  TransferSpectrum ts;
  ts.k = k;
  ts.m = m;
  size_t dim = (size_t)1 << k;
  std::vector<cplx> v(dim), av(dim);
  Rng rng = Rng::stream(12345, (uint64_t)(k * 8 + m));
  for (auto& x : v) x = cplx((real)rng.uniform(-1, 1), (real)rng.uniform(-1, 1));
  // the operator maps k-symbol functions into (k-1)-symbol functions, so the
  // power iteration lands on the dominant eigenspace after at most k steps
  cplx lam = 0;
  for (int it = 0; it < max_iter; ++it) {
    transfer_apply(beta, p, k, m, v, av);
    real nv = 0, nav = 0;
    cplx num = 0;
    for (size_t i = 0; i < dim; ++i) {
      num += std::conj(v[i]) * av[i];
      nv += std::norm(v[i]);
      nav += std::norm(av[i]);
    }
    ts.iters = it + 1;
    if (nav < 1e-60L) {  // operator annihilated the vector: radius 0
      ts.leading = 0;
      ts.radius = 0;
      ts.resid = 0;
      return ts;
    }
    lam = num / (real)nv;
    real resid = 0;
    for (size_t i = 0; i < dim; ++i) resid += std::norm(av[i] - lam * v[i]);
    ts.resid = std::sqrt(resid / nv);
    real scale = std::sqrt(nav);
    for (size_t i = 0; i < dim; ++i) v[i] = av[i] / scale;
    if (it >= k && ts.resid < tol) break;
  }
  ts.leading = lam;
  ts.radius = std::abs(lam);
  return ts;
}

// ===========================================================================
// Correlation decay and the central limit theorem on the circular dynamics
// ===========================================================================

struct CorrelationFit {
  std::vector<double> lag;
  std::vector<double> corr_abs;   // |mean of e^{im(theta_n - theta_0)}|
  double C = 0, r = 0, r2 = 0;
  bool conclusive = true;
  long samples = 0;
  uint64_t seed = 0;
};

// Monte Carlo correlations of the harmonic observable e^{im theta} along the
// frozen-action (e0 = 0) dynamics, fitted to C r^n on the lags that sit above
// the Monte Carlo noise floor.
inline CorrelationFit correlation_decay(const ReducedModel& m, real J, int harm, long n_lags,
                                        long lag_step, long samples, bool uniform_theta,
                                        uint64_t seed, real theta0 = 0) {
  CorrelationFit cf;
  cf.samples = samples;
  cf.seed = seed;
  std::vector<cplx> acc((size_t)n_lags + 1, 0);
  for (long i = 0; i < samples; ++i) {
    Rng rng = Rng::stream(seed, (uint64_t)i);
    real th0 = uniform_theta ? (real)rng.uniform(0, (double)TWO_PI) : theta0;
    real th = th0;
    long n = 0;
    for (long l = 0; l <= n_lags; ++l) {
      acc[(size_t)l] += std::polar((real)1, (real)harm * (th - th0));
      for (long j = 0; j < lag_step && l < n_lags; ++j, ++n) {
        int sym = rng.uniform() < m.p ? 0 : 1;
        th += m.beta0(sym, J);
      }
    }
  }
  double floor3 = 3.0 / std::sqrt((double)samples);
  std::vector<double> xs, ys;
  for (long l = 0; l <= n_lags; ++l) {
    double c = (double)std::abs(acc[(size_t)l]) / (double)samples;
    cf.lag.push_back((double)(l * lag_step));
    cf.corr_abs.push_back(c);
    if (c > floor3) {
      xs.push_back((double)(l * lag_step));
      ys.push_back(std::log(c));
    }
  }
  if (xs.size() < 3) {
    cf.conclusive = false;
    return cf;
  }
  LinFit fit = linear_fit(xs, ys);
  cf.C = std::exp(fit.intercept);
  cf.r = std::exp(fit.slope);
  cf.r2 = fit.r2;
  return cf;
}

struct StatTestReport {
  std::string name;
  double statistic = 0;
  long N = 0, M = 0;
  double threshold = 0;
  bool pass = false;
  uint64_t seed = 0;
  double extra = 0;  // context-dependent (e.g. series variance)
};

// Kolmogorov-Smirnov test of N^{-1/2} sum A against N(0, sigma^2) with the
// variance taken from the correlation series.  The summed observable is the
// averaged first-order amplitude, which has exact zero expectation.
inline StatTestReport clt_test(const ReducedModel& m, real J, long N, long M, bool uniform_theta,
                               uint64_t seed, real theta0 = 0) {
  DiffusionEntry d = drift_variance(m, J);
  if (d.sigma_sq < 1e-18L) throw hypothesis_error("degenerate variance in CLT test");
  std::vector<double> gs((size_t)M);
  for (long i = 0; i < M; ++i) {
    Rng rng = Rng::stream(seed, (uint64_t)i);
    real th = uniform_theta ? (real)rng.uniform(0, (double)TWO_PI) : theta0;
    real s = 0;
    for (long n = 0; n < N; ++n) {
      int sym = rng.uniform() < m.p ? 0 : 1;
      s += eval_harmonic1(m.A1(sym, J), th);
      th += m.beta0(sym, J);
    }
    gs[(size_t)i] = (double)(s / std::sqrt((real)N));
  }
  StatTestReport rep;
  rep.name = uniform_theta ? "clt-uniform-angle" : "clt-fixed-angle";
  rep.N = N;
  rep.M = M;
  rep.seed = seed;
  rep.extra = (double)d.sigma_sq;
  rep.statistic = ks_statistic_normal(gs, 0.0, std::sqrt((double)d.sigma_sq));
  rep.threshold = ks_threshold_1s((size_t)M);
  rep.pass = rep.statistic < rep.threshold;
  return rep;
}

// Empirical check of the zero-expectation property of the normal-form
// amplitude: the partial sums sum_{n<N} E A(sym_n, theta_n) stay within
// sampling error of zero for any starting angle.
inline StatTestReport zero_expectation_test(const ReducedModel& m, real J, real theta0, long N,
                                            long M, uint64_t seed) {
  MeanVar mv;
  for (long i = 0; i < M; ++i) {
    Rng rng = Rng::stream(seed, (uint64_t)i);
    real th = theta0;
    real s = 0;
    for (long n = 0; n < N; ++n) {
      int sym = rng.uniform() < m.p ? 0 : 1;
      s += eval_harmonic1(m.A1(sym, J), th);
      th += m.beta0(sym, J);
    }
    mv.add((double)s);
  }
  StatTestReport rep;
  rep.name = "zero-expectation";
  rep.N = N;
  rep.M = M;
  rep.seed = seed;
  rep.statistic = mv.mean;
  rep.threshold = 3 * mv.sd() / std::sqrt((double)M);
  rep.pass = std::abs(rep.statistic) < rep.threshold;
  return rep;
}

// ===========================================================================
// Martingale defect and exit times of the full (e0 > 0) reduced model
// ===========================================================================

struct TestFunction {
  std::function<real(real)> f, df, d2f;
};

struct DefectReport {
  double defect_strip = 0, se_strip = 0;
  double defect_global = 0, se_global = 0;
  double mean_exit = 0;
  long n_global = 0;
  long M = 0;
  uint64_t seed = 0;
  bool inconclusive_strip = false, inconclusive_global = false;
};

// Monte Carlo expectation of f(J_n) - e0^2 sum_k (b f' + sigma^2/2 f'') - f(J_0)
// along reduced-model paths: stopped at the strip exit (half-width e0^gamma / 2
// around J0) and at the full horizon n = kappa e0^{-2}.
inline DefectReport martingale_defect(const ReducedModel& m, const DiffusionTable& coef,
                                      const TestFunction& tf, real J0, real kappa, real gamma,
                                      long M, uint64_t seed, bool uniform_theta = true) {
  if (!(gamma > 7.0L / 8 && gamma < 1)) throw config_error("gamma must lie in (7/8, 1)");
  DefectReport rep;
  rep.M = M;
  rep.seed = seed;
  long n_max = (long)std::floor(kappa / (m.e0 * m.e0));
  rep.n_global = n_max;
  real w = std::pow(m.e0, gamma) / 2;
  MeanVar strip, glob, exits;
  for (long i = 0; i < M; ++i) {
    Rng rng = Rng::stream(seed, (uint64_t)i);
    real J = J0;
    real th = uniform_theta ? (real)rng.uniform(0, (double)TWO_PI) : 0;
    real comp = 0;  // e0^2 sum of the generator terms
    bool exited = false;
    real bracket_strip = 0;
    long n_exit = n_max;
    for (long n = 0; n < n_max; ++n) {
      comp += m.e0 * m.e0 * (coef.b(J) * tf.df(J) + coef.sigma_sq(J) / 2 * tf.d2f(J));
      int sym = rng.uniform() < m.p ? 0 : 1;
      auto nxt = step(m, sym, J, th);
      J = nxt[0];
      th = nxt[1];
      if (!exited && std::abs(J - J0) >= w) {
        exited = true;
        n_exit = n + 1;
        bracket_strip = (real)(tf.f(J) - comp - tf.f(J0));
      }
    }
    if (!exited) bracket_strip = (real)(tf.f(J) - comp - tf.f(J0));
    strip.add((double)bracket_strip);
    glob.add((double)(tf.f(J) - comp - tf.f(J0)));
    exits.add((double)n_exit);
  }
  rep.defect_strip = strip.mean;
  rep.se_strip = strip.sd() / std::sqrt((double)M);
  rep.defect_global = glob.mean;
  rep.se_global = glob.sd() / std::sqrt((double)M);
  rep.mean_exit = exits.mean;
  rep.inconclusive_strip = rep.se_strip > std::abs(rep.defect_strip);
  rep.inconclusive_global = rep.se_global > std::abs(rep.defect_global);
  return rep;
}

struct ExitTimeReport {
  double p_fast = 0;            // Prob{ n < e0^{-2(1-gamma)+delta} }
  Interval p_fast_ci{};
  double p_window = 0;          // Prob{ e0^{-2(1-gamma)-delta} < n < kappa e0^{-2} }
  Interval p_window_ci{};
  double median_exit = 0;
  double thr_fast = 0, thr_slow = 0;
  long n_cap = 0;
  long M = 0;
  uint64_t seed = 0;
};

// Empirical tails of the strip exit time n_gamma (capped at kappa e0^{-2}).
inline ExitTimeReport exit_time_stats(const ReducedModel& m, real J0, real gamma, real delta,
                                      real kappa, long M, uint64_t seed,
                                      real halfwidth_override = 0) {
  ExitTimeReport rep;
  rep.M = M;
  rep.seed = seed;
  rep.n_cap = m.e0 > 0 ? (long)std::floor(kappa / (m.e0 * m.e0)) : 1000;
  rep.thr_fast = m.e0 > 0 ? std::pow((double)m.e0, (double)(-2 * (1 - gamma) + delta)) : 0;
  rep.thr_slow = m.e0 > 0 ? std::pow((double)m.e0, (double)(-2 * (1 - gamma) - delta)) : 0;
  real w = halfwidth_override > 0
               ? halfwidth_override
               : (m.e0 > 0 ? std::pow(m.e0, gamma) / 2 : (real)1e-6L);
  long fast = 0, window = 0;
  std::vector<double> ns((size_t)M);
  for (long i = 0; i < M; ++i) {
    Rng rng = Rng::stream(seed, (uint64_t)i);
    real J = J0;
    real th = (real)rng.uniform(0, (double)TWO_PI);
    long n_exit = rep.n_cap;
    for (long n = 0; n < rep.n_cap; ++n) {
      int sym = rng.uniform() < m.p ? 0 : 1;
      auto nxt = step(m, sym, J, th);
      J = nxt[0];
      th = nxt[1];
      if (std::abs(J - J0) >= w) {
        n_exit = n + 1;
        break;
      }
    }
    ns[(size_t)i] = (double)n_exit;
    if ((double)n_exit < rep.thr_fast) ++fast;
    if ((double)n_exit > rep.thr_slow && n_exit < rep.n_cap) ++window;
  }
  rep.p_fast = (double)fast / M;
  rep.p_fast_ci = wilson_ci(fast, M);
  rep.p_window = (double)window / M;
  rep.p_window_ci = wilson_ci(window, M);
  rep.median_exit = median(ns);
  return rep;
}

// ===========================================================================
// Strip construction and hitting probabilities
// ===========================================================================

// Strip boundaries A_j built so that consecutive boundaries are equally
// spaced in the scale function of the diffusion: the recursion advances each
// step by the base width damped by exp(-int 2 b / sigma^2).  Under the
// diffusion the hitting chain of these boundaries is a symmetric random walk.
inline std::vector<real> build_strips(real J_minus, real J_plus, real base_width,
                                      const std::function<real(real)>& b,
                                      const std::function<real(real)>& s2) {
  using boost::math::quadrature::gauss_kronrod;
  std::vector<real> A{J_minus, J_minus + base_width};
  auto integrand = [&](real J) {
    real v = s2(J);
    if (v <= 0) throw hypothesis_error("variance floor violation in strip construction");
    return 2 * b(J) / v;
  };
  while (A.back() < J_plus) {
    real expo = gauss_kronrod<real, 15>::integrate(integrand, A.front(), A[A.size() - 1], 8,
                                                   (real)1e-12L);
    A.push_back(A.back() + base_width * std::exp(-expo));
  }
  return A;
}

struct HittingReport {
  double p_up = 0;       // probability of reaching the upper boundary first
  double se = 0;
  long decided = 0;      // paths that reached either boundary within the cap
  long M = 0;
  uint64_t seed = 0;
};

// Empirical probability that a reduced-model path from J_mid reaches J_up
// before J_dn.
inline HittingReport hitting_probability(const ReducedModel& m, real J_mid, real J_dn, real J_up,
                                         long M, uint64_t seed, long n_cap) {
  HittingReport rep;
  rep.M = M;
  rep.seed = seed;
  long up = 0;
  for (long i = 0; i < M; ++i) {
    Rng rng = Rng::stream(seed, (uint64_t)i);
    real J = J_mid;
    real th = (real)rng.uniform(0, (double)TWO_PI);
    for (long n = 0; n < n_cap; ++n) {
      int sym = rng.uniform() < m.p ? 0 : 1;
      auto nxt = step(m, sym, J, th);
      J = nxt[0];
      th = nxt[1];
      if (J >= J_up) {
        ++up;
        ++rep.decided;
        break;
      }
      if (J <= J_dn) {
        ++rep.decided;
        break;
      }
    }
  }
  rep.p_up = rep.decided ? (double)up / rep.decided : 0.5;
  rep.se = binomial_se(rep.p_up, std::max(rep.decided, (long)1));
  return rep;
}

// ===========================================================================
// Ito reference process and weak-convergence metrics
// ===========================================================================

struct ItoEnsemble {
  std::vector<double> J;
  std::vector<char> absorbed;
  double dtau = 0;
  long M = 0;
  uint64_t seed = 0;
};

// Euler-Maruyama samples of dJ = b dtau + sigma dB run to diffusion time s,
// absorbed (frozen) at the optional boundaries.
inline ItoEnsemble ito_reference(real J0, const std::function<real(real)>& b,
                                 const std::function<real(real)>& s2, real s, real dtau, long M,
                                 uint64_t seed, real J_minus = -1e30L, real J_plus = 1e30L) {
  ItoEnsemble out;
  out.dtau = (double)dtau;
  out.M = M;
  out.seed = seed;
  out.J.resize((size_t)M);
  out.absorbed.assign((size_t)M, 0);
  long n = (long)std::llround((double)(s / dtau));
  real sq = std::sqrt(dtau);
  for (long i = 0; i < M; ++i) {
    Rng rng = Rng::stream(seed, (uint64_t)i);
    real J = J0;
    bool stop = false;
    for (long k = 0; k < n && !stop; ++k) {
      J += b(J) * dtau + std::sqrt(std::max(s2(J), (real)0)) * sq * (real)rng.normal();
      if (J <= J_minus) {
        J = J_minus;
        stop = true;
      } else if (J >= J_plus) {
        J = J_plus;
        stop = true;
      }
    }
    out.J[(size_t)i] = (double)J;
    out.absorbed[(size_t)i] = stop;
  }
  return out;
}

struct WeakConvergenceReport {
  double ks = 0;
  double ks_threshold = 0;
  double mean_diff = 0, var_ratio = 0;
};

inline WeakConvergenceReport weak_convergence(const std::vector<double>& model_J,
                                              const std::vector<double>& ito_J) {
  WeakConvergenceReport rep;
  rep.ks = ks_statistic_2s(model_J, ito_J);
  rep.ks_threshold = ks_threshold_2s(model_J.size(), ito_J.size());
  MeanVar a, b;
  for (double x : model_J) a.add(x);
  for (double x : ito_J) b.add(x);
  rep.mean_diff = a.mean - b.mean;
  rep.var_ratio = b.var() > 0 ? a.var() / b.var() : 0;
  return rep;
}

// ===========================================================================
// Eccentricity transform (Ito lemma on the monotone map J -> e)
// ===========================================================================

// d(ecc)/dJ and d^2(ecc)/dJ^2 of the resonant-circle eccentricity map:
// e(J) = sqrt(1 - G^2/L^2) with G = -J - 1/(2L^2).
inline real ecc_of_jacobi_d1(real J, real L = resonant_L()) {
  real G = -J - 1 / (2 * L * L);
  real e = (real)ecc_of_jacobi((double)J, (double)L);
  return G / (e * L * L);
}
inline real ecc_of_jacobi_d2(real J, real L = resonant_L()) {
  real G = -J - 1 / (2 * L * L);
  real e = (real)ecc_of_jacobi((double)J, (double)L);
  real de = G / (e * L * L);
  return (-e - G * de) / (e * e * L * L);
}

struct EccentricityProcess {
  std::vector<double> ecc;                  // pathwise-mapped ensemble
  std::function<real(real)> b_tilde;        // drift in the eccentricity variable
  std::function<real(real)> s2_tilde;       // variance in the eccentricity variable
};

// Transforms a J-ensemble and the diffusion coefficients to the eccentricity
// variable: pathwise e = E(J), and by the Ito lemma
// b~(e) = E'(g(e)) b(g(e)) + 1/2 E''(g(e)) sigma^2(g(e)), sigma~ = E' sigma,
// where g is the inverse of the (strictly monotone) map E.
inline EccentricityProcess eccentricity_process(const std::vector<double>& J_ensemble,
                                                const std::function<real(real)>& b,
                                                const std::function<real(real)>& s2) {
  real L = resonant_L();
  EccentricityProcess out;
  out.ecc.reserve(J_ensemble.size());
  for (double J : J_ensemble) out.ecc.push_back(ecc_of_jacobi(J));
  auto g = [L](real e) {  // inverse map: Jacobi constant at eccentricity e
    real G = L * std::sqrt(1 - e * e);
    return -G - 1 / (2 * L * L);
  };
  out.b_tilde = [b, s2, g, L](real e) {
    real J = g(e);
    return ecc_of_jacobi_d1(J, L) * b(J) + ecc_of_jacobi_d2(J, L) / 2 * s2(J);
  };
  out.s2_tilde = [s2, g, L](real e) {
    real J = g(e);
    real de = ecc_of_jacobi_d1(J, L);
    return de * de * s2(J);
  };
  return out;
}

}  // namespace kg
