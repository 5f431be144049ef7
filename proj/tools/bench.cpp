// Scratch tool: diagnostics of a candidate fixed point. args: J ell L
#include <cstdio>

#include "kirkgap/orbits.hpp"

using namespace kg;

int main(int argc, char** argv) {
  setvbuf(stdout, nullptr, _IONBF, 0);
  Sys sys;
  real J = std::strtold(argv[1], nullptr);
  real e = std::strtold(argv[2], nullptr);
  real L = std::strtold(argv[3], nullptr);
  ReducedMap rm{sys, J, 1e-13L};
  // polish with 1D solves: alternate dell-root in L? use 2D FD Newton, small steps
  for (int it = 0; it < 8; ++it) {
    auto y = rm.map(e, L);
    real f0 = y[0] - e, f1 = y[1] - L;
    std::printf("it=%d (%.15Lf, %.15Lf) f=(%.3Le, %.3Le)\n", it, e, L, f0, f1);
    if (std::fabs(f0) < 1e-13L && std::fabs(f1) < 1e-14L) break;
    real he = 1e-7L, hL = 1e-8L;
    auto fpe = rm.map(e + he, L), fme = rm.map(e - he, L);
    auto fpL = rm.map(e, L + hL), fmL = rm.map(e, L - hL);
    real a = (fpe[0] - fme[0]) / (2 * he) - 1, b = (fpL[0] - fmL[0]) / (2 * hL);
    real c = (fpe[1] - fme[1]) / (2 * he), d = (fpL[1] - fmL[1]) / (2 * hL) - 1;
    real det = a * d - b * c;
    e -= (d * f0 - b * f1) / det;
    L -= (-c * f0 + a * f1) / det;
  }
  PeriodicOrbit po = analyze_orbit(rm, e, L);
  std::printf("saddle: ell=%.15Lf L=%.15Lf G=%.15Lf\n", po.ell, po.L, po.G);
  std::printf("T-2pi=%.8Le (/mu=%.4Lf) nu=%.12Lf\n", po.T - TWO_PI, (po.T - TWO_PI) / sys.mu,
              po.nu);
  std::printf("M=[%.8Lf %.8Lf; %.8Lf %.8Lf] tr=%.8Lf det=%.10Lf\n", po.M.a, po.M.b, po.M.c,
              po.M.d, po.M.trace(), po.M.det());
  if (po.hyperbolic())
    std::printf("Lambda=%.10Lf lam_s=%.10Lf vu=(%.6Lf,%.6Lf) vs=(%.6Lf,%.6Lf)\n", po.eig.lam_u,
                po.eig.lam_s, po.eig.vu[0], po.eig.vu[1], po.eig.vs[0], po.eig.vs[1]);
  std::printf("Lmax_dev=%.6Le (/mu=%.4Lf)\n", po.Lmax_dev, po.Lmax_dev / sys.mu);
  // L(t) profile along the orbit
  State y = rm.lift(po.ell, po.L);
  Flow f{rm.sys, 0, 0};
  integrate_observed(f, y, 0, TWO_PI, TWO_PI / 16, [&](const State& yy, real s) {
    std::printf("  s=%.4Lf ell=%+.6Lf L=%.8Lf (dev/mu=%+.2Lf) G=%.6Lf t=%.4Lf\n", s, yy[0],
                yy[1], (yy[1] - resonant_L()) / sys.mu, yy[2], yy[3]);
  });
  return 0;
}
