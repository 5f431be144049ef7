// Scratch tool: continue the hyperbolic family over a J range and print
// per-J orbit statistics. args: J_lo J_hi dJ
#include <cstdio>

#include "kirkgap/orbits.hpp"

using namespace kg;

int main(int argc, char** argv) {
  setvbuf(stdout, nullptr, _IONBF, 0);
  Sys sys;
  real Jlo = argc > 1 ? std::strtold(argv[1], nullptr) : -1.551L;
  real Jhi = argc > 2 ? std::strtold(argv[2], nullptr) : -1.485L;
  real dJ = argc > 3 ? std::strtold(argv[3], nullptr) : 1e-3L;
  auto fam = continue_family(sys, Jlo, Jhi, dJ);
  real devmax = 0, Tlo = 1e9L, Thi = 0;
  for (auto& po : fam) {
    std::printf("J=%.4Lf ell=%+.3Le L=%.12Lf T-2pi/mu=%.4Lf dev/mu=%.4Lf Lam=%.6Lf tr=%.4Lf\n",
                po.J, po.ell, po.L, (po.T - TWO_PI) / sys.mu, po.Lmax_dev / sys.mu, po.Lambda,
                po.M.trace());
    devmax = std::max(devmax, po.Lmax_dev / sys.mu);
    Tlo = std::min(Tlo, (po.T - TWO_PI) / sys.mu);
    Thi = std::max(Thi, (po.T - TWO_PI) / sys.mu);
  }
  std::printf("summary: dev/mu max=%.4Lf  (T-2pi)/mu in [%.4Lf, %.4Lf]\n", devmax, Tlo, Thi);
  return 0;
}
