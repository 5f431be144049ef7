// Scratch tool: enumerate roots of map_L - L per ell column; report
// map_ell - ell at each root. args: J elo ehi estep Llo Lhi Lstep
#include <cstdio>

#include "kirkgap/orbits.hpp"

using namespace kg;

int main(int argc, char** argv) {
  setvbuf(stdout, nullptr, _IONBF, 0);
  Sys sys;
  real J = std::strtold(argv[1], nullptr);
  real elo = std::strtold(argv[2], nullptr), ehi = std::strtold(argv[3], nullptr);
  real estep = std::strtold(argv[4], nullptr);
  real Llo = std::strtold(argv[5], nullptr), Lhi = std::strtold(argv[6], nullptr);
  real Lstep = std::strtold(argv[7], nullptr);
  ReducedMap rm{sys, J, 1e-13L};
  auto fL_of = [&](real e, real L) { return rm.map(e, L)[1] - L; };
  for (real e = elo; e <= ehi + 1e-12L; e += estep) {
    real pf = 0;
    bool have = false;
    std::printf("e=%.4Lf:", e);
    for (real L = Llo; L <= Lhi; L += Lstep) {
      real f;
      try {
        f = fL_of(e, L);
      } catch (const numerical_error&) {
        std::printf(" {bd %.5Lf}", L);
        have = false;
        continue;
      }
      if (have && pf * f < 0) {
        real a = L - Lstep, b = L, fa = pf;
        for (int it = 0; it < 60 && b - a > 1e-16L; ++it) {
          real m = (a + b) / 2, fm = fL_of(e, m);
          if (fa * fm < 0)
            b = m;
          else {
            a = m;
            fa = fm;
          }
        }
        real Lr = (a + b) / 2;
        std::printf(" [%.8Lf de=%+.3Le]", Lr, rm.map(e, Lr)[0] - e);
      }
      pf = f;
      have = true;
    }
    std::printf("\n");
  }
  return 0;
}
