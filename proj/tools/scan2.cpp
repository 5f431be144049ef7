// Scratch tool: enumerate roots of map_ell - ell per column; report
// map_L - L at each. args: J elo ehi estep Llo Lhi Lstep
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
  auto de_of = [&](real e, real L) { return rm.map(e, L)[0] - e; };
  for (real e = elo; e <= ehi + 1e-12L; e += estep) {
    real pf = 0;
    bool have = false;
    std::printf("e=%.4Lf:", e);
    for (real L = Llo; L <= Lhi; L += Lstep) {
      real f;
      try {
        f = de_of(e, L);
      } catch (const numerical_error&) {
        std::printf(" {bd %.5Lf}", L);
        have = false;
        continue;
      }
      if (have && pf * f < 0) {
        real a = L - Lstep, b = L, fa = pf;
        for (int it = 0; it < 60 && b - a > 1e-16L; ++it) {
          real m = (a + b) / 2, fm = de_of(e, m);
          if (fa * fm < 0)
            b = m;
          else {
            a = m;
            fa = fm;
          }
        }
        real Lr = (a + b) / 2;
        std::printf(" [%.8Lf dL=%+.3Le]", Lr, rm.map(e, Lr)[1] - Lr);
      }
      pf = f;
      have = true;
    }
    std::printf("\n");
  }
  return 0;
}
