// Scratch tool: run the full channel search at one Jacobi constant and
// print every refined intersection plus the packaged channels.
#include <chrono>
#include <cstdio>

#include "kirkgap/melnikov.hpp"

using namespace kg;

int main(int argc, char** argv) {
  setvbuf(stdout, nullptr, _IONBF, 0);
  real J = argc > 1 ? std::strtold(argv[1], nullptr) : -1.518L;
  Sys sys;
  auto t0 = std::chrono::steady_clock::now();
  ChannelWorkspace ws = find_channels(sys, J);
  auto t1 = std::chrono::steady_clock::now();
  std::printf("# search took %.1fs, %zu intersections\n",
              std::chrono::duration<double>(t1 - t0).count(), ws.all.size());
  for (auto& hp : ws.all)
    std::printf("u%+d s%+d a=%.6Lf b=%.6Lf z=(%.10Lf, %.10Lf) exc=%d prim=%d ang=%.3Le raw=%.3Le\n",
                hp.sign_u, hp.sign_s, hp.a, hp.b, hp.z[0], hp.z[1], hp.excursions,
                (int)hp.primary, hp.angle, hp.angle_raw);
  for (auto& ch : ws.channels) {
    std::printf("# channel %d: z=(%.12Lf, %.12Lf) a=%.8Lf b=%.8Lf ang=%.4Le\n", ch.index,
                ch.pt.z[0], ch.pt.z[1], ch.pt.a, ch.pt.b, ch.pt.angle);
    std::printf("#   traj rate=%.6Lf rel_err=%.2Le C+=%.3Le C-=%.3Le Ldev/mu=%.4Lf\n",
                ch.traj.rate, ch.traj.rate_rel_err, ch.traj.C_plus, ch.traj.C_minus,
                ch.traj.Lmax_dev / sys.mu);
    // clock-offset limits and Melnikov coefficient for this channel
    auto& ue = ws.u_of(ch.pt);
    auto& se = ws.s_of(ch.pt);
    auto al = melnikov_alpha(ue, ch.pt.a, se, ch.pt.b, ws.po.T);
    std::printf("#   alpha=%.12Lf (/mu=%.4Lf) a+=%.10Lf a-=%.10Lf tail=%.1Le n=%d\n", al.alpha,
                al.alpha / sys.mu, al.alpha_p, al.alpha_m, al.tail, al.n_used);
    auto oq = orbit_quadrature(ws.rm, ws.po, 1e-13L);
    auto B = melnikov_B(ue, ch.pt.a, se, ch.pt.b, ws.po, al, oq, 1e-12L);
    std::printf("#   B=(%.6Le, %.6Le) Bin=(%.3Le, %.3Le) Bout=(%.3Le, %.3Le) tail=%.1Le n=%d\n",
                (real)B.B.real(), (real)B.B.imag(), (real)B.B_in.real(), (real)B.B_in.imag(),
                (real)B.B_out.real(), (real)B.B_out.imag(), B.tail, B.n_used);
    // cross-check: the symmetric-point shortcut must land on the same point
    auto asym = symmetric_homoclinic_parameter(ue);
    if (asym)
      std::printf("#   symmetric param a*=%.8Lf z*=(%.10Lf, %.10Lf)\n", *asym,
                  ue.point(*asym)[0], ue.point(*asym)[1]);
  }
  return 0;
}
