#include <catch2/catch_amalgamated.hpp>

#include "kirkgap/kepler.hpp"

using namespace kg;

namespace {

// independent oracle: plain bisection on u - e*sin(u) - ell
long double kepler_bisect(long double ell, long double e) {
  long double lo = ell - 1.5L, hi = ell + 1.5L;
  for (int i = 0; i < 200; ++i) {
    long double mid = 0.5L * (lo + hi);
    if (mid - e * sinl(mid) - ell > 0)
      hi = mid;
    else
      lo = mid;
  }
  return 0.5L * (lo + hi);
}

}  // namespace

TEST_CASE("kepler solve matches bisection oracle") {
  CHECK(std::fabs(solve_kepler(1.0L, 0.5L) - kepler_bisect(1.0L, 0.5L)) < 1e-14L);
  for (double e : {0.0, 0.3, 0.72, 0.9, 0.99}) {
    for (double ell = -9.0; ell < 9.0; ell += 0.37) {
      real u = solve_kepler(ell, e);
      CHECK(std::fabs(u - e * std::sin(u) - ell) < 1e-13L);
      CHECK(std::fabs(u - kepler_bisect(ell, e)) < 1e-12L);
    }
  }
}

TEST_CASE("delaunay/cartesian round trip") {
  for (double L : {0.5, 0.6933612743, 0.8}) {
    for (double G : {0.3, 0.45, 0.52}) {
      if (G >= L) continue;
      for (double ell : {0.3, 2.0, 4.4}) {
        for (double g : {0.0, 1.1, -2.5}) {
          Delaunay d{L, ell, G, g};
          Cart c = delaunay_to_cart(d);
          Delaunay b = cart_to_delaunay(c);
          CHECK(std::fabs(b.L - d.L) < 1e-10L);
          CHECK(std::fabs(b.G - d.G) < 1e-10L);
          CHECK(std::fabs(wrap_pi(b.ell - d.ell)) < 1e-10L);
          CHECK(std::fabs(wrap_pi(b.g - d.g)) < 1e-10L);
        }
      }
    }
  }
}

TEST_CASE("position jacobian matches finite differences") {
  Delaunay d{0.71L, 1.3L, 0.47L, 0.9L};
  auto J = position_jacobian(d);
  real h = 1e-6L;
  for (int i = 0; i < 4; ++i) {
    Delaunay dp = d, dm = d;
    real* fp[] = {&dp.L, &dp.ell, &dp.G, &dp.g};
    real* fm[] = {&dm.L, &dm.ell, &dm.G, &dm.g};
    *fp[i] += h;
    *fm[i] -= h;
    Vec2 qd = (delaunay_to_cart(dp).q - delaunay_to_cart(dm).q) * (1 / (2 * h));
    CHECK(std::fabs(qd.x - J[i].x) < 1e-9L);
    CHECK(std::fabs(qd.y - J[i].y) < 1e-9L);
  }
}

TEST_CASE("rotating-frame energy agrees with cartesian form") {
  Sys sys;
  Delaunay d{0.71L, 1.3L, 0.47L, 0.9L};
  Cart c = delaunay_to_cart(d);
  real r1 = Vec2{c.q.x + sys.mu, c.q.y}.norm();
  real r2 = Vec2{c.q.x - (1 - sys.mu), c.q.y}.norm();
  real Hc = 0.5L * c.p.dot(c.p) - (1 - sys.mu) / r1 - sys.mu / r2 - c.q.cross(c.p);
  CHECK(std::fabs(sys.ham_circ(d) - Hc) < 1e-15L);
  CHECK(std::fabs(sys.jacobi(c) - Hc) < 1e-15L);
}

TEST_CASE("energy gradient matches finite differences") {
  Sys sys;
  Delaunay d{0.71L, 1.3L, 0.47L, 0.9L};
  auto gr = sys.grad_ham_circ(d);
  real h = 1e-6L;
  real fd[4];
  for (int i = 0; i < 4; ++i) {
    Delaunay dp = d, dm = d;
    real* pp[] = {&dp.L, &dp.ell, &dp.G, &dp.g};
    real* pm[] = {&dm.L, &dm.ell, &dm.G, &dm.g};
    *pp[i] += h;
    *pm[i] -= h;
    fd[i] = (sys.ham_circ(dp) - sys.ham_circ(dm)) / (2 * h);
  }
  for (int i = 0; i < 4; ++i) CHECK(std::fabs(gr[i] - fd[i]) < 2e-9L);
}

TEST_CASE("elliptic perturbation linearization") {
  Sys sys;
  Delaunay d{0.69L, 2.1L, 0.5L, 0.4L};
  for (double t : {0.0, 0.7, 2.9, 5.3}) {
    // (W_full - W)/(mu*e0) -> dH_ell0 as e0 -> 0, Richardson in e0
    real a1 = sys.dH_ell(d, t, 1e-5L);
    real a2 = sys.dH_ell(d, t, 5e-6L);
    real lim = 2 * a2 - a1;
    CHECK(std::fabs(lim - sys.dH_ell0(d, t)) < 1e-7L);
  }
}

TEST_CASE("elliptic perturbation at e0=0 has pure first harmonics") {
  Sys sys;
  Delaunay d{0.69L, 2.1L, 0.5L, 0.4L};
  Vec2 q = delaunay_to_cart(d).q;
  auto h = t_harmonics([&](double t) { return (double)sys.dH_ell0_q(q, t); }, 3, 128);
  auto cplus = sys.dH_ell0_plus(q);
  CHECK(std::abs(h[3 + 1] - cplus) < 1e-12);
  CHECK(std::abs(h[3 + 1]) > 1e-4);  // nondegenerate
  for (int k = -3; k <= 3; ++k)
    if (k != 1 && k != -1) CHECK(std::abs(h[3 + k]) < 1e-12);
  // circular perturbation has no t-dependence at all
  auto hc = t_harmonics([&](double t) { return (double)sys.W(q) + 0 * t; }, 2, 64);
  for (int k : {-2, -1, 1, 2}) CHECK(std::abs(hc[2 + k]) < 1e-14);
}

TEST_CASE("finite-e0 harmonics concentrate on +-1") {
  Sys sys;
  Delaunay d{0.69L, 2.1L, 0.5L, 0.4L};
  double e0 = 1e-6;
  auto h = t_harmonics([&](double t) { return (double)sys.dH_ell(d, t, e0); }, 3, 128);
  for (int k = -3; k <= 3; ++k)
    if (k != 1 && k != -1) CHECK(std::abs(h[3 + k]) < 1e-4 * std::abs(h[3 + 1]));
}

TEST_CASE("jacobi interval maps to the expected eccentricity band") {
  CHECK(ecc_of_jacobi(-1.551) == Catch::Approx(0.676).margin(5e-4));
  CHECK(ecc_of_jacobi(-1.485) == Catch::Approx(0.767).margin(5e-4));
  CHECK(ecc_of_jacobi(-1.485) > ecc_of_jacobi(-1.551));
}

TEST_CASE("collision floor raises") {
  Sys sys;
  CHECK_THROWS_AS(sys.W({-(real)sys.mu + 1e-9L, 0}), collision_error);
}
