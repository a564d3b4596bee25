#include <cmath>
#include <numbers>
#include <random>

#include "brownent/gaussian.hpp"
#include "doctest.h"
#include "oracles.hpp"

using namespace brownent;
using doctest::Approx;

namespace {

Covariance2 random_pd(std::mt19937_64& rng) {
  std::uniform_real_distribution<double> u(0.1, 3.0);
  std::uniform_real_distribution<double> r(-0.95, 0.95);
  const double s11 = u(rng);
  const double s22 = u(rng);
  return {s11, r(rng) * std::sqrt(s11 * s22), s22};
}

}  // namespace

TEST_CASE("equilibrium covariance") {
  auto c = equilibrium_covariance({2.0, 1.0, 1.0});
  CHECK(c.s11 == Approx(2.0 / 3.0));
  CHECK(c.s22 == Approx(2.0 / 3.0));
  CHECK(c.s12 == Approx(-1.0 / 3.0));

  c = equilibrium_covariance({1.0, 0.0, 3.0});
  CHECK(c.s11 == Approx(3.0));
  CHECK(c.s12 == Approx(0.0));

  try {
    equilibrium_covariance({1.0, 1.0, 1.0});
    FAIL("expected an error");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::NoStationaryState);
  }
}

TEST_CASE("equilibrium covariance is the Gibbs form for random stable pairs") {
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> u(0.1, 4.0);
  for (int i = 0; i < 200; ++i) {
    const double a = u(rng);
    const double g = (u(rng) / 4.0 - 0.5) * 1.99 * a;
    const double T = u(rng);
    const auto c = equilibrium_covariance({a, g, T});
    const double d = a * a - g * g;
    CHECK(c.s11 == Approx(T * a / d).epsilon(1e-12));
    CHECK(c.s12 == Approx(-T * g / d).epsilon(1e-12).scale(T * a / d));
  }
}

TEST_CASE("propagate_covariance examples") {
  auto c = propagate_covariance({1.0, 0.0, 1.0}, {0.0, 0.0, 0.0}, std::log(2.0) / 2.0);
  CHECK(c.s11 == Approx(0.5).epsilon(1e-14));

  const Covariance2 c0{0.7, 0.2, 1.1};
  c = propagate_covariance({1.3, -0.4, 2.0}, c0, 0.0);
  CHECK(c.s11 == c0.s11);
  CHECK(c.s12 == c0.s12);
  CHECK(c.s22 == c0.s22);

  c = propagate_covariance({0.0, 0.0, 1.0}, {0.5, 0.25, 0.5}, 1.0);
  CHECK(c.s11 == Approx(2.5));
  CHECK(c.s12 == Approx(0.25));
  CHECK(c.s22 == Approx(2.5));

  CHECK_THROWS_AS(propagate_covariance({1.0, 0.0, 1.0}, c0, -1.0), Error);
}

TEST_CASE("propagate_covariance matches the covariance ODE integrated by RK4") {
  std::mt19937_64 rng(5);
  std::uniform_real_distribution<double> u(-2.0, 2.0);
  std::uniform_real_distribution<double> pos(0.2, 2.0);
  for (int i = 0; i < 40; ++i) {
    PairParams p{u(rng), u(rng), pos(rng)};
    if (i % 2) {
      p.t1 = pos(rng);
      p.t2 = pos(rng);
    }
    const Covariance2 c0 = random_pd(rng);
    const double t = pos(rng);
    const auto got = propagate_covariance(p, c0, t);
    const auto want = oracle::lyapunov_rk4(p.a, p.g, p.temp1(), p.temp2(), {c0.s11, c0.s12, c0.s22}, t);
    const double scale = std::abs(want[0]) + std::abs(want[2]);
    CHECK(got.s11 == Approx(want[0]).epsilon(1e-9).scale(scale));
    CHECK(got.s12 == Approx(want[1]).epsilon(1e-9).scale(scale));
    CHECK(got.s22 == Approx(want[2]).epsilon(1e-9).scale(scale));
  }
}

TEST_CASE("propagation properties: psd, fixed point, semigroup, decoupling") {
  std::mt19937_64 rng(9);
  std::uniform_real_distribution<double> u(0.1, 3.0);
  for (int i = 0; i < 100; ++i) {
    const double a = u(rng);
    const PairParams p{a, (u(rng) / 3.0 - 0.5) * 1.9 * a, u(rng)};
    const auto c0 = random_pd(rng);
    const double s = u(rng);
    const double t = u(rng);

    CHECK(propagate_covariance(p, c0, t).is_psd());

    const auto eq = equilibrium_covariance(p);
    const auto still = propagate_covariance(p, eq, t);
    CHECK(still.s11 == Approx(eq.s11).epsilon(1e-12));
    CHECK(still.s12 == Approx(eq.s12).epsilon(1e-12).scale(eq.s11));

    const auto two = propagate_covariance(p, propagate_covariance(p, c0, s), t);
    const auto one = propagate_covariance(p, c0, s + t);
    CHECK(two.s11 == Approx(one.s11).epsilon(1e-12));
    CHECK(two.s12 == Approx(one.s12).epsilon(1e-12).scale(one.s11));
    CHECK(two.s22 == Approx(one.s22).epsilon(1e-12));

    const PairParams free_coupling{a, 0.0, p.T};
    const auto dec = propagate_covariance(free_coupling, c0, t);
    CHECK(dec.s12 == Approx(std::exp(-2.0 * a * t) * c0.s12).epsilon(1e-13).scale(std::abs(c0.s12) + 1e-300));
  }
}

TEST_CASE("osmotic velocities") {
  auto u = osmotic_velocity({2.0, 0.0, 2.0}, 1.0, 1.0, 3.0);
  CHECK(u.u1 == Approx(0.5));
  CHECK(u.u2 == Approx(1.5));

  u = osmotic_velocity({1.0, 0.5, 1.0}, 1.0, 1.0, 0.0);
  CHECK(u.u1 == Approx(4.0 / 3.0));
  CHECK(u.u2 == Approx(-2.0 / 3.0));

  CHECK_THROWS_AS(osmotic_velocity({1.0, 1.0, 1.0}, 1.0, 1.0, 0.0), Error);

  CHECK(local_osmotic_velocity(1.0, 1.0, 0.0) == 0.0);
  CHECK(local_osmotic_velocity(2.0, 1.0, 1.0) == Approx(0.5));
  CHECK(local_osmotic_velocity(0.5, 2.0, -1.0) == Approx(-4.0));
  CHECK_THROWS_AS(local_osmotic_velocity(0.0, 1.0, 1.0), Error);
}

TEST_CASE("osmotic velocity is -T grad ln P by finite differences") {
  std::mt19937_64 rng(13);
  std::normal_distribution<double> n;
  for (int i = 0; i < 50; ++i) {
    const auto c = random_pd(rng);
    const double T = 0.5 + std::abs(n(rng));
    const double x1 = n(rng), x2 = n(rng);
    auto log_p = [&](double y1, double y2) {
      const double d = c.det();
      return -0.5 * (c.s22 * y1 * y1 - 2.0 * c.s12 * y1 * y2 + c.s11 * y2 * y2) / d;
    };
    const double h = 1e-5;
    const double g1 = (log_p(x1 + h, x2) - log_p(x1 - h, x2)) / (2 * h);
    const double g2 = (log_p(x1, x2 + h) - log_p(x1, x2 - h)) / (2 * h);
    const auto u = osmotic_velocity(c, T, x1, x2);
    CHECK(u.u1 == Approx(-T * g1).epsilon(1e-6).scale(1.0));
    CHECK(u.u2 == Approx(-T * g2).epsilon(1e-6).scale(1.0));
  }
}

TEST_CASE("phase moments obey the osmotic identities") {
  std::mt19937_64 rng(17);
  for (int i = 0; i < 200; ++i) {
    const auto c = random_pd(rng);
    const double T = 0.3 + (i % 7) * 0.4;
    const auto pm = gaussian_phase_moments(c, T);
    // independent route: u = T C x with C the inverse covariance, so
    // <x_k u_j> = T sum_l C_jl S_lk
    const double d = c.det();
    const double C[2][2] = {{c.s22 / d, -c.s12 / d}, {-c.s12 / d, c.s11 / d}};
    const double S[2][2] = {{c.s11, c.s12}, {c.s12, c.s22}};
    for (int k = 0; k < 2; ++k) {
      for (int j = 0; j < 2; ++j) {
        double xu = 0.0;
        for (int l = 0; l < 2; ++l) xu += T * C[j][l] * S[l][k];
        CHECK(pm.xu[k][j] == Approx(xu).epsilon(1e-12).scale(T));
        CHECK(xu == Approx(k == j ? T : 0.0).epsilon(1e-10).scale(T));
      }
    }
    // Cauchy-Schwarz: Var(x_j) Var(u_j) >= <x_j u_j>^2 = T^2
    CHECK(c.s11 * pm.uu.s11 >= T * T * (1.0 - 1e-12));
    CHECK(c.s22 * pm.uu.s22 >= T * T * (1.0 - 1e-12));
  }
}

TEST_CASE("phase moments agree with sampled u") {
  const Covariance2 c{4.0 / 3.0, -2.0 / 3.0, 4.0 / 3.0};
  const double T = 1.0;
  std::mt19937_64 rng(21);
  std::normal_distribution<double> n;
  const double l11 = std::sqrt(c.s11);
  const double l21 = c.s12 / l11;
  const double l22 = std::sqrt(c.s22 - l21 * l21);
  const int N = 400000;
  double su1 = 0, su11 = 0, su12 = 0, sx1u1 = 0;
  for (int i = 0; i < N; ++i) {
    const double z1 = n(rng), z2 = n(rng);
    const double x1 = l11 * z1, x2 = l21 * z1 + l22 * z2;
    const auto u = osmotic_velocity(c, T, x1, x2);
    su1 += u.u1;
    su11 += u.u1 * u.u1;
    su12 += u.u1 * u.u2;
    sx1u1 += x1 * u.u1;
  }
  const auto pm = gaussian_phase_moments(c, T);
  CHECK(su1 / N == Approx(0.0).scale(1.0).epsilon(0.01));
  CHECK(su11 / N == Approx(pm.uu.s11).epsilon(0.01));
  CHECK(su12 / N == Approx(pm.uu.s12).epsilon(0.02));
  CHECK(sx1u1 / N == Approx(T).epsilon(0.01));
}

TEST_CASE("witness values") {
  const auto eq = equilibrium_covariance({1.0, 0.5, 1.0});
  CHECK(eq.s11 == Approx(4.0 / 3.0));
  CHECK(eq.s12 == Approx(-2.0 / 3.0));
  CHECK(witness_value(eq, 1.0, {-1, 1}) == Approx(7.0 / 3.0));

  for (const auto s : kAllSignPairs) CHECK(witness_value({1.0, 0.0, 1.0}, 1.0, s) == Approx(4.0));

  std::mt19937_64 rng(23);
  for (int i = 0; i < 200; ++i) {
    const auto c = random_pd(rng);
    const Covariance2 flipped{c.s11, -c.s12, c.s22};
    for (const auto s : kAllSignPairs) {
      const SignPair opposite{-s.zeta(), -s.eps_sign()};
      CHECK(witness_value(flipped, 1.3, opposite) == Approx(witness_value(c, 1.3, s)).epsilon(1e-13));
    }
  }
  CHECK_THROWS_AS(witness_value({1.0, 1.0, 1.0}, 1.0, {1, 1}), Error);
}

TEST_CASE("witness reports") {
  auto r = witness_report(equilibrium_covariance({1.0, 0.5, 1.0}), 1.0);
  CHECK(r.min_value == Approx(7.0 / 3.0));
  CHECK(r.verdict == Verdict::Entangled);
  CHECK(r.threshold == 4.0);
  CHECK(r.argmin == SignPair{-1, 1});

  r = witness_report({1.0, 0.0, 1.0}, 1.0);
  CHECK(r.min_value == Approx(4.0));
  CHECK(r.verdict == Verdict::Undecided);

  r = witness_report(equilibrium_covariance({2.0, 0.3, 1.0}), 1.0);
  CHECK(r.verdict == Verdict::Undecided);

  PairParams hot{1.0, 0.5, 1.0};
  hot.t2 = 2.0;
  try {
    witness_report(Covariance2{1.0, 0.1, 1.0}, hot);
    FAIL("expected an error");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::UnequalTemperatures);
  }
}

TEST_CASE("konkord check") {
  CHECK(konkord_check(1.0, 0.3, 1.0));
  CHECK(konkord_check(1.0, -0.01, 1.0));
  CHECK_FALSE(konkord_check(1.7, 0.0, 1.0));
  CHECK(konkord_check(4.0 / 3.0, -2.0 / 3.0, 1.0));
}

TEST_CASE("konkord is equivalent to the witness verdict for s11 = s22") {
  std::mt19937_64 rng(29);
  std::uniform_real_distribution<double> u(0.05, 4.0);
  std::uniform_real_distribution<double> r(-0.99, 0.99);
  int agree = 0;
  for (int i = 0; i < 5000; ++i) {
    const double s = u(rng);
    const double T = u(rng);
    const Covariance2 c{s, r(rng) * s, s};
    const bool k = konkord_check(c.s11, c.s12, T);
    const auto rep = witness_report(c, T);
    // skip points within rounding of the boundary
    const double lhs = (s - T) * (s - T);
    const double rhs = c.s12 * c.s12 + 2.0 * T * std::abs(c.s12);
    if (std::abs(lhs - rhs) < 1e-10 * (lhs + rhs)) continue;
    CHECK(k == (rep.verdict == Verdict::Entangled));
    ++agree;
  }
  CHECK(agree > 4900);
}

TEST_CASE("equilibrium threshold") {
  CHECK(equilibrium_threshold(1.0) == 0.0);
  CHECK(equilibrium_threshold(2.0) == Approx(std::sqrt(2.0) - 1.0));
  CHECK(equilibrium_threshold(2.0) == Approx(0.414214).epsilon(1e-6));
  CHECK(equilibrium_threshold(3.0) == Approx(std::sqrt(5.0) - 1.0));
  CHECK_THROWS_AS(equilibrium_threshold(0.0), Error);
}

TEST_CASE("threshold agrees with the witness on the equilibrium state") {
  std::mt19937_64 rng(31);
  std::uniform_real_distribution<double> u(0.05, 5.0);
  std::uniform_real_distribution<double> f(-0.999, 0.999);
  for (int i = 0; i < 5000; ++i) {
    const double a = u(rng);
    const double g = f(rng) * a;
    const double gmin = equilibrium_threshold(a);
    if (std::abs(std::abs(g) - gmin) < 1e-12) continue;
    const auto rep = witness_report(equilibrium_covariance({a, g, 1.0}), 1.0);
    CHECK((rep.verdict == Verdict::Entangled) == (std::abs(g) > gmin));
  }
}

TEST_CASE("witness scaling with temperature") {
  // equilibrium covariances scale with T, so the ratio min / 4T is T-free
  const auto ref = witness_report(equilibrium_covariance({2.0, 0.8, 1.0}), 1.0);
  for (double T : {1e-6, 1e-3, 0.1, 10.0}) {
    const auto r = witness_report(equilibrium_covariance({2.0, 0.8, T}), T);
    CHECK(r.min_value / (4.0 * T) == Approx(ref.min_value / 4.0).epsilon(1e-12));
  }
  // a fixed coordinate spread never passes the witness once T -> 0
  const auto c = equilibrium_covariance({1.0, 0.5, 1.0});
  for (double T : {1e-2, 1e-4, 1e-6}) {
    const auto r = witness_report(c, T);
    CHECK(r.min_value / (4.0 * T) >= 1.0);
    CHECK(r.verdict == Verdict::Undecided);
  }
}

TEST_CASE("local witness values use T x_j / s_jj") {
  const Covariance2 c{2.0, 0.5, 1.0};
  const auto v = local_witness_values(c, 1.0);
  const double uu11 = 1.0 / 2.0, uu22 = 1.0, uu12 = 0.5 / 2.0;
  CHECK(v[SignPair{1, 1}.index()] == Approx(uu11 + uu22 + 2 * uu12 + 3.0 + 1.0));
  CHECK(v[SignPair{-1, -1}.index()] == Approx(uu11 + uu22 - 2 * uu12 + 3.0 - 1.0));
}

TEST_CASE("free window") {
  auto w = free_window(0.5, 0.1, 1.0);
  REQUIRE(w);
  CHECK(w->t_minus == Approx(0.020871).epsilon(1e-5));
  CHECK(w->t_plus == Approx(0.479129).epsilon(1e-6));
  CHECK(w->branch == WindowBranch::OpensLater);

  CHECK_FALSE(free_window(1.0, 0.0, 1.0));

  w = free_window(0.5, 0.25, 1.0);
  REQUIRE(w);
  CHECK(w->t_minus == 0.0);
  CHECK(w->branch == WindowBranch::OpenAtStart);

  CHECK_FALSE(free_window(3.0, 0.1, 1.0));
}

TEST_CASE("free window edges are where the propagated witness crosses 4T") {
  const double s0 = 0.5, c0 = 0.1, T = 1.0;
  const auto w = free_window(s0, c0, T);
  REQUIRE(w);
  const PairParams free_pair{0.0, 0.0, T};
  auto min_at = [&](double t) {
    return witness_report(propagate_covariance(free_pair, {s0, c0, s0}, t), T).min_value - 4.0 * T;
  };
  CHECK(min_at(w->t_minus) == Approx(0.0).scale(1.0).epsilon(1e-12));
  CHECK(min_at(w->t_plus) == Approx(0.0).scale(1.0).epsilon(1e-12));
  CHECK(min_at(0.5 * (w->t_minus + w->t_plus)) < 0.0);
  CHECK(min_at(0.5 * w->t_minus) > 0.0);
  CHECK(min_at(w->t_plus + 0.05) > 0.0);
}
