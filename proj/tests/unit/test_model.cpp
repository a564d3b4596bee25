#include <cmath>
#include <limits>
#include <random>

#include "brownent/model.hpp"
#include "doctest.h"

using namespace brownent;

TEST_CASE("validate_pair flags stability") {
  CHECK(validate_pair({2.0, 1.0, 1.0}).stable);
  CHECK_FALSE(validate_pair({1.0, 1.5, 1.0}).stable);
  CHECK_FALSE(validate_pair({1.0, -1.0, 1.0}).stable);

  const auto v = validate_pair({2.0, 1.0, 1.0});
  CHECK(v.params.a == 2.0);
  CHECK(v.params.g == 1.0);
  CHECK(v.params.T == 1.0);
}

TEST_CASE("validate_pair rejects bad temperatures and non-finite values") {
  try {
    validate_pair({1.0, 0.5, -1.0});
    FAIL("expected an error");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::InvalidParameter);
    CHECK(std::string(e.what()).find("non-positive temperature") != std::string::npos);
  }
  PairParams p{1.0, 0.5, 1.0};
  p.t2 = 0.0;
  CHECK_THROWS_AS(validate_pair(p), Error);
  CHECK_THROWS_AS(validate_pair({std::nan(""), 0.0, 1.0}), Error);
  CHECK_THROWS_AS(validate_pair({1.0, std::numeric_limits<double>::infinity(), 1.0}), Error);
}

TEST_CASE("validate_pair is idempotent and stable iff a > |g|") {
  std::mt19937_64 rng(7);
  std::uniform_real_distribution<double> u(-3.0, 3.0);
  for (int i = 0; i < 1000; ++i) {
    const PairParams p{u(rng), u(rng), 0.5 + std::abs(u(rng))};
    const auto once = validate_pair(p);
    const auto twice = validate_pair(once.params);
    CHECK(once.stable == twice.stable);
    CHECK(once.stable == (p.a > std::abs(p.g)));
  }
}

TEST_CASE("equal temperature requirement") {
  PairParams p{1.0, 0.5, 1.0};
  CHECK_NOTHROW(require_equal_temperatures(p));
  p.t1 = 1.0;
  CHECK_NOTHROW(require_equal_temperatures(p));
  p.t2 = 2.0;
  CHECK_THROWS_AS(require_equal_temperatures(p), Error);
}

TEST_CASE("timescales") {
  auto ts = timescales({0.01, 1.0, 1.0, 1.0});
  CHECK(ts.tau_p == doctest::Approx(0.01));
  CHECK(ts.tau_x == doctest::Approx(1.0));

  ts = timescales({1.0, 1.0, 0.0, 1.0});
  CHECK(ts.tau_p == 1.0);
  CHECK(std::isinf(ts.tau_x));

  const KramersParams stiff{1.0, 2.0, 8.0, 1.0};
  ts = timescales(stiff);
  CHECK(ts.tau_p == 0.5);
  CHECK(ts.tau_x == 0.25);
  CHECK(damping_parameter(stiff) == 8.0);
  CHECK_FALSE(is_overdamped(stiff));
  CHECK(is_overdamped({0.01, 1.0, 1.0, 1.0}));
}

TEST_CASE("tau_p * tau_x = m / a") {
  std::mt19937_64 rng(11);
  std::uniform_real_distribution<double> u(0.01, 10.0);
  for (int i = 0; i < 1000; ++i) {
    const KramersParams kp{u(rng), u(rng), u(rng), 1.0};
    const auto ts = timescales(kp);
    CHECK(ts.tau_p * ts.tau_x == doctest::Approx(kp.m / kp.a).epsilon(1e-14));
  }
}

TEST_CASE("Kramers parameter validation") {
  CHECK_THROWS_AS(validate(KramersParams{0.0, 1.0, 1.0, 1.0}), Error);
  CHECK_THROWS_AS(validate(KramersParams{1.0, -1.0, 1.0, 1.0}), Error);
  CHECK_THROWS_AS(validate(KramersParams{1.0, 1.0, -0.1, 1.0}), Error);
  CHECK_THROWS_AS(validate(KramersParams{1.0, 1.0, 1.0, 0.0}), Error);
  CHECK_NOTHROW(validate(KramersParams{1.0, 1.0, 0.0, 1.0}));
}

TEST_CASE("covariance positivity") {
  CHECK(Covariance2{1.0, 0.5, 1.0}.is_positive_definite());
  CHECK_FALSE(Covariance2{1.0, 1.0, 1.0}.is_positive_definite());
  CHECK(Covariance2{1.0, 1.0, 1.0}.is_psd());
  CHECK_FALSE(Covariance2{1.0, 1.1, 1.0}.is_psd());
  CHECK_THROWS_AS(require_positive_definite({1.0, 1.0, 1.0}), Error);
  const Covariance2 c{2.0, 0.3, 5.0};
  CHECK(c.swapped().s11 == 5.0);
  CHECK(c.swapped().s22 == 2.0);
}

TEST_CASE("sign pairs") {
  CHECK_THROWS_AS(SignPair(0, 1), Error);
  CHECK_THROWS_AS(SignPair(1, 2), Error);
  for (std::size_t i = 0; i < kAllSignPairs.size(); ++i) CHECK(kAllSignPairs[i].index() == i);
}

TEST_CASE("error codes have stable names") {
  CHECK(to_string(ErrorCode::NoStationaryState) == "no_stationary_state");
  CHECK(to_string(ErrorCode::SchemaMismatch) == "schema_mismatch");
}
