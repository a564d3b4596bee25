#include "brownent/model.hpp"

#include <cmath>
#include <limits>
#include <string>

namespace brownent {

std::string_view to_string(ErrorCode code) noexcept {
  switch (code) {
    case ErrorCode::InvalidParameter: return "invalid_parameter";
    case ErrorCode::NoStationaryState: return "no_stationary_state";
    case ErrorCode::SingularCovariance: return "singular_covariance";
    case ErrorCode::UnequalTemperatures: return "unequal_temperatures";
    case ErrorCode::InsufficientSamples: return "insufficient_samples";
    case ErrorCode::UnsupportedRegime: return "unsupported_regime";
    case ErrorCode::SchemaMismatch: return "schema_mismatch";
    case ErrorCode::Io: return "io";
  }
  return "unknown";
}

namespace {

void require_finite(double v, const char* name) {
  if (!std::isfinite(v)) {
    throw Error(ErrorCode::InvalidParameter, std::string(name) + " must be finite");
  }
}

void require_positive_temperature(double v, const char* name) {
  require_finite(v, name);
  if (v <= 0.0) {
    throw Error(ErrorCode::InvalidParameter,
                std::string("non-positive temperature ") + name + " = " + std::to_string(v));
  }
}

}  // namespace

ValidatedPairParams validate_pair(const PairParams& params) {
  require_finite(params.a, "a");
  require_finite(params.g, "g");
  require_positive_temperature(params.T, "T");
  if (params.t1) require_positive_temperature(*params.t1, "t1");
  if (params.t2) require_positive_temperature(*params.t2, "t2");
  return {params, params.a > std::abs(params.g)};
}

void require_equal_temperatures(const PairParams& params) {
  if (!params.equal_temperatures()) {
    throw Error(ErrorCode::UnequalTemperatures,
                "witness evaluation requires t1 = t2 = T");
  }
}

bool Covariance2::is_positive_definite(double rel_tol) const noexcept {
  return s11 > 0.0 && s22 > 0.0 && det() > rel_tol * s11 * s22;
}

void require_positive_definite(const Covariance2& cov) {
  if (!std::isfinite(cov.s11) || !std::isfinite(cov.s12) || !std::isfinite(cov.s22) ||
      !cov.is_positive_definite(kDegeneracyTolerance)) {
    throw Error(ErrorCode::SingularCovariance,
                "covariance is singular or not positive definite (s11=" + std::to_string(cov.s11) +
                    ", s12=" + std::to_string(cov.s12) + ", s22=" + std::to_string(cov.s22) + ")");
  }
}

void validate(const KramersParams& kp) {
  require_finite(kp.m, "m");
  require_finite(kp.gamma, "gamma");
  require_finite(kp.a, "a");
  if (kp.m <= 0.0) throw Error(ErrorCode::InvalidParameter, "mass must be positive");
  if (kp.gamma <= 0.0) throw Error(ErrorCode::InvalidParameter, "gamma must be positive");
  if (kp.a < 0.0) throw Error(ErrorCode::InvalidParameter, "stiffness must be non-negative");
  require_positive_temperature(kp.T, "T");
}

Timescales timescales(const KramersParams& kp) {
  validate(kp);
  const double tau_x =
      kp.a == 0.0 ? std::numeric_limits<double>::infinity() : kp.gamma / kp.a;
  return {kp.m / kp.gamma, tau_x};
}

double damping_parameter(const KramersParams& kp) {
  return 4.0 * kp.a * kp.m / (kp.gamma * kp.gamma);
}

bool is_overdamped(const KramersParams& kp) { return damping_parameter(kp) < 1.0; }

}  // namespace brownent
