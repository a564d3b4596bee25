#include "brownent/gaussian.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

#include "pair_modes.hpp"

namespace brownent {

Covariance2 equilibrium_covariance(const PairParams& params) {
  const auto validated = validate_pair(params);
  if (!validated.stable) {
    throw Error(ErrorCode::NoStationaryState,
                "no stationary state: requires a > |g| (a=" + std::to_string(params.a) +
                    ", g=" + std::to_string(params.g) + ")");
  }
  const auto m = detail::pair_modes(params);
  return detail::from_modes({m.diff_plus / (2.0 * m.rate_plus), m.diff_minus / (2.0 * m.rate_minus),
                             m.diff_cross / (m.rate_plus + m.rate_minus)});
}

Covariance2 propagate_covariance(const PairParams& params, const Covariance2& cov0, double t) {
  validate_pair(params);
  if (!(t >= 0.0) || !std::isfinite(t)) {
    throw Error(ErrorCode::InvalidParameter, "propagation time must be finite and non-negative");
  }
  if (!cov0.is_psd()) {
    throw Error(ErrorCode::InvalidParameter, "initial covariance is not positive semidefinite");
  }
  if (t == 0.0) return cov0;

  const auto m = detail::pair_modes(params);
  const auto c0 = detail::to_modes(cov0);
  const auto noise = detail::mode_noise(m, t);
  const double dp = std::exp(-m.rate_plus * t);
  const double dm = std::exp(-m.rate_minus * t);
  return detail::from_modes({dp * dp * c0.var_plus + noise.var_plus,
                             dm * dm * c0.var_minus + noise.var_minus,
                             dp * dm * c0.cross + noise.cross});
}

OsmoticPair osmotic_velocity(const Covariance2& cov, double T, double x1, double x2) {
  require_positive_definite(cov);
  const double d = cov.det();
  return {T * (cov.s22 * x1 - cov.s12 * x2) / d, T * (cov.s11 * x2 - cov.s12 * x1) / d};
}

double local_osmotic_velocity(double s_jj, double T, double x_j) {
  if (!(s_jj > 0.0)) {
    throw Error(ErrorCode::SingularCovariance, "local osmotic velocity needs a positive variance");
  }
  return T * x_j / s_jj;
}

PhaseMoments gaussian_phase_moments(const Covariance2& cov, double T) {
  require_positive_definite(cov);
  const double d = cov.det();
  PhaseMoments pm;
  pm.xx = cov;
  pm.xu = {{{T, 0.0}, {0.0, T}}};
  pm.uu = {T * T * cov.s22 / d, -T * T * cov.s12 / d, T * T * cov.s11 / d};
  return pm;
}

double witness_value(const Covariance2& cov, double T, SignPair signs) {
  require_positive_definite(cov);
  const double zeta = signs.zeta();
  const double eps = signs.eps_sign();
  return T * T * (cov.s22 + cov.s11 - 2.0 * zeta * cov.s12) / cov.det() + cov.s22 + cov.s11 +
         2.0 * eps * cov.s12;
}

std::string_view to_string(Verdict v) noexcept {
  switch (v) {
    case Verdict::Entangled: return "entangled";
    case Verdict::Undecided: return "undecided";
    case Verdict::Inconclusive: return "inconclusive";
  }
  return "unknown";
}

WitnessReport witness_report(const Covariance2& cov, double T) {
  WitnessReport r;
  r.threshold = 4.0 * T;
  r.min_value = std::numeric_limits<double>::infinity();
  for (const auto s : kAllSignPairs) {
    const double v = witness_value(cov, T, s);
    r.values[s.index()] = v;
    if (v < r.min_value) {
      r.min_value = v;
      r.argmin = s;
    }
  }
  r.verdict = r.min_value < r.threshold ? Verdict::Entangled : Verdict::Undecided;
  return r;
}

WitnessReport witness_report(const Covariance2& cov, const PairParams& params) {
  validate_pair(params);
  require_equal_temperatures(params);
  return witness_report(cov, params.T);
}

std::array<double, 4> local_witness_values(const Covariance2& cov, double T) {
  if (!(cov.s11 > 0.0) || !(cov.s22 > 0.0)) {
    throw Error(ErrorCode::SingularCovariance, "local velocities need positive variances");
  }
  std::array<double, 4> out{};
  const double uu11 = T * T / cov.s11;
  const double uu22 = T * T / cov.s22;
  const double uu12 = T * T * cov.s12 / (cov.s11 * cov.s22);
  for (const auto s : kAllSignPairs) {
    out[s.index()] = uu11 + uu22 + 2.0 * s.zeta() * uu12 + cov.s11 + cov.s22 +
                     2.0 * s.eps_sign() * cov.s12;
  }
  return out;
}

bool konkord_check(double s11, double s12, double T) {
  const double lhs = (s11 - T) * (s11 - T);
  return lhs < s12 * s12 + 2.0 * T * std::abs(s12);
}

double equilibrium_threshold(double a) {
  if (!(a > 0.0) || !std::isfinite(a)) {
    throw Error(ErrorCode::InvalidParameter, "equilibrium threshold needs a > 0");
  }
  return -1.0 + std::sqrt(1.0 + (a - 1.0) * (a - 1.0));
}

std::optional<Window> free_window(double s11_0, double s12_0, double T) {
  if (!(s11_0 >= 0.0) || !std::isfinite(s11_0) || !std::isfinite(s12_0)) {
    throw Error(ErrorCode::InvalidParameter, "free window needs finite s11(0) >= 0");
  }
  if (!(T > 0.0) || !std::isfinite(T)) {
    throw Error(ErrorCode::InvalidParameter, "non-positive temperature");
  }
  const double radical = std::sqrt(s12_0 * s12_0 + 2.0 * T * std::abs(s12_0));
  if (radical == 0.0) return std::nullopt;
  const double t_minus = (T - s11_0 - radical) / (2.0 * T);
  const double t_plus = (T - s11_0 + radical) / (2.0 * T);
  if (t_plus <= 0.0) return std::nullopt;
  if (t_minus > 0.0) return Window{t_minus, t_plus, WindowBranch::OpensLater};
  return Window{0.0, t_plus, WindowBranch::OpenAtStart};
}

}  // namespace brownent
