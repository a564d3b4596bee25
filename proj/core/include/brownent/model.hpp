#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <string_view>

#include "brownent/error.hpp"

// Unit conventions for the overdamped modules: damping and mass are fixed to
// one, so coordinates and osmotic velocities both carry the dimension sqrt(T)
// and stiffness/coupling constants are rates. Only the Kramers (underdamped)
// code keeps m and gamma explicit.

namespace brownent {

/// Harmonic pair U = a x1^2/2 + a x2^2/2 + g x1 x2, each particle coupled to
/// its own bath. t1/t2 default to T.
struct PairParams {
  double a = 1.0;
  double g = 0.0;
  double T = 1.0;
  std::optional<double> t1;
  std::optional<double> t2;

  double temp1() const noexcept { return t1.value_or(T); }
  double temp2() const noexcept { return t2.value_or(T); }
  bool equal_temperatures() const noexcept { return temp1() == T && temp2() == T; }

  bool operator==(const PairParams&) const = default;
};

struct ValidatedPairParams {
  PairParams params;
  bool stable = false;  // a > |g|: U positive definite, stationary state exists
};

/// Checks finiteness and temperature positivity; never modifies the values.
ValidatedPairParams validate_pair(const PairParams& params);

/// Throws UnequalTemperatures unless t1 = t2 = T.
void require_equal_temperatures(const PairParams& params);

/// Symmetric 2x2 coordinate covariance.
struct Covariance2 {
  double s11 = 0.0;
  double s12 = 0.0;
  double s22 = 0.0;

  double det() const noexcept { return s11 * s22 - s12 * s12; }
  bool is_psd() const noexcept { return s11 >= 0.0 && s22 >= 0.0 && det() >= 0.0; }
  /// Strict positivity with the relative guard d > tol * s11 * s22.
  bool is_positive_definite(double rel_tol = 1e-12) const noexcept;
  Covariance2 swapped() const noexcept { return {s22, s12, s11}; }

  bool operator==(const Covariance2&) const = default;
};

/// Relative tolerance used to reject near-singular covariances.
inline constexpr double kDegeneracyTolerance = 1e-12;

/// Throws SingularCovariance if cov is not strictly positive definite.
void require_positive_definite(const Covariance2& cov);

struct KramersParams {
  double m = 1.0;
  double gamma = 1.0;
  double a = 0.0;
  double T = 1.0;

  bool operator==(const KramersParams&) const = default;
};

void validate(const KramersParams& kp);

struct Timescales {
  double tau_p = 0.0;  // m / gamma
  double tau_x = 0.0;  // gamma / a, +inf for a free particle
};

Timescales timescales(const KramersParams& kp);

/// 4 a m / gamma^2; the overdamped regime is damping_parameter < 1.
double damping_parameter(const KramersParams& kp);
bool is_overdamped(const KramersParams& kp);

/// Witness sign choice (zeta, eps_sign), each +1 or -1.
class SignPair {
 public:
  constexpr SignPair(int zeta, int eps_sign) : zeta_(zeta), eps_sign_(eps_sign) {
    if ((zeta != 1 && zeta != -1) || (eps_sign != 1 && eps_sign != -1)) {
      throw Error(ErrorCode::InvalidParameter, "sign pair entries must be +1 or -1");
    }
  }

  constexpr int zeta() const noexcept { return zeta_; }
  constexpr int eps_sign() const noexcept { return eps_sign_; }
  /// Position in kAllSignPairs.
  constexpr std::size_t index() const noexcept {
    return (zeta_ > 0 ? 0u : 2u) + (eps_sign_ > 0 ? 0u : 1u);
  }

  friend constexpr bool operator==(SignPair, SignPair) = default;

 private:
  int zeta_;
  int eps_sign_;
};

inline constexpr std::array<SignPair, 4> kAllSignPairs{
    SignPair{1, 1}, SignPair{1, -1}, SignPair{-1, 1}, SignPair{-1, -1}};

}  // namespace brownent
