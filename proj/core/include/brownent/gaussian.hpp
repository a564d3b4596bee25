#pragma once

#include <array>
#include <optional>
#include <string_view>

#include "brownent/model.hpp"

// Closed-form statistics of the harmonic pair. Means are taken to be zero; all
// moments below are centered.

namespace brownent {

/// Stationary (Gibbs for equal temperatures) covariance. Requires a > |g|.
Covariance2 equilibrium_covariance(const PairParams& params);

/// Exact second moments at time t >= 0 starting from cov0, via the normal
/// modes r+- = (x1 +- x2)/2 with rates a +- g. Unequal bath temperatures are
/// supported (the mode noises are then correlated).
Covariance2 propagate_covariance(const PairParams& params, const Covariance2& cov0, double t);

struct OsmoticPair {
  double u1 = 0.0;
  double u2 = 0.0;
};

/// u = -T grad ln P for the centered Gaussian with covariance cov.
OsmoticPair osmotic_velocity(const Covariance2& cov, double T, double x1, double x2);

/// Osmotic velocity conditioned on one coordinate only: T x_j / s_jj.
double local_osmotic_velocity(double s_jj, double T, double x_j);

/// Joint second moments of (x1, x2, u1, u2) for the Gaussian ensemble.
struct PhaseMoments {
  Covariance2 xx;
  std::array<std::array<double, 2>, 2> xu{};  // xu[k][j] = <x_k u_j>
  Covariance2 uu;
};

PhaseMoments gaussian_phase_moments(const Covariance2& cov, double T);

/// <(du1 + zeta du2)^2> + <(dx1 + eps dx2)^2> for the Gaussian ensemble.
double witness_value(const Covariance2& cov, double T, SignPair signs);

enum class Verdict {
  Entangled,     // witness minimum strictly below 4T
  Undecided,     // minimum >= 4T; the criterion is only sufficient
  Inconclusive,  // sample-based: inside the guard band around 4T
};

std::string_view to_string(Verdict v) noexcept;

struct WitnessReport {
  std::array<double, 4> values{};  // indexed like kAllSignPairs
  SignPair argmin{1, 1};
  double min_value = 0.0;
  double threshold = 0.0;  // 4T
  Verdict verdict = Verdict::Undecided;

  double value(SignPair s) const { return values[s.index()]; }
};

WitnessReport witness_report(const Covariance2& cov, double T);

/// Same as witness_report but checks that the model has equal temperatures.
WitnessReport witness_report(const Covariance2& cov, const PairParams& params);

/// Witness values obtained with the locally defined osmotic velocities
/// T x_j / s_jj. Reported for comparison only; no verdict is attached.
std::array<double, 4> local_witness_values(const Covariance2& cov, double T);

/// (s11 - T)^2 < s12^2 + 2 T |s12|: witness condition for s11 = s22.
bool konkord_check(double s11, double s12, double T);

/// Smallest |g| above which the equilibrium state of stiffness a violates the
/// witness bound: -1 + sqrt(1 + (a-1)^2).
double equilibrium_threshold(double a);

enum class WindowBranch {
  OpensLater,   // condition false at t = 0, holds on (t_minus, t_plus)
  OpenAtStart,  // condition already holds at t = 0; t_minus clipped to 0
};

struct Window {
  double t_minus = 0.0;
  double t_plus = 0.0;
  WindowBranch branch = WindowBranch::OpensLater;
};

/// Times at which the witness condition holds for a free pair (a = g = 0)
/// with s11 = s22 = s11_0 and cross-covariance s12_0 at t = 0.
std::optional<Window> free_window(double s11_0, double s12_0, double T);

}  // namespace brownent
