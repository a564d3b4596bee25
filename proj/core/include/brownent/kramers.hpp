#pragma once

#include <filesystem>
#include <vector>

#include "brownent/estimators.hpp"
#include "brownent/model.hpp"
#include "brownent/phase_space.hpp"

// Single underdamped particle m x'' = -a x - gamma x' + eta started from
// x(0) = p(0) = 0, and its overdamped limit.

namespace brownent {

struct ModeRates {
  double omega1 = 0.0;  // fast, momentum relaxation
  double omega2 = 0.0;  // slow, coordinate relaxation
  bool critical = false;  // |omega1 - omega2| below the limit-form switch
};

/// Roots of m w^2 - gamma w + a = 0. Throws UnsupportedRegime for
/// 4 a m / gamma^2 > 1 (oscillatory motion).
ModeRates mode_rates(const KramersParams& kp);

/// Relative rate gap below which the critical-damping limit forms are used.
inline constexpr double kCriticalSwitch = 1e-8;

struct ResponsePair {
  double f = 0.0;       // response of x to an impulse, f(0) = 0, f'(0) = 1
  double resp_g = 0.0;  // response of x to its initial value, g(0) = 1, g'(0) = 0
};

ResponsePair response(const KramersParams& kp, double t);

enum class CorrelatorMethod { ClosedForm, Quadrature };

/// <x(s) x(t)> for the zero initial state.
double coordinate_correlator(const KramersParams& kp, double s, double t,
                             CorrelatorMethod method = CorrelatorMethod::ClosedForm);

/// Overdamped-regime approximation (T/a)(e^{-w2 |s-t|} - e^{-w2 (s+t)}).
double overdamped_correlator(const KramersParams& kp, double s, double t);

struct FiniteEpsVelocities {
  double nu_plus = 0.0;
  double nu_minus = 0.0;
};

/// Forward/backward conditional velocities at probe increment 0 < eps < t.
FiniteEpsVelocities finite_eps_velocities(const KramersParams& kp, double x, double t, double eps);

/// Osmotic velocity of the overdamped model (force -a x / gamma, diffusion
/// T / gamma) started from x(0) = 0: (T/gamma) x / sigma(t).
double overdamped_osmotic_velocity(const KramersParams& kp, double x, double t);

struct CrossoverRow {
  double eps = 0.0;
  double nu_plus = 0.0;
  double nu_minus = 0.0;
  double half_diff = 0.0;  // (nu_minus - nu_plus) / 2
  double u_over = 0.0;
  bool in_plateau = false;  // 10 tau_p <= eps <= 0.1 tau_x
};

struct CrossoverReport {
  KramersParams params;
  double x = 0.0;
  double t = 0.0;
  Timescales scales;
  std::vector<CrossoverRow> rows;
};

CrossoverReport crossover_report(const KramersParams& kp, double x, double t, const std::vector<double>& eps_grid);

/// `eps,nu_plus,nu_minus,half_diff,u_over,in_plateau`
void write_crossover_csv(const std::filesystem::path& path, const CrossoverReport& report);

bool in_plateau(const Timescales& ts, double eps) noexcept;

struct MomentumBin {
  double center = 0.0;
  double mean_x = 0.0;
  std::size_t count = 0;
  Estimate velocity;  // E[p/m | x bin]
  double nu_plus = 0.0;
  double nu_minus = 0.0;
  bool reliable = false;
  bool agrees = false;  // both nu within 3 SE of the bin mean
};

struct MomentumCheck {
  double t = 0.0;
  double eps = 0.0;
  std::vector<MomentumBin> bins;
  std::size_t reliable_bins = 0;
  bool all_agree = false;
};

/// Bins the ensemble at `slice` in x and compares E[p/m | x] with nu+- at
/// increment eps. The ensemble must start from x = p = 0.
MomentumCheck conditional_momentum_check(const PhaseEnsemble& ensemble, std::size_t slice, const KramersParams& kp,
                                         double eps, const Binning& binning = {});

}  // namespace brownent
