#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "brownent/estimators.hpp"
#include "brownent/langevin.hpp"
#include "brownent/model.hpp"

namespace brownent::cli {

enum class InitialKind {
  Equilibrium,  // Gibbs covariance of the pair; needs a > |g|
  Covariance,   // zero mean, covariance s11, s12, s22
  Origin,       // every trajectory starts at x = 0
};

/// Parameters of one run. Every field has a default, so an empty JSON object
/// is a valid config.
struct ExperimentConfig {
  std::string scenario = "custom";

  PairParams model{1.0, 0.5, 1.0};

  InitialKind initial = InitialKind::Equilibrium;
  Covariance2 cov0{1.0, 0.0, 1.0};
  InitialSampling sampling = InitialSampling::Iid;

  std::vector<double> t_grid{1.0};
  double dt = 1e-3;
  double eps = 1e-2;
  double t_probe = 0.02;
  double burn_in = 0.0;  // 0: 10 / (a - |g|)

  std::size_t n_traj = 100000;
  std::uint64_t seed = 1;
  Stepper stepper = Stepper::Exact;

  WitnessMode witness_mode = WitnessMode::GaussianPlugin;
  Binning binning;

  double scan_g_min = 0.0;
  double scan_g_max = 0.8;
  double scan_g_step = 0.01;

  KramersParams kramers{0.01, 1.0, 1.0, 1.0};
  double kramers_x = 1.0;
  double kramers_t = 20.0;
  std::vector<double> kramers_eps_grid;  // empty: default log grid
  double kramers_dt = 2e-4;
  double kramers_t_sim = 0.25;
  double kramers_eps_check = 5e-4;  // increment of the momentum comparison
  std::size_t kramers_n_traj = 50000;

  std::string out = "out";

  bool operator==(const ExperimentConfig&) const = default;
};

/// Every violated precondition, one message each.
class ConfigError : public std::runtime_error {
 public:
  explicit ConfigError(std::vector<std::string> violations);
  const std::vector<std::string>& violations() const noexcept { return violations_; }

 private:
  std::vector<std::string> violations_;
};

std::string to_json(const ExperimentConfig& c);
/// Parses and validates. Unknown keys are violations.
ExperimentConfig config_from_json(std::string_view text);
/// Same, starting from `base` for keys the text leaves out.
ExperimentConfig config_from_json(std::string_view text, const ExperimentConfig& base);

/// Applies `key=value` overrides (dotted paths, JSON or bare-string values).
ExperimentConfig apply_overrides(const ExperimentConfig& base, const std::vector<std::string>& overrides);

std::vector<std::string> validate(const ExperimentConfig& c);

/// Burn-in time actually used: burn_in if set, else 10 / (a - |g|).
double resolved_burn_in(const ExperimentConfig& c);

/// Log-spaced eps values from 1e-5 to 0.5 plus 0.1, 0.15, 0.2, sorted.
std::vector<double> default_crossover_grid();

/// Initial condition of the pair model described by the config.
InitialCondition pair_initial(const ExperimentConfig& c);

/// Langevin setup for the pair with the given grid.
EnsembleConfig pair_ensemble(const ExperimentConfig& c, std::vector<double> t_grid, unsigned threads);

}  // namespace brownent::cli
