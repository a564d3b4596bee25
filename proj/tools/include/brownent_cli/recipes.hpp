#pragma once

#include <string>
#include <string_view>
#include <vector>

#include "brownent/gaussian.hpp"
#include "brownent_cli/config.hpp"

namespace brownent::cli {

struct Check {
  std::string name;
  bool passed = false;
  std::string detail;
};

struct RecipeResult {
  std::string name;
  std::vector<Check> checks;
  std::vector<std::string> files;  // relative to the output directory

  bool passed() const;
};

std::vector<std::string> recipe_names();

/// Defaults of a named scenario. Throws ConfigError for an unknown name.
ExperimentConfig recipe_defaults(std::string_view name);

/// Runs the scenario, writes its artifacts and summary.json into config.out.
RecipeResult run_recipe(std::string_view name, const ExperimentConfig& config, unsigned threads);

/// `{"recipe", "passed", "checks"}`.
std::string summary_json(const RecipeResult& r);

/// Exact pair covariance at time t for the config's initial condition.
Covariance2 analytic_covariance(const ExperimentConfig& c, double t);

}  // namespace brownent::cli
