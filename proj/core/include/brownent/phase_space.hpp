#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "brownent/model.hpp"

namespace brownent {

/// Exact transition of the linear Kramers dynamics
///   dx = p/m dt,  dp = (-a x - gamma p/m) dt + sqrt(2 gamma T) dW
/// over one step: (x, p) <- Phi (x, p) + L xi.
class KramersExactStepper {
 public:
  KramersExactStepper(const KramersParams& kp, double dt);
  void step(double& x, double& p, std::span<const double, 2> noise) const noexcept;

  const Eigen::Matrix2d& transition() const noexcept { return transition_; }
  const Eigen::Matrix2d& noise_covariance() const noexcept { return noise_cov_; }

 private:
  Eigen::Matrix2d transition_;
  Eigen::Matrix2d noise_cov_;
  Eigen::Matrix2d noise_factor_;
};

void kramers_euler_step(const KramersParams& kp, double& x, double& p, double dt, double noise) noexcept;

enum class KramersStepper { ExactOU, EulerMaruyama };

enum class KramersStart {
  Point,       // every trajectory starts at (x0, p0)
  Stationary,  // x ~ N(0, T/a), p ~ N(0, m T) independently; needs a > 0
};

struct KramersConfig {
  KramersParams params;
  KramersStart start = KramersStart::Point;
  double x0 = 0.0;
  double p0 = 0.0;
  std::vector<double> t_grid;
  double dt = 1e-4;
  std::size_t n_traj = 1;
  std::uint64_t seed = 0;
  KramersStepper stepper = KramersStepper::ExactOU;
  unsigned threads = 0;
};

/// (x, p) per recorded time, laid out [slice][traj].
struct PhaseEnsemble {
  std::vector<double> times;
  std::size_t n_traj = 0;
  std::vector<double> x;
  std::vector<double> p;
  std::vector<std::string> warnings;

  std::span<const double> x_at(std::size_t slice) const { return {x.data() + slice * n_traj, n_traj}; }
  std::span<const double> p_at(std::size_t slice) const { return {p.data() + slice * n_traj, n_traj}; }
};

/// A step larger than tau_p/2 is integrated anyway but leaves a warning.
PhaseEnsemble simulate_kramers(const KramersConfig& config);

}  // namespace brownent
