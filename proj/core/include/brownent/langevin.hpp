#pragma once

#include <Eigen/Dense>
#include <array>
#include <cstdint>
#include <optional>
#include <span>
#include <variant>
#include <vector>

#include "brownent/model.hpp"

namespace brownent {

/// Overdamped N-particle model dx_i = -(K x)_i dt - b_i x_i^3 dt + sqrt(2 T_i) dW_i
/// (mass and damping equal to one).
struct OverdampedModel {
  Eigen::MatrixXd stiffness;   // symmetric N x N
  std::vector<double> temps;   // per-particle bath temperature
  std::vector<double> quartic; // empty, or per-particle b_i >= 0

  std::size_t size() const noexcept { return temps.size(); }
  bool is_harmonic() const noexcept;
  /// Throws InvalidParameter on shape mismatch, asymmetry or bad temperatures.
  void validate() const;

  /// Present when the model is the symmetric harmonic pair [[a, g], [g, a]].
  std::optional<PairParams> as_pair() const;

  static OverdampedModel harmonic_pair(const PairParams& params);
  static OverdampedModel single(double a, double T, double quartic = 0.0);
};

/// One exact transition of the harmonic pair over dt in normal-mode form.
/// `noise` holds two independent standard normals.
std::array<double, 2> exact_pair_step(const PairParams& params, std::array<double, 2> x, double dt,
                                      std::array<double, 2> noise);

/// exact_pair_step with the dt-dependent coefficients precomputed.
class ExactPairStepper {
 public:
  ExactPairStepper(const PairParams& params, double dt);
  void step(std::span<double> x, std::span<const double> noise) const noexcept;

 private:
  double decay_plus_;
  double decay_minus_;
  double chol11_;  // lower Cholesky factor of the mode noise covariance
  double chol21_;
  double chol22_;
};

/// Exact transition for any harmonic model: x <- exp(-K dt) x + L xi with
/// L L^T the noise covariance accumulated over dt (Van Loan's method).
class ExactLinearStepper {
 public:
  ExactLinearStepper(const OverdampedModel& model, double dt);
  void step(std::span<double> x, std::span<const double> noise, std::span<double> scratch) const noexcept;

  const Eigen::MatrixXd& transition() const noexcept { return transition_; }
  const Eigen::MatrixXd& noise_covariance() const noexcept { return noise_cov_; }

 private:
  Eigen::MatrixXd transition_;
  Eigen::MatrixXd noise_cov_;
  Eigen::MatrixXd noise_factor_;
};

void euler_maruyama_step(const OverdampedModel& model, std::span<double> x, double dt,
                         std::span<const double> noise);

enum class Stepper { Exact, EulerMaruyama };
enum class InitialSampling {
  Iid,            // independent draws from N(mean, cov)
  MomentMatched,  // draws rescaled so the ensemble mean/covariance equal the target exactly
};

struct GaussianInitial {
  Eigen::VectorXd mean;
  Eigen::MatrixXd cov;
  InitialSampling sampling = InitialSampling::Iid;
};

/// One starting point per trajectory.
using InitialPoints = std::vector<std::vector<double>>;
using InitialCondition = std::variant<GaussianInitial, InitialPoints>;

struct EnsembleConfig {
  OverdampedModel model;
  InitialCondition initial;
  std::vector<double> t_grid;  // strictly increasing, t >= 0
  double dt = 1e-3;
  std::size_t n_traj = 1;
  std::uint64_t seed = 0;
  Stepper stepper = Stepper::Exact;
  unsigned threads = 0;
  bool keep_full_paths = false;  // record every integration step, not just t_grid
};

/// Receives coordinate vectors at the recorded times. record() is called
/// concurrently, but never twice for the same (slice, traj).
class SliceSink {
 public:
  virtual ~SliceSink() = default;
  virtual void prepare(std::span<const double> times, std::size_t n_traj, std::size_t dim) = 0;
  virtual void record(std::size_t slice, std::size_t traj, std::span<const double> x) = 0;
};

/// Coordinates at each recorded time, laid out [slice][traj][coord].
class EnsembleStore final : public SliceSink {
 public:
  void prepare(std::span<const double> times, std::size_t n_traj, std::size_t dim) override;
  void record(std::size_t slice, std::size_t traj, std::span<const double> x) override;

  const std::vector<double>& times() const noexcept { return times_; }
  std::size_t n_traj() const noexcept { return n_traj_; }
  std::size_t dim() const noexcept { return dim_; }
  std::span<const double> point(std::size_t slice, std::size_t traj) const;
  std::vector<double> coordinate(std::size_t slice, std::size_t coord) const;

 private:
  std::vector<double> times_;
  std::size_t n_traj_ = 0;
  std::size_t dim_ = 0;
  std::vector<double> data_;
};

/// Runs the ensemble. Trajectory k draws its noise from the stream keyed by
/// (seed, k, step), so the output is a pure function of the configuration.
void simulate_ensemble(const EnsembleConfig& config, SliceSink& sink);
EnsembleStore simulate_ensemble(const EnsembleConfig& config);

/// Three-time probe record: x_j(t - eps), the full x(t), x_j(t + eps) per
/// trajectory. `j` is zero-based.
struct EnsembleSlices {
  std::size_t dim = 0;
  std::size_t j = 0;
  double eps = 0.0;
  double t = 0.0;
  double dt = 0.0;  // integration step, 0 if unknown
  std::uint64_t seed = 0;
  std::optional<OverdampedModel> model;
  std::vector<std::uint64_t> traj;
  std::vector<double> xj_minus;
  std::vector<double> x;  // size() * dim, row-major
  std::vector<double> xj_plus;

  std::size_t size() const noexcept { return traj.size(); }
  std::span<const double> point(std::size_t i) const { return {x.data() + i * dim, dim}; }
  /// Bath temperature of the probed particle, if the model is known.
  std::optional<double> probed_temperature() const;
};

/// Integrates the trajectories of `base` (its t_grid is ignored) and records
/// the probe at t - eps, t and t + eps on each continuous path.
EnsembleSlices probe_slices(const EnsembleConfig& base, double t, double eps, std::size_t j);

/// Probes several particle indices of the same trajectories.
std::vector<EnsembleSlices> probe_slices(const EnsembleConfig& base, double t, double eps,
                                         std::span<const std::size_t> indices);

}  // namespace brownent
