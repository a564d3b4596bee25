#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "brownent/gaussian.hpp"
#include "brownent/langevin.hpp"

namespace brownent {

struct Estimate {
  double value = 0.0;
  double se = 0.0;
};

/// Unbiased sample covariance of two coordinates with large-sample standard
/// errors. estimator_cov is the covariance of (s11, s12, s22) estimates,
/// (mu_abcd - s_ab s_cd) / n, used for delta-method errors downstream.
struct CovarianceEstimate {
  std::size_t n = 0;
  double mean1 = 0.0;
  double mean2 = 0.0;
  Covariance2 cov;
  double se11 = 0.0;
  double se12 = 0.0;
  double se22 = 0.0;
  std::array<std::array<double, 3>, 3> estimator_cov{};
};

CovarianceEstimate estimate_cov(std::span<const double> x1, std::span<const double> x2);
/// Coordinates k1, k2 of the full vector recorded at the probe time.
CovarianceEstimate estimate_cov(const EnsembleSlices& slices, std::size_t k1 = 0, std::size_t k2 = 1);
CovarianceEstimate estimate_cov(const EnsembleStore& store, std::size_t slice, std::size_t k1 = 0,
                                std::size_t k2 = 1);

/// Streams pair moments of coordinates (0, 1) at every recorded time without
/// keeping the trajectories. Partial sums are kept per trajectory chunk and
/// merged in chunk order, so results do not depend on the thread count.
class PairMomentSink final : public SliceSink {
 public:
  void prepare(std::span<const double> times, std::size_t n_traj, std::size_t dim) override;
  void record(std::size_t slice, std::size_t traj, std::span<const double> x) override;

  const std::vector<double>& times() const noexcept { return times_; }
  std::vector<CovarianceEstimate> estimates() const;

 private:
  static constexpr std::size_t kSums = 15;  // x1^p x2^q for p + q <= 4
  std::vector<double> times_;
  std::size_t chunks_ = 0;
  std::vector<std::array<double, kSums>> sums_;  // [slice][chunk]
  std::vector<std::size_t> counts_;
};

/// Equal-width bins over mean +- span_sd fitted standard deviations on each
/// conditioning axis. Samples outside the span go to the edge bins.
struct Binning {
  std::size_t bins_per_axis = 25;
  double span_sd = 4.0;
  std::size_t min_count = 100;

  bool operator==(const Binning&) const = default;
};

struct VelocityCell {
  std::vector<double> center;
  std::vector<double> mean_coord;  // sample mean of the conditioning coordinates
  std::size_t count = 0;
  double v_plus = 0.0;
  double se_vplus = 0.0;
  double v_minus = 0.0;
  double se_vminus = 0.0;
  double u = 0.0;  // (v_minus - v_plus) / 2
  double se_u = 0.0;
  bool reliable = false;  // count >= min_count
};

struct VelocityField {
  std::size_t j = 0;  // probed coordinate, zero-based
  double eps = 0.0;
  double t = 0.0;
  double dt = 0.0;
  std::uint64_t seed = 0;
  std::size_t min_count = 0;
  std::vector<std::size_t> axes;           // conditioning coordinates
  std::vector<std::vector<double>> edges;  // per axis, bins + 1 values
  std::vector<VelocityCell> cells;         // row-major, first axis slowest

  std::size_t bins(std::size_t axis) const { return edges[axis].size() - 1; }
  const VelocityCell& cell(std::span<const std::size_t> index) const;
  std::size_t reliable_cells() const;
};

/// Conditions on the full coordinate vector at t.
VelocityField estimate_cg_velocities(const EnsembleSlices& slices, const Binning& binning = {});
/// Conditions on the probed coordinate x_j alone.
VelocityField estimate_local_velocities(const EnsembleSlices& slices, const Binning& binning = {});

/// `bin_center_1,...,count,v_plus,se_vplus,v_minus,se_vminus,u,se_u`,
/// one row per occupied cell.
void write_velocity_field_csv(const std::filesystem::path& path, const VelocityField& field);

enum class PartnerWeights {
  Conditional,    // partner bins weighted by their occupancy given the x_j bin
  Unconditional,  // partner bins weighted by their overall occupancy
};

struct MarginalCell {
  double center = 0.0;
  double mean_coord = 0.0;
  std::size_t covered = 0;  // samples in reliable partner cells
  Estimate marginal_u;
  Estimate local_u;
  bool comparable = false;  // local bin reliable and some partner cell reliable
};

/// Averages the pair-conditioned u over the partner coordinate, bin by bin of
/// x_j, for comparison with the locally conditioned u. Both fields must come
/// from the same slices and the default binning span.
std::vector<MarginalCell> marginalize_over_partner(const VelocityField& global, const VelocityField& local,
                                                   PartnerWeights weights = PartnerWeights::Conditional);

enum class WitnessMode { GaussianPlugin, Binned };

std::string_view to_string(WitnessMode m) noexcept;

/// Sample-based witness with a 3-SE guard band on the verdict.
struct SampleWitness {
  WitnessMode mode = WitnessMode::GaussianPlugin;
  std::size_t n = 0;
  double T = 0.0;
  double eps = 0.0;
  double dt = 0.0;
  std::uint64_t seed = 0;
  Estimate xx11, xx12, xx22;
  Estimate uu11, uu12, uu22;
  std::array<std::array<Estimate, 2>, 2> xu{};  // xu[k][j] = <dx_k du_j>
  std::array<Estimate, 4> values{};             // indexed like kAllSignPairs
  SignPair argmin{1, 1};
  Estimate min;
  double threshold = 0.0;
  Verdict verdict = Verdict::Inconclusive;
  double margin = 0.0;  // (min - 4T) / se
};

inline constexpr double kGuardBand = 3.0;

/// Entangled if min + 3 se < threshold, Undecided if min - 3 se > threshold,
/// Inconclusive otherwise.
Verdict guarded_verdict(double min, double se, double threshold) noexcept;

/// Witness at the sample covariance with delta-method errors.
SampleWitness plugin_witness(const CovarianceEstimate& cov, double T);

/// `probes` are records of the same trajectories probing different
/// coordinates. The plug-in mode needs any one of them; the binned mode needs
/// probes of both coordinates of a pair.
SampleWitness estimate_witness(std::span<const EnsembleSlices> probes, double T, WitnessMode mode,
                               const Binning& binning = {});

std::string witness_json(const SampleWitness& w);

struct UncertaintyRow {
  std::size_t j = 0;
  Estimate mean_u;
  Estimate x_u_own;                                  // <dx_j du_j>, expected T
  std::vector<std::pair<std::size_t, Estimate>> x_u_cross;  // <dx_k du_j>, k != j
  Estimate var_x;
  Estimate var_u;
  Estimate product;  // Var(x_j) Var(u_j), bounded below by T^2
  bool mean_violation = false;
  bool own_violation = false;
  bool cross_violation = false;
  bool product_violation = false;
};

struct UncertaintyReport {
  double T = 0.0;
  std::size_t n = 0;
  double eps = 0.0;
  double dt = 0.0;
  std::vector<UncertaintyRow> rows;
  bool any_violation() const;
};

/// Moment identities of the osmotic velocity from the operational estimates:
/// raw per-trajectory velocity differences for first moments and
/// coordinate products, cell-mean variance (noise-corrected) for Var(u).
UncertaintyReport uncertainty_suite(std::span<const EnsembleSlices> probes, double T,
                                    const Binning& binning = {});

std::string uncertainty_json(const UncertaintyReport& r);

}  // namespace brownent
