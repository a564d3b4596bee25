#include "brownent/langevin.hpp"

#include <unsupported/Eigen/MatrixFunctions>
#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

#include "brownent/parallel.hpp"
#include "brownent/rng.hpp"
#include "pair_modes.hpp"
#include "schedule.hpp"

namespace brownent {

bool OverdampedModel::is_harmonic() const noexcept {
  return std::all_of(quartic.begin(), quartic.end(), [](double b) { return b == 0.0; });
}

void OverdampedModel::validate() const {
  const auto n = temps.size();
  if (n == 0) throw Error(ErrorCode::InvalidParameter, "model has no particles");
  if (static_cast<std::size_t>(stiffness.rows()) != n ||
      static_cast<std::size_t>(stiffness.cols()) != n) {
    throw Error(ErrorCode::InvalidParameter, "stiffness matrix must be N x N");
  }
  if (!stiffness.allFinite()) throw Error(ErrorCode::InvalidParameter, "stiffness must be finite");
  if (!stiffness.isApprox(stiffness.transpose(), 0.0) && stiffness != stiffness.transpose()) {
    throw Error(ErrorCode::InvalidParameter, "stiffness matrix must be symmetric");
  }
  for (double t : temps) {
    if (!(t > 0.0) || !std::isfinite(t)) {
      throw Error(ErrorCode::InvalidParameter, "non-positive temperature in model");
    }
  }
  if (!quartic.empty()) {
    if (quartic.size() != n) throw Error(ErrorCode::InvalidParameter, "quartic needs N entries");
    for (double b : quartic) {
      if (!(b >= 0.0) || !std::isfinite(b)) {
        throw Error(ErrorCode::InvalidParameter, "quartic coefficients must be finite and >= 0");
      }
    }
  }
}

std::optional<PairParams> OverdampedModel::as_pair() const {
  if (size() != 2 || !is_harmonic()) return std::nullopt;
  if (stiffness(0, 0) != stiffness(1, 1) || stiffness(0, 1) != stiffness(1, 0)) return std::nullopt;
  PairParams p;
  p.a = stiffness(0, 0);
  p.g = stiffness(0, 1);
  p.T = temps[0];
  if (temps[1] != temps[0]) p.t2 = temps[1];
  return p;
}

OverdampedModel OverdampedModel::harmonic_pair(const PairParams& params) {
  validate_pair(params);
  OverdampedModel m;
  m.stiffness.resize(2, 2);
  m.stiffness << params.a, params.g, params.g, params.a;
  m.temps = {params.temp1(), params.temp2()};
  return m;
}

OverdampedModel OverdampedModel::single(double a, double T, double quartic) {
  OverdampedModel m;
  m.stiffness = Eigen::MatrixXd::Constant(1, 1, a);
  m.temps = {T};
  if (quartic != 0.0) m.quartic = {quartic};
  m.validate();
  return m;
}

ExactPairStepper::ExactPairStepper(const PairParams& params, double dt) {
  validate_pair(params);
  if (!(dt > 0.0) || !std::isfinite(dt)) {
    throw Error(ErrorCode::InvalidParameter, "time step must be positive");
  }
  const auto modes = detail::pair_modes(params);
  const auto noise = detail::mode_noise(modes, dt);
  decay_plus_ = std::exp(-modes.rate_plus * dt);
  decay_minus_ = std::exp(-modes.rate_minus * dt);
  chol11_ = std::sqrt(noise.var_plus);
  chol21_ = noise.cross / chol11_;
  chol22_ = std::sqrt(std::max(0.0, noise.var_minus - chol21_ * chol21_));
}

void ExactPairStepper::step(std::span<double> x, std::span<const double> noise) const noexcept {
  const double r_plus = 0.5 * (x[0] + x[1]);
  const double r_minus = 0.5 * (x[0] - x[1]);
  const double next_plus = decay_plus_ * r_plus + chol11_ * noise[0];
  const double next_minus = decay_minus_ * r_minus + chol21_ * noise[0] + chol22_ * noise[1];
  x[0] = next_plus + next_minus;
  x[1] = next_plus - next_minus;
}

std::array<double, 2> exact_pair_step(const PairParams& params, std::array<double, 2> x, double dt,
                                      std::array<double, 2> noise) {
  ExactPairStepper(params, dt).step(x, noise);
  return x;
}

ExactLinearStepper::ExactLinearStepper(const OverdampedModel& model, double dt) {
  model.validate();
  if (!model.is_harmonic()) {
    throw Error(ErrorCode::UnsupportedRegime, "exact stepping needs a harmonic model");
  }
  if (!(dt > 0.0) || !std::isfinite(dt)) {
    throw Error(ErrorCode::InvalidParameter, "time step must be positive");
  }
  const auto n = static_cast<Eigen::Index>(model.size());
  Eigen::MatrixXd diffusion = Eigen::MatrixXd::Zero(n, n);
  for (Eigen::Index i = 0; i < n; ++i) diffusion(i, i) = 2.0 * model.temps[i];

  // Van Loan block exponential for drift -K and noise intensity D.
  Eigen::MatrixXd block = Eigen::MatrixXd::Zero(2 * n, 2 * n);
  block.topLeftCorner(n, n) = model.stiffness * dt;
  block.topRightCorner(n, n) = diffusion * dt;
  block.bottomRightCorner(n, n) = -model.stiffness.transpose() * dt;
  const Eigen::MatrixXd expo = block.exp();
  transition_ = expo.bottomRightCorner(n, n).transpose();
  noise_cov_ = transition_ * expo.topRightCorner(n, n);
  noise_cov_ = 0.5 * (noise_cov_ + noise_cov_.transpose()).eval();

  Eigen::LLT<Eigen::MatrixXd> llt(noise_cov_);
  if (llt.info() == Eigen::Success) {
    noise_factor_ = llt.matrixL();
  } else {
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(noise_cov_);
    noise_factor_ = eig.eigenvectors() *
                    eig.eigenvalues().cwiseMax(0.0).cwiseSqrt().asDiagonal();
  }
}

void ExactLinearStepper::step(std::span<double> x, std::span<const double> noise,
                              std::span<double> scratch) const noexcept {
  const auto n = x.size();
  for (std::size_t i = 0; i < n; ++i) {
    double acc = 0.0;
    for (std::size_t k = 0; k < n; ++k) {
      acc += transition_(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(k)) * x[k] +
             noise_factor_(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(k)) * noise[k];
    }
    scratch[i] = acc;
  }
  std::copy_n(scratch.begin(), n, x.begin());
}

void euler_maruyama_step(const OverdampedModel& model, std::span<double> x, double dt,
                         std::span<const double> noise) {
  const auto n = model.size();
  double drift_buf[8];
  std::vector<double> drift_heap;
  double* drift = drift_buf;
  if (n > 8) {
    drift_heap.resize(n);
    drift = drift_heap.data();
  }
  for (std::size_t i = 0; i < n; ++i) {
    double f = 0.0;
    for (std::size_t k = 0; k < n; ++k) {
      f -= model.stiffness(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(k)) * x[k];
    }
    if (!model.quartic.empty()) f -= model.quartic[i] * x[i] * x[i] * x[i];
    drift[i] = f;
  }
  for (std::size_t i = 0; i < n; ++i) {
    x[i] += drift[i] * dt + std::sqrt(2.0 * model.temps[i] * dt) * noise[i];
  }
}

// ---------------------------------------------------------------------------

void EnsembleStore::prepare(std::span<const double> times, std::size_t n_traj, std::size_t dim) {
  times_.assign(times.begin(), times.end());
  n_traj_ = n_traj;
  dim_ = dim;
  data_.assign(times_.size() * n_traj * dim, 0.0);
}

void EnsembleStore::record(std::size_t slice, std::size_t traj, std::span<const double> x) {
  std::copy(x.begin(), x.end(), data_.begin() + static_cast<std::ptrdiff_t>((slice * n_traj_ + traj) * dim_));
}

std::span<const double> EnsembleStore::point(std::size_t slice, std::size_t traj) const {
  return {data_.data() + (slice * n_traj_ + traj) * dim_, dim_};
}

std::vector<double> EnsembleStore::coordinate(std::size_t slice, std::size_t coord) const {
  std::vector<double> out(n_traj_);
  for (std::size_t k = 0; k < n_traj_; ++k) out[k] = point(slice, k)[coord];
  return out;
}

namespace {

/// Produces the starting point of trajectory k.
class InitialSampler {
 public:
  InitialSampler(const EnsembleConfig& cfg) : dim_(cfg.model.size()), seed_(cfg.seed) {
    if (const auto* points = std::get_if<InitialPoints>(&cfg.initial)) {
      if (points->size() != cfg.n_traj) {
        throw Error(ErrorCode::InvalidParameter, "need exactly one initial point per trajectory");
      }
      for (const auto& p : *points) {
        if (p.size() != dim_) throw Error(ErrorCode::InvalidParameter, "initial point dimension");
      }
      points_ = points;
      return;
    }
    const auto& g = std::get<GaussianInitial>(cfg.initial);
    const auto n = static_cast<Eigen::Index>(dim_);
    mean_ = g.mean.size() == 0 ? Eigen::VectorXd::Zero(n) : g.mean;
    if (mean_.size() != n || g.cov.rows() != n || g.cov.cols() != n) {
      throw Error(ErrorCode::InvalidParameter, "initial mean/covariance dimension mismatch");
    }
    if (!g.cov.allFinite() || !g.cov.isApprox(g.cov.transpose())) {
      throw Error(ErrorCode::InvalidParameter, "initial covariance must be finite and symmetric");
    }
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(g.cov);
    if (eig.eigenvalues().minCoeff() < -1e-12 * std::max(1.0, eig.eigenvalues().maxCoeff())) {
      throw Error(ErrorCode::InvalidParameter, "initial covariance is not positive semidefinite");
    }
    root_ = eig.eigenvectors() * eig.eigenvalues().cwiseMax(0.0).cwiseSqrt().asDiagonal() *
            eig.eigenvectors().transpose();
    if (g.sampling == InitialSampling::MomentMatched) prepare_matched(cfg.n_traj);
  }

  void sample(std::size_t k, std::span<double> out) const {
    if (points_) {
      std::copy((*points_)[k].begin(), (*points_)[k].end(), out.begin());
      return;
    }
    Eigen::VectorXd z(static_cast<Eigen::Index>(dim_));
    if (matched_.size() > 0) {
      z = matched_.row(static_cast<Eigen::Index>(k)).transpose();
    } else {
      NormalStream(seed_, static_cast<std::uint32_t>(k), StreamDomain::InitialCondition)
          .normals(0, {z.data(), dim_});
    }
    const Eigen::VectorXd x = mean_ + root_ * z;
    std::copy(x.data(), x.data() + dim_, out.begin());
  }

 private:
  void prepare_matched(std::size_t n_traj) {
    if (n_traj <= dim_) {
      throw Error(ErrorCode::InvalidParameter, "moment matching needs more trajectories than coordinates");
    }
    const auto n = static_cast<Eigen::Index>(dim_);
    matched_.resize(static_cast<Eigen::Index>(n_traj), n);
    for (std::size_t k = 0; k < n_traj; ++k) {
      NormalStream(seed_, static_cast<std::uint32_t>(k), StreamDomain::InitialCondition)
          .normals(0, {matched_.row(static_cast<Eigen::Index>(k)).data(), dim_});
    }
    const Eigen::RowVectorXd mean = matched_.colwise().mean();
    matched_.rowwise() -= mean;
    const Eigen::MatrixXd cov =
        (matched_.transpose() * matched_) / static_cast<double>(n_traj - 1);
    const Eigen::MatrixXd l = Eigen::LLT<Eigen::MatrixXd>(cov).matrixL();
    // z' = L^{-1} z row by row, i.e. Z' = Z L^{-T}.
    matched_ = l.triangularView<Eigen::Lower>().solve(matched_.transpose()).transpose();
  }

  std::size_t dim_;
  std::uint64_t seed_;
  const InitialPoints* points_ = nullptr;
  Eigen::VectorXd mean_;
  Eigen::MatrixXd root_;
  Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor> matched_;
};

void validate_config(const EnsembleConfig& cfg) {
  cfg.model.validate();
  if (cfg.n_traj == 0) throw Error(ErrorCode::InvalidParameter, "n_traj must be >= 1");
  if (cfg.n_traj > std::numeric_limits<std::uint32_t>::max()) {
    throw Error(ErrorCode::InvalidParameter, "n_traj exceeds the stream id range");
  }
  if (cfg.stepper == Stepper::Exact && !cfg.model.is_harmonic()) {
    throw Error(ErrorCode::UnsupportedRegime,
                "exact stepper needs a harmonic model; use euler-maruyama for quartic terms");
  }
}

}  // namespace

void simulate_ensemble(const EnsembleConfig& cfg, SliceSink& sink) {
  validate_config(cfg);
  const auto schedule = detail::build_schedule(cfg.t_grid, cfg.dt, cfg.keep_full_paths);
  const InitialSampler initial(cfg);
  const std::size_t dim = cfg.model.size();

  // Exact transitions depend only on the step size; build one per distinct h.
  std::vector<double> distinct_h;
  std::vector<std::uint32_t> step_kind(schedule.step_size.size(), 0);
  std::vector<ExactPairStepper> pair_steppers;
  std::vector<ExactLinearStepper> linear_steppers;
  const auto pair = cfg.model.as_pair();
  if (cfg.stepper == Stepper::Exact) {
    for (std::size_t s = 0; s < schedule.step_size.size(); ++s) {
      const double h = schedule.step_size[s];
      auto it = std::find(distinct_h.begin(), distinct_h.end(), h);
      if (it == distinct_h.end()) {
        distinct_h.push_back(h);
        if (pair) {
          pair_steppers.emplace_back(*pair, h);
        } else {
          linear_steppers.emplace_back(cfg.model, h);
        }
        it = distinct_h.end() - 1;
      }
      step_kind[s] = static_cast<std::uint32_t>(it - distinct_h.begin());
    }
  }

  sink.prepare(schedule.times, cfg.n_traj, dim);
  parallel_chunks(cfg.n_traj, cfg.threads, [&](std::size_t, std::size_t begin, std::size_t end) {
    std::vector<double> x(dim), noise(dim), scratch(dim);
    for (std::size_t k = begin; k < end; ++k) {
      initial.sample(k, x);
      if (schedule.record_initial) sink.record(0, k, x);
      const NormalStream stream(cfg.seed, static_cast<std::uint32_t>(k));
      for (std::size_t s = 0; s < schedule.step_size.size(); ++s) {
        stream.normals(s, noise);
        if (cfg.stepper == Stepper::EulerMaruyama) {
          euler_maruyama_step(cfg.model, x, schedule.step_size[s], noise);
        } else if (pair) {
          pair_steppers[step_kind[s]].step(x, noise);
        } else {
          linear_steppers[step_kind[s]].step(x, noise, scratch);
        }
        if (schedule.record[s] >= 0) sink.record(static_cast<std::size_t>(schedule.record[s]), k, x);
      }
    }
  });
}

EnsembleStore simulate_ensemble(const EnsembleConfig& config) {
  EnsembleStore store;
  simulate_ensemble(config, store);
  return store;
}

std::optional<double> EnsembleSlices::probed_temperature() const {
  if (!model || j >= model->temps.size()) return std::nullopt;
  return model->temps[j];
}

std::vector<EnsembleSlices> probe_slices(const EnsembleConfig& base, double t, double eps,
                                         std::span<const std::size_t> indices) {
  if (!(eps > 0.0) || !std::isfinite(eps)) {
    throw Error(ErrorCode::InvalidParameter, "probe increment must be positive");
  }
  if (eps < base.dt * (1.0 - 1e-9)) {
    throw Error(ErrorCode::InvalidParameter,
                "probe increment eps=" + std::to_string(eps) +
                    " is smaller than the integration step dt=" + std::to_string(base.dt));
  }
  if (!std::isfinite(t) || t - eps < 0.0) {
    throw Error(ErrorCode::InvalidParameter, "probe needs t - eps >= 0");
  }
  for (auto j : indices) {
    if (j >= base.model.size()) throw Error(ErrorCode::InvalidParameter, "probed index out of range");
  }

  EnsembleConfig cfg = base;
  cfg.t_grid = {t - eps, t, t + eps};
  cfg.keep_full_paths = false;
  const auto store = simulate_ensemble(cfg);

  std::vector<EnsembleSlices> out;
  out.reserve(indices.size());
  for (auto j : indices) {
    EnsembleSlices s;
    s.dim = store.dim();
    s.j = j;
    s.eps = eps;
    s.t = t;
    s.dt = base.dt;
    s.seed = base.seed;
    s.model = base.model;
    const std::size_t n = store.n_traj();
    s.traj.resize(n);
    s.xj_minus.resize(n);
    s.xj_plus.resize(n);
    s.x.resize(n * s.dim);
    for (std::size_t k = 0; k < n; ++k) {
      s.traj[k] = k;
      s.xj_minus[k] = store.point(0, k)[j];
      const auto mid = store.point(1, k);
      std::copy(mid.begin(), mid.end(), s.x.begin() + static_cast<std::ptrdiff_t>(k * s.dim));
      s.xj_plus[k] = store.point(2, k)[j];
    }
    out.push_back(std::move(s));
  }
  return out;
}

EnsembleSlices probe_slices(const EnsembleConfig& base, double t, double eps, std::size_t j) {
  const std::array<std::size_t, 1> idx{j};
  return std::move(probe_slices(base, t, eps, idx).front());
}

}  // namespace brownent
