#include "brownent/phase_space.hpp"

#include <unsupported/Eigen/MatrixFunctions>
#include <cmath>
#include <limits>
#include <sstream>

#include "brownent/parallel.hpp"
#include "brownent/rng.hpp"
#include "schedule.hpp"

namespace brownent {

KramersExactStepper::KramersExactStepper(const KramersParams& kp, double dt) {
  validate(kp);
  if (!(dt > 0.0) || !std::isfinite(dt)) {
    throw Error(ErrorCode::InvalidParameter, "time step must be positive");
  }
  Eigen::Matrix2d drift;
  drift << 0.0, 1.0 / kp.m, -kp.a, -kp.gamma / kp.m;
  Eigen::Matrix2d diffusion = Eigen::Matrix2d::Zero();
  diffusion(1, 1) = 2.0 * kp.gamma * kp.T;

  Eigen::Matrix4d block = Eigen::Matrix4d::Zero();
  block.topLeftCorner<2, 2>() = -drift * dt;
  block.topRightCorner<2, 2>() = diffusion * dt;
  block.bottomRightCorner<2, 2>() = drift.transpose() * dt;
  const Eigen::Matrix4d expo = block.exp();
  transition_ = expo.bottomRightCorner<2, 2>().transpose();
  noise_cov_ = transition_ * expo.topRightCorner<2, 2>();
  noise_cov_ = 0.5 * (noise_cov_ + noise_cov_.transpose()).eval();

  Eigen::LLT<Eigen::Matrix2d> llt(noise_cov_);
  if (llt.info() == Eigen::Success) {
    noise_factor_ = llt.matrixL();
  } else {
    Eigen::SelfAdjointEigenSolver<Eigen::Matrix2d> eig(noise_cov_);
    noise_factor_ = eig.eigenvectors() * eig.eigenvalues().cwiseMax(0.0).cwiseSqrt().asDiagonal();
  }
}

void KramersExactStepper::step(double& x, double& p, std::span<const double, 2> noise) const noexcept {
  const double nx = transition_(0, 0) * x + transition_(0, 1) * p + noise_factor_(0, 0) * noise[0] +
                    noise_factor_(0, 1) * noise[1];
  const double np = transition_(1, 0) * x + transition_(1, 1) * p + noise_factor_(1, 0) * noise[0] +
                    noise_factor_(1, 1) * noise[1];
  x = nx;
  p = np;
}

void kramers_euler_step(const KramersParams& kp, double& x, double& p, double dt, double noise) noexcept {
  const double force = -kp.a * x - kp.gamma * p / kp.m;
  x += p / kp.m * dt;
  p += force * dt + std::sqrt(2.0 * kp.gamma * kp.T * dt) * noise;
}

PhaseEnsemble simulate_kramers(const KramersConfig& cfg) {
  validate(cfg.params);
  if (cfg.n_traj == 0) throw Error(ErrorCode::InvalidParameter, "n_traj must be >= 1");
  if (cfg.n_traj > std::numeric_limits<std::uint32_t>::max()) {
    throw Error(ErrorCode::InvalidParameter, "n_traj exceeds the stream id range");
  }
  if (!std::isfinite(cfg.x0) || !std::isfinite(cfg.p0)) {
    throw Error(ErrorCode::InvalidParameter, "initial phase point must be finite");
  }
  if (cfg.start == KramersStart::Stationary && !(cfg.params.a > 0.0)) {
    throw Error(ErrorCode::NoStationaryState, "stationary start needs a > 0");
  }
  const auto schedule = detail::build_schedule(cfg.t_grid, cfg.dt, false);

  PhaseEnsemble out;
  out.times = schedule.times;
  out.n_traj = cfg.n_traj;
  out.x.assign(out.times.size() * cfg.n_traj, 0.0);
  out.p.assign(out.times.size() * cfg.n_traj, 0.0);

  const double tau_p = cfg.params.m / cfg.params.gamma;
  if (cfg.dt > 0.5 * tau_p) {
    std::ostringstream msg;
    msg << "dt=" << cfg.dt << " exceeds tau_p/2=" << 0.5 * tau_p;
    if (cfg.stepper == KramersStepper::EulerMaruyama) msg << "; euler-maruyama may be unstable";
    out.warnings.push_back(msg.str());
  }

  std::vector<double> distinct_h;
  std::vector<KramersExactStepper> steppers;
  std::vector<std::uint32_t> kind(schedule.step_size.size(), 0);
  if (cfg.stepper == KramersStepper::ExactOU) {
    for (std::size_t s = 0; s < schedule.step_size.size(); ++s) {
      const double h = schedule.step_size[s];
      std::size_t idx = 0;
      while (idx < distinct_h.size() && distinct_h[idx] != h) ++idx;
      if (idx == distinct_h.size()) {
        distinct_h.push_back(h);
        steppers.emplace_back(cfg.params, h);
      }
      kind[s] = static_cast<std::uint32_t>(idx);
    }
  }

  const double sd_x = cfg.params.a > 0.0 ? std::sqrt(cfg.params.T / cfg.params.a) : 0.0;
  const double sd_p = std::sqrt(cfg.params.m * cfg.params.T);
  const std::size_t n = cfg.n_traj;

  parallel_chunks(n, cfg.threads, [&](std::size_t, std::size_t begin, std::size_t end) {
    double noise[2];
    for (std::size_t k = begin; k < end; ++k) {
      double x = cfg.x0;
      double p = cfg.p0;
      if (cfg.start == KramersStart::Stationary) {
        NormalStream(cfg.seed, static_cast<std::uint32_t>(k), StreamDomain::InitialCondition)
            .normals(0, noise);
        x = sd_x * noise[0];
        p = sd_p * noise[1];
      }
      if (schedule.record_initial) {
        out.x[k] = x;
        out.p[k] = p;
      }
      const NormalStream stream(cfg.seed, static_cast<std::uint32_t>(k));
      for (std::size_t s = 0; s < schedule.step_size.size(); ++s) {
        stream.normals(s, noise);
        if (cfg.stepper == KramersStepper::ExactOU) {
          steppers[kind[s]].step(x, p, std::span<const double, 2>(noise, 2));
        } else {
          kramers_euler_step(cfg.params, x, p, schedule.step_size[s], noise[0]);
        }
        if (schedule.record[s] >= 0) {
          const auto slice = static_cast<std::size_t>(schedule.record[s]);
          out.x[slice * n + k] = x;
          out.p[slice * n + k] = p;
        }
      }
    }
  });
  return out;
}

}  // namespace brownent
