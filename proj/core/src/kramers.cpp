#include "brownent/kramers.hpp"

#include <boost/math/quadrature/gauss_kronrod.hpp>
#include <boost/math/special_functions/gamma.hpp>
#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

#include "brownent/csv.hpp"
#include "brownent/ensemble_io.hpp"
#include "pair_modes.hpp"

namespace brownent {

namespace {

using detail::relax;

void require_time(double t, const char* what) {
  if (!(t >= 0.0) || !std::isfinite(t)) {
    throw Error(ErrorCode::InvalidParameter, std::string(what) + " must be finite and >= 0");
  }
}

// J_n = int_0^M t^n e^{-c t} dt
double moment_integral(int n, double c, double upper) {
  return std::tgamma(n + 1.0) / std::pow(c, n + 1) * boost::math::gamma_p(n + 1.0, c * upper);
}

// int_0^M f(t') f(t' + tau) dt' with f the impulse response.
double response_overlap(const ModeRates& r, double upper, double tau) {
  if (upper == 0.0) return 0.0;
  const double c = r.omega1 + r.omega2;
  const double gap = r.omega1 - r.omega2;

  double cosh_part;  // int e^{-ct} (cosh(gap t) - 1) / gap^2
  double sinh_part;  // int e^{-ct} sinh(gap t) / gap
  if (gap < 0.1 * c) {
    // even/odd power series in gap; terms shrink like (gap/c)^2
    const double g2 = gap * gap;
    cosh_part = 0.0;
    sinh_part = 0.0;
    double gpow = 1.0;
    double fact_even = 2.0;  // (2n)!
    double fact_odd = 1.0;   // (2n+1)!
    for (int n = 0; n < 40; ++n) {
      const double term_s = gpow * moment_integral(2 * n + 1, c, upper) / fact_odd;
      const double term_c = gpow * moment_integral(2 * n + 2, c, upper) / fact_even;
      sinh_part += term_s;
      cosh_part += term_c;
      if (std::abs(term_s) <= 1e-17 * std::abs(sinh_part) && std::abs(term_c) <= 1e-17 * std::abs(cosh_part)) break;
      gpow *= g2;
      fact_even *= (2.0 * n + 3.0) * (2.0 * n + 4.0);
      fact_odd *= (2.0 * n + 2.0) * (2.0 * n + 3.0);
    }
  } else {
    const double phi_slow = relax(2.0 * r.omega2, upper);
    const double phi_fast = relax(2.0 * r.omega1, upper);
    const double phi_mid = relax(c, upper);
    cosh_part = (0.5 * (phi_slow + phi_fast) - phi_mid) / (gap * gap);
    sinh_part = (phi_slow - phi_fast) / (2.0 * gap);
  }
  const double slow = std::exp(-r.omega2 * tau);
  const double fast = std::exp(-r.omega1 * tau);
  const double spread = gap == 0.0 ? tau : -std::expm1(-gap * tau) / gap;
  return (slow + fast) * cosh_part + slow * spread * sinh_part;
}

}  // namespace

ModeRates mode_rates(const KramersParams& kp) {
  validate(kp);
  const double q = damping_parameter(kp);
  if (q > 1.0) {
    throw Error(ErrorCode::UnsupportedRegime,
                "underdamped-oscillatory unsupported: 4am/gamma^2 = " + csv::format(q) + " > 1");
  }
  ModeRates r;
  const double half = kp.gamma / (2.0 * kp.m);
  r.omega1 = half * (1.0 + std::sqrt(1.0 - q));
  r.omega2 = kp.a / kp.m / r.omega1;  // product form avoids cancellation
  r.critical = (r.omega1 - r.omega2) < kCriticalSwitch * (r.omega1 + r.omega2);
  return r;
}

ResponsePair response(const KramersParams& kp, double t) {
  require_time(t, "t");
  const auto r = mode_rates(kp);
  ResponsePair out;
  if (r.critical) {
    const double w = 0.5 * (r.omega1 + r.omega2);
    const double e = std::exp(-w * t);
    out.f = t * e;
    out.resp_g = (1.0 + w * t) * e;
    return out;
  }
  const double gap = r.omega1 - r.omega2;
  const double slow = std::exp(-r.omega2 * t);
  const double ratio = -std::expm1(-gap * t) / gap;
  out.f = slow * ratio;
  out.resp_g = slow * (1.0 + r.omega2 * ratio);
  return out;
}

double coordinate_correlator(const KramersParams& kp, double s, double t, CorrelatorMethod method) {
  require_time(s, "s");
  require_time(t, "t");
  const auto r = mode_rates(kp);
  const double upper = std::min(s, t);
  const double tau = std::abs(s - t);
  const double prefactor = 2.0 * kp.gamma * kp.T / (kp.m * kp.m);
  if (method == CorrelatorMethod::ClosedForm) return prefactor * response_overlap(r, upper, tau);

  if (upper == 0.0) return 0.0;
  auto integrand = [&](double u) { return response(kp, u).f * response(kp, u + tau).f; };
  // split at the fast relaxation time so the initial transient is resolved
  const double knee = std::min(upper, 10.0 / r.omega1);
  double total = boost::math::quadrature::gauss_kronrod<double, 61>::integrate(integrand, 0.0, knee, 20, 1e-14);
  if (upper > knee) {
    total += boost::math::quadrature::gauss_kronrod<double, 61>::integrate(integrand, knee, upper, 20, 1e-14);
  }
  return prefactor * total;
}

double overdamped_correlator(const KramersParams& kp, double s, double t) {
  require_time(s, "s");
  require_time(t, "t");
  if (!(kp.a > 0.0)) throw Error(ErrorCode::InvalidParameter, "overdamped correlator needs a > 0");
  const auto r = mode_rates(kp);
  return kp.T / kp.a * (std::exp(-r.omega2 * std::abs(s - t)) - std::exp(-r.omega2 * (s + t)));
}

FiniteEpsVelocities finite_eps_velocities(const KramersParams& kp, double x, double t, double eps) {
  if (!(eps > 0.0) || !(eps < t) || !std::isfinite(t)) {
    throw Error(ErrorCode::InvalidParameter, "need 0 < eps < t");
  }
  const double var = coordinate_correlator(kp, t, t);
  if (!(var > 0.0)) throw Error(ErrorCode::SingularCovariance, "coordinate variance is zero at t");
  const double fwd = coordinate_correlator(kp, t + eps, t) / var;
  const double bwd = coordinate_correlator(kp, t - eps, t) / var;
  return {x / eps * (fwd - 1.0), x / eps * (1.0 - bwd)};
}

double overdamped_osmotic_velocity(const KramersParams& kp, double x, double t) {
  validate(kp);
  if (!(t > 0.0)) throw Error(ErrorCode::InvalidParameter, "overdamped osmotic velocity needs t > 0");
  const double diffusion = kp.T / kp.gamma;
  const double var = kp.a > 0.0 ? kp.T / kp.a * -std::expm1(-2.0 * kp.a * t / kp.gamma) : 2.0 * diffusion * t;
  return diffusion * x / var;
}

bool in_plateau(const Timescales& ts, double eps) noexcept {
  return eps >= 10.0 * ts.tau_p && eps <= 0.1 * ts.tau_x;
}

CrossoverReport crossover_report(const KramersParams& kp, double x, double t, const std::vector<double>& eps_grid) {
  if (eps_grid.empty()) throw Error(ErrorCode::InvalidParameter, "empty eps grid");
  CrossoverReport rep;
  rep.params = kp;
  rep.x = x;
  rep.t = t;
  rep.scales = timescales(kp);
  const double u_over = overdamped_osmotic_velocity(kp, x, t);
  for (double eps : eps_grid) {
    const auto nu = finite_eps_velocities(kp, x, t, eps);
    CrossoverRow row;
    row.eps = eps;
    row.nu_plus = nu.nu_plus;
    row.nu_minus = nu.nu_minus;
    row.half_diff = 0.5 * (nu.nu_minus - nu.nu_plus);
    row.u_over = u_over;
    row.in_plateau = in_plateau(rep.scales, eps);
    rep.rows.push_back(row);
  }
  return rep;
}

void write_crossover_csv(const std::filesystem::path& path, const CrossoverReport& report) {
  std::ostringstream os;
  const std::vector<std::string> header{"eps", "nu_plus", "nu_minus", "half_diff", "u_over", "in_plateau"};
  csv::write_header(os, header);
  for (const auto& r : report.rows) {
    const double row[6] = {r.eps, r.nu_plus, r.nu_minus, r.half_diff, r.u_over, r.in_plateau ? 1.0 : 0.0};
    csv::write_row(os, row);
  }
  write_text_file(path, os.str());
}

MomentumCheck conditional_momentum_check(const PhaseEnsemble& ens, std::size_t slice, const KramersParams& kp,
                                         double eps, const Binning& binning) {
  if (slice >= ens.times.size()) throw Error(ErrorCode::InvalidParameter, "slice out of range");
  if (binning.bins_per_axis < 1 || !(binning.span_sd > 0.0)) {
    throw Error(ErrorCode::InvalidParameter, "invalid binning");
  }
  const auto xs = ens.x_at(slice);
  const auto ps = ens.p_at(slice);
  const std::size_t n = xs.size();
  if (n < 2) throw Error(ErrorCode::InsufficientSamples, "momentum check needs at least 2 trajectories");

  MomentumCheck out;
  out.t = ens.times[slice];
  out.eps = eps;

  double mean = 0.0;
  for (double v : xs) mean += v;
  mean /= static_cast<double>(n);
  double ss = 0.0;
  for (double v : xs) ss += (v - mean) * (v - mean);
  const double sd = std::sqrt(ss / static_cast<double>(n - 1));
  if (!(sd > 0.0)) throw Error(ErrorCode::InsufficientSamples, "coordinate has no spread at t");

  const std::size_t nb = binning.bins_per_axis;
  const double lo = mean - binning.span_sd * sd;
  const double width = 2.0 * binning.span_sd * sd / static_cast<double>(nb);
  struct Acc {
    std::size_t n = 0;
    double mx = 0.0, mv = 0.0, m2 = 0.0;
  };
  std::vector<Acc> acc(nb);
  for (std::size_t i = 0; i < n; ++i) {
    const double f = std::floor((xs[i] - lo) / width);
    const std::size_t b = f >= 0.0 ? std::min(nb - 1, static_cast<std::size_t>(f)) : 0;
    auto& a = acc[b];
    ++a.n;
    const double v = ps[i] / kp.m;
    a.mx += (xs[i] - a.mx) / static_cast<double>(a.n);
    const double d = v - a.mv;
    a.mv += d / static_cast<double>(a.n);
    a.m2 += d * (v - a.mv);
  }

  out.all_agree = true;
  for (std::size_t b = 0; b < nb; ++b) {
    const auto& a = acc[b];
    MomentumBin bin;
    bin.center = lo + width * (static_cast<double>(b) + 0.5);
    bin.count = a.n;
    bin.mean_x = a.mx;
    bin.reliable = a.n >= binning.min_count && a.n >= 2;
    if (a.n >= 2) {
      bin.velocity = {a.mv, std::sqrt(a.m2 / static_cast<double>(a.n - 1) / static_cast<double>(a.n))};
    } else {
      bin.velocity = {a.n ? a.mv : std::numeric_limits<double>::quiet_NaN(), std::numeric_limits<double>::quiet_NaN()};
    }
    if (a.n > 0) {
      const auto nu = finite_eps_velocities(kp, a.mx, out.t, eps);
      bin.nu_plus = nu.nu_plus;
      bin.nu_minus = nu.nu_minus;
    }
    if (bin.reliable) {
      const double band = kGuardBand * bin.velocity.se;
      bin.agrees = std::abs(bin.nu_plus - bin.velocity.value) <= band &&
                   std::abs(bin.nu_minus - bin.velocity.value) <= band;
      ++out.reliable_bins;
      out.all_agree = out.all_agree && bin.agrees;
    }
    out.bins.push_back(bin);
  }
  if (out.reliable_bins == 0) {
    throw Error(ErrorCode::InsufficientSamples, "no bin reaches the minimum count");
  }
  return out;
}

}  // namespace brownent
