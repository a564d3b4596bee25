#include "brownent/estimators.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <sstream>

#include "brownent/csv.hpp"
#include "brownent/ensemble_io.hpp"
#include "brownent/parallel.hpp"
#include "json.hpp"

namespace brownent {

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

// ---- power sums of (x1, x2) up to total order 4 -------------------------

constexpr std::size_t power_index(int p, int q) {
  // rows p = 0..4 hold q = 0..4-p
  std::size_t idx = 0;
  for (int r = 0; r < p; ++r) idx += static_cast<std::size_t>(5 - r);
  return idx + static_cast<std::size_t>(q);
}

using PowerSums = std::array<double, 15>;

inline void add_powers(PowerSums& s, double a, double b) {
  double ap = 1.0;
  for (int p = 0; p <= 4; ++p) {
    double term = ap;
    for (int q = 0; q <= 4 - p; ++q) {
      s[power_index(p, q)] += term;
      term *= b;
    }
    ap *= a;
  }
}

double binom(int n, int k) {
  double r = 1.0;
  for (int i = 1; i <= k; ++i) r = r * (n - k + i) / i;
  return r;
}

CovarianceEstimate from_power_sums(const PowerSums& s, std::size_t n, double shift1, double shift2) {
  if (n < 2) throw Error(ErrorCode::InsufficientSamples, "covariance needs at least 2 samples");
  const double inv_n = 1.0 / static_cast<double>(n);
  auto raw = [&](int p, int q) { return s[power_index(p, q)] * inv_n; };
  const double m1 = raw(1, 0);
  const double m2 = raw(0, 1);
  auto central = [&](int p, int q) {
    double acc = 0.0;
    for (int i = 0; i <= p; ++i) {
      for (int k = 0; k <= q; ++k) {
        acc += binom(p, i) * binom(q, k) * std::pow(-m1, p - i) * std::pow(-m2, q - k) * raw(i, k);
      }
    }
    return acc;
  };

  CovarianceEstimate e;
  e.n = n;
  e.mean1 = shift1 + m1;
  e.mean2 = shift2 + m2;
  const double bessel = static_cast<double>(n) / static_cast<double>(n - 1);
  const double mu20 = central(2, 0);
  const double mu11 = central(1, 1);
  const double mu02 = central(0, 2);
  e.cov = {mu20 * bessel, mu11 * bessel, mu02 * bessel};

  // estimator order (s11, s12, s22) <-> exponents (2,0), (1,1), (0,2)
  const int ex[3][2] = {{2, 0}, {1, 1}, {0, 2}};
  const double second[3] = {mu20, mu11, mu02};
  for (int a = 0; a < 3; ++a) {
    for (int b = 0; b < 3; ++b) {
      const double mu4 = central(ex[a][0] + ex[b][0], ex[a][1] + ex[b][1]);
      e.estimator_cov[a][b] = (mu4 - second[a] * second[b]) * inv_n;
    }
  }
  e.se11 = std::sqrt(std::max(0.0, e.estimator_cov[0][0]));
  e.se12 = std::sqrt(std::max(0.0, e.estimator_cov[1][1]));
  e.se22 = std::sqrt(std::max(0.0, e.estimator_cov[2][2]));
  return e;
}

template <class Get1, class Get2>
CovarianceEstimate estimate_from(std::size_t n, Get1 get1, Get2 get2) {
  if (n < 2) throw Error(ErrorCode::InsufficientSamples, "covariance needs at least 2 samples");
  double c1 = 0.0;
  double c2 = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    c1 += get1(i);
    c2 += get2(i);
  }
  c1 /= static_cast<double>(n);
  c2 /= static_cast<double>(n);
  PowerSums s{};
  for (std::size_t i = 0; i < n; ++i) add_powers(s, get1(i) - c1, get2(i) - c2);
  return from_power_sums(s, n, c1, c2);
}

// ---- probe validation -----------------------------------------------------

void check_resolution(const EnsembleSlices& s) {
  if (!(s.eps > 0.0)) throw Error(ErrorCode::InvalidParameter, "probe increment must be positive");
  if (s.dt > 0.0 && s.eps < 10.0 * s.dt * (1.0 - 1e-9)) {
    throw Error(ErrorCode::InvalidParameter,
                "estimators need eps >= 10 dt (eps=" + csv::format(s.eps) + ", dt=" + csv::format(s.dt) + ")");
  }
  if (s.size() == 0) throw Error(ErrorCode::InsufficientSamples, "no probe records");
}

void check_temperatures(const EnsembleSlices& s, double T) {
  if (!(T > 0.0) || !std::isfinite(T)) throw Error(ErrorCode::InvalidParameter, "T must be positive");
  if (!s.model) return;
  for (double ti : s.model->temps) {
    if (ti != T) {
      throw Error(ErrorCode::UnequalTemperatures,
                  "witness statistics need every bath at T=" + csv::format(T));
    }
  }
}

// Probes must record the same trajectories; returns them ordered by j.
std::vector<const EnsembleSlices*> matched_probes(std::span<const EnsembleSlices> probes) {
  if (probes.empty()) throw Error(ErrorCode::InvalidParameter, "no probe records given");
  std::vector<const EnsembleSlices*> out;
  for (const auto& p : probes) out.push_back(&p);
  std::sort(out.begin(), out.end(), [](auto* a, auto* b) { return a->j < b->j; });
  const auto& ref = *out.front();
  for (std::size_t i = 0; i < out.size(); ++i) {
    const auto& p = *out[i];
    check_resolution(p);
    if (i > 0 && p.j == out[i - 1]->j) throw Error(ErrorCode::InvalidParameter, "duplicate probed index");
    if (p.size() != ref.size() || p.dim != ref.dim || p.eps != ref.eps || p.t != ref.t || p.x != ref.x) {
      throw Error(ErrorCode::InvalidParameter, "probe records do not describe the same trajectories");
    }
  }
  return out;
}

// ---- binning ----------------------------------------------------------------

struct Axis {
  double lo = 0.0;
  double width = 1.0;
  std::size_t bins = 1;

  std::size_t index(double v) const {
    const double f = std::floor((v - lo) / width);
    if (!(f >= 0.0)) return 0;
    return std::min(bins - 1, static_cast<std::size_t>(f));
  }
  std::vector<double> edges() const {
    std::vector<double> e(bins + 1);
    for (std::size_t b = 0; b <= bins; ++b) e[b] = lo + width * static_cast<double>(b);
    return e;
  }
};

void check_binning(const Binning& b) {
  if (b.bins_per_axis < 1) throw Error(ErrorCode::InvalidParameter, "need at least one bin per axis");
  if (!(b.span_sd > 0.0)) throw Error(ErrorCode::InvalidParameter, "bin span must be positive");
}

Axis fit_axis(const EnsembleSlices& s, std::size_t coord, const Binning& b) {
  const std::size_t n = s.size();
  double mean = 0.0;
  for (std::size_t i = 0; i < n; ++i) mean += s.point(i)[coord];
  mean /= static_cast<double>(n);
  double ss = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double d = s.point(i)[coord] - mean;
    ss += d * d;
  }
  const double sd = n > 1 ? std::sqrt(ss / static_cast<double>(n - 1)) : 0.0;
  if (!(sd > 0.0)) {
    throw Error(ErrorCode::InsufficientSamples, "conditioning coordinate has no spread");
  }
  Axis a;
  a.bins = b.bins_per_axis;
  a.lo = mean - b.span_sd * sd;
  a.width = 2.0 * b.span_sd * sd / static_cast<double>(b.bins_per_axis);
  return a;
}

struct Grid {
  std::vector<std::size_t> coords;
  std::vector<Axis> axes;
  std::size_t cells = 1;

  std::size_t cell_of(std::span<const double> x) const {
    std::size_t idx = 0;
    for (std::size_t a = 0; a < axes.size(); ++a) idx = idx * axes[a].bins + axes[a].index(x[coords[a]]);
    return idx;
  }
};

Grid make_grid(const EnsembleSlices& s, std::vector<std::size_t> coords, const Binning& b) {
  check_binning(b);
  Grid g;
  g.coords = std::move(coords);
  for (auto c : g.coords) {
    g.axes.push_back(fit_axis(s, c, b));
    g.cells *= b.bins_per_axis;
  }
  if (g.cells > 2'000'000) {
    throw Error(ErrorCode::UnsupportedRegime, "too many conditioning cells; reduce bins or coordinates");
  }
  return g;
}

struct Welford {
  std::size_t n = 0;
  double mean = 0.0;
  double m2 = 0.0;

  void add(double v) {
    ++n;
    const double d = v - mean;
    mean += d / static_cast<double>(n);
    m2 += d * (v - mean);
  }
  double se() const {
    if (n < 2) return kNaN;
    return std::sqrt(m2 / static_cast<double>(n - 1) / static_cast<double>(n));
  }
};

VelocityField velocity_field(const EnsembleSlices& s, std::vector<std::size_t> coords, const Binning& b) {
  check_resolution(s);
  const Grid grid = make_grid(s, std::move(coords), b);
  const std::size_t d = grid.axes.size();

  struct Acc {
    Welford plus, minus, half;
    std::vector<Welford> coord;
  };
  std::vector<Acc> acc(grid.cells);
  for (auto& a : acc) a.coord.resize(d);

  const double inv_eps = 1.0 / s.eps;
  for (std::size_t i = 0; i < s.size(); ++i) {
    const auto x = s.point(i);
    auto& a = acc[grid.cell_of(x)];
    const double xj = x[s.j];
    const double fwd = (s.xj_plus[i] - xj) * inv_eps;
    const double bwd = (xj - s.xj_minus[i]) * inv_eps;
    a.plus.add(fwd);
    a.minus.add(bwd);
    a.half.add(0.5 * (bwd - fwd));
    for (std::size_t k = 0; k < d; ++k) a.coord[k].add(x[grid.coords[k]]);
  }

  VelocityField f;
  f.j = s.j;
  f.eps = s.eps;
  f.t = s.t;
  f.dt = s.dt;
  f.seed = s.seed;
  f.min_count = b.min_count;
  f.axes = grid.coords;
  for (const auto& ax : grid.axes) f.edges.push_back(ax.edges());
  f.cells.resize(grid.cells);
  for (std::size_t c = 0; c < grid.cells; ++c) {
    auto& cell = f.cells[c];
    const auto& a = acc[c];
    cell.center.resize(d);
    cell.mean_coord.resize(d);
    std::size_t rest = c;
    for (std::size_t k = d; k-- > 0;) {
      const auto& ax = grid.axes[k];
      const std::size_t bin = rest % ax.bins;
      rest /= ax.bins;
      cell.center[k] = ax.lo + ax.width * (static_cast<double>(bin) + 0.5);
      cell.mean_coord[k] = a.plus.n ? a.coord[k].mean : kNaN;
    }
    cell.count = a.plus.n;
    if (cell.count == 0) {
      cell.v_plus = cell.v_minus = cell.u = kNaN;
      cell.se_vplus = cell.se_vminus = cell.se_u = kNaN;
      continue;
    }
    cell.v_plus = a.plus.mean;
    cell.v_minus = a.minus.mean;
    cell.u = 0.5 * (cell.v_minus - cell.v_plus);
    cell.se_vplus = a.plus.se();
    cell.se_vminus = a.minus.se();
    cell.se_u = a.half.se();
    cell.reliable = cell.count >= b.min_count;
  }
  return f;
}

Estimate jackknife(double full, const std::vector<double>& loo) {
  const double g = static_cast<double>(loo.size());
  const double mean = std::accumulate(loo.begin(), loo.end(), 0.0) / g;
  double ss = 0.0;
  for (double v : loo) ss += (v - mean) * (v - mean);
  return {full, std::sqrt((g - 1.0) / g * ss)};
}

// ---- grouped cell sums for binned moments ---------------------------------

constexpr std::size_t kJackknifeGroups = 20;

/// Second moments of (x, w) where w_p is the per-trajectory velocity
/// half-difference of probe p; uu is the noise-corrected variance of the
/// cell means of w.
struct BinnedMoments {
  std::vector<double> mean_w;           // [p]
  std::vector<double> xx;               // [k * D + l]
  std::vector<double> xw;               // [k * P + p]
  std::vector<double> uu;               // [p * P + q]
};

class BinnedEngine {
 public:
  BinnedEngine(const std::vector<const EnsembleSlices*>& probes, const Binning& b)
      : d_(probes.front()->dim), p_(probes.size()) {
    const auto& ref = *probes.front();
    n_ = ref.size();
    if (n_ < 2 * kJackknifeGroups || n_ < 100) {
      throw Error(ErrorCode::InsufficientSamples, "binned moments need at least 100 trajectories");
    }
    std::vector<std::size_t> coords(d_);
    std::iota(coords.begin(), coords.end(), std::size_t{0});
    grid_ = make_grid(ref, coords, b);

    // per-sample w and shifts
    w_.resize(n_ * p_);
    for (std::size_t p = 0; p < p_; ++p) {
      const auto& s = *probes[p];
      for (std::size_t i = 0; i < n_; ++i) {
        const double xj = s.point(i)[s.j];
        w_[i * p_ + p] = (2.0 * xj - s.xj_minus[i] - s.xj_plus[i]) / (2.0 * s.eps);
      }
    }
    shift_x_.assign(d_, 0.0);
    shift_w_.assign(p_, 0.0);
    for (std::size_t i = 0; i < n_; ++i) {
      for (std::size_t k = 0; k < d_; ++k) shift_x_[k] += ref.point(i)[k];
      for (std::size_t p = 0; p < p_; ++p) shift_w_[p] += w_[i * p_ + p];
    }
    for (auto& v : shift_x_) v /= static_cast<double>(n_);
    for (auto& v : shift_w_) v /= static_cast<double>(n_);

    cell_stride_ = 1 + p_ + p_ * p_;
    group_stride_ = 1 + d_ + d_ * d_ + d_ * p_ + p_;
    cell_sums_.assign(kJackknifeGroups * grid_.cells * cell_stride_, 0.0);
    group_sums_.assign(kJackknifeGroups * group_stride_, 0.0);

    std::vector<double> x(d_), w(p_);
    for (std::size_t i = 0; i < n_; ++i) {
      const std::size_t g = i * kJackknifeGroups / n_;
      const auto pt = ref.point(i);
      for (std::size_t k = 0; k < d_; ++k) x[k] = pt[k] - shift_x_[k];
      for (std::size_t p = 0; p < p_; ++p) w[p] = w_[i * p_ + p] - shift_w_[p];

      double* cs = &cell_sums_[(g * grid_.cells + grid_.cell_of(pt)) * cell_stride_];
      cs[0] += 1.0;
      for (std::size_t p = 0; p < p_; ++p) {
        cs[1 + p] += w[p];
        for (std::size_t q = 0; q < p_; ++q) cs[1 + p_ + p * p_ + q] += w[p] * w[q];
      }
      double* gs = &group_sums_[g * group_stride_];
      gs[0] += 1.0;
      std::size_t o = 1;
      for (std::size_t k = 0; k < d_; ++k) gs[o + k] += x[k];
      o += d_;
      for (std::size_t k = 0; k < d_; ++k)
        for (std::size_t l = 0; l < d_; ++l) gs[o + k * d_ + l] += x[k] * x[l];
      o += d_ * d_;
      for (std::size_t k = 0; k < d_; ++k)
        for (std::size_t p = 0; p < p_; ++p) gs[o + k * p_ + p] += x[k] * w[p];
      o += d_ * p_;
      for (std::size_t p = 0; p < p_; ++p) gs[o + p] += w[p];
    }
  }

  std::size_t n() const noexcept { return n_; }

  /// Moments over all groups except `skip` (kJackknifeGroups = none skipped).
  BinnedMoments moments(std::size_t skip) const {
    std::vector<double> gs(group_stride_, 0.0);
    for (std::size_t g = 0; g < kJackknifeGroups; ++g) {
      if (g == skip) continue;
      for (std::size_t k = 0; k < group_stride_; ++k) gs[k] += group_sums_[g * group_stride_ + k];
    }
    const double n = gs[0];
    std::size_t o = 1;
    std::vector<double> mx(d_), mw(p_);
    for (std::size_t k = 0; k < d_; ++k) mx[k] = gs[o + k] / n;
    o += d_;
    const std::size_t oxx = o;
    o += d_ * d_;
    const std::size_t oxw = o;
    o += d_ * p_;
    for (std::size_t p = 0; p < p_; ++p) mw[p] = gs[o + p] / n;

    BinnedMoments m;
    m.mean_w.resize(p_);
    for (std::size_t p = 0; p < p_; ++p) m.mean_w[p] = mw[p] + shift_w_[p];
    m.xx.resize(d_ * d_);
    for (std::size_t k = 0; k < d_; ++k)
      for (std::size_t l = 0; l < d_; ++l)
        m.xx[k * d_ + l] = (gs[oxx + k * d_ + l] - n * mx[k] * mx[l]) / (n - 1.0);
    m.xw.resize(d_ * p_);
    for (std::size_t k = 0; k < d_; ++k)
      for (std::size_t p = 0; p < p_; ++p)
        m.xw[k * p_ + p] = (gs[oxw + k * p_ + p] - n * mx[k] * mw[p]) / (n - 1.0);

    // one-way decomposition over cells
    std::vector<double> between(p_ * p_, 0.0), within(p_ * p_, 0.0), cs(cell_stride_);
    std::size_t occupied = 0;
    for (std::size_t c = 0; c < grid_.cells; ++c) {
      std::fill(cs.begin(), cs.end(), 0.0);
      for (std::size_t g = 0; g < kJackknifeGroups; ++g) {
        if (g == skip) continue;
        const double* src = &cell_sums_[(g * grid_.cells + c) * cell_stride_];
        for (std::size_t k = 0; k < cell_stride_; ++k) cs[k] += src[k];
      }
      const double nc = cs[0];
      if (nc == 0.0) continue;
      ++occupied;
      for (std::size_t p = 0; p < p_; ++p) {
        for (std::size_t q = 0; q < p_; ++q) {
          const double mp = cs[1 + p] / nc;
          const double mq = cs[1 + q] / nc;
          between[p * p_ + q] += nc * (mp - mw[p]) * (mq - mw[q]);
          within[p * p_ + q] += cs[1 + p_ + p * p_ + q] - nc * mp * mq;
        }
      }
    }
    const double k = static_cast<double>(occupied);
    m.uu.resize(p_ * p_);
    for (std::size_t pq = 0; pq < p_ * p_; ++pq) {
      const double noise = n > k ? within[pq] / (n - k) : 0.0;
      m.uu[pq] = (between[pq] - (k - 1.0) * noise) / n;
    }
    return m;
  }

  template <class F>
  Estimate estimate(const BinnedMoments& full, const std::vector<BinnedMoments>& loo, F f) const {
    std::vector<double> v;
    v.reserve(loo.size());
    for (const auto& m : loo) v.push_back(f(m));
    return jackknife(f(full), v);
  }

  std::size_t dim() const noexcept { return d_; }
  std::size_t probes() const noexcept { return p_; }

 private:
  std::size_t d_;
  std::size_t p_;
  std::size_t n_ = 0;
  Grid grid_;
  std::vector<double> w_;
  std::vector<double> shift_x_, shift_w_;
  std::size_t cell_stride_ = 0;
  std::size_t group_stride_ = 0;
  std::vector<double> cell_sums_;
  std::vector<double> group_sums_;
};

double delta_se(const std::array<double, 3>& grad, const CovarianceEstimate& c) {
  double v = 0.0;
  for (int a = 0; a < 3; ++a)
    for (int b = 0; b < 3; ++b) v += grad[a] * grad[b] * c.estimator_cov[a][b];
  return std::sqrt(std::max(0.0, v));
}

void finish_verdict(SampleWitness& w) {
  std::size_t best = 0;
  for (std::size_t i = 1; i < 4; ++i)
    if (w.values[i].value < w.values[best].value) best = i;
  w.argmin = kAllSignPairs[best];
  w.min = w.values[best];
  w.threshold = 4.0 * w.T;
  w.verdict = guarded_verdict(w.min.value, w.min.se, w.threshold);
  w.margin = w.min.se > 0.0 ? (w.min.value - w.threshold) / w.min.se
                            : std::copysign(std::numeric_limits<double>::infinity(), w.min.value - w.threshold);
}

nlohmann::json to_json(const Estimate& e) { return {{"value", e.value}, {"se", e.se}}; }

}  // namespace

// ---------------------------------------------------------------------------

CovarianceEstimate estimate_cov(std::span<const double> x1, std::span<const double> x2) {
  if (x1.size() != x2.size()) throw Error(ErrorCode::InvalidParameter, "coordinate arrays differ in length");
  return estimate_from(x1.size(), [&](std::size_t i) { return x1[i]; }, [&](std::size_t i) { return x2[i]; });
}

CovarianceEstimate estimate_cov(const EnsembleSlices& s, std::size_t k1, std::size_t k2) {
  if (k1 >= s.dim || k2 >= s.dim) throw Error(ErrorCode::InvalidParameter, "coordinate index out of range");
  return estimate_from(s.size(), [&](std::size_t i) { return s.point(i)[k1]; },
                       [&](std::size_t i) { return s.point(i)[k2]; });
}

CovarianceEstimate estimate_cov(const EnsembleStore& store, std::size_t slice, std::size_t k1, std::size_t k2) {
  if (k1 >= store.dim() || k2 >= store.dim() || slice >= store.times().size()) {
    throw Error(ErrorCode::InvalidParameter, "slice or coordinate index out of range");
  }
  return estimate_from(store.n_traj(), [&](std::size_t i) { return store.point(slice, i)[k1]; },
                       [&](std::size_t i) { return store.point(slice, i)[k2]; });
}

void PairMomentSink::prepare(std::span<const double> times, std::size_t n_traj, std::size_t dim) {
  if (dim < 2) throw Error(ErrorCode::InvalidParameter, "pair moments need two coordinates");
  times_.assign(times.begin(), times.end());
  chunks_ = chunk_count(n_traj);
  sums_.assign(times_.size() * chunks_, PowerSums{});
  counts_.assign(times_.size() * chunks_, 0);
}

void PairMomentSink::record(std::size_t slice, std::size_t traj, std::span<const double> x) {
  const std::size_t slot = slice * chunks_ + traj / kTrajectoryChunk;
  add_powers(sums_[slot], x[0], x[1]);
  ++counts_[slot];
}

std::vector<CovarianceEstimate> PairMomentSink::estimates() const {
  std::vector<CovarianceEstimate> out;
  out.reserve(times_.size());
  for (std::size_t s = 0; s < times_.size(); ++s) {
    PowerSums total{};
    std::size_t n = 0;
    for (std::size_t c = 0; c < chunks_; ++c) {
      const auto& part = sums_[s * chunks_ + c];
      for (std::size_t k = 0; k < total.size(); ++k) total[k] += part[k];
      n += counts_[s * chunks_ + c];
    }
    out.push_back(from_power_sums(total, n, 0.0, 0.0));
  }
  return out;
}

const VelocityCell& VelocityField::cell(std::span<const std::size_t> index) const {
  if (index.size() != edges.size()) throw Error(ErrorCode::InvalidParameter, "cell index rank mismatch");
  std::size_t idx = 0;
  for (std::size_t a = 0; a < index.size(); ++a) {
    if (index[a] >= bins(a)) throw Error(ErrorCode::InvalidParameter, "cell index out of range");
    idx = idx * bins(a) + index[a];
  }
  return cells[idx];
}

std::size_t VelocityField::reliable_cells() const {
  return static_cast<std::size_t>(std::count_if(cells.begin(), cells.end(), [](const auto& c) { return c.reliable; }));
}

VelocityField estimate_cg_velocities(const EnsembleSlices& slices, const Binning& binning) {
  std::vector<std::size_t> coords(slices.dim);
  std::iota(coords.begin(), coords.end(), std::size_t{0});
  return velocity_field(slices, coords, binning);
}

VelocityField estimate_local_velocities(const EnsembleSlices& slices, const Binning& binning) {
  return velocity_field(slices, {slices.j}, binning);
}

void write_velocity_field_csv(const std::filesystem::path& path, const VelocityField& field) {
  std::ostringstream os;
  std::vector<std::string> header;
  for (std::size_t a = 0; a < field.axes.size(); ++a) header.push_back("bin_center_" + std::to_string(a + 1));
  for (const char* h : {"count", "v_plus", "se_vplus", "v_minus", "se_vminus", "u", "se_u"}) header.emplace_back(h);
  csv::write_header(os, header);
  std::vector<double> row;
  for (const auto& c : field.cells) {
    if (c.count == 0) continue;
    row.assign(c.center.begin(), c.center.end());
    row.insert(row.end(), {static_cast<double>(c.count), c.v_plus, c.se_vplus, c.v_minus, c.se_vminus, c.u, c.se_u});
    csv::write_row(os, row);
  }
  write_text_file(path, os.str());
}

std::vector<MarginalCell> marginalize_over_partner(const VelocityField& global, const VelocityField& local,
                                                   PartnerWeights weights) {
  if (global.axes.size() != 2 || global.axes[0] != 0 || global.axes[1] != 1) {
    throw Error(ErrorCode::InvalidParameter, "global field must condition on (x1, x2)");
  }
  if (local.axes.size() != 1 || local.axes[0] != local.j || local.j != global.j || local.j > 1) {
    throw Error(ErrorCode::InvalidParameter, "local field must condition on the probed coordinate");
  }
  const std::size_t ja = local.j;
  const std::size_t pa = 1 - ja;
  if (global.edges[ja] != local.edges[0]) {
    throw Error(ErrorCode::InvalidParameter, "local and global bins along x_j differ");
  }
  const std::size_t nb = local.bins(0);
  const std::size_t np = global.bins(pa);

  auto at = [&](std::size_t b, std::size_t c) -> const VelocityCell& {
    const std::array<std::size_t, 2> idx = ja == 0 ? std::array<std::size_t, 2>{b, c} : std::array<std::size_t, 2>{c, b};
    return global.cell(idx);
  };
  std::vector<double> partner_total(np, 0.0);
  for (std::size_t b = 0; b < nb; ++b)
    for (std::size_t c = 0; c < np; ++c) partner_total[c] += static_cast<double>(at(b, c).count);

  std::vector<MarginalCell> out(nb);
  for (std::size_t b = 0; b < nb; ++b) {
    auto& m = out[b];
    const auto& lc = local.cells[b];
    m.center = lc.center[0];
    m.mean_coord = lc.mean_coord[0];
    m.local_u = {lc.u, lc.se_u};
    double wsum = 0.0, acc = 0.0, var = 0.0;
    for (std::size_t c = 0; c < np; ++c) {
      const auto& gc = at(b, c);
      if (!gc.reliable) continue;
      const double w = weights == PartnerWeights::Conditional ? static_cast<double>(gc.count) : partner_total[c];
      wsum += w;
      acc += w * gc.u;
      var += w * w * gc.se_u * gc.se_u;
      m.covered += gc.count;
    }
    if (wsum > 0.0) {
      m.marginal_u = {acc / wsum, std::sqrt(var) / wsum};
    } else {
      m.marginal_u = {kNaN, kNaN};
    }
    m.comparable = lc.reliable && wsum > 0.0;
  }
  return out;
}

std::string_view to_string(WitnessMode m) noexcept {
  return m == WitnessMode::GaussianPlugin ? "gaussian-plugin" : "binned";
}

Verdict guarded_verdict(double min, double se, double threshold) noexcept {
  if (min + kGuardBand * se < threshold) return Verdict::Entangled;
  if (min - kGuardBand * se > threshold) return Verdict::Undecided;
  return Verdict::Inconclusive;
}

SampleWitness plugin_witness(const CovarianceEstimate& c, double T) {
  if (!(T > 0.0) || !std::isfinite(T)) throw Error(ErrorCode::InvalidParameter, "T must be positive");
  const Covariance2& s = c.cov;
  require_positive_definite(s);
  const double d = s.det();
  const double d2 = d * d;
  const double t2 = T * T;

  SampleWitness w;
  w.mode = WitnessMode::GaussianPlugin;
  w.n = c.n;
  w.T = T;
  w.xx11 = {s.s11, c.se11};
  w.xx12 = {s.s12, c.se12};
  w.xx22 = {s.s22, c.se22};
  // u = T S^{-1} x, so <u u^T> = T^2 S^{-1} and <x u^T> = T I.
  w.uu11 = {t2 * s.s22 / d, t2 * delta_se({-s.s22 * s.s22 / d2, 2.0 * s.s12 * s.s22 / d2, -s.s12 * s.s12 / d2}, c)};
  w.uu22 = {t2 * s.s11 / d, t2 * delta_se({-s.s12 * s.s12 / d2, 2.0 * s.s12 * s.s11 / d2, -s.s11 * s.s11 / d2}, c)};
  w.uu12 = {-t2 * s.s12 / d,
            t2 * delta_se({s.s12 * s.s22 / d2, -(d + 2.0 * s.s12 * s.s12) / d2, s.s12 * s.s11 / d2}, c)};
  w.xu[0][0] = {T, 0.0};
  w.xu[1][1] = {T, 0.0};
  w.xu[0][1] = {0.0, 0.0};
  w.xu[1][0] = {0.0, 0.0};

  for (const auto& sp : kAllSignPairs) {
    const double zeta = sp.zeta();
    const double eps = sp.eps_sign();
    const double num = s.s11 + s.s22 - 2.0 * zeta * s.s12;
    const std::array<double, 3> grad{t2 * (d - num * s.s22) / d2 + 1.0,
                                     t2 * (-2.0 * zeta * d + 2.0 * num * s.s12) / d2 + 2.0 * eps,
                                     t2 * (d - num * s.s11) / d2 + 1.0};
    w.values[sp.index()] = {witness_value(s, T, sp), delta_se(grad, c)};
  }
  finish_verdict(w);
  return w;
}

SampleWitness estimate_witness(std::span<const EnsembleSlices> probes, double T, WitnessMode mode,
                               const Binning& binning) {
  const auto ordered = matched_probes(probes);
  for (const auto* p : ordered) check_temperatures(*p, T);
  const auto& ref = *ordered.front();
  if (ref.dim != 2) throw Error(ErrorCode::InvalidParameter, "witness needs a two-particle record");

  SampleWitness w;
  if (mode == WitnessMode::GaussianPlugin) {
    w = plugin_witness(estimate_cov(ref, 0, 1), T);
  } else {
    if (ordered.size() != 2 || ordered[0]->j != 0 || ordered[1]->j != 1) {
      throw Error(ErrorCode::InvalidParameter, "binned witness needs probes of both x1 and x2");
    }
    const BinnedEngine engine(ordered, binning);
    const auto full = engine.moments(kJackknifeGroups);
    std::vector<BinnedMoments> loo;
    for (std::size_t g = 0; g < kJackknifeGroups; ++g) loo.push_back(engine.moments(g));
    auto est = [&](auto f) { return engine.estimate(full, loo, f); };

    w.mode = WitnessMode::Binned;
    w.n = engine.n();
    w.T = T;
    w.xx11 = est([](const BinnedMoments& m) { return m.xx[0]; });
    w.xx12 = est([](const BinnedMoments& m) { return m.xx[1]; });
    w.xx22 = est([](const BinnedMoments& m) { return m.xx[3]; });
    w.uu11 = est([](const BinnedMoments& m) { return m.uu[0]; });
    w.uu12 = est([](const BinnedMoments& m) { return m.uu[1]; });
    w.uu22 = est([](const BinnedMoments& m) { return m.uu[3]; });
    for (std::size_t k = 0; k < 2; ++k)
      for (std::size_t j = 0; j < 2; ++j) w.xu[k][j] = est([&](const BinnedMoments& m) { return m.xw[k * 2 + j]; });
    for (const auto& sp : kAllSignPairs) {
      w.values[sp.index()] = est([&](const BinnedMoments& m) {
        return m.uu[0] + m.uu[3] + 2.0 * sp.zeta() * m.uu[1] + m.xx[0] + m.xx[3] + 2.0 * sp.eps_sign() * m.xx[1];
      });
    }
    finish_verdict(w);
  }
  w.eps = ref.eps;
  w.dt = ref.dt;
  w.seed = ref.seed;
  return w;
}

std::string witness_json(const SampleWitness& w) {
  using nlohmann::json;
  json values = json::array();
  for (const auto& sp : kAllSignPairs) {
    values.push_back({{"zeta", static_cast<int>(sp.zeta())},
                      {"eps_sign", static_cast<int>(sp.eps_sign())},
                      {"value", w.values[sp.index()].value},
                      {"se", w.values[sp.index()].se}});
  }
  json xu = json::array();
  for (std::size_t k = 0; k < 2; ++k)
    for (std::size_t j = 0; j < 2; ++j)
      xu.push_back({{"k", k + 1}, {"j", j + 1}, {"value", w.xu[k][j].value}, {"se", w.xu[k][j].se}});
  json doc = {
      {"mode", std::string(to_string(w.mode))},
      {"n", w.n},
      {"T", w.T},
      {"eps", w.eps},
      {"dt", w.dt},
      {"seed", w.seed},
      {"moments",
       {{"xx11", to_json(w.xx11)},
        {"xx12", to_json(w.xx12)},
        {"xx22", to_json(w.xx22)},
        {"uu11", to_json(w.uu11)},
        {"uu12", to_json(w.uu12)},
        {"uu22", to_json(w.uu22)},
        {"xu", xu}}},
      {"values", values},
      {"min", to_json(w.min)},
      {"argmin", {{"zeta", static_cast<int>(w.argmin.zeta())}, {"eps_sign", static_cast<int>(w.argmin.eps_sign())}}},
      {"threshold", w.threshold},
      {"verdict", std::string(to_string(w.verdict))},
      {"margin_se", w.margin},
  };
  return doc.dump(2) + "\n";
}

bool UncertaintyReport::any_violation() const {
  return std::any_of(rows.begin(), rows.end(), [](const UncertaintyRow& r) {
    return r.mean_violation || r.own_violation || r.cross_violation || r.product_violation;
  });
}

UncertaintyReport uncertainty_suite(std::span<const EnsembleSlices> probes, double T, const Binning& binning) {
  const auto ordered = matched_probes(probes);
  for (const auto* p : ordered) check_temperatures(*p, T);
  const BinnedEngine engine(ordered, binning);
  const std::size_t d = engine.dim();
  const std::size_t np = engine.probes();
  const auto full = engine.moments(kJackknifeGroups);
  std::vector<BinnedMoments> loo;
  for (std::size_t g = 0; g < kJackknifeGroups; ++g) loo.push_back(engine.moments(g));
  auto est = [&](auto f) { return engine.estimate(full, loo, f); };

  UncertaintyReport r;
  r.T = T;
  r.n = engine.n();
  r.eps = ordered.front()->eps;
  r.dt = ordered.front()->dt;
  for (std::size_t p = 0; p < np; ++p) {
    const std::size_t j = ordered[p]->j;
    UncertaintyRow row;
    row.j = j;
    row.mean_u = est([&](const BinnedMoments& m) { return m.mean_w[p]; });
    row.x_u_own = est([&](const BinnedMoments& m) { return m.xw[j * np + p]; });
    for (std::size_t k = 0; k < d; ++k) {
      if (k == j) continue;
      row.x_u_cross.emplace_back(k, est([&](const BinnedMoments& m) { return m.xw[k * np + p]; }));
    }
    row.var_x = est([&](const BinnedMoments& m) { return m.xx[j * d + j]; });
    row.var_u = est([&](const BinnedMoments& m) { return m.uu[p * np + p]; });
    row.product = est([&](const BinnedMoments& m) { return m.xx[j * d + j] * m.uu[p * np + p]; });

    row.mean_violation = std::abs(row.mean_u.value) > kGuardBand * row.mean_u.se;
    row.own_violation = std::abs(row.x_u_own.value - T) > kGuardBand * row.x_u_own.se;
    for (const auto& [k, e] : row.x_u_cross) row.cross_violation |= std::abs(e.value) > kGuardBand * e.se;
    row.product_violation = row.product.value + kGuardBand * row.product.se < T * T;
    r.rows.push_back(std::move(row));
  }
  return r;
}

std::string uncertainty_json(const UncertaintyReport& r) {
  using nlohmann::json;
  json rows = json::array();
  for (const auto& row : r.rows) {
    json cross = json::array();
    for (const auto& [k, e] : row.x_u_cross) cross.push_back({{"k", k + 1}, {"value", e.value}, {"se", e.se}});
    rows.push_back({{"j", row.j + 1},
                    {"mean_u", to_json(row.mean_u)},
                    {"x_u_own", to_json(row.x_u_own)},
                    {"x_u_cross", cross},
                    {"var_x", to_json(row.var_x)},
                    {"var_u", to_json(row.var_u)},
                    {"var_x_var_u", to_json(row.product)},
                    {"violations",
                     {{"mean_u", row.mean_violation},
                      {"x_u_own", row.own_violation},
                      {"x_u_cross", row.cross_violation},
                      {"uncertainty_product", row.product_violation}}}});
  }
  json doc = {{"T", r.T}, {"n", r.n}, {"eps", r.eps}, {"dt", r.dt}, {"rows", rows},
              {"any_violation", r.any_violation()}};
  return doc.dump(2) + "\n";
}

}  // namespace brownent
