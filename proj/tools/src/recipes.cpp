#include "brownent_cli/recipes.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <iomanip>
#include <limits>
#include <sstream>

#include "brownent/csv.hpp"
#include "brownent/ensemble_io.hpp"
#include "brownent/estimators.hpp"
#include "brownent/kramers.hpp"
#include "brownent/langevin.hpp"
#include "brownent/phase_space.hpp"
#include "json.hpp"

namespace brownent::cli {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

std::string num(double v) {
  std::ostringstream os;
  os << std::setprecision(6) << v;
  return os.str();
}

// Comma-joined row of mixed fields.
class Row {
 public:
  Row& operator<<(double v) { return add(csv::format(v)); }
  Row& operator<<(std::size_t v) { return add(std::to_string(v)); }
  Row& operator<<(std::string_view s) { return add(std::string(s)); }
  Row& operator<<(bool b) { return add(b ? "1" : "0"); }
  std::string line() const { return text_ + "\n"; }

 private:
  Row& add(const std::string& s) {
    if (!first_) text_ += ',';
    text_ += s;
    first_ = false;
    return *this;
  }
  std::string text_;
  bool first_ = true;
};

class Artifacts {
 public:
  explicit Artifacts(fs::path dir) : dir_(std::move(dir)) { fs::create_directories(dir_); }
  void text(const std::string& name, std::string_view body) {
    write_text_file(dir_ / name, body);
    files_.push_back(name);
  }
  fs::path path(const std::string& name) {
    files_.push_back(name);
    return dir_ / name;
  }
  std::vector<std::string> files() const { return files_; }

 private:
  fs::path dir_;
  std::vector<std::string> files_;
};

std::vector<double> uniform_grid(double lo, double hi, double step) {
  std::vector<double> g;
  const auto n = static_cast<std::size_t>(std::llround((hi - lo) / step));
  for (std::size_t i = 0; i <= n; ++i) g.push_back(lo + static_cast<double>(i) * step);
  return g;
}

// Largest |z| over a set of comparisons, with the count that exceeded 3.
struct ZTally {
  std::size_t n = 0;
  std::size_t over = 0;
  double worst = 0.0;
  void add(double diff, double se) {
    const double z = se > 0.0 ? std::abs(diff) / se : std::numeric_limits<double>::infinity();
    ++n;
    if (!(z <= kGuardBand)) ++over;
    worst = std::max(worst, z);
  }
  bool ok() const { return n > 0 && over == 0; }
  std::string detail() const {
    return std::to_string(n - over) + "/" + std::to_string(n) + " within 3 SE, worst z=" + num(worst);
  }
};

EnsembleConfig single_particle(const ExperimentConfig& c, unsigned threads) {
  if (!(c.model.a > 0.0)) throw Error(ErrorCode::NoStationaryState, "velocity-fields needs model.a > 0");
  EnsembleConfig e;
  e.model = OverdampedModel::single(c.model.a, c.model.T);
  e.initial = GaussianInitial{Eigen::VectorXd::Zero(1), Eigen::MatrixXd::Constant(1, 1, c.model.T / c.model.a),
                              c.sampling};
  e.dt = c.dt;
  e.n_traj = c.n_traj;
  e.seed = c.seed;
  e.stepper = c.stepper;
  e.threads = threads;
  return e;
}

// ---- equilibrium-witness -------------------------------------------------

RecipeResult equilibrium_witness(const ExperimentConfig& c, unsigned threads) {
  require_equal_temperatures(c.model);
  const auto analytic = witness_report(equilibrium_covariance(c.model), c.model);
  const double burn = resolved_burn_in(c);
  auto e = pair_ensemble(c, {burn}, threads);
  if (c.stepper == Stepper::Exact) e.dt = burn;  // the exact transition is valid for any step
  const auto store = simulate_ensemble(e);
  auto w = plugin_witness(estimate_cov(store, 0), c.model.T);
  w.seed = c.seed;
  w.dt = e.dt;

  Artifacts out(c.out);
  out.text("witness.json", witness_json(w) + "\n");

  RecipeResult r;
  const double rel = std::abs(w.min.value - analytic.min_value) / analytic.min_value;
  r.checks.push_back({"mc_min_within_2pct", rel <= 0.02,
                      "mc=" + num(w.min.value) + " se=" + num(w.min.se) + " analytic=" + num(analytic.min_value) +
                          " rel=" + num(rel)});
  const bool agree = w.verdict == Verdict::Inconclusive || w.verdict == analytic.verdict;
  r.checks.push_back({"verdict_agrees", agree,
                      "mc=" + std::string(to_string(w.verdict)) + " analytic=" + std::string(to_string(analytic.verdict))});
  r.files = out.files();
  return r;
}

// ---- threshold-scan ------------------------------------------------------

RecipeResult threshold_scan(const ExperimentConfig& c, unsigned threads) {
  require_equal_temperatures(c.model);
  const double a = c.model.a;
  const auto grid = uniform_grid(c.scan_g_min, c.scan_g_max, c.scan_g_step);
  if (std::abs(grid.back()) >= a) throw Error(ErrorCode::NoStationaryState, "scan reaches |g| >= a");

  std::string table = "g,analytic_min,analytic_verdict,mc_min,mc_se,mc_verdict,agree\n";
  std::optional<double> flip;
  std::size_t disagreements = 0;
  std::size_t decided = 0;
  for (std::size_t i = 0; i < grid.size(); ++i) {
    auto ci = c;
    ci.model.g = grid[i];
    ci.seed = c.seed + i;
    const auto analytic = witness_report(equilibrium_covariance(ci.model), ci.model);
    if (!flip && analytic.verdict == Verdict::Entangled) flip = grid[i];

    const double burn = resolved_burn_in(ci);
    auto e = pair_ensemble(ci, {burn}, threads);
    if (ci.stepper == Stepper::Exact) e.dt = burn;
    const auto w = plugin_witness(estimate_cov(simulate_ensemble(e), 0), ci.model.T);
    const bool agree = w.verdict == Verdict::Inconclusive || w.verdict == analytic.verdict;
    if (w.verdict != Verdict::Inconclusive) ++decided;
    if (!agree) ++disagreements;
    table += (Row() << grid[i] << analytic.min_value << to_string(analytic.verdict) << w.min.value << w.min.se
                    << to_string(w.verdict) << agree)
                 .line();
  }

  Artifacts out(c.out);
  out.text("threshold_scan.csv", table);

  RecipeResult r;
  const double threshold = equilibrium_threshold(a);
  const bool flip_ok = flip && std::abs(*flip - threshold) <= c.scan_g_step * (1.0 + 1e-9);
  r.checks.push_back({"analytic_flip_within_one_step", flip_ok,
                      "flip=" + (flip ? num(*flip) : std::string("none")) + " threshold=" + num(threshold)});
  r.checks.push_back({"mc_agrees_outside_guard_band", disagreements == 0,
                      std::to_string(disagreements) + " disagreements among " + std::to_string(decided) +
                          " decided points"});
  const double t1 = equilibrium_threshold(1.0);
  const bool unit_ok = t1 == 0.0 && witness_report(equilibrium_covariance({1.0, 0.01, c.model.T}), c.model.T).verdict ==
                                        Verdict::Entangled;
  r.checks.push_back({"unit_stiffness_threshold_zero", unit_ok, "threshold(a=1)=" + num(t1)});
  r.files = out.files();
  return r;
}

// ---- decoupled-decay -----------------------------------------------------

RecipeResult decoupled_decay(const ExperimentConfig& c, unsigned threads) {
  if (c.model.g != 0.0) throw Error(ErrorCode::InvalidParameter, "decoupled-decay needs model.g = 0");
  if (c.initial != InitialKind::Covariance) {
    throw Error(ErrorCode::InvalidParameter, "decoupled-decay needs initial.kind = covariance");
  }
  PairMomentSink sink;
  simulate_ensemble(pair_ensemble(c, c.t_grid, threads), sink);
  const auto est = sink.estimates();

  std::string table = "t,s12,se12,expected,z\n";
  ZTally tally;
  for (std::size_t k = 0; k < est.size(); ++k) {
    const double t = sink.times()[k];
    const double expected = c.cov0.s12 * std::exp(-2.0 * c.model.a * t);
    tally.add(est[k].cov.s12 - expected, est[k].se12);
    table += (Row() << t << est[k].cov.s12 << est[k].se12 << expected << (est[k].cov.s12 - expected) / est[k].se12).line();
  }
  Artifacts out(c.out);
  out.text("decay.csv", table);

  RecipeResult r;
  r.checks.push_back({"s12_decay_within_3se", tally.ok(), tally.detail()});
  r.files = out.files();
  return r;
}

// ---- free-window ---------------------------------------------------------

struct Crossing {
  double t = 0.0;
  bool downward = false;  // witness falls below 4T
};

RecipeResult free_window_recipe(const ExperimentConfig& c, unsigned threads) {
  if (c.model.a != 0.0 || c.model.g != 0.0) throw Error(ErrorCode::InvalidParameter, "free-window needs a = g = 0");
  require_equal_temperatures(c.model);
  if (c.initial != InitialKind::Covariance || c.cov0.s11 != c.cov0.s22) {
    throw Error(ErrorCode::InvalidParameter, "free-window needs a covariance start with s11 = s22");
  }
  const double T = c.model.T;
  const auto window = free_window(c.cov0.s11, c.cov0.s12, T);
  if (!window) throw Error(ErrorCode::InvalidParameter, "the initial state never satisfies the witness condition");

  PairMomentSink sink;
  simulate_ensemble(pair_ensemble(c, c.t_grid, threads), sink);
  const auto est = sink.estimates();

  std::string table = "t,s11,s12,s22,min,se,verdict,analytic_min\n";
  std::vector<double> d(est.size());
  std::vector<Verdict> verdicts(est.size());
  for (std::size_t k = 0; k < est.size(); ++k) {
    const double t = sink.times()[k];
    const auto w = plugin_witness(est[k], T);
    d[k] = w.min.value - w.threshold;
    verdicts[k] = w.verdict;
    const double analytic = witness_report(analytic_covariance(c, t), T).min_value;
    table += (Row() << t << est[k].cov.s11 << est[k].cov.s12 << est[k].cov.s22 << w.min.value << w.min.se
                    << to_string(w.verdict) << analytic)
                 .line();
  }
  Artifacts out(c.out);
  out.text("witness_trace.csv", table);

  std::vector<Crossing> crossings;
  for (std::size_t k = 0; k + 1 < d.size(); ++k) {
    if ((d[k] > 0.0) != (d[k + 1] > 0.0)) {
      const double t0 = sink.times()[k];
      const double t1 = sink.times()[k + 1];
      crossings.push_back({t0 + (t1 - t0) * d[k] / (d[k] - d[k + 1]), d[k] > 0.0});
    }
  }
  const auto first_down = std::find_if(crossings.begin(), crossings.end(), [](const Crossing& x) { return x.downward; });
  const auto last_up = std::find_if(crossings.rbegin(), crossings.rend(), [](const Crossing& x) { return !x.downward; });

  RecipeResult r;
  if (window->branch == WindowBranch::OpensLater) {
    const bool ok = first_down != crossings.end() &&
                    std::abs(first_down->t - window->t_minus) <= 0.05 * window->t_minus;
    r.checks.push_back({"lower_edge_within_5pct", ok,
                        "crossing=" + (first_down != crossings.end() ? num(first_down->t) : std::string("none")) +
                            " t_minus=" + num(window->t_minus)});
  } else {
    r.checks.push_back({"open_at_start", d.front() < 0.0, "window opens at t=0, witness-4T=" + num(d.front())});
  }
  const bool up_ok = last_up != crossings.rend() && std::abs(last_up->t - window->t_plus) <= 0.05 * window->t_plus;
  r.checks.push_back({"upper_edge_within_5pct", up_ok,
                      "crossing=" + (last_up != crossings.rend() ? num(last_up->t) : std::string("none")) +
                          " t_plus=" + num(window->t_plus)});

  const double mid = 0.5 * (window->t_minus + window->t_plus);
  std::size_t k_mid = 0;
  for (std::size_t k = 0; k < d.size(); ++k) {
    if (std::abs(sink.times()[k] - mid) < std::abs(sink.times()[k_mid] - mid)) k_mid = k;
  }
  r.checks.push_back({"entangled_mid_window", verdicts[k_mid] == Verdict::Entangled,
                      "t=" + num(sink.times()[k_mid]) + " verdict=" + std::string(to_string(verdicts[k_mid]))});
  std::size_t outside = 0;
  for (std::size_t k = 0; k < d.size(); ++k) {
    const double t = sink.times()[k];
    const bool inside = t >= window->t_minus && t <= window->t_plus;
    if (!inside && verdicts[k] == Verdict::Entangled) ++outside;
  }
  r.checks.push_back({"never_entangled_outside", outside == 0, std::to_string(outside) + " entangled points outside"});
  r.files = out.files();
  return r;
}

// ---- velocity-fields -----------------------------------------------------

RecipeResult velocity_fields(const ExperimentConfig& c, unsigned threads) {
  const auto slices = probe_slices(single_particle(c, threads), c.t_probe, c.eps, 0);
  const auto field = estimate_cg_velocities(slices, c.binning);
  Artifacts out(c.out);
  write_velocity_field_csv(out.path("velocities.csv"), field);

  const double a = c.model.a;
  ZTally plus, minus, u;
  for (const auto& cell : field.cells) {
    const double x = cell.mean_coord[0];
    if (!cell.reliable || std::abs(cell.center[0]) > 2.0) continue;
    plus.add(cell.v_plus + a * x, cell.se_vplus);
    minus.add(cell.v_minus - a * x, cell.se_vminus);
    u.add(cell.u - a * x, cell.se_u);
  }
  RecipeResult r;
  r.checks.push_back({"v_plus_matches_drift", plus.ok(), plus.detail()});
  r.checks.push_back({"v_minus_matches_reversed_drift", minus.ok(), minus.detail()});
  r.checks.push_back({"u_matches_osmotic", u.ok(), u.detail()});
  r.files = out.files();
  return r;
}

// ---- local-velocities ----------------------------------------------------

RecipeResult local_velocities(const ExperimentConfig& c, unsigned threads) {
  const std::size_t idx[] = {0, 1};
  const auto probes = probe_slices(pair_ensemble(c, {}, threads), c.t_probe, c.eps, idx);
  const auto cov = analytic_covariance(c, c.t_probe);
  Artifacts out(c.out);
  RecipeResult r;
  for (std::size_t j = 0; j < 2; ++j) {
    const auto& s = probes[j];
    const double T = *s.probed_temperature();
    const double s_jj = j == 0 ? cov.s11 : cov.s22;
    const auto global = estimate_cg_velocities(s, c.binning);
    const auto local = estimate_local_velocities(s, c.binning);
    const auto marg = marginalize_over_partner(global, local, PartnerWeights::Conditional);
    const auto tag = "_j" + std::to_string(j + 1);
    write_velocity_field_csv(out.path("velocities_global" + tag + ".csv"), global);
    write_velocity_field_csv(out.path("velocities_local" + tag + ".csv"), local);

    std::string table = "bin_center,mean_coord,count,covered,marginal_u,se_marginal_u,local_u,se_local_u,comparable\n";
    ZTally merged, oracle;
    for (std::size_t b = 0; b < marg.size(); ++b) {
      const auto& m = marg[b];
      const auto& lc = local.cells[b];
      table += (Row() << m.center << m.mean_coord << lc.count << m.covered << m.marginal_u.value << m.marginal_u.se
                      << m.local_u.value << m.local_u.se << m.comparable)
                   .line();
      if (m.comparable && static_cast<double>(m.covered) >= 0.98 * static_cast<double>(lc.count)) {
        merged.add(m.marginal_u.value - m.local_u.value, std::hypot(m.marginal_u.se, m.local_u.se));
      }
      if (lc.reliable) oracle.add(lc.u - T * lc.mean_coord[0] / s_jj, lc.se_u);
    }
    out.text("marginal" + tag + ".csv", table);
    r.checks.push_back({"marginal_matches_local" + tag, merged.ok(), merged.detail()});
    r.checks.push_back({"local_matches_T_x_over_s" + tag, oracle.ok(), oracle.detail()});
  }
  r.files = out.files();
  return r;
}

// ---- uncertainty ---------------------------------------------------------

RecipeResult uncertainty(const ExperimentConfig& c, unsigned threads) {
  require_equal_temperatures(c.model);
  const std::size_t idx[] = {0, 1};
  const auto probes = probe_slices(pair_ensemble(c, {}, threads), c.t_probe, c.eps, idx);
  const auto report = uncertainty_suite(probes, c.model.T, c.binning);
  Artifacts out(c.out);
  out.text("uncertainty.json", uncertainty_json(report) + "\n");

  RecipeResult r;
  for (const auto& row : report.rows) {
    const auto tag = "_j" + std::to_string(row.j + 1);
    r.checks.push_back({"mean_u_zero" + tag, !row.mean_violation,
                        "E[u]=" + num(row.mean_u.value) + " se=" + num(row.mean_u.se)});
    r.checks.push_back({"x_u_equals_T" + tag, !row.own_violation,
                        "E[x u]=" + num(row.x_u_own.value) + " se=" + num(row.x_u_own.se)});
    std::string cross;
    for (const auto& [k, e] : row.x_u_cross) cross += "E[x" + std::to_string(k + 1) + " u]=" + num(e.value) + " se=" + num(e.se);
    r.checks.push_back({"x_u_cross_zero" + tag, !row.cross_violation, cross});
    r.checks.push_back({"product_above_T2" + tag, !row.product_violation,
                        "VarX*VarU=" + num(row.product.value) + " se=" + num(row.product.se)});
  }
  r.files = out.files();
  return r;
}

// ---- crossover -----------------------------------------------------------

RecipeResult crossover(const ExperimentConfig& c, unsigned threads) {
  const auto grid = c.kramers_eps_grid.empty() ? default_crossover_grid() : c.kramers_eps_grid;
  const auto report = crossover_report(c.kramers, c.kramers_x, c.kramers_t, grid);
  Artifacts out(c.out);
  write_crossover_csv(out.path("crossover.csv"), report);

  RecipeResult r;
  std::size_t band_n = 0, band_ok = 0, small_n = 0, small_ok = 0;
  double band_worst = 0.0, small_worst = 0.0;
  for (const auto& row : report.rows) {
    if (row.eps >= 0.1 - 1e-12 && row.eps <= 0.2 + 1e-12) {
      const double dev = std::abs(row.half_diff - row.u_over) / std::abs(row.u_over);
      ++band_n;
      band_ok += dev <= 0.1;
      band_worst = std::max(band_worst, dev);
    }
    if (row.eps <= 1e-3 * (1.0 + 1e-12)) {
      const double rel = std::abs(row.nu_minus - row.nu_plus) / (2.0 * std::abs(row.u_over));
      ++small_n;
      small_ok += rel < 0.1;
      small_worst = std::max(small_worst, rel);
    }
  }
  r.checks.push_back({"half_difference_within_10pct_for_eps_0.1_to_0.2", band_n > 0 && band_ok == band_n,
                      std::to_string(band_ok) + "/" + std::to_string(band_n) + " rows, worst deviation " +
                          num(band_worst)});
  r.checks.push_back({"velocities_merge_for_small_eps", small_n > 0 && small_ok == small_n,
                      std::to_string(small_ok) + "/" + std::to_string(small_n) + " rows, worst |nu- - nu+|/(2u)=" +
                          num(small_worst)});

  KramersConfig kc;
  kc.params = c.kramers;
  kc.start = KramersStart::Point;
  kc.t_grid = {c.kramers_t_sim};
  kc.dt = c.kramers_dt;
  kc.n_traj = c.kramers_n_traj;
  kc.seed = c.seed;
  kc.threads = threads;
  const auto phase = simulate_kramers(kc);
  const auto check = conditional_momentum_check(phase, 0, c.kramers, c.kramers_eps_check, c.binning);
  std::string table = "bin_center,mean_x,count,velocity,se_velocity,nu_plus,nu_minus,reliable,agrees\n";
  std::size_t agreeing = 0;
  for (const auto& b : check.bins) {
    table += (Row() << b.center << b.mean_x << b.count << b.velocity.value << b.velocity.se << b.nu_plus << b.nu_minus
                    << b.reliable << b.agrees)
                 .line();
    agreeing += b.reliable && b.agrees;
  }
  out.text("momentum.csv", table);
  r.checks.push_back({"momentum_matches_nu", check.all_agree,
                      std::to_string(agreeing) + "/" + std::to_string(check.reliable_bins) +
                          " reliable bins within 3 SE at eps=" + num(check.eps) + " t=" + num(check.t)});
  r.files = out.files();
  return r;
}

struct RecipeEntry {
  std::string_view name;
  RecipeResult (*run)(const ExperimentConfig&, unsigned);
};

constexpr RecipeEntry kRecipes[] = {
    {"equilibrium-witness", equilibrium_witness}, {"threshold-scan", threshold_scan},
    {"decoupled-decay", decoupled_decay},         {"free-window", free_window_recipe},
    {"velocity-fields", velocity_fields},         {"local-velocities", local_velocities},
    {"uncertainty", uncertainty},                 {"crossover", crossover},
};

const RecipeEntry& find_recipe(std::string_view name) {
  for (const auto& e : kRecipes)
    if (e.name == name) return e;
  std::string known;
  for (const auto& e : kRecipes) known += (known.empty() ? "" : ", ") + std::string(e.name);
  throw ConfigError({"unknown recipe '" + std::string(name) + "' (known: " + known + ")"});
}

}  // namespace

bool RecipeResult::passed() const {
  return !checks.empty() && std::all_of(checks.begin(), checks.end(), [](const Check& c) { return c.passed; });
}

std::vector<std::string> recipe_names() {
  std::vector<std::string> v;
  for (const auto& e : kRecipes) v.emplace_back(e.name);
  return v;
}

ExperimentConfig recipe_defaults(std::string_view name) {
  find_recipe(name);
  ExperimentConfig c;
  c.scenario = std::string(name);
  c.out = "out/" + std::string(name);
  if (name == "equilibrium-witness") {
    c.initial = InitialKind::Origin;
    c.n_traj = 200000;
    c.burn_in = 10.0 / c.model.a;
  } else if (name == "threshold-scan") {
    c.model = {2.0, 0.0, 1.0};
    c.initial = InitialKind::Origin;
    c.n_traj = 100000;
  } else if (name == "decoupled-decay") {
    c.model = {1.0, 0.0, 1.0};
    c.initial = InitialKind::Covariance;
    c.cov0 = {1.0, 0.6, 1.0};
    c.t_grid = uniform_grid(0.0, 2.0, 0.1);
    c.dt = 0.05;
    c.eps = 0.5;
    c.t_probe = 0.5;
  } else if (name == "free-window") {
    c.model = {0.0, 0.0, 1.0};
    c.initial = InitialKind::Covariance;
    c.cov0 = {0.5, 0.1, 0.5};
    c.sampling = InitialSampling::MomentMatched;
    c.t_grid = uniform_grid(0.0, 0.6, 0.001);
    c.n_traj = 200000;
  } else if (name == "velocity-fields") {
    c.model = {1.0, 0.0, 1.0};
    c.n_traj = 200000;
  } else if (name == "local-velocities") {
    c.model = {1.0, 0.6, 1.0};
    c.n_traj = 400000;
  } else if (name == "uncertainty") {
    c.model = {1.0, 0.5, 1.0};
    c.n_traj = 100000;
  }
  return c;
}

RecipeResult run_recipe(std::string_view name, const ExperimentConfig& config, unsigned threads) {
  const auto& entry = find_recipe(name);
  auto r = entry.run(config, threads);
  r.name = std::string(name);
  const auto summary = summary_json(r);
  write_text_file(fs::path(config.out) / "summary.json", summary);
  r.files.push_back("summary.json");
  return r;
}

std::string summary_json(const RecipeResult& r) {
  json checks = json::array();
  for (const auto& c : r.checks) checks.push_back({{"name", c.name}, {"passed", c.passed}, {"detail", c.detail}});
  return json{{"recipe", r.name}, {"passed", r.passed()}, {"checks", checks}}.dump(2) + "\n";
}

Covariance2 analytic_covariance(const ExperimentConfig& c, double t) {
  switch (c.initial) {
    case InitialKind::Equilibrium:
      return equilibrium_covariance(c.model);
    case InitialKind::Covariance:
      return propagate_covariance(c.model, c.cov0, t);
    case InitialKind::Origin:
      break;
  }
  return propagate_covariance(c.model, {0.0, 0.0, 0.0}, t);
}

}  // namespace brownent::cli
