#include "brownent_cli/app.hpp"

#include <algorithm>
#include <cstdlib>
#include <filesystem>
#include <iomanip>
#include <optional>
#include <sstream>

#include "CLI11.hpp"
#include "brownent/csv.hpp"
#include "brownent/ensemble_io.hpp"
#include "brownent/estimators.hpp"
#include "brownent/kramers.hpp"
#include "brownent_cli/config.hpp"
#include "brownent_cli/manifest.hpp"
#include "brownent_cli/recipes.hpp"
#include "json.hpp"

namespace brownent::cli {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

struct Options {
  std::string config_path;
  std::optional<std::uint64_t> seed;
  std::optional<unsigned> threads;
  std::optional<std::string> out;
  std::vector<std::string> overrides;

  std::optional<double> a, g, T, s11, s12, s22;
  std::vector<double> times;

  std::vector<std::string> slices;
  std::string csv_path;
  std::string schema_path;
  std::string recipe;
  std::string verify_dir;
};

std::string fixed6(double v) {
  std::ostringstream os;
  os << std::fixed << std::setprecision(6) << v;
  return os.str();
}

unsigned resolve_thread_option(const Options& o) {
  if (o.threads) return *o.threads;
  if (const char* env = std::getenv("BE_THREADS"); env && *env) {
    char* end = nullptr;
    const unsigned long v = std::strtoul(env, &end, 10);
    if (*end != '\0' || v > 4096) throw ConfigError({"BE_THREADS must be a thread count, got '" + std::string(env) + "'"});
    return static_cast<unsigned>(v);
  }
  return 0;
}

// recipe defaults -> config file -> overrides -> flags
ExperimentConfig resolve_config(const Options& o, ExperimentConfig base) {
  if (!o.config_path.empty()) {
    std::string text;
    try {
      text = read_text_file(o.config_path);
    } catch (const Error& e) {
      throw ConfigError({e.what()});
    }
    base = config_from_json(text, base);
  }
  base = apply_overrides(base, o.overrides);
  if (o.seed) base.seed = *o.seed;
  if (o.out) base.out = *o.out;
  if (o.a) base.model.a = *o.a;
  if (o.g) base.model.g = *o.g;
  if (o.T) base.model.T = *o.T;
  if (o.s11 || o.s12 || o.s22) {
    base.initial = InitialKind::Covariance;
    if (o.s11) base.cov0.s11 = *o.s11;
    if (o.s12) base.cov0.s12 = *o.s12;
    if (o.s22) base.cov0.s22 = *o.s22;
  }
  if (!o.times.empty()) base.t_grid = o.times;
  return base;
}

void require_valid(const ExperimentConfig& c) {
  if (auto bad = validate(c); !bad.empty()) throw ConfigError(std::move(bad));
}

class Outputs {
 public:
  explicit Outputs(const ExperimentConfig& c) : dir_(c.out) { fs::create_directories(dir_); }
  fs::path path(const std::string& name) {
    files_.push_back(name);
    return dir_ / name;
  }
  void text(const std::string& name, std::string_view body) { write_text_file(path(name), body); }
  void finish(const std::string& command, const ExperimentConfig& c) { write_manifest(dir_, command, c, files_); }

 private:
  fs::path dir_;
  std::vector<std::string> files_;
};

std::vector<EnsembleSlices> simulated_probes(const ExperimentConfig& c, unsigned threads) {
  const std::size_t idx[] = {0, 1};
  return probe_slices(pair_ensemble(c, {}, threads), c.t_probe, c.eps, idx);
}

std::vector<EnsembleSlices> load_probes(const Options& o, const ExperimentConfig& c, unsigned threads) {
  if (o.slices.empty()) return simulated_probes(c, threads);
  std::vector<EnsembleSlices> probes;
  for (const auto& p : o.slices) {
    auto sidecar = fs::path(p);
    sidecar.replace_extension(".json");
    probes.push_back(ingest_slices_csv(p, read_slice_sidecar(sidecar)).slices);
  }
  return probes;
}

double probe_temperature(const std::vector<EnsembleSlices>& probes, const ExperimentConfig& c) {
  return probes.front().probed_temperature().value_or(c.model.T);
}

// ---- analytic ------------------------------------------------------------

int analytic_cov(const ExperimentConfig& c, std::ostream& out) {
  std::ostringstream table;
  table << "t,s11,s12,s22\n";
  for (double t : c.t_grid) {
    const auto s = analytic_covariance(c, t);
    const double row[] = {t, s.s11, s.s12, s.s22};
    csv::write_row(table, row);
  }
  Outputs files(c);
  files.text("analytic_cov.csv", table.str());
  files.finish("analytic cov", c);
  out << table.str();
  return kExitOk;
}

int analytic_witness(const ExperimentConfig& c, std::ostream& out) {
  require_equal_temperatures(c.model);
  std::string table = "t,w_pp,w_pm,w_mp,w_mm,min,zeta,eps_sign,verdict\n";
  for (double t : c.t_grid) {
    const auto w = witness_report(analytic_covariance(c, t), c.model);
    std::ostringstream row;
    row << csv::format(t);
    for (double v : w.values) row << ',' << csv::format(v);
    row << ',' << csv::format(w.min_value) << ',' << w.argmin.zeta() << ',' << w.argmin.eps_sign() << ','
        << to_string(w.verdict) << '\n';
    table += row.str();
  }
  Outputs files(c);
  files.text("analytic_witness.csv", table);
  files.finish("analytic witness", c);
  out << table;
  return kExitOk;
}

int analytic_threshold(const ExperimentConfig& c, std::ostream& out) {
  const double thr = equilibrium_threshold(c.model.a);
  Outputs files(c);
  files.text("analytic_threshold.json", json{{"a", c.model.a}, {"threshold", thr}}.dump(2) + "\n");
  files.finish("analytic threshold", c);
  out << fixed6(thr) << "\n";
  return kExitOk;
}

int analytic_window(const ExperimentConfig& c, std::ostream& out) {
  const auto w = free_window(c.cov0.s11, c.cov0.s12, c.model.T);
  json j = {{"s11", c.cov0.s11}, {"s12", c.cov0.s12}, {"T", c.model.T}};
  if (w) {
    j["t_minus"] = w->t_minus;
    j["t_plus"] = w->t_plus;
    j["branch"] = w->branch == WindowBranch::OpensLater ? "opens-later" : "open-at-start";
    out << "(" << fixed6(w->t_minus) << ", " << fixed6(w->t_plus) << ")\n";
  } else {
    j["t_minus"] = nullptr;
    j["t_plus"] = nullptr;
    out << "empty\n";
  }
  Outputs files(c);
  files.text("analytic_window.json", j.dump(2) + "\n");
  files.finish("analytic window", c);
  return kExitOk;
}

// ---- simulate / estimate ------------------------------------------------

int simulate(const ExperimentConfig& c, unsigned threads, std::ostream& out) {
  const auto store = simulate_ensemble(pair_ensemble(c, c.t_grid, threads));
  Outputs files(c);
  write_trajectories_csv(files.path("trajectories.csv"), store);

  std::ostringstream moments;
  moments << "t,mean1,mean2,s11,se11,s12,se12,s22,se22\n";
  for (std::size_t k = 0; k < store.times().size(); ++k) {
    const auto e = estimate_cov(store, k);
    const double row[] = {store.times()[k], e.mean1, e.mean2, e.cov.s11, e.se11, e.cov.s12, e.se12, e.cov.s22, e.se22};
    csv::write_row(moments, row);
  }
  files.text("moments.csv", moments.str());

  for (const auto& s : simulated_probes(c, threads)) {
    const auto stem = "slices_j" + std::to_string(s.j + 1);
    write_slices_csv(files.path(stem + ".csv"), s);
    write_slice_sidecar(files.path(stem + ".json"), schema_of(s));
  }
  files.finish("simulate", c);
  out << "simulated " << c.n_traj << " trajectories at " << c.t_grid.size() << " times into " << c.out << "\n";
  return kExitOk;
}

int estimate_velocities(const Options& o, const ExperimentConfig& c, unsigned threads, std::ostream& out) {
  const auto probes = load_probes(o, c, threads);
  Outputs files(c);
  for (const auto& s : probes) {
    const auto tag = "_j" + std::to_string(s.j + 1);
    const auto global = estimate_cg_velocities(s, c.binning);
    const auto local = estimate_local_velocities(s, c.binning);
    write_velocity_field_csv(files.path("velocities_global" + tag + ".csv"), global);
    write_velocity_field_csv(files.path("velocities_local" + tag + ".csv"), local);
    out << "j=" << s.j + 1 << ": " << global.reliable_cells() << " reliable global cells, " << local.reliable_cells()
        << " reliable local cells\n";
  }
  files.finish("estimate velocities", c);
  return kExitOk;
}

int estimate_witness_cmd(const Options& o, const ExperimentConfig& c, unsigned threads, std::ostream& out) {
  const auto probes = load_probes(o, c, threads);
  auto w = estimate_witness(probes, probe_temperature(probes, c), c.witness_mode, c.binning);
  Outputs files(c);
  files.text("witness.json", witness_json(w) + "\n");
  files.finish("estimate witness", c);
  out << "min=" << w.min.value << " se=" << w.min.se << " threshold=" << w.threshold << " verdict=" << to_string(w.verdict)
      << "\n";
  return kExitOk;
}

int estimate_uncertainty(const Options& o, const ExperimentConfig& c, unsigned threads, std::ostream& out) {
  const auto probes = load_probes(o, c, threads);
  const auto r = uncertainty_suite(probes, probe_temperature(probes, c), c.binning);
  Outputs files(c);
  files.text("uncertainty.json", uncertainty_json(r) + "\n");
  files.finish("estimate uncertainty", c);
  out << (r.any_violation() ? "violations found" : "no violations") << "\n";
  return kExitOk;
}

// ---- crossover / ingest / recipe / verify -------------------------------

int crossover_cmd(const ExperimentConfig& c, std::ostream& out) {
  const auto grid = c.kramers_eps_grid.empty() ? default_crossover_grid() : c.kramers_eps_grid;
  const auto report = crossover_report(c.kramers, c.kramers_x, c.kramers_t, grid);
  Outputs files(c);
  write_crossover_csv(files.path("crossover.csv"), report);
  files.finish("crossover", c);
  out << "tau_p=" << report.scales.tau_p << " tau_x=" << report.scales.tau_x << " rows=" << report.rows.size() << "\n";
  return kExitOk;
}

int ingest(const Options& o, const ExperimentConfig& c, std::ostream& out) {
  const auto schema = read_slice_sidecar(o.schema_path);
  const auto r = ingest_slices_csv(o.csv_path, schema);
  Outputs files(c);
  write_slices_csv(files.path("slices.csv"), r.slices);
  write_slice_sidecar(files.path("slices.json"), schema);
  files.text("ingest_report.json",
             json{{"source", fs::path(o.csv_path).filename().string()},
                  {"rows_read", r.rows_read},
                  {"rows_dropped", r.rows_dropped},
                  {"dropped_lines", r.dropped_lines}}
                     .dump(2) +
                 "\n");
  files.finish("ingest", c);
  out << "read " << r.rows_read << " rows, dropped " << r.rows_dropped << "\n";
  return kExitOk;
}

int recipe(const Options& o, unsigned threads, std::ostream& out) {
  const auto c = resolve_config(o, recipe_defaults(o.recipe));
  require_valid(c);
  const auto r = run_recipe(o.recipe, c, threads);
  write_manifest(c.out, "recipe " + o.recipe, c, r.files);
  for (const auto& check : r.checks) {
    out << (check.passed ? "PASS " : "FAIL ") << check.name << ": " << check.detail << "\n";
  }
  out << "recipe " << o.recipe << ": " << (r.passed() ? "PASS" : "FAIL") << "\n";
  return r.passed() ? kExitOk : kExitRecipeFailed;
}

int verify(const Options& o, std::ostream& out) {
  const auto problems = verify_manifest(o.verify_dir);
  for (const auto& p : problems) out << p << "\n";
  if (problems.empty()) out << "manifest ok\n";
  return problems.empty() ? kExitOk : kExitRuntime;
}

void report_error(std::ostream& err, const std::string& code, const std::string& message,
                  const std::vector<std::string>& violations = {}) {
  json e = {{"code", code}, {"message", message}};
  if (!violations.empty()) e["violations"] = violations;
  err << json{{"error", e}}.dump() << "\n";
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  Options o;
  CLI::App app{"Brownian-pair witness and osmotic-velocity toolkit", "brownent"};
  app.set_version_flag("--version", std::string(BROWNENT_VERSION));
  app.require_subcommand(1);
  app.add_option("--config", o.config_path, "JSON experiment config");
  app.add_option("--seed", o.seed, "random seed");
  app.add_option("--threads", o.threads, "worker threads (default: BE_THREADS or all cores)");
  app.add_option("--out", o.out, "output directory");
  app.add_option("--override", o.overrides, "key=value config override, dotted keys")->allow_extra_args(false);

  auto* analytic = app.add_subcommand("analytic", "closed-form results")->require_subcommand(1)->fallthrough();
  auto add_model_flags = [&](CLI::App* sub) {
    sub->add_option("--a", o.a, "stiffness");
    sub->add_option("--g", o.g, "coupling");
    sub->add_option("--T", o.T, "temperature");
    sub->add_option("--s11", o.s11, "initial variance of x1");
    sub->add_option("--s12", o.s12, "initial covariance");
    sub->add_option("--s22", o.s22, "initial variance of x2");
    sub->add_option("--t", o.times, "time grid");
    sub->fallthrough();
  };
  auto* a_cov = analytic->add_subcommand("cov", "covariance over the time grid");
  auto* a_wit = analytic->add_subcommand("witness", "witness values over the time grid");
  auto* a_thr = analytic->add_subcommand("threshold", "equilibrium coupling threshold");
  auto* a_win = analytic->add_subcommand("window", "free-particle witness window");
  for (auto* s : {a_cov, a_wit, a_thr, a_win}) add_model_flags(s);

  auto* sim = app.add_subcommand("simulate", "simulate the pair ensemble")->fallthrough();
  auto* est = app.add_subcommand("estimate", "sample estimators")->require_subcommand(1)->fallthrough();
  auto* e_vel = est->add_subcommand("velocities", "binned forward/backward velocities");
  auto* e_wit = est->add_subcommand("witness", "sample witness");
  auto* e_unc = est->add_subcommand("uncertainty", "osmotic moment identities");
  for (auto* s : {e_vel, e_wit, e_unc}) {
    s->add_option("--slices", o.slices, "slice CSV files with .json sidecars")->check(CLI::ExistingFile);
    s->fallthrough();
  }
  auto* cross = app.add_subcommand("crossover", "finite-eps Kramers velocities")->fallthrough();
  auto* ing = app.add_subcommand("ingest", "validate and normalize a slice CSV")->fallthrough();
  ing->add_option("--csv", o.csv_path, "slice CSV")->required();
  ing->add_option("--schema", o.schema_path, "JSON sidecar")->required();
  auto* rec = app.add_subcommand("recipe", "run a named scenario with pass/fail checks")->fallthrough();
  std::string names;
  for (const auto& n : recipe_names()) names += (names.empty() ? "" : ", ") + n;
  rec->add_option("name", o.recipe, "one of: " + names)->required();
  auto* ver = app.add_subcommand("verify", "re-hash the files listed in a manifest")->fallthrough();
  ver->add_option("dir", o.verify_dir, "output directory")->required()->check(CLI::ExistingDirectory);

  try {
    std::vector<std::string> reversed(args.rbegin(), args.rend());
    app.parse(reversed);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return kExitOk;
  } catch (const CLI::CallForAllHelp&) {
    out << app.help("", CLI::AppFormatMode::All);
    return kExitOk;
  } catch (const CLI::CallForVersion&) {
    out << BROWNENT_VERSION << "\n";
    return kExitOk;
  } catch (const CLI::ParseError& e) {
    report_error(err, "usage", e.what());
    return kExitConfig;
  }

  try {
    const unsigned threads = resolve_thread_option(o);
    if (*rec) return recipe(o, threads, out);
    if (*ver) return verify(o, out);

    const auto c = resolve_config(o, ExperimentConfig{});
    if (*a_thr) return analytic_threshold(c, out);
    if (*a_win) return analytic_window(c, out);
    require_valid(c);
    if (*a_cov) return analytic_cov(c, out);
    if (*a_wit) return analytic_witness(c, out);
    if (*sim) return simulate(c, threads, out);
    if (*e_vel) return estimate_velocities(o, c, threads, out);
    if (*e_wit) return estimate_witness_cmd(o, c, threads, out);
    if (*e_unc) return estimate_uncertainty(o, c, threads, out);
    if (*cross) return crossover_cmd(c, out);
    if (*ing) return ingest(o, c, out);
    report_error(err, "usage", "no command given");
    return kExitConfig;
  } catch (const ConfigError& e) {
    report_error(err, "config", e.what(), e.violations());
    return kExitConfig;
  } catch (const Error& e) {
    report_error(err, std::string(to_string(e.code())), e.what());
    return kExitRuntime;
  } catch (const std::exception& e) {
    report_error(err, "runtime", e.what());
    return kExitRuntime;
  }
}

}  // namespace brownent::cli
