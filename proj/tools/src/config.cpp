#include "brownent_cli/config.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "brownent/csv.hpp"
#include "brownent/gaussian.hpp"
#include "json.hpp"

namespace brownent::cli {

using nlohmann::json;

namespace {

std::string join(const std::vector<std::string>& v) {
  std::string out;
  for (const auto& s : v) out += (out.empty() ? "" : "; ") + s;
  return out;
}

template <class E>
struct EnumName {
  E value;
  const char* name;
};

constexpr EnumName<InitialKind> kInitialNames[] = {
    {InitialKind::Equilibrium, "equilibrium"}, {InitialKind::Covariance, "covariance"}, {InitialKind::Origin, "origin"}};
constexpr EnumName<InitialSampling> kSamplingNames[] = {{InitialSampling::Iid, "iid"},
                                                        {InitialSampling::MomentMatched, "moment-matched"}};
constexpr EnumName<Stepper> kStepperNames[] = {{Stepper::Exact, "exact"}, {Stepper::EulerMaruyama, "euler-maruyama"}};
constexpr EnumName<WitnessMode> kModeNames[] = {{WitnessMode::GaussianPlugin, "gaussian-plugin"},
                                                {WitnessMode::Binned, "binned"}};

template <class E, std::size_t N>
const char* name_of(const EnumName<E> (&table)[N], E v) {
  for (const auto& e : table)
    if (e.value == v) return e.name;
  return "?";
}

json optional_number(const std::optional<double>& v) { return v ? json(*v) : json(nullptr); }

json document(const ExperimentConfig& c) {
  return {
      {"scenario", c.scenario},
      {"model", {{"a", c.model.a}, {"g", c.model.g}, {"T", c.model.T}, {"t1", optional_number(c.model.t1)},
                 {"t2", optional_number(c.model.t2)}}},
      {"initial", {{"kind", name_of(kInitialNames, c.initial)}, {"s11", c.cov0.s11}, {"s12", c.cov0.s12},
                   {"s22", c.cov0.s22}, {"sampling", name_of(kSamplingNames, c.sampling)}}},
      {"time", {{"grid", c.t_grid}, {"dt", c.dt}, {"eps", c.eps}, {"t_probe", c.t_probe}, {"burn_in", c.burn_in}}},
      {"n_traj", c.n_traj},
      {"seed", c.seed},
      {"stepper", name_of(kStepperNames, c.stepper)},
      {"estimator", {{"mode", name_of(kModeNames, c.witness_mode)}, {"bins_per_axis", c.binning.bins_per_axis},
                     {"span_sd", c.binning.span_sd}, {"min_count", c.binning.min_count}}},
      {"scan", {{"g_min", c.scan_g_min}, {"g_max", c.scan_g_max}, {"g_step", c.scan_g_step}}},
      {"kramers", {{"m", c.kramers.m}, {"gamma", c.kramers.gamma}, {"a", c.kramers.a}, {"T", c.kramers.T},
                   {"x", c.kramers_x}, {"t", c.kramers_t}, {"eps_grid", c.kramers_eps_grid}, {"dt", c.kramers_dt},
                   {"t_sim", c.kramers_t_sim}, {"eps_check", c.kramers_eps_check},
                   {"n_traj", c.kramers_n_traj}}},
      {"out", c.out},
  };
}

void merge(json& doc, const json& in, const std::string& path, std::vector<std::string>& bad) {
  for (auto it = in.begin(); it != in.end(); ++it) {
    const std::string key = path.empty() ? it.key() : path + "." + it.key();
    if (!doc.contains(it.key())) {
      bad.push_back("unknown key '" + key + "'");
      continue;
    }
    auto& slot = doc[it.key()];
    if (slot.is_object()) {
      if (!it->is_object()) {
        bad.push_back("'" + key + "' must be an object");
        continue;
      }
      merge(slot, *it, key, bad);
    } else {
      slot = *it;
    }
  }
}

// Typed reads from the merged document; type errors become violations.
class Reader {
 public:
  Reader(const json& doc, std::vector<std::string>& bad) : doc_(doc), bad_(bad) {}

  const json& at(const std::string& path) const {
    const json* j = &doc_;
    std::size_t start = 0;
    for (;;) {
      const auto dot = path.find('.', start);
      j = &j->at(path.substr(start, dot - start));
      if (dot == std::string::npos) return *j;
      start = dot + 1;
    }
  }

  void number(const std::string& path, double& out) {
    const auto& j = at(path);
    if (!j.is_number()) return fail(path, "a number");
    out = j.get<double>();
  }
  void optional_number(const std::string& path, std::optional<double>& out) {
    const auto& j = at(path);
    if (j.is_null()) {
      out.reset();
      return;
    }
    if (!j.is_number()) return fail(path, "a number or null");
    out = j.get<double>();
  }
  template <class U>
  void count(const std::string& path, U& out) {
    const auto& j = at(path);
    if (!j.is_number_unsigned() && !(j.is_number_integer() && j.get<std::int64_t>() >= 0)) {
      return fail(path, "a non-negative integer");
    }
    out = static_cast<U>(j.get<std::uint64_t>());
  }
  void text(const std::string& path, std::string& out) {
    const auto& j = at(path);
    if (!j.is_string()) return fail(path, "a string");
    out = j.get<std::string>();
  }
  void numbers(const std::string& path, std::vector<double>& out) {
    const auto& j = at(path);
    if (!j.is_array() || !std::all_of(j.begin(), j.end(), [](const json& v) { return v.is_number(); })) {
      return fail(path, "an array of numbers");
    }
    out = j.get<std::vector<double>>();
  }
  template <class E, std::size_t N>
  void choice(const std::string& path, const EnumName<E> (&table)[N], E& out) {
    const auto& j = at(path);
    std::string names;
    for (const auto& e : table) names += (names.empty() ? "" : ", ") + std::string(e.name);
    if (j.is_string()) {
      for (const auto& e : table) {
        if (j.get<std::string>() == e.name) {
          out = e.value;
          return;
        }
      }
    }
    fail(path, "one of " + names);
  }

 private:
  void fail(const std::string& path, const std::string& what) { bad_.push_back("'" + path + "' must be " + what); }

  const json& doc_;
  std::vector<std::string>& bad_;
};

ExperimentConfig read(const json& doc, std::vector<std::string>& bad) {
  ExperimentConfig c;
  Reader r(doc, bad);
  r.text("scenario", c.scenario);
  r.number("model.a", c.model.a);
  r.number("model.g", c.model.g);
  r.number("model.T", c.model.T);
  r.optional_number("model.t1", c.model.t1);
  r.optional_number("model.t2", c.model.t2);
  r.choice("initial.kind", kInitialNames, c.initial);
  r.number("initial.s11", c.cov0.s11);
  r.number("initial.s12", c.cov0.s12);
  r.number("initial.s22", c.cov0.s22);
  r.choice("initial.sampling", kSamplingNames, c.sampling);
  r.numbers("time.grid", c.t_grid);
  r.number("time.dt", c.dt);
  r.number("time.eps", c.eps);
  r.number("time.t_probe", c.t_probe);
  r.number("time.burn_in", c.burn_in);
  r.count("n_traj", c.n_traj);
  r.count("seed", c.seed);
  r.choice("stepper", kStepperNames, c.stepper);
  r.choice("estimator.mode", kModeNames, c.witness_mode);
  r.count("estimator.bins_per_axis", c.binning.bins_per_axis);
  r.number("estimator.span_sd", c.binning.span_sd);
  r.count("estimator.min_count", c.binning.min_count);
  r.number("scan.g_min", c.scan_g_min);
  r.number("scan.g_max", c.scan_g_max);
  r.number("scan.g_step", c.scan_g_step);
  r.number("kramers.m", c.kramers.m);
  r.number("kramers.gamma", c.kramers.gamma);
  r.number("kramers.a", c.kramers.a);
  r.number("kramers.T", c.kramers.T);
  r.number("kramers.x", c.kramers_x);
  r.number("kramers.t", c.kramers_t);
  r.numbers("kramers.eps_grid", c.kramers_eps_grid);
  r.number("kramers.dt", c.kramers_dt);
  r.number("kramers.t_sim", c.kramers_t_sim);
  r.number("kramers.eps_check", c.kramers_eps_check);
  r.count("kramers.n_traj", c.kramers_n_traj);
  r.text("out", c.out);
  return c;
}

ExperimentConfig finish(const json& doc, std::vector<std::string> bad) {
  auto c = read(doc, bad);
  for (auto& v : validate(c)) bad.push_back(std::move(v));
  if (!bad.empty()) throw ConfigError(std::move(bad));
  return c;
}

}  // namespace

ConfigError::ConfigError(std::vector<std::string> violations)
    : std::runtime_error("invalid config: " + join(violations)), violations_(std::move(violations)) {}

std::string to_json(const ExperimentConfig& c) { return document(c).dump(2) + "\n"; }

ExperimentConfig config_from_json(std::string_view text) { return config_from_json(text, ExperimentConfig{}); }

ExperimentConfig config_from_json(std::string_view text, const ExperimentConfig& base) {
  json in;
  try {
    in = json::parse(text);
  } catch (const json::parse_error& e) {
    throw ConfigError({std::string("config is not valid JSON: ") + e.what()});
  }
  if (!in.is_object()) throw ConfigError({"config must be a JSON object"});
  json doc = document(base);
  std::vector<std::string> bad;
  merge(doc, in, "", bad);
  return finish(doc, std::move(bad));
}

ExperimentConfig apply_overrides(const ExperimentConfig& base, const std::vector<std::string>& overrides) {
  if (overrides.empty()) return base;
  json doc = document(base);
  std::vector<std::string> bad;
  for (const auto& o : overrides) {
    const auto eq = o.find('=');
    if (eq == std::string::npos || eq == 0) {
      bad.push_back("override '" + o + "' must look like key=value");
      continue;
    }
    const std::string key = o.substr(0, eq);
    const std::string raw = o.substr(eq + 1);
    json value = json::parse(raw, nullptr, false);
    if (value.is_discarded()) value = raw;

    // build {"a": {"b": value}} and merge it, so unknown keys are caught
    json patch = value;
    std::size_t end = key.size();
    for (;;) {
      const auto dot = key.rfind('.', end - 1);
      const std::string part = key.substr(dot == std::string::npos ? 0 : dot + 1, end - (dot == std::string::npos ? 0 : dot + 1));
      patch = json{{part, patch}};
      if (dot == std::string::npos) break;
      end = dot;
    }
    merge(doc, patch, "", bad);
  }
  return finish(doc, std::move(bad));
}

std::vector<std::string> validate(const ExperimentConfig& c) {
  std::vector<std::string> bad;
  auto need = [&](bool ok, const std::string& msg) {
    if (!ok) bad.push_back(msg);
  };
  auto finite = [](double v) { return std::isfinite(v); };
  const auto f = [](double v) { return csv::format(v); };

  need(!c.scenario.empty(), "scenario must not be empty");
  need(finite(c.model.a) && finite(c.model.g), "model.a and model.g must be finite");
  need(c.model.T > 0.0 && finite(c.model.T), "model.T must be positive");
  need(!c.model.t1 || (*c.model.t1 > 0.0 && finite(*c.model.t1)), "model.t1 must be positive");
  need(!c.model.t2 || (*c.model.t2 > 0.0 && finite(*c.model.t2)), "model.t2 must be positive");

  if (c.initial == InitialKind::Equilibrium) {
    need(c.model.a > std::abs(c.model.g),
         "initial.kind=equilibrium needs model.a > |model.g| (a=" + f(c.model.a) + ", g=" + f(c.model.g) + ")");
  }
  if (c.initial == InitialKind::Covariance) {
    need(c.cov0.is_positive_definite(), "initial covariance must be positive definite");
  }

  need(!c.t_grid.empty(), "time.grid must not be empty");
  for (std::size_t i = 0; i < c.t_grid.size(); ++i) {
    need(c.t_grid[i] >= 0.0 && finite(c.t_grid[i]), "time.grid entries must be finite and >= 0");
    if (i > 0) need(c.t_grid[i] > c.t_grid[i - 1], "time.grid must be strictly increasing");
  }
  need(c.dt > 0.0 && finite(c.dt), "time.dt must be positive");
  need(c.eps > 0.0 && finite(c.eps), "time.eps must be positive");
  need(c.eps >= 10.0 * c.dt * (1.0 - 1e-9),
       "time.eps must be at least 10 time.dt (eps=" + f(c.eps) + ", dt=" + f(c.dt) + ")");
  need(c.t_probe >= c.eps && finite(c.t_probe), "time.t_probe must be >= time.eps");
  need(c.burn_in >= 0.0 && finite(c.burn_in), "time.burn_in must be >= 0");

  need(c.n_traj >= 2, "n_traj must be at least 2");
  need(c.n_traj <= std::numeric_limits<std::uint32_t>::max(), "n_traj must fit in 32 bits");

  need(c.binning.bins_per_axis >= 1, "estimator.bins_per_axis must be >= 1");
  need(c.binning.span_sd > 0.0 && finite(c.binning.span_sd), "estimator.span_sd must be positive");
  need(c.binning.min_count >= 1, "estimator.min_count must be >= 1");

  need(c.scan_g_step > 0.0 && finite(c.scan_g_step), "scan.g_step must be positive");
  need(c.scan_g_min <= c.scan_g_max, "scan.g_min must not exceed scan.g_max");
  if (c.scan_g_step > 0.0) {
    need((c.scan_g_max - c.scan_g_min) / c.scan_g_step <= 100000.0, "scan has more than 100000 points");
  }

  const auto& k = c.kramers;
  need(k.m > 0.0 && finite(k.m), "kramers.m must be positive");
  need(k.gamma > 0.0 && finite(k.gamma), "kramers.gamma must be positive");
  need(k.a >= 0.0 && finite(k.a), "kramers.a must be >= 0");
  need(k.T > 0.0 && finite(k.T), "kramers.T must be positive");
  if (k.m > 0.0 && k.gamma > 0.0 && k.a >= 0.0) {
    need(4.0 * k.a * k.m / (k.gamma * k.gamma) <= 1.0, "kramers parameters are underdamped-oscillatory (4am/gamma^2 > 1)");
  }
  need(finite(c.kramers_x), "kramers.x must be finite");
  need(c.kramers_t > 0.0 && finite(c.kramers_t), "kramers.t must be positive");
  for (double e : c.kramers_eps_grid) {
    need(e > 0.0 && e < c.kramers_t, "kramers.eps_grid entries must lie in (0, kramers.t)");
  }
  need(c.kramers_dt > 0.0 && finite(c.kramers_dt), "kramers.dt must be positive");
  need(c.kramers_t_sim > 0.0 && finite(c.kramers_t_sim), "kramers.t_sim must be positive");
  need(c.kramers_eps_check > 0.0 && c.kramers_eps_check < c.kramers_t_sim,
       "kramers.eps_check must lie in (0, kramers.t_sim)");
  need(c.kramers_n_traj >= 2, "kramers.n_traj must be at least 2");
  need(c.kramers_n_traj <= std::numeric_limits<std::uint32_t>::max(), "kramers.n_traj must fit in 32 bits");

  need(!c.out.empty(), "out must not be empty");
  return bad;
}

double resolved_burn_in(const ExperimentConfig& c) {
  if (c.burn_in > 0.0) return c.burn_in;
  const double rate = c.model.a - std::abs(c.model.g);
  if (!(rate > 0.0)) {
    throw Error(ErrorCode::NoStationaryState, "burn-in needs a > |g| or an explicit time.burn_in");
  }
  return 10.0 / rate;
}

std::vector<double> default_crossover_grid() {
  std::vector<double> g;
  for (int i = 0; i <= 20; ++i) g.push_back(1e-5 * std::pow(10.0, 0.25 * i));  // 1e-5 .. 1
  std::erase_if(g, [](double e) { return e > 0.5; });
  g.push_back(0.15);
  g.push_back(0.2);
  g.push_back(0.5);
  std::sort(g.begin(), g.end());
  g.erase(std::unique(g.begin(), g.end(), [](double x, double y) { return std::abs(x - y) < 1e-12 * y; }), g.end());
  return g;
}

InitialCondition pair_initial(const ExperimentConfig& c) {
  GaussianInitial init;
  init.mean = Eigen::VectorXd::Zero(2);
  init.cov = Eigen::MatrixXd::Zero(2, 2);
  init.sampling = c.sampling;
  switch (c.initial) {
    case InitialKind::Equilibrium: {
      const auto eq = equilibrium_covariance(c.model);
      init.cov << eq.s11, eq.s12, eq.s12, eq.s22;
      break;
    }
    case InitialKind::Covariance:
      init.cov << c.cov0.s11, c.cov0.s12, c.cov0.s12, c.cov0.s22;
      break;
    case InitialKind::Origin:
      return InitialPoints(c.n_traj, std::vector<double>(2, 0.0));
  }
  return init;
}

EnsembleConfig pair_ensemble(const ExperimentConfig& c, std::vector<double> t_grid, unsigned threads) {
  EnsembleConfig e;
  e.model = OverdampedModel::harmonic_pair(c.model);
  e.initial = pair_initial(c);
  e.t_grid = std::move(t_grid);
  e.dt = c.dt;
  e.n_traj = c.n_traj;
  e.seed = c.seed;
  e.stepper = c.stepper;
  e.threads = threads;
  return e;
}

}  // namespace brownent::cli
