#include "parps/experiments.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>

#include <json.hpp>

#include "parps/coupling.hpp"
#include "parps/makespan.hpp"
#include "parps/meanfield.hpp"
#include "parps/model.hpp"
#include "parps/parallel.hpp"
#include "parps/simulator.hpp"
#include "parps/stats.hpp"

namespace parps::experiments {

namespace {

constexpr const char* kVersion = "0.1.0";

struct ParamDef {
  const char* key;
  const char* value;  // default
};

// One schema per kind; every key not listed here (besides kind/seed/
// output_path) is rejected.
const std::map<std::string, std::vector<ParamDef>>& schemas() {
  static const std::map<std::string, std::vector<ParamDef>> s = {
      {"table1",
       {{"n_list", "100,500"},
        {"lambda_list", "0.3,0.9"},
        {"d_list", "2,4"},
        {"snapshots", "300"},
        {"warmup_factor", "30"},
        {"spacing_factor", "5"},
        {"engine", "ctmc"}}},
      {"meanfield_sweep",
       {{"lambda_list", "0.1,0.2,0.3,0.4,0.5,0.6,0.7,0.8,0.9,0.95,0.99"},
        {"d_list", "1,2,3,4,5,6"},
        {"tol", "1e-10"}}},
      {"cdf_compare",
       {{"n_list", "100,500"},
        {"lambda", "0.3"},
        {"d", "2"},
        {"snapshots", "200"},
        {"warmup_factor", "30"},
        {"spacing_factor", "5"},
        {"kmax", "30"}}},
      {"transient_ccdf",
       {{"n_list", "1000,5000"},
        {"lambda", "0.9"},
        {"d", "2"},
        {"times", "0,0.5,1,1.5,2,3,4,5,6,8,10"},
        {"replicas", "20"},
        {"kmax", "3"},
        {"ode_step", "0.01"}}},
      {"insensitivity",
       {{"n", "500"},
        {"load", "0.8"},
        {"d", "2"},
        {"snapshots", "150"},
        {"erlang_phases", "2,4,8"},
        {"hyperexp_rates", "2,0.5;4,0.25"}}},
      {"coupling_suite",
       {{"n", "50"},
        {"lambda", "0.7"},
        {"d", "2"},
        {"events", "100000"},
        {"warm_time", "50"},
        {"w_replicas", "50"},
        {"w_horizon", "30"},
        {"w_sample_dt", "0.5"},
        {"monotone_n", "100"},
        {"monotone_grid", "1,2,5,10,20"},
        {"monotone_replicas", "500"}}},
      {"tv_curve",
       {{"n_list", "50,100,200"},
        {"lambda", "0.7"},
        {"d", "2"},
        {"times", "0.5,1,1.5,2,2.5,3,4,5,6,8,10,14,20"},
        {"samples_per_point", "16000"}}},
      {"makespan_suite",
       {{"k_list", "2,3,4,5"},
        {"d_list", "2,3,4"},
        {"phase_n", "10000"},
        {"phase_d", "2"},
        {"phase_k", "2"},
        {"phase_lambda_list", "0.3,0.4,0.45,0.5,0.55,0.6,0.7"},
        {"phase_trials", "100"},
        {"sandwich_instances", "200"},
        {"sandwich_n_max", "60"},
        {"sandwich_lambda_list", "0.5,1,2"},
        {"sandwich_d_list", "2,3"},
        {"eps", "1e-6"}}},
  };
  return s;
}

std::string trim(std::string_view sv) {
  const auto b = sv.find_first_not_of(" \t\r");
  if (b == std::string_view::npos) return {};
  const auto e = sv.find_last_not_of(" \t\r");
  return std::string(sv.substr(b, e - b + 1));
}

double to_double(const std::string& key, const std::string& value) {
  try {
    std::size_t pos = 0;
    const double v = std::stod(value, &pos);
    if (pos != value.size()) throw std::invalid_argument("");
    return v;
  } catch (const std::exception&) {
    throw ValidationError(key + ": not a number: '" + value + "'");
  }
}

std::int64_t to_int(const std::string& key, const std::string& value) {
  try {
    std::size_t pos = 0;
    const std::int64_t v = std::stoll(value, &pos);
    if (pos != value.size()) throw std::invalid_argument("");
    return v;
  } catch (const std::exception&) {
    throw ValidationError(key + ": not an integer: '" + value + "'");
  }
}

std::vector<std::string> split(const std::string& value, char sep) {
  std::vector<std::string> out;
  std::string cur;
  auto flush = [&]() {
    const std::string tok = trim(cur);
    if (!tok.empty()) out.push_back(tok);
    cur.clear();
  };
  for (char c : value) {
    if (c == sep) {
      flush();
    } else {
      cur.push_back(c);
    }
  }
  flush();
  return out;
}

std::vector<double> double_list(const std::string& key, const std::string& value) {
  std::vector<double> out;
  for (const auto& tok : split(value, ',')) {
    if (!tok.empty()) out.push_back(to_double(key, tok));
  }
  return out;
}

std::vector<int> int_list(const std::string& key, const std::string& value) {
  std::vector<int> out;
  for (const auto& tok : split(value, ',')) {
    if (!tok.empty()) out.push_back(static_cast<int>(to_int(key, tok)));
  }
  return out;
}

void check_lambda_range(const std::string& key, double lambda) {
  if (!(lambda > 0.0 && lambda < 1.0)) {
    throw ValidationError(key + ": value " + format_number(lambda) +
                          " outside (0,1); the simulated system is stable only for lambda < 1");
  }
}

class Access {
 public:
  explicit Access(const Spec& spec) : spec_(spec) {}
  const std::string& raw(const std::string& key) const { return spec_.params.at(key); }
  double real(const std::string& key) const { return to_double(key, raw(key)); }
  int integer(const std::string& key) const { return static_cast<int>(to_int(key, raw(key))); }
  std::vector<double> reals(const std::string& key) const { return double_list(key, raw(key)); }
  std::vector<int> integers(const std::string& key) const { return int_list(key, raw(key)); }

 private:
  const Spec& spec_;
};

void validate_ranges(const Spec& spec) {
  Access p(spec);
  const std::string& kind = spec.kind;
  if (kind == "table1" || kind == "cdf_compare" || kind == "transient_ccdf" ||
      kind == "coupling_suite" || kind == "tv_curve") {
    if (spec.params.count("lambda") != 0u) check_lambda_range("lambda", p.real("lambda"));
    if (spec.params.count("lambda_list") != 0u) {
      for (double l : p.reals("lambda_list")) check_lambda_range("lambda_list", l);
    }
  }
  if (kind == "meanfield_sweep") {
    for (double l : p.reals("lambda_list")) check_lambda_range("lambda_list", l);
  }
  if (kind == "insensitivity") check_lambda_range("load", p.real("load"));
  if (kind == "table1" || kind == "cdf_compare" || kind == "transient_ccdf") {
    for (int n : p.integers("n_list")) {
      if (n < 1) throw ValidationError("n_list: server counts must be positive");
    }
  }
  if (kind == "table1") {
    const auto& engine = p.raw("engine");
    if (engine != "ctmc" && engine != "uniformized" && engine != "workload") {
      throw ValidationError("engine: expected ctmc, uniformized or workload");
    }
  }
  if (kind == "makespan_suite") {
    for (double l : p.reals("phase_lambda_list")) {
      if (!(l > 0.0)) throw ValidationError("phase_lambda_list: lambdas must be positive");
    }
    for (int k : p.integers("k_list")) {
      if (k < 2) throw ValidationError("k_list: thresholds need k >= 2");
    }
    for (int d : p.integers("d_list")) {
      if (d < 2) throw ValidationError("d_list: thresholds need d >= 2");
    }
    if (p.integer("sandwich_n_max") < 3) {
      throw ValidationError("sandwich_n_max: must be at least 3");
    }
  }
}

}  // namespace

std::vector<std::string> list_kinds() {
  std::vector<std::string> out;
  for (const auto& [kind, defs] : schemas()) out.push_back(kind);
  return out;
}

std::string emit_default(const std::string& kind) {
  const auto it = schemas().find(kind);
  if (it == schemas().end()) throw ValidationError("unknown kind: '" + kind + "'");
  std::ostringstream os;
  os << "kind = " << kind << "\n";
  os << "seed = 12345\n";
  os << "output_path = " << kind << "\n";
  for (const auto& def : it->second) os << def.key << " = " << def.value << "\n";
  return os.str();
}

Spec validate_spec(std::string_view config_text) {
  std::map<std::string, std::string> raw;
  int lineno = 0;
  std::istringstream is{std::string(config_text)};
  std::string line;
  while (std::getline(is, line)) {
    ++lineno;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    const std::string stripped = trim(line);
    if (stripped.empty()) continue;
    const auto eq = stripped.find('=');
    if (eq == std::string::npos) {
      throw ValidationError("expected 'key = value', got '" + stripped + "'", lineno);
    }
    const std::string key = trim(stripped.substr(0, eq));
    const std::string value = trim(stripped.substr(eq + 1));
    if (key.empty()) throw ValidationError("empty key", lineno);
    if (raw.count(key) != 0u) throw ValidationError("duplicate key '" + key + "'", lineno);
    raw[key] = value;
  }

  const auto kind_it = raw.find("kind");
  if (kind_it == raw.end()) throw ValidationError("missing required key 'kind'");
  const std::string kind = kind_it->second;
  const auto schema_it = schemas().find(kind);
  if (schema_it == schemas().end()) throw ValidationError("unknown kind: '" + kind + "'");

  Spec spec;
  spec.kind = kind;
  spec.seed = 12345;
  spec.output_path = kind;
  for (const auto& def : schema_it->second) spec.params[def.key] = def.value;

  for (const auto& [key, value] : raw) {
    if (key == "kind") continue;
    if (key == "seed") {
      spec.seed = static_cast<std::uint64_t>(to_int("seed", value));
      continue;
    }
    if (key == "output_path") {
      if (value.empty()) throw ValidationError("output_path: must not be empty");
      spec.output_path = value;
      continue;
    }
    if (spec.params.count(key) == 0u) {
      throw ValidationError("unknown key '" + key + "' for kind '" + kind + "'");
    }
    spec.params[key] = value;
  }
  validate_ranges(spec);
  return spec;
}

std::string format_number(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.10g", v);
  return buf;
}

std::string ResultTable::to_csv() const {
  std::ostringstream os;
  for (std::size_t c = 0; c < column_names.size(); ++c) {
    if (c) os << ",";
    os << column_names[c];
  }
  os << "\n";
  for (const auto& row : rows) {
    for (std::size_t c = 0; c < row.size(); ++c) {
      if (c) os << ",";
      os << row[c];
    }
    os << "\n";
  }
  return os.str();
}

namespace {

using model::ServiceLaw;
using model::SystemConfig;

std::string fmt(double v) { return format_number(v); }
std::string fmt(int v) { return std::to_string(v); }

SystemConfig make_config(int n, int d, double lambda, std::uint64_t seed) {
  SystemConfig cfg;
  cfg.n = n;
  cfg.d = d;
  cfg.lambda = lambda;
  cfg.seed = seed;
  return cfg;
}

sim::SnapshotPlan make_plan(double lambda, int count, double warmup_factor, double spacing_factor) {
  sim::SnapshotPlan plan;
  const double relax = 1.0 / (1.0 - lambda);
  plan.warmup = warmup_factor * relax;
  plan.count = count;
  plan.spacing = spacing_factor * relax;
  return plan;
}

ResultTable run_table1(const Spec& spec, const RunOptions& opt) {
  Access p(spec);
  const auto ns = p.integers("n_list");
  const auto lambdas = p.reals("lambda_list");
  const auto ds = p.integers("d_list");
  const int snapshots = p.integer("snapshots");
  const double wf = p.real("warmup_factor");
  const double sf = p.real("spacing_factor");
  const auto& engine_name = p.raw("engine");
  const sim::Engine engine = engine_name == "ctmc"          ? sim::Engine::Ctmc
                             : engine_name == "uniformized" ? sim::Engine::Uniformized
                                                            : sim::Engine::Workload;

  struct Cell {
    int n;
    double lambda;
    int d;
    double mean = 0.0, ci = 0.0;
  };
  std::vector<Cell> cells;
  for (int n : ns) {
    for (double lambda : lambdas) {
      for (int d : ds) cells.push_back({n, lambda, d});
    }
  }
  run_items(static_cast<int>(cells.size()), opt.threads, [&](int i) {
    auto& cell = cells[static_cast<std::size_t>(i)];
    auto cfg = make_config(cell.n, cell.d, cell.lambda,
                           derive_seed(spec.seed, static_cast<std::uint64_t>(i)));
    const auto stats = sim::run(cfg, make_plan(cell.lambda, snapshots, wf, sf), engine);
    cell.mean = stats.mean;
    cell.ci = stats.mean_ci_halfwidth;
  });

  ResultTable table;
  table.column_names = {"n", "lambda", "d", "mean_q", "ci_halfwidth"};
  for (const auto& cell : cells) {
    table.rows.push_back({fmt(cell.n), fmt(cell.lambda), fmt(cell.d), fmt(cell.mean), fmt(cell.ci)});
  }
  for (double lambda : lambdas) {
    for (int d : ds) {
      if (d < 2) continue;
      const auto sol = meanfield::solve_fixed_point(lambda, d, 1e-12);
      table.rows.push_back({"meanfield", fmt(lambda), fmt(d), fmt(sol.mean_q), "0"});
    }
  }
  return table;
}

ResultTable run_meanfield_sweep(const Spec& spec, const RunOptions&) {
  Access p(spec);
  const auto lambdas = p.reals("lambda_list");
  const auto ds = p.integers("d_list");
  const double tol = p.real("tol");

  ResultTable table;
  table.column_names = {"lambda", "d", "mean_q", "method"};
  for (double lambda : lambdas) {
    for (int d : ds) {
      if (d == 1) {
        table.rows.push_back({fmt(lambda), fmt(d), fmt(lambda / (1.0 - lambda)), "analytic"});
      } else {
        const auto sol = meanfield::solve_fixed_point(lambda, d, tol);
        table.rows.push_back({fmt(lambda), fmt(d), fmt(sol.mean_q), "fixed_point"});
      }
    }
  }
  return table;
}

ResultTable run_cdf_compare(const Spec& spec, const RunOptions& opt) {
  Access p(spec);
  const auto ns = p.integers("n_list");
  const double lambda = p.real("lambda");
  const int d = p.integer("d");
  const int snapshots = p.integer("snapshots");
  const int kmax = p.integer("kmax");
  const double wf = p.real("warmup_factor");
  const double sf = p.real("spacing_factor");

  ResultTable table;
  table.column_names = {"source", "lambda", "d", "k", "cdf"};
  const auto sol = meanfield::solve_fixed_point(lambda, d, 1e-12);
  const auto mf_cdf = meanfield::stationary_cdf(sol);

  std::vector<std::vector<double>> sim_cdfs(ns.size());
  run_items(static_cast<int>(ns.size()), opt.threads, [&](int i) {
    auto cfg = make_config(ns[static_cast<std::size_t>(i)], d, lambda,
                           derive_seed(spec.seed, static_cast<std::uint64_t>(i)));
    sim_cdfs[static_cast<std::size_t>(i)] =
        sim::run_ctmc(cfg, make_plan(lambda, snapshots, wf, sf)).empirical_cdf;
  });

  auto cdf_at = [](const std::vector<double>& cdf, int k) {
    return static_cast<std::size_t>(k) < cdf.size() ? cdf[static_cast<std::size_t>(k)] : 1.0;
  };
  for (std::size_t i = 0; i < ns.size(); ++i) {
    const std::string label = "sim_n" + std::to_string(ns[i]);
    for (int k = 0; k <= kmax; ++k) {
      table.rows.push_back({label, fmt(lambda), fmt(d), fmt(k), fmt(cdf_at(sim_cdfs[i], k))});
    }
    table.metadata["supnorm_" + label] =
        fmt(stats::cdf_sup_distance(sim_cdfs[i], mf_cdf));
  }
  for (int k = 0; k <= kmax; ++k) {
    table.rows.push_back({"meanfield", fmt(lambda), fmt(d), fmt(k), fmt(cdf_at(mf_cdf, k))});
  }
  return table;
}

ResultTable run_transient_ccdf(const Spec& spec, const RunOptions& opt) {
  Access p(spec);
  const auto ns = p.integers("n_list");
  const double lambda = p.real("lambda");
  const int d = p.integer("d");
  const auto times = p.reals("times");
  const int replicas = p.integer("replicas");
  const int kmax = p.integer("kmax");
  const double step = p.real("ode_step");

  ResultTable table;
  table.column_names = {"source", "time", "k", "ybar"};
  for (std::size_t i = 0; i < ns.size(); ++i) {
    auto cfg = make_config(ns[i], d, lambda, derive_seed(spec.seed, i));
    const auto tc = sim::transient_ccdf(cfg, times, replicas, kmax, opt.threads);
    const std::string label = "sim_n" + std::to_string(ns[i]);
    for (std::size_t ti = 0; ti < tc.times.size(); ++ti) {
      for (int k = 0; k <= kmax; ++k) {
        table.rows.push_back(
            {label, fmt(tc.times[ti]), fmt(k), fmt(tc.ybar[ti][static_cast<std::size_t>(k)])});
      }
    }
  }

  // mean-field trajectory from the empty start
  const auto sol = meanfield::solve_fixed_point(lambda, d, 1e-12);
  meanfield::CcdfState init;
  init.ybar.assign(static_cast<std::size_t>(sol.truncation_k) + 1, 0.0);
  init.ybar[0] = 1.0;
  const double horizon = times.empty() ? 0.0 : times.back();
  const auto ode = meanfield::integrate_ode(init, horizon, step, lambda, d, sol.truncation_k);
  for (double t : times) {
    const auto idx = std::min<std::size_t>(
        static_cast<std::size_t>(std::llround(t / step)), ode.trajectory.size() - 1);
    const auto& st = ode.trajectory[idx];
    for (int k = 0; k <= kmax; ++k) {
      const double v =
          static_cast<std::size_t>(k) < st.ybar.size() ? st.ybar[static_cast<std::size_t>(k)] : 0.0;
      table.rows.push_back({"meanfield", fmt(t), fmt(k), fmt(v)});
    }
  }
  return table;
}

ResultTable run_insensitivity(const Spec& spec, const RunOptions& opt) {
  Access p(spec);
  const int n = p.integer("n");
  const double load = p.real("load");
  const int d = p.integer("d");
  const int snapshots = p.integer("snapshots");
  const auto phases = p.integers("erlang_phases");

  struct LawRun {
    std::string label;
    ServiceLaw law;
    sim::QueueStats stats;
  };
  std::vector<LawRun> runs;
  runs.push_back({"exp", ServiceLaw::exponential(1.0), {}});
  for (int ph : phases) {
    if (ph <= 1) continue;  // one phase is the exponential reference
    runs.push_back({"erlang" + std::to_string(ph), ServiceLaw::erlang(ph, 1.0), {}});
  }
  for (const auto& pair_text : split(p.raw("hyperexp_rates"), ';')) {
    if (pair_text.empty()) continue;
    const auto parts = split(pair_text, ',');
    if (parts.size() != 2) {
      throw ValidationError("hyperexp_rates: expected 'r1,r2' pairs separated by ';'");
    }
    const double r1 = to_double("hyperexp_rates", parts[0]);
    const double r2 = to_double("hyperexp_rates", parts[1]);
    runs.push_back({"hyperexp_" + parts[0] + "_" + parts[1],
                    ServiceLaw::hyperexponential_unit_mean(r1, r2),
                    {}});
  }

  run_items(static_cast<int>(runs.size()), opt.threads, [&](int i) {
    auto& r = runs[static_cast<std::size_t>(i)];
    auto cfg = make_config(n, d, load, derive_seed(spec.seed, static_cast<std::uint64_t>(i)));
    cfg.service_law = r.law;
    r.stats = sim::run_workload(cfg, make_plan(load, snapshots, 10.0, 5.0));
  });

  ResultTable table;
  table.column_names = {"law", "k", "cdf"};
  for (const auto& r : runs) {
    for (std::size_t k = 0; k < r.stats.empirical_cdf.size(); ++k) {
      table.rows.push_back({r.label, fmt(static_cast<int>(k)), fmt(r.stats.empirical_cdf[k])});
    }
    if (&r != &runs.front()) {
      table.metadata["ks_" + r.label] = fmt(
          stats::ks_distance(runs.front().stats.pooled_histogram, r.stats.pooled_histogram));
    }
    table.metadata["mean_" + r.label] = fmt(r.stats.mean);
  }
  return table;
}

ResultTable run_coupling_suite(const Spec& spec, const RunOptions& opt) {
  Access p(spec);
  const int n = p.integer("n");
  const double lambda = p.real("lambda");
  const int d = p.integer("d");
  const auto events = static_cast<std::int64_t>(p.integer("events"));
  const double warm_time = p.real("warm_time");

  ResultTable table;
  table.column_names = {"section", "time", "k", "value"};

  // dominance assertions over a long coupled run
  {
    auto cfg = make_config(n, d, lambda, spec.seed);
    Rng rng(derive_seed(spec.seed, 1));
    coupling::CoupledState st;
    st.lower = model::SystemState(n);
    st.upper = coupling::warmed_state(cfg, warm_time, rng);
    std::int64_t violations = 0;
    for (std::int64_t e = 0; e < events; ++e) {
      try {
        coupling::coupled_step(st, cfg, rng);
      } catch (const model::InvariantViolation&) {
        ++violations;
      }
    }
    table.metadata["dominance_events"] = std::to_string(events);
    table.metadata["dominance_violations"] = std::to_string(violations);
    table.rows.push_back({"dominance_violations", "", "", std::to_string(violations)});
  }

  // averaged W trace: empty lower vs warmed upper
  {
    const int replicas = p.integer("w_replicas");
    const double horizon = p.real("w_horizon");
    const double sample_dt = p.real("w_sample_dt");
    auto cfg = make_config(n, d, lambda, spec.seed);
    std::vector<std::vector<double>> traces(static_cast<std::size_t>(replicas));
    run_items(replicas, opt.threads, [&](int r) {
      Rng rng(derive_seed(spec.seed, 1000 + static_cast<std::uint64_t>(r)));
      auto upper = coupling::warmed_state(cfg, warm_time, rng);
      auto trace = coupling::run_coupled(cfg, horizon, model::SystemState(n), upper, rng, sample_dt);
      traces[static_cast<std::size_t>(r)] = trace.w_values;
    });
    std::size_t len = 0;
    for (const auto& t : traces) len = std::max(len, t.size());
    for (std::size_t i = 0; i < len; ++i) {
      double sum = 0.0;
      int cnt = 0;
      for (const auto& t : traces) {
        if (i < t.size()) {
          sum += t[i];
          ++cnt;
        }
      }
      table.rows.push_back({"w_mean", fmt(static_cast<double>(i) * sample_dt), "",
                            fmt(cnt > 0 ? sum / cnt : 0.0)});
    }
  }

  // monotone start on its own system size
  {
    auto cfg = make_config(p.integer("monotone_n"), d, lambda, derive_seed(spec.seed, 2));
    const auto grid = p.reals("monotone_grid");
    const auto rep = coupling::monotone_start_check(cfg, grid, p.integer("monotone_replicas"),
                                                    opt.threads);
    table.metadata["monotone_worst_violation_sigma"] = fmt(rep.worst_violation_sigma);
    for (std::size_t ti = 0; ti < rep.grid.size(); ++ti) {
      for (std::size_t k = 0; k < rep.mean_cdf[ti].size(); ++k) {
        table.rows.push_back({"monotone_cdf", fmt(rep.grid[ti]), fmt(static_cast<int>(k)),
                              fmt(rep.mean_cdf[ti][k])});
      }
    }
  }
  return table;
}

ResultTable run_tv_curve(const Spec& spec, const RunOptions& opt) {
  Access p(spec);
  const auto ns = p.integers("n_list");
  const double lambda = p.real("lambda");
  const int d = p.integer("d");
  const auto times = p.reals("times");
  const int samples = p.integer("samples_per_point");

  ResultTable table;
  table.column_names = {"n", "time", "tv"};
  for (std::size_t i = 0; i < ns.size(); ++i) {
    const int n = ns[i];
    auto cfg = make_config(n, d, lambda, derive_seed(spec.seed, i));
    const int replicas = std::max(1, (samples + n - 1) / n);
    const auto curve = coupling::tv_convergence_curve(cfg, times, replicas, opt.threads);
    for (std::size_t ti = 0; ti < curve.times.size(); ++ti) {
      table.rows.push_back({fmt(n), fmt(curve.times[ti]), fmt(curve.tv[ti])});
    }
    table.metadata["time_to_tv_0.1_n" + std::to_string(n)] = fmt(curve.time_to_reach(0.1));
  }
  return table;
}

ResultTable run_makespan_suite(const Spec& spec, const RunOptions& opt) {
  Access p(spec);
  ResultTable table;
  table.column_names = {"section", "k",     "d",     "lambda", "n",    "m",
                        "k_star",  "lower", "exact", "upper",  "value"};
  auto blank_row = [&]() { return std::vector<std::string>(table.column_names.size()); };

  for (int k : p.integers("k_list")) {
    for (int d : p.integers("d_list")) {
      auto row = blank_row();
      row[0] = "gamma";
      row[1] = fmt(k);
      row[2] = fmt(d);
      row[10] = fmt(makespan::gamma_threshold(k, d));
      table.rows.push_back(std::move(row));
    }
  }

  {
    const int n = p.integer("phase_n");
    const int d = p.integer("phase_d");
    const int k = p.integer("phase_k");
    const auto lambdas = p.reals("phase_lambda_list");
    const auto points = makespan::core_phase_diagram(n, d, lambdas, p.integer("phase_trials"), k,
                                                     derive_seed(spec.seed, 7), opt.threads);
    for (const auto& pt : points) {
      auto row = blank_row();
      row[0] = "phase";
      row[1] = fmt(k);
      row[2] = fmt(d);
      row[3] = fmt(pt.lambda);
      row[4] = fmt(n);
      row[10] = fmt(pt.nonempty_fraction);
      table.rows.push_back(std::move(row));
    }
    double fact = 1.0;
    for (int i = 2; i <= d; ++i) fact *= i;
    table.metadata["phase_threshold_prediction"] = fmt(makespan::gamma_threshold(k, d) / fact);
  }

  {
    const int instances = p.integer("sandwich_instances");
    const int n_max = p.integer("sandwich_n_max");
    const auto lambdas = p.reals("sandwich_lambda_list");
    const auto ds = p.integers("sandwich_d_list");
    const double eps = p.real("eps");
    int violations = 0;
    std::vector<std::vector<std::string>> rows(static_cast<std::size_t>(instances));
    std::vector<char> ok(static_cast<std::size_t>(instances), 1);
    run_items(instances, opt.threads, [&](int i) {
      Rng pick(derive_seed(spec.seed, 100000 + static_cast<std::uint64_t>(i)));
      const int n = 3 + static_cast<int>(pick.below(static_cast<std::uint64_t>(n_max - 2)));
      const double lambda = lambdas[pick.below(lambdas.size())];
      const int d = std::min(n, ds[pick.below(ds.size())]);
      auto h = makespan::Hypergraph::generate(n, lambda, d, pick.bits());
      auto row = blank_row();
      row[0] = "sandwich";
      row[2] = fmt(d);
      row[3] = fmt(lambda);
      row[4] = fmt(n);
      row[5] = fmt(static_cast<int>(h.edges.size()));
      if (h.edges.empty()) {
        rows[static_cast<std::size_t>(i)] = std::move(row);
        return;
      }
      const auto bounds = makespan::makespan_bounds(h);
      const double exact = makespan::makespan_exact(h, eps);
      row[6] = fmt(bounds.k_star);
      row[7] = fmt(bounds.lower);
      row[8] = fmt(exact);
      row[9] = fmt(bounds.upper);
      if (!(bounds.lower - eps <= exact && exact <= bounds.upper + eps)) {
        ok[static_cast<std::size_t>(i)] = 0;
      }
      rows[static_cast<std::size_t>(i)] = std::move(row);
    });
    for (int i = 0; i < instances; ++i) {
      violations += ok[static_cast<std::size_t>(i)] ? 0 : 1;
      table.rows.push_back(std::move(rows[static_cast<std::size_t>(i)]));
    }
    table.metadata["sandwich_violations"] = std::to_string(violations);
  }
  return table;
}

std::string timestamp_utc() {
  const auto now = std::chrono::system_clock::now();
  const std::time_t t = std::chrono::system_clock::to_time_t(now);
  char buf[32];
  std::tm tm{};
  gmtime_r(&t, &tm);
  std::strftime(buf, sizeof(buf), "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

void persist(const Spec& spec, const ResultTable& table, const RunOptions& opt) {
  namespace fs = std::filesystem;
  const fs::path dir(opt.out_dir);
  std::error_code ec;
  fs::create_directories(dir, ec);
  const fs::path csv_path = dir / (spec.output_path + ".csv");
  const fs::path json_path = dir / (spec.output_path + ".json");

  {
    std::ofstream out(csv_path, std::ios::binary);
    if (!out) throw IoError("cannot open for writing: " + csv_path.string());
    out << table.to_csv();
    if (!out) throw IoError("write failed: " + csv_path.string());
  }
  {
    nlohmann::json meta;
    meta["kind"] = spec.kind;
    meta["seed"] = spec.seed;
    meta["version"] = kVersion;
    meta["created"] = timestamp_utc();
    meta["csv"] = csv_path.filename().string();
    meta["config"] = spec.params;
    meta["summary"] = table.metadata;
    std::ofstream out(json_path, std::ios::binary);
    if (!out) throw IoError("cannot open for writing: " + json_path.string());
    out << meta.dump(2) << "\n";
    if (!out) throw IoError("write failed: " + json_path.string());
  }
}

}  // namespace

ResultTable run_experiment(const Spec& spec, const RunOptions& options) {
  Spec effective = spec;
  if (options.seed_override) effective.seed = *options.seed_override;

  ResultTable table;
  if (effective.kind == "table1") {
    table = run_table1(effective, options);
  } else if (effective.kind == "meanfield_sweep") {
    table = run_meanfield_sweep(effective, options);
  } else if (effective.kind == "cdf_compare") {
    table = run_cdf_compare(effective, options);
  } else if (effective.kind == "transient_ccdf") {
    table = run_transient_ccdf(effective, options);
  } else if (effective.kind == "insensitivity") {
    table = run_insensitivity(effective, options);
  } else if (effective.kind == "coupling_suite") {
    table = run_coupling_suite(effective, options);
  } else if (effective.kind == "tv_curve") {
    table = run_tv_curve(effective, options);
  } else if (effective.kind == "makespan_suite") {
    table = run_makespan_suite(effective, options);
  } else {
    throw ValidationError("unknown kind: '" + effective.kind + "'");
  }

  table.config_echo = effective.params;
  table.config_echo["kind"] = effective.kind;
  table.config_echo["seed"] = std::to_string(effective.seed);
  if (options.persist) persist(effective, table, options);
  return table;
}

}  // namespace parps::experiments
