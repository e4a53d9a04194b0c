#include <chrono>
#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"
#include "rfr/baselines/baselines.hpp"
#include "rfr/data/io.hpp"
#include "rfr/dist/runtime.hpp"
#include "rfr/forest/forest.hpp"
#include "rfr/forest/serialize.hpp"
#include "rfr/sim/generators.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace rfr;

namespace {

constexpr int kOk = 0;
constexpr int kRuntimeError = 1;
constexpr int kUsageError = 2;

// One slot per flag: the same table feeds config-file application and the
// manifest, so the three layers (defaults, config, flags) cannot drift apart.
struct Bindings {
  std::map<std::string, std::function<void(const json&)>> set;
  std::vector<std::pair<std::string, std::function<json()>>> get;

  template <class T>
  void bind(const std::string& name, T* slot) {
    set[name] = [slot](const json& v) { *slot = v.get<T>(); };
    get.emplace_back(name, [slot] { return json(*slot); });
  }

  void apply(const json& config) const {
    for (auto it = config.begin(); it != config.end(); ++it) {
      const auto found = set.find(it.key());
      if (found == set.end()) {
        throw std::invalid_argument("unknown config key '" + it.key() + "'");
      }
      try {
        found->second(it.value());
      } catch (const json::exception&) {
        throw std::invalid_argument("config key '" + it.key() + "' has the wrong type");
      }
    }
  }

  json manifest_config() const {
    json out = json::object();
    for (const auto& [name, read] : get) out[name] = read();
    return out;
  }
};

// A manifest is accepted wherever a config file is: its embedded config
// reproduces the run.
json load_config(const std::string& path, const std::string& command) {
  std::ifstream in(path);
  if (!in) throw std::invalid_argument("cannot read config file '" + path + "'");
  json doc;
  try {
    in >> doc;
  } catch (const json::exception& e) {
    throw std::invalid_argument("config file '" + path + "' is not valid JSON: " + e.what());
  }
  if (doc.is_object() && doc.contains("command") && doc.contains("config")) {
    if (doc.at("command").get<std::string>() != command) {
      throw std::invalid_argument("manifest command '" +
                                  doc.at("command").get<std::string>() +
                                  "' does not match subcommand '" + command + "'");
    }
    return doc.at("config");
  }
  if (!doc.is_object()) throw std::invalid_argument("config file must hold a JSON object");
  return doc;
}

void write_file(const fs::path& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write '" + path.string() + "'");
  out << content;
}

void write_manifest(const fs::path& dir, const std::string& command, const Bindings& bindings,
                    const std::vector<std::string>& outputs,
                    std::chrono::steady_clock::time_point started) {
  const double seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - started).count();
  json doc;
  doc["artifact_version"] = 1;
  doc["command"] = command;
  doc["config"] = bindings.manifest_config();
  doc["outputs"] = outputs;
  doc["duration_seconds"] = seconds;
  write_file(dir / "manifest.json", doc.dump(2) + "\n");
}

std::string format_value(double v) {
  if (std::isnan(v)) return "nan";
  std::ostringstream out;
  out.precision(17);
  out << v;
  return out.str();
}

void require(const std::string& value, const char* flag) {
  if (value.empty()) throw std::invalid_argument(std::string(flag) + " is required");
}

int resolve_threads(int flag_value) {
  if (flag_value > 0) return flag_value;
  if (const char* env = std::getenv("RFR_THREADS")) {
    try {
      const int parsed = std::stoi(env);
      if (parsed > 0) return parsed;
    } catch (const std::exception&) {
      throw std::invalid_argument("RFR_THREADS is not a positive integer");
    }
  }
  return 1;
}

TerminalMode parse_mode(const std::string& name) {
  if (name == "mcf") return TerminalMode::mcf;
  if (name == "nhpp") return TerminalMode::nhpp;
  throw std::invalid_argument("mode must be mcf or nhpp");
}

SplitRule parse_rule(const std::string& name) {
  if (name == "l2") return SplitRule::l2;
  if (name == "logrank") return SplitRule::logrank;
  if (name == "intensity") return SplitRule::intensity;
  throw std::invalid_argument("rule must be l2, logrank or intensity");
}

struct SimulateOpts {
  std::string scenario = "A";
  int n = 200;
  int p = 10;
  double horizon = 100.0;
  double sigma = 0.1;
  double step = 1.0;
  std::uint64_t seed = 1;
  std::string out = ".";
};

int cmd_simulate(const SimulateOpts& opts, const Bindings& bindings) {
  const auto started = std::chrono::steady_clock::now();
  if (opts.scenario.size() != 1 || opts.scenario[0] < 'A' || opts.scenario[0] > 'D') {
    throw std::invalid_argument("unknown scenario '" + opts.scenario +
                                "': valid scenarios are A, B, C, D");
  }
  SimConfig cfg;
  cfg.scenario = opts.scenario[0];
  cfg.n = opts.n;
  cfg.p = opts.p;
  cfg.horizon = opts.horizon;
  cfg.brownian_sigma = opts.sigma;
  cfg.brownian_step = opts.step;
  cfg.seed = opts.seed;
  const RecurrenceDataset data = build_dataset(cfg);

  const fs::path dir(opts.out);
  fs::create_directories(dir);
  std::vector<std::string> outputs = {"events.csv", "covariates.csv"};
  std::string sensors;
  if (data.q() > 0) {
    sensors = (dir / "sensors.csv").string();
    outputs.push_back("sensors.csv");
  }
  export_csv(data, (dir / "events.csv").string(), (dir / "covariates.csv").string(), sensors);
  write_manifest(dir, "simulate", bindings, outputs, started);
  std::cout << "wrote " << data.n() << " systems to " << dir.string() << "\n";
  return kOk;
}

struct FitOpts {
  std::string events;
  std::string covariates;
  std::string sensors;
  std::string out = ".";
  std::string mode = "mcf";
  std::string rule = "l2";
  int trees = 500;
  int m_try = 0;
  int min_failed = 5;
  int cut_grid = 32;
  double omega = -1.0;
  int grid_points = 64;
  bool logrank_literal = false;
  int max_iterations = 500;
  std::uint64_t seed = 1;
  int threads = 0;
  int workers = 1;
  bool weighted_merge = false;
  bool oob_trace = true;
};

ForestHyper hyper_of(const FitOpts& opts) {
  ForestHyper hyper;
  hyper.mode = parse_mode(opts.mode);
  hyper.rule = parse_rule(opts.rule);
  hyper.n_trees = opts.trees;
  hyper.m_try = opts.m_try;
  hyper.min_failed = opts.min_failed;
  hyper.cut_grid = opts.cut_grid;
  hyper.omega = opts.omega;
  hyper.grid_points = opts.grid_points;
  hyper.logrank_literal = opts.logrank_literal;
  hyper.max_iterations = opts.max_iterations;
  hyper.threads = resolve_threads(opts.threads);
  return hyper;
}

int cmd_fit(const FitOpts& opts, bool workers_given, const Bindings& bindings) {
  const auto started = std::chrono::steady_clock::now();
  require(opts.events, "--events");
  require(opts.covariates, "--covariates");
  RecurrenceDataset data = ingest_csv(opts.events, opts.covariates, opts.sensors);
  const ScalingParams scaling = standardize_covariates(data);
  const ForestHyper hyper = hyper_of(opts);

  ForestModel forest = workers_given
                           ? fit_forest_distributed(data, hyper, opts.seed, opts.workers,
                                                    opts.weighted_merge)
                           : fit_forest(data, hyper, opts.seed);
  forest.scaling = scaling;

  const fs::path dir(opts.out);
  fs::create_directories(dir);
  write_file(dir / "forest.json", forest_to_json(forest));
  std::vector<std::string> outputs = {"forest.json"};

  if (opts.oob_trace) {
    ForestModel prefix = forest;
    prefix.trees.clear();
    prefix.membership.clear();
    std::ostringstream trace;
    trace << "trees,c_index\n";
    for (std::size_t b = 0; b < forest.trees.size(); ++b) {
      prefix.trees.push_back(forest.trees[b]);
      prefix.membership.push_back(forest.membership[b]);
      trace << (b + 1) << ',' << format_value(oob_c_index(prefix, data)) << '\n';
    }
    write_file(dir / "oob.csv", trace.str());
    outputs.push_back("oob.csv");
  }
  write_manifest(dir, "fit", bindings, outputs, started);
  std::cout << "forest with " << forest.trees.size() << " trees written to " << dir.string()
            << "\n";
  return kOk;
}

struct PredictOpts {
  std::string forest;
  std::string events;
  std::string covariates;
  std::string sensors;
  std::vector<double> grid;
  bool hazard = false;
  std::string out = ".";
};

int cmd_predict(const PredictOpts& opts, const Bindings& bindings) {
  const auto started = std::chrono::steady_clock::now();
  require(opts.forest, "--forest");
  require(opts.events, "--events");
  require(opts.covariates, "--covariates");
  std::ifstream in(opts.forest);
  if (!in) throw DataError("cannot read forest file '" + opts.forest + "'");
  std::stringstream buffer;
  buffer << in.rdbuf();
  const ForestModel forest = forest_from_json(buffer.str());

  if (opts.hazard && forest.hyper.mode != TerminalMode::nhpp) {
    throw std::invalid_argument("--hazard needs an nhpp-mode forest");
  }
  if (!opts.hazard && forest.hyper.mode != TerminalMode::mcf) {
    throw std::invalid_argument("this forest predicts hazards; pass --hazard");
  }
  if (opts.grid.empty()) throw std::invalid_argument("--grid needs at least one time");

  RecurrenceDataset data = ingest_csv(opts.events, opts.covariates, opts.sensors);
  forest.scaling.apply(data);

  std::ostringstream curves;
  curves << "id,t,value\n";
  for (const auto& rec : data.systems) {
    for (double t : opts.grid) {
      const double value = opts.hazard
                               ? predict_hazard_value(forest, rec, t)
                               : predict_mcf_value(forest, rec.static_covariates, t);
      curves << rec.id << ',' << format_value(t) << ',' << format_value(value) << '\n';
    }
  }
  const fs::path dir(opts.out);
  fs::create_directories(dir);
  write_file(dir / "curves.csv", curves.str());
  write_manifest(dir, "predict", bindings, {"curves.csv"}, started);
  std::cout << "predicted " << data.n() << " systems at " << opts.grid.size() << " times\n";
  return kOk;
}

struct ImportanceOpts {
  std::string forest;
  std::string events;
  std::string covariates;
  std::string sensors;
  int repeats = 5;
  std::uint64_t seed = 1;
  std::string out = ".";
};

int cmd_importance(const ImportanceOpts& opts, const Bindings& bindings) {
  const auto started = std::chrono::steady_clock::now();
  require(opts.forest, "--forest");
  require(opts.events, "--events");
  require(opts.covariates, "--covariates");
  std::ifstream in(opts.forest);
  if (!in) throw DataError("cannot read forest file '" + opts.forest + "'");
  std::stringstream buffer;
  buffer << in.rdbuf();
  const ForestModel forest = forest_from_json(buffer.str());

  RecurrenceDataset data = ingest_csv(opts.events, opts.covariates, opts.sensors);
  forest.scaling.apply(data);
  const ImportanceReport report = permutation_importance(forest, data, opts.repeats, opts.seed);

  std::ostringstream table;
  table << "name,mean_drop\n";
  for (std::size_t j = 0; j < report.names.size(); ++j) {
    table << report.names[j] << ',' << format_value(report.importance[j]) << '\n';
  }
  const fs::path dir(opts.out);
  fs::create_directories(dir);
  write_file(dir / "importance.csv", table.str());
  json extra;
  extra["baseline_c_index"] = report.baseline;
  write_file(dir / "baseline.json", extra.dump(2) + "\n");
  write_manifest(dir, "importance", bindings, {"importance.csv", "baseline.json"}, started);
  std::cout << "importance over " << report.names.size() << " covariates written\n";
  return kOk;
}

struct CompareOpts {
  std::string events;
  std::string covariates;
  std::string sensors;
  std::vector<std::string> methods = {"rfr", "mcf", "mcf-k", "hpp"};
  int iterations = 500;
  double split = 0.75;
  int k_neighbors = 20;
  std::string mode = "mcf";
  std::string rule = "l2";
  int trees = 500;
  int m_try = 0;
  int min_failed = 5;
  int cut_grid = 32;
  double omega = -1.0;
  int grid_points = 64;
  int max_iterations = 500;
  std::uint64_t seed = 1;
  int threads = 0;
  std::string out = ".";
};

CompareMethod parse_method(const std::string& name) {
  if (name == "rfr") return CompareMethod::forest;
  if (name == "mcf") return CompareMethod::pooled;
  if (name == "mcf-k") return CompareMethod::k_nearest;
  if (name == "hpp") return CompareMethod::hpp;
  if (name == "nhpp") return CompareMethod::nhpp;
  throw std::invalid_argument("unknown method '" + name +
                              "': valid methods are rfr, mcf, mcf-k, hpp, nhpp");
}

int cmd_compare(const CompareOpts& opts, const Bindings& bindings) {
  const auto started = std::chrono::steady_clock::now();
  require(opts.events, "--events");
  require(opts.covariates, "--covariates");
  const RecurrenceDataset data = ingest_csv(opts.events, opts.covariates, opts.sensors);

  CompareConfig cfg;
  for (const auto& name : opts.methods) cfg.methods.push_back(parse_method(name));
  cfg.iterations = opts.iterations;
  cfg.split = opts.split;
  cfg.k_neighbors = opts.k_neighbors;
  cfg.forest.mode = parse_mode(opts.mode);
  cfg.forest.rule = parse_rule(opts.rule);
  cfg.forest.n_trees = opts.trees;
  cfg.forest.m_try = opts.m_try;
  cfg.forest.min_failed = opts.min_failed;
  cfg.forest.cut_grid = opts.cut_grid;
  cfg.forest.omega = opts.omega;
  cfg.forest.grid_points = opts.grid_points;
  cfg.forest.max_iterations = opts.max_iterations;
  cfg.fit.max_iterations = opts.max_iterations;
  cfg.threads = resolve_threads(opts.threads);

  const ComparisonReport report = cross_validate_compare(data, cfg, opts.seed);

  const fs::path dir(opts.out);
  fs::create_directories(dir);
  write_file(dir / "scores.csv", report.to_csv());
  write_file(dir / "summary.json", report.summary_json() + "\n");
  write_manifest(dir, "compare", bindings, {"scores.csv", "summary.json"}, started);
  std::cout << "compared " << report.methods.size() << " methods over " << opts.iterations
            << " iterations\n";
  return kOk;
}

// the config path must be known before CLI11 applies flag values
std::string scan_config_path(int argc, char** argv) {
  for (int i = 1; i < argc; ++i) {
    const std::string arg = argv[i];
    if (arg == "--config" && i + 1 < argc) return argv[i + 1];
    if (arg.rfind("--config=", 0) == 0) return arg.substr(9);
  }
  return "";
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"recurrence-data random forests for repairable systems"};
  app.require_subcommand(1);

  std::string config_path;
  const char* config_help = "JSON config file (or a manifest) applied beneath the flags";
  app.add_option("--config", config_path, config_help);

  SimulateOpts sim;
  Bindings sim_bind;
  auto* sim_cmd = app.add_subcommand("simulate", "generate a synthetic fleet");
  sim_cmd->add_option("--config", config_path, config_help);
  sim_cmd->add_option("--scenario", sim.scenario, "generator scenario: A, B, C or D");
  sim_cmd->add_option("--n", sim.n, "number of systems");
  sim_cmd->add_option("--p", sim.p, "number of static covariates");
  sim_cmd->add_option("--horizon", sim.horizon, "common censor time");
  sim_cmd->add_option("--sigma", sim.sigma, "Brownian covariate scale");
  sim_cmd->add_option("--step", sim.step, "Brownian sample step");
  sim_cmd->add_option("--seed", sim.seed, "master seed");
  sim_cmd->add_option("--out", sim.out, "output directory");
  sim_bind.bind("scenario", &sim.scenario);
  sim_bind.bind("n", &sim.n);
  sim_bind.bind("p", &sim.p);
  sim_bind.bind("horizon", &sim.horizon);
  sim_bind.bind("sigma", &sim.sigma);
  sim_bind.bind("step", &sim.step);
  sim_bind.bind("seed", &sim.seed);
  sim_bind.bind("out", &sim.out);

  FitOpts fit;
  Bindings fit_bind;
  auto* fit_cmd = app.add_subcommand("fit", "grow a forest from CSV data");
  fit_cmd->add_option("--config", config_path, config_help);
  fit_cmd->add_option("--events", fit.events, "failure events CSV");
  fit_cmd->add_option("--covariates", fit.covariates, "system covariates CSV");
  fit_cmd->add_option("--sensors", fit.sensors, "dynamic sensor CSV");
  fit_cmd->add_option("--out", fit.out, "output directory");
  fit_cmd->add_option("--mode", fit.mode, "terminal model: mcf or nhpp")
      ->check(CLI::IsMember({"mcf", "nhpp"}));
  fit_cmd->add_option("--rule", fit.rule, "split rule: l2, logrank or intensity")
      ->check(CLI::IsMember({"l2", "logrank", "intensity"}));
  fit_cmd->add_option("--trees", fit.trees, "trees in the ensemble");
  fit_cmd->add_option("--m-try", fit.m_try, "covariates tried per node (0: p/3)");
  fit_cmd->add_option("--min-failed", fit.min_failed, "failing systems each daughter needs");
  fit_cmd->add_option("--cut-grid", fit.cut_grid, "candidate cuts per covariate");
  fit_cmd->add_option("--omega", fit.omega, "lasso weight (<0: cross-validated)");
  fit_cmd->add_option("--grid-points", fit.grid_points, "intensity scoring grid size");
  fit_cmd->add_flag("--logrank-literal", fit.logrank_literal,
                    "use the literal quadratic-form log-rank statistic");
  fit_cmd->add_option("--max-iterations", fit.max_iterations, "optimizer iteration cap");
  fit_cmd->add_option("--seed", fit.seed, "master seed");
  fit_cmd->add_option("--threads", fit.threads, "worker threads (RFR_THREADS fallback)");
  auto* workers_opt =
      fit_cmd->add_option("--workers", fit.workers, "simulate a driver/worker fit (>= 1)");
  fit_cmd->add_flag("--weighted-merge", fit.weighted_merge,
                    "at-risk-weighted merge of worker curves");
  fit_cmd->add_flag("!--no-oob-trace", fit.oob_trace, "skip the per-tree-count oob trace");
  fit_bind.bind("events", &fit.events);
  fit_bind.bind("covariates", &fit.covariates);
  fit_bind.bind("sensors", &fit.sensors);
  fit_bind.bind("out", &fit.out);
  fit_bind.bind("mode", &fit.mode);
  fit_bind.bind("rule", &fit.rule);
  fit_bind.bind("trees", &fit.trees);
  fit_bind.bind("m-try", &fit.m_try);
  fit_bind.bind("min-failed", &fit.min_failed);
  fit_bind.bind("cut-grid", &fit.cut_grid);
  fit_bind.bind("omega", &fit.omega);
  fit_bind.bind("grid-points", &fit.grid_points);
  fit_bind.bind("logrank-literal", &fit.logrank_literal);
  fit_bind.bind("max-iterations", &fit.max_iterations);
  fit_bind.bind("seed", &fit.seed);
  fit_bind.bind("threads", &fit.threads);
  fit_bind.bind("weighted-merge", &fit.weighted_merge);
  fit_bind.bind("oob-trace", &fit.oob_trace);
  // workers is bound by hand so config can engage the distributed path too
  bool fit_workers_from_config = false;
  fit_bind.set["workers"] = [&fit, &fit_workers_from_config](const json& v) {
    fit.workers = v.get<int>();
    fit_workers_from_config = true;
  };
  fit_bind.get.emplace_back("workers", [&fit] { return json(fit.workers); });

  PredictOpts pred;
  Bindings pred_bind;
  auto* pred_cmd = app.add_subcommand("predict", "evaluate ensemble curves on systems");
  pred_cmd->add_option("--config", config_path, config_help);
  pred_cmd->add_option("--forest", pred.forest, "forest JSON from fit");
  pred_cmd->add_option("--events", pred.events, "failure events CSV");
  pred_cmd->add_option("--covariates", pred.covariates, "system covariates CSV");
  pred_cmd->add_option("--sensors", pred.sensors, "dynamic sensor CSV");
  pred_cmd->add_option("--grid", pred.grid, "comma-separated evaluation times")->delimiter(',');
  pred_cmd->add_flag("--hazard", pred.hazard, "cumulative hazard instead of the MCF");
  pred_cmd->add_option("--out", pred.out, "output directory");
  pred_bind.bind("forest", &pred.forest);
  pred_bind.bind("events", &pred.events);
  pred_bind.bind("covariates", &pred.covariates);
  pred_bind.bind("sensors", &pred.sensors);
  pred_bind.bind("grid", &pred.grid);
  pred_bind.bind("hazard", &pred.hazard);
  pred_bind.bind("out", &pred.out);

  ImportanceOpts imp;
  Bindings imp_bind;
  auto* imp_cmd = app.add_subcommand("importance", "permutation importance of a forest");
  imp_cmd->add_option("--config", config_path, config_help);
  imp_cmd->add_option("--forest", imp.forest, "forest JSON from fit");
  imp_cmd->add_option("--events", imp.events, "failure events CSV");
  imp_cmd->add_option("--covariates", imp.covariates, "system covariates CSV");
  imp_cmd->add_option("--sensors", imp.sensors, "dynamic sensor CSV");
  imp_cmd->add_option("--repeats", imp.repeats, "permutations per covariate");
  imp_cmd->add_option("--seed", imp.seed, "master seed");
  imp_cmd->add_option("--out", imp.out, "output directory");
  imp_bind.bind("forest", &imp.forest);
  imp_bind.bind("events", &imp.events);
  imp_bind.bind("covariates", &imp.covariates);
  imp_bind.bind("sensors", &imp.sensors);
  imp_bind.bind("repeats", &imp.repeats);
  imp_bind.bind("seed", &imp.seed);
  imp_bind.bind("out", &imp.out);

  CompareOpts cmp;
  Bindings cmp_bind;
  auto* cmp_cmd = app.add_subcommand("compare", "cross-validated method comparison");
  cmp_cmd->add_option("--config", config_path, config_help);
  cmp_cmd->add_option("--events", cmp.events, "failure events CSV");
  cmp_cmd->add_option("--covariates", cmp.covariates, "system covariates CSV");
  cmp_cmd->add_option("--sensors", cmp.sensors, "dynamic sensor CSV");
  cmp_cmd->add_option("--methods", cmp.methods, "rfr, mcf, mcf-k, hpp, nhpp")->delimiter(',');
  cmp_cmd->add_option("--iterations", cmp.iterations, "train/test repetitions");
  cmp_cmd->add_option("--split", cmp.split, "training fraction");
  cmp_cmd->add_option("--k", cmp.k_neighbors, "neighbors for mcf-k");
  cmp_cmd->add_option("--mode", cmp.mode, "forest terminal model: mcf or nhpp")
      ->check(CLI::IsMember({"mcf", "nhpp"}));
  cmp_cmd->add_option("--rule", cmp.rule, "forest split rule")
      ->check(CLI::IsMember({"l2", "logrank", "intensity"}));
  cmp_cmd->add_option("--trees", cmp.trees, "trees per forest");
  cmp_cmd->add_option("--m-try", cmp.m_try, "covariates tried per node (0: p/3)");
  cmp_cmd->add_option("--min-failed", cmp.min_failed, "failing systems each daughter needs");
  cmp_cmd->add_option("--cut-grid", cmp.cut_grid, "candidate cuts per covariate");
  cmp_cmd->add_option("--omega", cmp.omega, "lasso weight (<0: cross-validated)");
  cmp_cmd->add_option("--grid-points", cmp.grid_points, "intensity scoring grid size");
  cmp_cmd->add_option("--max-iterations", cmp.max_iterations, "optimizer iteration cap");
  cmp_cmd->add_option("--seed", cmp.seed, "master seed");
  cmp_cmd->add_option("--threads", cmp.threads, "parallel iterations (RFR_THREADS fallback)");
  cmp_cmd->add_option("--out", cmp.out, "output directory");
  cmp_bind.bind("events", &cmp.events);
  cmp_bind.bind("covariates", &cmp.covariates);
  cmp_bind.bind("sensors", &cmp.sensors);
  cmp_bind.bind("methods", &cmp.methods);
  cmp_bind.bind("iterations", &cmp.iterations);
  cmp_bind.bind("split", &cmp.split);
  cmp_bind.bind("k", &cmp.k_neighbors);
  cmp_bind.bind("mode", &cmp.mode);
  cmp_bind.bind("rule", &cmp.rule);
  cmp_bind.bind("trees", &cmp.trees);
  cmp_bind.bind("m-try", &cmp.m_try);
  cmp_bind.bind("min-failed", &cmp.min_failed);
  cmp_bind.bind("cut-grid", &cmp.cut_grid);
  cmp_bind.bind("omega", &cmp.omega);
  cmp_bind.bind("grid-points", &cmp.grid_points);
  cmp_bind.bind("max-iterations", &cmp.max_iterations);
  cmp_bind.bind("seed", &cmp.seed);
  cmp_bind.bind("threads", &cmp.threads);
  cmp_bind.bind("out", &cmp.out);

  // config sits beneath the flags: load it first, let parse overwrite
  try {
    const std::string early_config = scan_config_path(argc, argv);
    if (!early_config.empty()) {
      std::string command;
      for (int i = 1; i < argc; ++i) {
        const std::string arg = argv[i];
        if (arg == "simulate" || arg == "fit" || arg == "predict" || arg == "importance" ||
            arg == "compare") {
          command = arg;
          break;
        }
      }
      if (command.empty()) throw std::invalid_argument("--config needs a subcommand");
      const json config = load_config(early_config, command);
      if (command == "simulate") sim_bind.apply(config);
      if (command == "fit") fit_bind.apply(config);
      if (command == "predict") pred_bind.apply(config);
      if (command == "importance") imp_bind.apply(config);
      if (command == "compare") cmp_bind.apply(config);
    }
  } catch (const std::invalid_argument& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kUsageError;
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kUsageError;
  }

  try {
    if (sim_cmd->parsed()) return cmd_simulate(sim, sim_bind);
    if (fit_cmd->parsed()) {
      const bool workers_given = workers_opt->count() > 0 || fit_workers_from_config;
      return cmd_fit(fit, workers_given, fit_bind);
    }
    if (pred_cmd->parsed()) return cmd_predict(pred, pred_bind);
    if (imp_cmd->parsed()) return cmd_importance(imp, imp_bind);
    if (cmp_cmd->parsed()) return cmd_compare(cmp, cmp_bind);
  } catch (const std::invalid_argument& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kUsageError;
  } catch (const DataError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kRuntimeError;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kRuntimeError;
  }
  return kUsageError;
}
