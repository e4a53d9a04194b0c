#include "rfr/forest/serialize.hpp"

#include <fstream>
#include <unordered_map>

#include "json.hpp"

namespace rfr {

namespace {

using nlohmann::json;

json step_to_json(const StepFunction& f) {
  return json{{"knots", f.knots}, {"values", f.values}};
}

StepFunction step_from_json(const json& j) {
  StepFunction f;
  f.knots = j.at("knots").get<std::vector<double>>();
  f.values = j.at("values").get<std::vector<double>>();
  return f;
}

json model_to_json(const IntensityModel& m) {
  return json{{"beta0", m.beta0},         {"beta", m.beta},
              {"omega", m.omega},         {"z_mean", m.z_mean},
              {"z_scale", m.z_scale},     {"converged", m.converged},
              {"iterations", m.iterations}};
}

IntensityModel model_from_json(const json& j) {
  IntensityModel m;
  m.beta0 = j.at("beta0").get<double>();
  m.beta = j.at("beta").get<std::vector<double>>();
  m.omega = j.at("omega").get<double>();
  m.z_mean = j.at("z_mean").get<std::vector<double>>();
  m.z_scale = j.at("z_scale").get<std::vector<double>>();
  m.converged = j.at("converged").get<bool>();
  m.iterations = j.at("iterations").get<int>();
  return m;
}

const char* mode_name(TerminalMode mode) {
  return mode == TerminalMode::mcf ? "mcf" : "nhpp";
}

const char* rule_name(SplitRule rule) {
  switch (rule) {
    case SplitRule::l2: return "l2";
    case SplitRule::logrank: return "logrank";
    default: return "intensity";
  }
}

TerminalMode mode_from(const std::string& s) {
  if (s == "mcf") return TerminalMode::mcf;
  if (s == "nhpp") return TerminalMode::nhpp;
  throw DataError("forest JSON: unknown mode '" + s + "'");
}

SplitRule rule_from(const std::string& s) {
  if (s == "l2") return SplitRule::l2;
  if (s == "logrank") return SplitRule::logrank;
  if (s == "intensity") return SplitRule::intensity;
  throw DataError("forest JSON: unknown rule '" + s + "'");
}

json node_to_json(const TreeNode& node) {
  json j;
  j["members"] = node.member_count;
  j["failed"] = node.failed_count;
  if (!node.terminal()) {
    j["covariate"] = node.covariate;
    j["cut"] = node.cut;
    j["left"] = node.left;
    j["right"] = node.right;
    return j;
  }
  if (node.mcf_payload) {
    j["mcf"] = step_to_json(node.mcf_payload->mcf);
    j["variance"] = step_to_json(node.mcf_payload->variance);
    j["n_systems"] = node.mcf_payload->n_systems;
  }
  if (node.nhpp_payload) j["model"] = model_to_json(*node.nhpp_payload);
  return j;
}

TreeNode node_from_json(const json& j, TerminalMode mode) {
  TreeNode node;
  node.member_count = j.at("members").get<int>();
  node.failed_count = j.at("failed").get<int>();
  if (j.contains("covariate")) {
    node.covariate = j.at("covariate").get<int>();
    node.cut = j.at("cut").get<double>();
    node.left = j.at("left").get<int>();
    node.right = j.at("right").get<int>();
    return node;
  }
  if (mode == TerminalMode::mcf) {
    McfEstimate est;
    est.mcf = step_from_json(j.at("mcf"));
    est.variance = step_from_json(j.at("variance"));
    est.n_systems = j.at("n_systems").get<std::size_t>();
    node.mcf_payload = std::move(est);
  } else {
    node.nhpp_payload = model_from_json(j.at("model"));
  }
  return node;
}

}  // namespace

std::string forest_to_json(const ForestModel& forest) {
  std::unordered_map<std::string, int> id_index;
  for (std::size_t i = 0; i < forest.system_ids.size(); ++i) {
    id_index[forest.system_ids[i]] = static_cast<int>(i);
  }

  json doc;
  doc["version"] = forest.version;
  doc["mode"] = mode_name(forest.hyper.mode);
  doc["rule"] = rule_name(forest.hyper.rule);
  doc["n_trees"] = forest.hyper.n_trees;
  doc["m_try"] = forest.hyper.m_try;
  doc["min_failed"] = forest.hyper.min_failed;
  doc["cut_grid"] = forest.hyper.cut_grid;
  doc["omega"] = forest.hyper.omega;
  doc["grid_points"] = forest.hyper.grid_points;
  doc["logrank_literal"] = forest.hyper.logrank_literal;
  doc["max_iterations"] = forest.hyper.max_iterations;
  doc["seed"] = forest.seed;
  doc["omega_used"] = forest.omega_used;
  doc["system_ids"] = forest.system_ids;
  doc["covariate_names"] = forest.covariate_names;
  if (!forest.scaling.identity()) {
    doc["scaling"] = json{{"mins", forest.scaling.mins}, {"ranges", forest.scaling.ranges}};
  }

  json trees = json::array();
  for (const auto& tree : forest.trees) {
    json t;
    std::vector<int> bootstrap;
    bootstrap.reserve(tree.bootstrap_ids.size());
    for (const auto& id : tree.bootstrap_ids) bootstrap.push_back(id_index.at(id));
    t["bootstrap"] = bootstrap;
    json nodes = json::array();
    for (const auto& node : tree.nodes) nodes.push_back(node_to_json(node));
    t["nodes"] = nodes;
    trees.push_back(std::move(t));
  }
  doc["trees"] = std::move(trees);
  return doc.dump();
}

ForestModel forest_from_json(const std::string& text) {
  json doc;
  try {
    doc = json::parse(text);
  } catch (const json::exception& e) {
    throw DataError(std::string("forest JSON: ") + e.what());
  }

  try {
    ForestModel forest;
    if (!doc.contains("version")) throw DataError("forest JSON: missing version field");
    forest.version = doc.at("version").get<int>();
    if (forest.version != 1) {
      throw DataError("forest JSON: unsupported version " + std::to_string(forest.version));
    }
    forest.hyper.mode = mode_from(doc.at("mode").get<std::string>());
    forest.hyper.rule = rule_from(doc.at("rule").get<std::string>());
    forest.hyper.n_trees = doc.at("n_trees").get<int>();
    forest.hyper.m_try = doc.at("m_try").get<int>();
    forest.hyper.min_failed = doc.at("min_failed").get<int>();
    forest.hyper.cut_grid = doc.at("cut_grid").get<int>();
    forest.hyper.omega = doc.at("omega").get<double>();
    forest.hyper.grid_points = doc.at("grid_points").get<int>();
    forest.hyper.logrank_literal = doc.at("logrank_literal").get<bool>();
    forest.hyper.max_iterations = doc.at("max_iterations").get<int>();
    forest.seed = doc.at("seed").get<std::uint64_t>();
    forest.omega_used = doc.at("omega_used").get<double>();
    forest.system_ids = doc.at("system_ids").get<std::vector<std::string>>();
    forest.covariate_names = doc.at("covariate_names").get<std::vector<std::string>>();
    if (doc.contains("scaling")) {
      forest.scaling.mins = doc.at("scaling").at("mins").get<std::vector<double>>();
      forest.scaling.ranges = doc.at("scaling").at("ranges").get<std::vector<double>>();
    }

    const int n = static_cast<int>(forest.system_ids.size());
    for (const auto& t : doc.at("trees")) {
      TreeModel tree;
      std::vector<std::uint8_t> oob(n, 1);
      for (const auto& b : t.at("bootstrap")) {
        const int idx = b.get<int>();
        if (idx < 0 || idx >= n) throw DataError("forest JSON: bootstrap index out of range");
        tree.bootstrap_ids.push_back(forest.system_ids[idx]);
        oob[idx] = 0;
      }
      for (const auto& nj : t.at("nodes")) {
        tree.nodes.push_back(node_from_json(nj, forest.hyper.mode));
      }
      if (tree.nodes.empty()) throw DataError("forest JSON: tree without nodes");
      forest.trees.push_back(std::move(tree));
      forest.membership.push_back(std::move(oob));
    }
    if (forest.trees.empty()) throw DataError("forest JSON: no trees");
    return forest;
  } catch (const json::exception& e) {
    throw DataError(std::string("forest JSON: ") + e.what());
  }
}

void save_forest(const ForestModel& forest, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write '" + path + "'");
  out << forest_to_json(forest);
  out << '\n';
  if (!out.flush()) throw DataError("failed writing '" + path + "'");
}

ForestModel load_forest(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot read '" + path + "'");
  std::string text((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  return forest_from_json(text);
}

}  // namespace rfr
