#ifndef SADL_TOOLS_RUN_CONFIG_HPP_
#define SADL_TOOLS_RUN_CONFIG_HPP_

// Resolved configuration for one CLI invocation. Every setting has a flat
// key; values are resolved in the order
//   built-in default < preset < config file < command-line flag.
// Config files are either `key = value` lines ('#' starts a comment) or a
// flat JSON object with the same keys.

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "sadl/data_io.hpp"
#include "sadl/error.hpp"
#include "sadl/model.hpp"

namespace sadl::cli {

struct RunConfig {
  std::string mode;

  std::string x;
  std::string labels;
  std::string test_x;
  std::string test_labels;
  std::string model_in;
  std::string model_out;  // empty: out_dir
  std::string out_dir = ".";
  std::string format = "bin";  // matrix files written by synth

  DistHyperparams dist;  // dist.base holds the centralized hyperparameters
  std::uint64_t seed = 42;
  bool normalize = true;
  int projection_dim = 0;  // 0: use features as given
  std::optional<Eigen::Index> structure_rows;  // s; unset: s = n
  std::vector<Eigen::Index> rows_per_class;
  bool save_state = false;

  SynthParams synth;

  std::string grid;  // "lambda1=0.001,0.01;lambda2=0.005,0.05"
  int folds = 5;

  Hyperparams& hyper() { return dist.base; }
  const Hyperparams& hyper() const { return dist.base; }

  std::string model_dir() const { return model_out.empty() ? out_dir : model_out; }
};

namespace detail {

inline Error bad_value(const std::string& key, const std::string& value) {
  return Error(ErrorKind::kParseError, "bad value '" + value + "' for key '" + key + "'");
}

inline double to_double(const std::string& key, const std::string& v) {
  try {
    std::size_t pos = 0;
    const double d = std::stod(v, &pos);
    if (pos != v.size()) throw bad_value(key, v);
    return d;
  } catch (const std::logic_error&) {
    throw bad_value(key, v);
  }
}

inline long long to_int(const std::string& key, const std::string& v) {
  try {
    std::size_t pos = 0;
    const long long i = std::stoll(v, &pos);
    if (pos != v.size()) throw bad_value(key, v);
    return i;
  } catch (const std::logic_error&) {
    throw bad_value(key, v);
  }
}

inline bool to_bool(const std::string& key, const std::string& v) {
  if (v == "true" || v == "1" || v == "yes" || v == "on") return true;
  if (v == "false" || v == "0" || v == "no" || v == "off") return false;
  throw bad_value(key, v);
}

inline std::vector<std::string> split_list(const std::string& v, char sep) {
  std::vector<std::string> out;
  std::stringstream ss(v);
  std::string item;
  while (std::getline(ss, item, sep)) {
    if (!item.empty()) out.push_back(item);
  }
  return out;
}

inline std::string trim(std::string s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

inline std::string fmt(double v) { return sadl::detail::format_double(v); }

inline std::string fmt_opt(const std::optional<double>& v) { return v ? fmt(*v) : "auto"; }

inline std::optional<double> opt_double(const std::string& key, const std::string& v) {
  if (v == "auto") return std::nullopt;
  return to_double(key, v);
}

}  // namespace detail

//! Assigns one key. Unknown keys are a parse error.
inline void set_key(RunConfig& cfg, const std::string& key, const std::string& value) {
  using namespace detail;
  Hyperparams& hp = cfg.hyper();
  DistHyperparams& dp = cfg.dist;
  const std::string& v = value;
  if (key == "x") cfg.x = v;
  else if (key == "labels") cfg.labels = v;
  else if (key == "test_x") cfg.test_x = v;
  else if (key == "test_labels") cfg.test_labels = v;
  else if (key == "model_in") cfg.model_in = v;
  else if (key == "model_out") cfg.model_out = v;
  else if (key == "out_dir") cfg.out_dir = v;
  else if (key == "format") {
    if (v != "bin" && v != "csv") throw bad_value(key, v);
    cfg.format = v;
  }
  else if (key == "lambda1") hp.lambda1 = to_double(key, v);
  else if (key == "lambda2") hp.lambda2 = to_double(key, v);
  else if (key == "rho1") hp.rho1 = to_double(key, v);
  else if (key == "rho2") hp.rho2 = to_double(key, v);
  else if (key == "delta1") hp.delta1 = to_double(key, v);
  else if (key == "delta2") hp.delta2 = to_double(key, v);
  else if (key == "mu") hp.mu = opt_double(key, v);
  else if (key == "eta") {
    if (v == "auto") {
      hp.fixed_steps.reset();
    } else {
      const auto parts = split_list(v, ',');
      if (parts.size() != 3) throw bad_value(key, v);
      hp.fixed_steps = StepSizes{to_double(key, parts[0]), to_double(key, parts[1]), to_double(key, parts[2])};
    }
  }
  else if (key == "step_margin") hp.step_margin = to_double(key, v);
  else if (key == "iters") hp.max_iter = static_cast<int>(to_int(key, v));
  else if (key == "tol") hp.tol = to_double(key, v);
  else if (key == "atoms") hp.atoms = static_cast<Eigen::Index>(to_int(key, v));
  else if (key == "update_form") {
    if (v == "appendix") hp.update_form = UpdateForm::kAppendix;
    else if (v == "main-text") hp.update_form = UpdateForm::kMainText;
    else throw bad_value(key, v);
  }
  else if (key == "clusters") dp.n_clusters = static_cast<int>(to_int(key, v));
  else if (key == "xi") dp.xi1 = dp.xi2 = dp.xi3 = to_double(key, v);
  else if (key == "xi1") dp.xi1 = to_double(key, v);
  else if (key == "xi2") dp.xi2 = to_double(key, v);
  else if (key == "xi3") dp.xi3 = to_double(key, v);
  else if (key == "growth_rho") dp.growth_rho = to_double(key, v);
  else if (key == "mu_max") dp.mu_max = opt_double(key, v);
  else if (key == "xi1_max") dp.xi1_max = opt_double(key, v);
  else if (key == "xi2_max") dp.xi2_max = opt_double(key, v);
  else if (key == "xi3_max") dp.xi3_max = opt_double(key, v);
  else if (key == "threads") dp.threads = static_cast<int>(to_int(key, v));
  else if (key == "seed") cfg.seed = static_cast<std::uint64_t>(to_int(key, v));
  else if (key == "normalize") cfg.normalize = to_bool(key, v);
  else if (key == "projection_dim") cfg.projection_dim = static_cast<int>(to_int(key, v));
  else if (key == "s") {
    if (v == "auto") cfg.structure_rows.reset();
    else cfg.structure_rows = static_cast<Eigen::Index>(to_int(key, v));
  }
  else if (key == "rows_per_class") {
    cfg.rows_per_class.clear();
    for (const auto& part : split_list(v, ',')) cfg.rows_per_class.push_back(static_cast<Eigen::Index>(to_int(key, part)));
  }
  else if (key == "save_state") cfg.save_state = to_bool(key, v);
  else if (key == "classes") cfg.synth.classes = static_cast<int>(to_int(key, v));
  else if (key == "subspace_dim") cfg.synth.subspace_dim = static_cast<int>(to_int(key, v));
  else if (key == "ambient_dim") cfg.synth.ambient_dim = static_cast<int>(to_int(key, v));
  else if (key == "per_class") cfg.synth.per_class = static_cast<int>(to_int(key, v));
  else if (key == "noise") cfg.synth.noise_sigma = to_double(key, v);
  else if (key == "orthogonal") cfg.synth.orthogonal = to_bool(key, v);
  else if (key == "grid") cfg.grid = v;
  else if (key == "folds") cfg.folds = static_cast<int>(to_int(key, v));
  else throw Error(ErrorKind::kParseError, "unknown config key '" + key + "'");
}

//! Fully resolved settings as ordered `key = value` pairs; feeding them back
//! through set_key reproduces the same configuration.
inline std::vector<std::pair<std::string, std::string>> dump(const RunConfig& cfg) {
  using detail::fmt;
  using detail::fmt_opt;
  const Hyperparams& hp = cfg.hyper();
  const DistHyperparams& dp = cfg.dist;
  std::string eta = "auto";
  if (hp.fixed_steps) eta = fmt(hp.fixed_steps->eta_u) + "," + fmt(hp.fixed_steps->eta_q) + "," + fmt(hp.fixed_steps->eta_w);
  std::string rpc;
  for (std::size_t i = 0; i < cfg.rows_per_class.size(); ++i) rpc += (i ? "," : "") + std::to_string(cfg.rows_per_class[i]);
  return {
      {"x", cfg.x},
      {"labels", cfg.labels},
      {"test_x", cfg.test_x},
      {"test_labels", cfg.test_labels},
      {"model_in", cfg.model_in},
      {"model_out", cfg.model_out},
      {"out_dir", cfg.out_dir},
      {"format", cfg.format},
      {"lambda1", fmt(hp.lambda1)},
      {"lambda2", fmt(hp.lambda2)},
      {"rho1", fmt(hp.rho1)},
      {"rho2", fmt(hp.rho2)},
      {"delta1", fmt(hp.delta1)},
      {"delta2", fmt(hp.delta2)},
      {"mu", fmt_opt(hp.mu)},
      {"eta", eta},
      {"step_margin", fmt(hp.step_margin)},
      {"iters", std::to_string(hp.max_iter)},
      {"tol", fmt(hp.tol)},
      {"atoms", std::to_string(hp.atoms)},
      {"update_form", hp.update_form == UpdateForm::kAppendix ? "appendix" : "main-text"},
      {"clusters", std::to_string(dp.n_clusters)},
      {"xi1", fmt(dp.xi1)},
      {"xi2", fmt(dp.xi2)},
      {"xi3", fmt(dp.xi3)},
      {"growth_rho", fmt(dp.growth_rho)},
      {"mu_max", fmt_opt(dp.mu_max)},
      {"xi1_max", fmt_opt(dp.xi1_max)},
      {"xi2_max", fmt_opt(dp.xi2_max)},
      {"xi3_max", fmt_opt(dp.xi3_max)},
      {"threads", std::to_string(dp.threads)},
      {"seed", std::to_string(cfg.seed)},
      {"normalize", cfg.normalize ? "true" : "false"},
      {"projection_dim", std::to_string(cfg.projection_dim)},
      {"s", cfg.structure_rows ? std::to_string(*cfg.structure_rows) : "auto"},
      {"rows_per_class", rpc},
      {"save_state", cfg.save_state ? "true" : "false"},
      {"classes", std::to_string(cfg.synth.classes)},
      {"subspace_dim", std::to_string(cfg.synth.subspace_dim)},
      {"ambient_dim", std::to_string(cfg.synth.ambient_dim)},
      {"per_class", std::to_string(cfg.synth.per_class)},
      {"noise", fmt(cfg.synth.noise_sigma)},
      {"orthogonal", cfg.synth.orthogonal ? "true" : "false"},
      {"grid", cfg.grid},
      {"folds", std::to_string(cfg.folds)},
  };
}

inline std::string dump_text(const RunConfig& cfg) {
  std::string out;
  for (const auto& [k, v] : dump(cfg)) out += k + " = " + v + "\n";
  return out;
}

//! Parses `key = value` text. Blank lines and '#' comments are skipped.
inline std::vector<std::pair<std::string, std::string>> parse_key_values(const std::string& text) {
  std::vector<std::pair<std::string, std::string>> out;
  std::istringstream in(text);
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    line = detail::trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) {
      throw Error(ErrorKind::kParseError, "line " + std::to_string(line_no) + ": expected key = value");
    }
    out.emplace_back(detail::trim(line.substr(0, eq)), detail::trim(line.substr(eq + 1)));
  }
  return out;
}

inline std::vector<std::pair<std::string, std::string>> parse_json_config(const std::string& text) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(text);
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorKind::kParseError, std::string("config JSON: ") + e.what());
  }
  if (!j.is_object()) throw Error(ErrorKind::kParseError, "config JSON must be a flat object");
  std::vector<std::pair<std::string, std::string>> out;
  for (const auto& [k, v] : j.items()) {
    if (v.is_string()) out.emplace_back(k, v.get<std::string>());
    else if (v.is_boolean()) out.emplace_back(k, v.get<bool>() ? "true" : "false");
    else if (v.is_number_integer()) out.emplace_back(k, std::to_string(v.get<long long>()));
    else if (v.is_number()) out.emplace_back(k, detail::fmt(v.get<double>()));
    else throw Error(ErrorKind::kParseError, "config key '" + k + "' must be a scalar");
  }
  return out;
}

inline void apply_config_file(RunConfig& cfg, const std::filesystem::path& path) {
  const std::string text = sadl::detail::read_file(path);
  const bool json = path.extension() == ".json";
  for (const auto& [k, v] : json ? parse_json_config(text) : parse_key_values(text)) set_key(cfg, k, v);
}

//! Dataset settings used in the reference experiments, for users who bring
//! their own features.
inline const std::map<std::string, std::vector<std::pair<std::string, std::string>>>& presets() {
  static const std::map<std::string, std::vector<std::pair<std::string, std::string>>> kPresets = {
      {"yaleb", {{"atoms", "1216"}, {"lambda1", "0.001"}, {"lambda2", "0.005"}, {"iters", "466"}}},
      {"ar", {{"atoms", "2000"}, {"lambda1", "0.001"}, {"lambda2", "0.005"}, {"iters", "204"}}},
      {"caltech101", {{"atoms", "3060"}, {"lambda1", "0.001"}, {"lambda2", "1.5"}, {"iters", "827"}}},
      {"caltech101-dist",
       {{"atoms", "3060"}, {"lambda1", "0.001"}, {"lambda2", "4.6"}, {"iters", "1110"}, {"xi", "0.1"}}},
      {"scene15", {{"atoms", "1500"}, {"lambda1", "0.001"}, {"lambda2", "0.003"}, {"iters", "283"}}},
      {"caltech256-dist",
       {{"atoms", "3855"}, {"clusters", "3"}, {"lambda1", "0.001"}, {"lambda2", "0.5"}, {"xi", "3e-5"},
        {"iters", "4495"}}},
  };
  return kPresets;
}

inline void apply_preset(RunConfig& cfg, const std::string& name) {
  const auto& all = presets();
  const auto it = all.find(name);
  if (it == all.end()) throw Error(ErrorKind::kParseError, "unknown preset '" + name + "'");
  for (const auto& [k, v] : it->second) set_key(cfg, k, v);
}

//! Applies preset, then config file, then explicit flags, in that order.
inline RunConfig resolve(const std::string& mode, const std::string& preset, const std::string& config_file,
                         const std::vector<std::pair<std::string, std::string>>& flags) {
  RunConfig cfg;
  cfg.mode = mode;
  if (!preset.empty()) apply_preset(cfg, preset);
  if (!config_file.empty()) apply_config_file(cfg, config_file);
  for (const auto& [k, v] : flags) set_key(cfg, k, v);
  return cfg;
}

}  // namespace sadl::cli

#endif  // SADL_TOOLS_RUN_CONFIG_HPP_
