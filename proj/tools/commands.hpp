#ifndef SADL_TOOLS_COMMANDS_HPP_
#define SADL_TOOLS_COMMANDS_HPP_

// Subcommand implementations. Each writes its files under the configured
// output directory and throws sadl::Error on failure; main() maps errors to
// exit codes. Apart from timing fields, every output is a pure function of
// the resolved configuration and the input files.

#include <algorithm>
#include <filesystem>
#include <map>
#include <numeric>
#include <ostream>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "run_config.hpp"
#include "sadl/sadl.hpp"

namespace sadl::cli {

namespace fs = std::filesystem;

// File names inside a model directory.
inline constexpr const char* kOmegaFile = "omega.bin";
inline constexpr const char* kQFile = "q.bin";
inline constexpr const char* kWFile = "w.bin";
inline constexpr const char* kProjectionFile = "projection.bin";
inline constexpr const char* kModelMeta = "model.cfg";

namespace detail {

inline void require_path(const std::string& path, const char* what) {
  if (path.empty()) throw Error(ErrorKind::kIoError, std::string("missing --") + what);
  if (!fs::exists(path)) throw Error(ErrorKind::kIoError, std::string(what) + " file not found: " + path);
}

inline fs::path ensure_dir(const std::string& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec || !fs::is_directory(dir)) throw Error(ErrorKind::kIoError, "cannot create directory " + dir);
  return fs::path(dir);
}

//! Feature preprocessing shared by training and inference: optional random
//! projection, then optional column normalization.
struct Preprocess {
  bool normalize = true;
  std::optional<Matrix> projection;

  Matrix apply(Matrix x) const {
    if (projection) {
      if (x.rows() != projection->cols()) {
        throw Error(ErrorKind::kDimensionMismatch, "features have dimension " + std::to_string(x.rows()) +
                                                       ", projection expects " + std::to_string(projection->cols()));
      }
      x = *projection * x;
    }
    if (normalize) normalize_columns(x);
    return x;
  }
};

inline Preprocess make_preprocess(const RunConfig& cfg, Eigen::Index features) {
  Preprocess pre;
  pre.normalize = cfg.normalize;
  if (cfg.projection_dim > 0) pre.projection = projection_matrix(cfg.projection_dim, features, cfg.seed);
  return pre;
}

inline LabeledDataset load_dataset(const std::string& x_path, const std::string& labels_path, const char* x_flag,
                                   const char* labels_flag) {
  require_path(x_path, x_flag);
  require_path(labels_path, labels_flag);
  LabeledDataset ds;
  ds.x = load_matrix(x_path);
  ds.labels = load_labels(labels_path);
  ds.class_count = max_label(ds.labels);
  if (static_cast<std::size_t>(ds.x.cols()) != ds.labels.size()) {
    throw Error(ErrorKind::kDimensionMismatch, x_path + " has " + std::to_string(ds.x.cols()) + " samples but " +
                                                   labels_path + " has " + std::to_string(ds.labels.size()) + " labels");
  }
  return ds;
}

inline StructureTarget make_structure(const RunConfig& cfg, const Labels& labels, int classes) {
  std::optional<std::vector<Eigen::Index>> rpc;
  if (!cfg.rows_per_class.empty()) rpc = cfg.rows_per_class;
  return build_structure_target(labels, rpc, cfg.structure_rows, classes);
}

inline Hyperparams hyper_for(const RunConfig& cfg) {
  Hyperparams hp = cfg.hyper();
  hp.seed = cfg.seed;
  return hp;
}

inline void save_model(const fs::path& dir, const Model& model, const Preprocess& pre, int classes) {
  save_matrix(dir / kOmegaFile, model.omega);
  save_matrix(dir / kQFile, model.q);
  save_matrix(dir / kWFile, model.w);
  if (pre.projection) save_matrix(dir / kProjectionFile, *pre.projection);
  std::string meta;
  meta += "normalize = " + std::string(pre.normalize ? "true" : "false") + "\n";
  meta += "projection = " + std::string(pre.projection ? "true" : "false") + "\n";
  meta += "features = " + std::to_string(pre.projection ? pre.projection->cols() : model.features()) + "\n";
  meta += "classes = " + std::to_string(classes) + "\n";
  sadl::detail::write_file(dir / kModelMeta, meta);
}

struct LoadedModel {
  Model model;
  Preprocess pre;
  int classes = 0;
};

inline LoadedModel load_model(const std::string& dir) {
  if (dir.empty()) throw Error(ErrorKind::kIoError, "missing --model-in");
  const fs::path p(dir);
  require_path((p / kModelMeta).string(), "model-in");
  LoadedModel lm;
  for (const auto& [k, v] : parse_key_values(sadl::detail::read_file(p / kModelMeta))) {
    if (k == "normalize") lm.pre.normalize = (v == "true");
    else if (k == "projection" && v == "true") lm.pre.projection = load_matrix(p / kProjectionFile);
    else if (k == "classes") lm.classes = std::stoi(v);
  }
  lm.model.omega = load_matrix(p / kOmegaFile);
  lm.model.q = load_matrix(p / kQFile);
  lm.model.w = load_matrix(p / kWFile);
  lm.model.check();
  return lm;
}

inline std::string trace_csv(const TrainTrace& trace, bool full, bool consensus) {
  std::string out = "iter,lagrangian,res_h,res_y,dualgap1,dualgap2,max_delta";
  if (consensus) out += ",consensus_gap";
  if (full) out += ",d_omega,d_u,d_q,d_w,d_eps1,d_eps2,d_z1,d_z2,eta_u,eta_q,eta_w";
  out += "\n";
  for (const auto& r : trace.records) {
    out += std::to_string(r.iter) + "," + fmt(r.lagrangian) + "," + fmt(r.res_h) + "," + fmt(r.res_y) + "," +
           fmt(r.dual_gap1) + "," + fmt(r.dual_gap2) + "," + fmt(r.max_delta);
    if (consensus) out += "," + fmt(r.consensus_gap);
    if (full) {
      for (double v : {r.d_omega, r.d_u, r.d_q, r.d_w, r.d_eps1, r.d_eps2, r.d_z1, r.d_z2, r.steps.eta_u,
                       r.steps.eta_q, r.steps.eta_w}) {
        out += "," + fmt(v);
      }
    }
    out += "\n";
  }
  return out;
}

// Cross-validation over a user-supplied grid ------------------------------

using GridPoint = std::vector<std::pair<std::string, std::string>>;

inline std::vector<GridPoint> expand_grid(const std::string& spec) {
  std::vector<GridPoint> points{{}};
  for (const auto& axis : cli::detail::split_list(spec, ';')) {
    const auto eq = axis.find('=');
    if (eq == std::string::npos) throw Error(ErrorKind::kParseError, "grid axis '" + axis + "' needs key=v1,v2,...");
    const std::string key = cli::detail::trim(axis.substr(0, eq));
    const auto values = cli::detail::split_list(axis.substr(eq + 1), ',');
    if (values.empty()) throw Error(ErrorKind::kParseError, "grid axis '" + key + "' has no values");
    std::vector<GridPoint> next;
    for (const auto& p : points) {
      for (const auto& v : values) {
        GridPoint q = p;
        q.emplace_back(key, cli::detail::trim(v));
        next.push_back(std::move(q));
      }
    }
    points = std::move(next);
  }
  return points;
}

//! Stratified fold assignment: each class's shuffled samples are dealt
//! round-robin over the folds.
inline std::vector<int> assign_folds(const Labels& labels, int folds, std::uint64_t seed) {
  std::map<int, std::vector<std::size_t>> by_class;
  for (std::size_t j = 0; j < labels.size(); ++j) by_class[labels[j]].push_back(j);
  Rng rng(seed);
  std::vector<int> fold(labels.size(), 0);
  for (auto& [label, idx] : by_class) {
    if (static_cast<int>(idx.size()) < folds) {
      throw Error(ErrorKind::kClassTooSmall, "class " + std::to_string(label) + " has fewer samples than folds");
    }
    std::shuffle(idx.begin(), idx.end(), rng);
    for (std::size_t i = 0; i < idx.size(); ++i) fold[idx[i]] = static_cast<int>(i % static_cast<std::size_t>(folds));
  }
  return fold;
}

inline double cross_validate(const RunConfig& cfg, const LabeledDataset& ds) {
  const auto fold = assign_folds(ds.labels, cfg.folds, cfg.seed);
  double total = 0;
  for (int f = 0; f < cfg.folds; ++f) {
    std::vector<Eigen::Index> tr, te;
    for (std::size_t j = 0; j < fold.size(); ++j) (fold[j] == f ? te : tr).push_back(static_cast<Eigen::Index>(j));
    const auto train = sadl::detail::take_columns(ds, tr);
    const auto test = sadl::detail::take_columns(ds, te);
    const auto h = make_structure(cfg, train.labels, ds.class_count);
    const auto y = one_hot_labels(train.labels, ds.class_count);
    const auto res = train_sadl(DataMatrix(train.x), h, y, hyper_for(cfg));
    total += evaluate(Model::from_state(res.state), test.x, test.labels).accuracy;
  }
  return total / cfg.folds;
}

}  // namespace detail

//! Centralized training. Writes omega/q/w (SADL1), model.cfg and trace.csv.
inline void cmd_train(RunConfig cfg, std::ostream& log) {
  LabeledDataset ds = detail::load_dataset(cfg.x, cfg.labels, "x", "labels");
  const auto pre = detail::make_preprocess(cfg, ds.x.rows());
  ds.x = pre.apply(std::move(ds.x));
  ds.validate();
  const fs::path out = detail::ensure_dir(cfg.model_dir());

  if (!cfg.grid.empty()) {
    if (cfg.folds < 2) throw Error(ErrorKind::kInvalidHyper, "cross validation needs folds >= 2");
    std::string table = "point,accuracy\n";
    double best_acc = -1;
    detail::GridPoint best;
    for (const auto& point : detail::expand_grid(cfg.grid)) {
      RunConfig trial = cfg;
      std::string label;
      for (const auto& [k, v] : point) {
        set_key(trial, k, v);
        label += (label.empty() ? "" : ";") + k + "=" + v;
      }
      const double acc = detail::cross_validate(trial, ds);
      table += label + "," + detail::fmt(acc) + "\n";
      log << "cv " << label << " accuracy " << acc << "\n";
      if (acc > best_acc) {
        best_acc = acc;
        best = point;
      }
    }
    sadl::detail::write_file(out / "cv.csv", table);
    for (const auto& [k, v] : best) set_key(cfg, k, v);
  }

  const auto h = detail::make_structure(cfg, ds.labels, ds.class_count);
  const auto y = one_hot_labels(ds.labels, ds.class_count);
  const auto res = train_sadl(DataMatrix(ds.x), h, y, detail::hyper_for(cfg));

  detail::save_model(out, Model::from_state(res.state), pre, ds.class_count);
  if (cfg.save_state) {
    save_matrix(out / "u.bin", res.state.u);
    save_matrix(out / "eps1.bin", res.state.eps1);
    save_matrix(out / "eps2.bin", res.state.eps2);
    save_matrix(out / "z1.bin", res.state.z1);
    save_matrix(out / "z2.bin", res.state.z2);
  }
  sadl::detail::write_file(out / "trace.csv", detail::trace_csv(res.trace, false, false));
  const double acc = evaluate(Model::from_state(res.state), ds.x, ds.labels).accuracy;
  log << "trained " << res.trace.records.size() << " iterations"
      << (res.trace.converged ? " (converged)" : "") << ", training accuracy " << acc << "\n";
}

//! Same training run, but only the full per-variable trace is written.
inline void cmd_trace(const RunConfig& cfg, std::ostream& log) {
  LabeledDataset ds = detail::load_dataset(cfg.x, cfg.labels, "x", "labels");
  ds.x = detail::make_preprocess(cfg, ds.x.rows()).apply(std::move(ds.x));
  ds.validate();
  const auto h = detail::make_structure(cfg, ds.labels, ds.class_count);
  const auto y = one_hot_labels(ds.labels, ds.class_count);
  const auto res = train_sadl(DataMatrix(ds.x), h, y, detail::hyper_for(cfg));
  const fs::path out = detail::ensure_dir(cfg.out_dir);
  sadl::detail::write_file(out / "trace_full.csv", detail::trace_csv(res.trace, true, false));
  log << "wrote " << res.trace.records.size() << " trace rows\n";
}

//! Distributed training. Writes the global maps plus one trace per worker
//! (trace_worker_<t>.csv, with the consensus gap ||Omega_t - Omega||).
inline void cmd_train_dist(const RunConfig& cfg, std::ostream& log) {
  LabeledDataset ds = detail::load_dataset(cfg.x, cfg.labels, "x", "labels");
  const auto pre = detail::make_preprocess(cfg, ds.x.rows());
  ds.x = pre.apply(std::move(ds.x));
  ds.validate();
  const auto h = detail::make_structure(cfg, ds.labels, ds.class_count);
  const auto y = one_hot_labels(ds.labels, ds.class_count);
  DistHyperparams dp = cfg.dist;
  dp.base = detail::hyper_for(cfg);
  dp.seed = cfg.seed;
  const auto res = train_dsadl(DataMatrix(ds.x), h, y, dp);

  const fs::path out = detail::ensure_dir(cfg.model_dir());
  detail::save_model(out, res.global, pre, ds.class_count);
  for (std::size_t t = 0; t < res.worker_traces.size(); ++t) {
    sadl::detail::write_file(out / ("trace_worker_" + std::to_string(t) + ".csv"),
                             detail::trace_csv(res.worker_traces[t], false, true));
  }
  const double acc = evaluate(res.global, ds.x, ds.labels).accuracy;
  log << "trained " << res.iterations << " outer iterations on " << res.worker_traces.size() << " workers"
      << (res.converged ? " (converged)" : "") << ", training accuracy " << acc << "\n";
}

//! Writes predictions.txt, one 1-based label per line.
inline void cmd_predict(const RunConfig& cfg, std::ostream& log) {
  const auto lm = detail::load_model(cfg.model_in);
  detail::require_path(cfg.x, "x");
  const Matrix x = lm.pre.apply(load_matrix(cfg.x));
  const FusedClassifier clf(lm.model);
  if (x.rows() != clf.map().cols()) {
    throw Error(ErrorKind::kDimensionMismatch, "features have dimension " + std::to_string(x.rows()) +
                                                   ", model expects " + std::to_string(clf.map().cols()));
  }
  Labels predicted(static_cast<std::size_t>(x.cols()));
  for (Eigen::Index j = 0; j < x.cols(); ++j) predicted[static_cast<std::size_t>(j)] = clf.predict(x.col(j));
  const fs::path out = detail::ensure_dir(cfg.out_dir);
  save_labels(out / "predictions.txt", predicted);
  log << "predicted " << predicted.size() << " samples\n";
}

//! Writes metrics.json (accuracy, confusion, timing) and confusion.csv.
inline void cmd_eval(const RunConfig& cfg, std::ostream& log) {
  const auto lm = detail::load_model(cfg.model_in);
  LabeledDataset ds = detail::load_dataset(cfg.x, cfg.labels, "x", "labels");
  ds.x = lm.pre.apply(std::move(ds.x));
  const auto rep = evaluate(lm.model, ds.x, ds.labels);

  nlohmann::ordered_json j;
  j["accuracy"] = rep.accuracy;
  j["n_test"] = ds.x.cols();
  j["classes"] = lm.model.classes();
  std::vector<std::vector<long>> conf(static_cast<std::size_t>(rep.confusion.rows()));
  std::string conf_csv;
  for (Eigen::Index i = 0; i < rep.confusion.rows(); ++i) {
    for (Eigen::Index k = 0; k < rep.confusion.cols(); ++k) {
      conf[static_cast<std::size_t>(i)].push_back(rep.confusion(i, k));
      conf_csv += (k ? "," : "") + std::to_string(rep.confusion(i, k));
    }
    conf_csv += "\n";
  }
  j["confusion"] = conf;
  j["seconds_per_sample"] = rep.seconds_per_sample;
  j["fused_map"] = "W*Q*Omega precomputed as one c x m matrix (exact identity)";

  const fs::path out = detail::ensure_dir(cfg.out_dir);
  sadl::detail::write_file(out / "metrics.json", j.dump(2) + "\n");
  sadl::detail::write_file(out / "confusion.csv", conf_csv);
  save_labels(out / "predictions.txt", rep.predicted);
  log << "accuracy " << rep.accuracy << ", " << rep.seconds_per_sample << " s/sample\n";
}

//! Trains the H-only, W-only and full variants and writes ablation.csv.
//! Without --test-x the input set is split 50/50 (stratified, seeded).
inline void cmd_ablate(const RunConfig& cfg, std::ostream& log) {
  LabeledDataset ds = detail::load_dataset(cfg.x, cfg.labels, "x", "labels");
  const auto pre = detail::make_preprocess(cfg, ds.x.rows());
  LabeledDataset train, test;
  if (!cfg.test_x.empty() || !cfg.test_labels.empty()) {
    train = std::move(ds);
    test = detail::load_dataset(cfg.test_x, cfg.test_labels, "test-x", "test-labels");
    train.class_count = test.class_count = std::max(train.class_count, test.class_count);
  } else {
    ds.validate();
    auto sp = split(ds, 0.5, cfg.seed);
    train = std::move(sp.train);
    test = std::move(sp.test);
  }
  train.x = pre.apply(std::move(train.x));
  test.x = pre.apply(std::move(test.x));
  const auto rows = run_ablation(train, test, detail::hyper_for(cfg));
  std::string csv = "variant,accuracy\n";
  for (const auto& r : rows) {
    csv += r.variant + "," + detail::fmt(r.accuracy) + "\n";
    log << r.variant << " " << r.accuracy << "\n";
  }
  sadl::detail::write_file(detail::ensure_dir(cfg.out_dir) / "ablation.csv", csv);
}

//! Writes train/test matrices and labels, h_spec.txt (rows per class of the
//! default structure target for the training labels) and manifest.json.
inline void cmd_synth(const RunConfig& cfg, std::ostream& log) {
  SynthParams p = cfg.synth;
  p.seed = cfg.seed;
  const auto data = synth_dataset(p);
  const fs::path out = detail::ensure_dir(cfg.out_dir);
  const std::string ext = cfg.format == "csv" ? ".csv" : ".bin";
  save_matrix(out / ("train_x" + ext), data.train.x);
  save_labels(out / "train_labels.txt", data.train.labels);
  save_matrix(out / ("test_x" + ext), data.test.x);
  save_labels(out / "test_labels.txt", data.test.labels);

  const auto h = build_structure_target(data.train.labels, std::nullopt, std::nullopt, p.classes);
  std::string spec;
  for (const auto& b : h.blocks()) spec += std::to_string(b.count) + "\n";
  sadl::detail::write_file(out / "h_spec.txt", spec);

  nlohmann::ordered_json j;
  j["generator"] = "union_of_subspaces";
  j["classes"] = p.classes;
  j["subspace_dim"] = p.subspace_dim;
  j["ambient_dim"] = p.ambient_dim;
  j["per_class"] = p.per_class;
  j["noise_sigma"] = p.noise_sigma;
  j["noiseless"] = p.noise_sigma == 0.0;
  j["orthogonal"] = p.orthogonal;
  j["seed"] = p.seed;
  j["split"] = "stratified 50/50";
  j["format"] = cfg.format;
  j["train_samples"] = data.train.x.cols();
  j["test_samples"] = data.test.x.cols();
  sadl::detail::write_file(out / "manifest.json", j.dump(2) + "\n");
  log << "wrote " << data.train.x.cols() << " training and " << data.test.x.cols() << " test samples to "
      << out.string() << "\n";
}

}  // namespace sadl::cli

#endif  // SADL_TOOLS_COMMANDS_HPP_
