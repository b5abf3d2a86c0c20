#ifndef SADL_ABLATION_HPP_
#define SADL_ABLATION_HPP_

// Constraint ablation: the full model against the two single-constraint
// variants.
//   H-only  keeps H = QU + eps1 and drops the classifier; a test sample goes
//           to the class whose H column pattern is nearest to Q Omega x.
//   W-only  keeps Y = WU + eps2 with Q frozen to the identity (s = r); H is
//           never built and labels come from W.

#include <string>
#include <vector>

#include "sadl/classify.hpp"
#include "sadl/data_io.hpp"
#include "sadl/model.hpp"
#include "sadl/solver.hpp"

namespace sadl {

struct AblationRow {
  std::string variant;
  double accuracy = 0;
};

inline double train_eval_full(const LabeledDataset& train, const LabeledDataset& test, const Hyperparams& hp) {
  const auto h = build_structure_target(train.labels, std::nullopt, std::nullopt, train.class_count);
  const auto y = one_hot_labels(train.labels, train.class_count);
  const auto res = train_sadl(DataMatrix(train.x), h, y, hp);
  return evaluate(Model::from_state(res.state), test.x, test.labels).accuracy;
}

inline double train_eval_h_only(const LabeledDataset& train, const LabeledDataset& test, Hyperparams hp) {
  hp.constraints = Constraints::kStructureOnly;
  const auto h = build_structure_target(train.labels, std::nullopt, std::nullopt, train.class_count);
  const auto y = one_hot_labels(train.labels, train.class_count);
  const auto res = train_sadl(DataMatrix(train.x), h, y, hp);
  return evaluate_h_only(res.state.q, res.state.omega, h.prototypes(), test.x, test.labels).accuracy;
}

inline double train_eval_w_only(const LabeledDataset& train, const LabeledDataset& test, Hyperparams hp) {
  hp.constraints = Constraints::kLabelOnly;
  const auto y = one_hot_labels(train.labels, train.class_count);
  ModelDims d{train.x.rows(), train.x.cols(), hp.resolved_atoms(train.x.rows()), 0, y.classes()};
  d.s = d.r;
  ModelState init = ModelState::initialize(d, hp.seed);
  init.q = Matrix::Identity(d.s, d.r);
  const auto res = solve_sadl(train.x, Matrix(), y.values(), hp, std::move(init));
  return evaluate(Model::from_state(res.state), test.x, test.labels).accuracy;
}

inline std::vector<AblationRow> run_ablation(const LabeledDataset& train, const LabeledDataset& test,
                                             const Hyperparams& hp) {
  train.validate();
  return {
      {"h_only", train_eval_h_only(train, test, hp)},
      {"w_only", train_eval_w_only(train, test, hp)},
      {"full", train_eval_full(train, test, hp)},
  };
}

}  // namespace sadl

#endif  // SADL_ABLATION_HPP_
