#ifndef SADL_CLASSIFY_HPP_
#define SADL_CLASSIFY_HPP_

// Inference path: encode (Omega x), structure (Q u), score (W Q Omega x),
// label (argmax). Nothing here solves an optimization problem; a prediction
// is at most three matrix-vector products, or one with the fused map.

#include <chrono>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "sadl/error.hpp"
#include "sadl/model.hpp"

namespace sadl {

//! The learned maps used at test time.
struct Model {
  Matrix omega;  // r x m
  Matrix q;      // s x r
  Matrix w;      // c x s

  Eigen::Index features() const { return omega.cols(); }
  Eigen::Index classes() const { return w.rows(); }

  void check() const {
    if (q.cols() != omega.rows() || w.cols() != q.rows()) {
      throw Error(ErrorKind::kDimensionMismatch, "model maps do not chain: omega " + detail::shape_str(omega) + ", Q " +
                                                     detail::shape_str(q) + ", W " + detail::shape_str(w));
    }
  }

  static Model from_state(const ModelState& st) { return {st.omega, st.q, st.w}; }
};

namespace detail {

inline void require_len(const Vector& v, Eigen::Index n, const char* what) {
  if (v.size() != n) {
    throw Error(ErrorKind::kDimensionMismatch, std::string(what) + " has length " + std::to_string(v.size()) +
                                                   ", expected " + std::to_string(n));
  }
}

//! 1-based index of the largest entry; ties go to the lowest index.
inline int argmax_label(const Eigen::Ref<const Vector>& scores) {
  Eigen::Index best = 0;
  for (Eigen::Index i = 1; i < scores.size(); ++i) {
    if (scores(i) > scores(best)) best = i;
  }
  return static_cast<int>(best) + 1;
}

}  // namespace detail

inline Vector encode(const Matrix& omega, const Vector& x) {
  detail::require_len(x, omega.cols(), "sample");
  return omega * x;
}

inline Vector structured_rep(const Matrix& q, const Vector& u) {
  detail::require_len(u, q.cols(), "code");
  return q * u;
}

//! argmax_j (W Q Omega x)_j as a 1-based class label.
inline int predict(const Matrix& w, const Matrix& q, const Matrix& omega, const Vector& x) {
  const Vector rep = structured_rep(q, encode(omega, x));
  detail::require_len(rep, w.cols(), "structured representation");
  return detail::argmax_label(w * rep);
}

//! argmin_k ||H_k - Q Omega x||^2 over the class prototypes (columns of
//! `prototypes`, s x c); ties go to the lowest class.
inline int predict_h_only(const Matrix& q, const Matrix& omega, const Matrix& prototypes, const Vector& x) {
  const Vector rep = structured_rep(q, encode(omega, x));
  if (prototypes.rows() != rep.size() || prototypes.cols() < 1) {
    throw Error(ErrorKind::kDimensionMismatch, "prototypes are " + detail::shape_str(prototypes) +
                                                   ", expected " + std::to_string(rep.size()) + " rows");
  }
  Eigen::Index best = 0;
  double best_dist = (prototypes.col(0) - rep).squaredNorm();
  for (Eigen::Index k = 1; k < prototypes.cols(); ++k) {
    const double d = (prototypes.col(k) - rep).squaredNorm();
    if (d < best_dist) {
      best_dist = d;
      best = k;
    }
  }
  return static_cast<int>(best) + 1;
}

//! W Q Omega collapsed into one c x m map. This is an exact algebraic
//! identity (up to rounding), not an approximation.
class FusedClassifier {
 public:
  explicit FusedClassifier(const Model& model) {
    model.check();
    map_ = model.w * (model.q * model.omega);
  }

  const Matrix& map() const { return map_; }

  Vector scores(const Vector& x) const {
    detail::require_len(x, map_.cols(), "sample");
    return map_ * x;
  }

  int predict(const Vector& x) const { return detail::argmax_label(scores(x)); }

 private:
  Matrix map_;
};

using ConfusionMatrix = Eigen::Matrix<long, Eigen::Dynamic, Eigen::Dynamic>;

struct PredictionReport {
  Labels predicted;
  Matrix scores;  // c x n_test
  double accuracy = 0;
  ConfusionMatrix confusion;  // rows: true class, cols: predicted class
  double seconds_per_sample = 0;
};

inline ConfusionMatrix confusion_matrix(const Labels& truth, const Labels& predicted, int c) {
  ConfusionMatrix conf = ConfusionMatrix::Zero(c, c);
  for (std::size_t j = 0; j < truth.size(); ++j) {
    const int t = truth[j];
    const int p = predicted[j];
    if (t < 1 || t > c || p < 1 || p > c) {
      throw Error(ErrorKind::kLabelOutOfRange, "label outside [1.." + std::to_string(c) + "] at sample " + std::to_string(j));
    }
    ++conf(t - 1, p - 1);
  }
  return conf;
}

inline double accuracy_of(const ConfusionMatrix& conf) {
  const long total = conf.sum();
  return total == 0 ? 0.0 : static_cast<double>(conf.trace()) / static_cast<double>(total);
}

namespace detail {

inline void check_test_set(const Matrix& x_test, const Labels& labels, Eigen::Index features) {
  if (x_test.cols() == 0 || labels.empty()) throw Error(ErrorKind::kEmptyTestSet, "no test samples");
  if (static_cast<std::size_t>(x_test.cols()) != labels.size()) {
    throw Error(ErrorKind::kDimensionMismatch, std::to_string(x_test.cols()) + " test samples but " +
                                                   std::to_string(labels.size()) + " labels");
  }
  if (x_test.rows() != features) {
    throw Error(ErrorKind::kDimensionMismatch, "test features have dimension " + std::to_string(x_test.rows()) +
                                                   ", model expects " + std::to_string(features));
  }
}

}  // namespace detail

//! Classifies every column through the fused map. The reported time is the
//! mean wall-clock cost of one score-and-argmax per sample.
inline PredictionReport evaluate(const Model& model, const Matrix& x_test, const Labels& labels_test) {
  const FusedClassifier clf(model);
  detail::check_test_set(x_test, labels_test, model.features());
  const Eigen::Index n = x_test.cols();
  PredictionReport rep;
  rep.scores.resize(model.classes(), n);
  rep.predicted.resize(static_cast<std::size_t>(n));
  const auto start = std::chrono::steady_clock::now();
  for (Eigen::Index j = 0; j < n; ++j) {
    rep.scores.col(j).noalias() = clf.map() * x_test.col(j);
    rep.predicted[static_cast<std::size_t>(j)] = detail::argmax_label(rep.scores.col(j));
  }
  const std::chrono::duration<double> elapsed = std::chrono::steady_clock::now() - start;
  rep.seconds_per_sample = elapsed.count() / static_cast<double>(n);
  rep.confusion = confusion_matrix(labels_test, rep.predicted, static_cast<int>(model.classes()));
  rep.accuracy = accuracy_of(rep.confusion);
  return rep;
}

//! Nearest-prototype evaluation in the structured space. W is never read.
inline PredictionReport evaluate_h_only(const Matrix& q, const Matrix& omega, const Matrix& prototypes,
                                        const Matrix& x_test, const Labels& labels_test) {
  detail::check_test_set(x_test, labels_test, omega.cols());
  const Eigen::Index n = x_test.cols();
  const Eigen::Index c = prototypes.cols();
  const Matrix map = q * omega;
  PredictionReport rep;
  rep.scores.resize(c, n);
  rep.predicted.resize(static_cast<std::size_t>(n));
  const auto start = std::chrono::steady_clock::now();
  for (Eigen::Index j = 0; j < n; ++j) {
    const Vector rep_j = map * x_test.col(j);
    for (Eigen::Index k = 0; k < c; ++k) rep.scores(k, j) = -(prototypes.col(k) - rep_j).squaredNorm();
    rep.predicted[static_cast<std::size_t>(j)] = detail::argmax_label(rep.scores.col(j));
  }
  const std::chrono::duration<double> elapsed = std::chrono::steady_clock::now() - start;
  rep.seconds_per_sample = elapsed.count() / static_cast<double>(n);
  rep.confusion = confusion_matrix(labels_test, rep.predicted, static_cast<int>(c));
  rep.accuracy = accuracy_of(rep.confusion);
  return rep;
}

}  // namespace sadl

#endif  // SADL_CLASSIFY_HPP_
