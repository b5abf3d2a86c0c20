#ifndef SADL_MODEL_HPP_
#define SADL_MODEL_HPP_

// Domain types shared by the centralized and distributed solvers.
//
// Conventions: samples are columns everywhere. With m features, n samples,
// r atoms, s structured rows and c classes the shapes are
//
//   X: m x n      H: s x n      Y: c x n
//   Omega: r x m  U: r x n      Q: s x r      W: c x s
//   eps1, Z1: s x n             eps2, Z2: c x n
//
// Class labels are 1-based integers in [1..c].

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Core>

#include "sadl/error.hpp"
#include "sadl/random.hpp"

namespace sadl {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;
using Labels = std::vector<int>;

namespace detail {

inline std::string shape_str(const Matrix& a) {
  return std::to_string(a.rows()) + "x" + std::to_string(a.cols());
}

inline void require_shape(const Matrix& a, Eigen::Index rows, Eigen::Index cols, const char* name) {
  if (a.rows() != rows || a.cols() != cols) {
    throw Error(ErrorKind::kDimensionMismatch,
                std::string(name) + " is " + shape_str(a) + ", expected " + std::to_string(rows) +
                    "x" + std::to_string(cols));
  }
}

}  // namespace detail

//! Feature matrix, one sample per column.
class DataMatrix {
 public:
  DataMatrix() = default;
  explicit DataMatrix(Matrix values) : values_(std::move(values)) {
    if (values_.rows() < 1 || values_.cols() < 1) {
      throw Error(ErrorKind::kInvalidDims, "data matrix must be at least 1x1, got " +
                                               detail::shape_str(values_));
    }
    if (!values_.allFinite()) throw Error(ErrorKind::kInvalidDims, "data matrix has non-finite entries");
  }

  const Matrix& values() const { return values_; }
  Eigen::Index features() const { return values_.rows(); }
  Eigen::Index samples() const { return values_.cols(); }

 private:
  Matrix values_;
};

//! One-hot label matrix Y (c x n); Y(i, j) = 1 iff sample j is in class i + 1.
class LabelMatrix {
 public:
  LabelMatrix() = default;
  explicit LabelMatrix(Matrix values) : values_(std::move(values)) {
    if (values_.rows() < 2) throw Error(ErrorKind::kInvalidDims, "label matrix needs at least 2 classes");
    labels_.reserve(values_.cols());
    for (Eigen::Index j = 0; j < values_.cols(); ++j) {
      int hot = -1;
      for (Eigen::Index i = 0; i < values_.rows(); ++i) {
        const double v = values_(i, j);
        if (v == 1.0 && hot < 0) {
          hot = static_cast<int>(i);
        } else if (v != 0.0) {
          throw Error(ErrorKind::kInvalidDims, "label column " + std::to_string(j) + " is not one-hot");
        }
      }
      if (hot < 0) throw Error(ErrorKind::kInvalidDims, "label column " + std::to_string(j) + " is empty");
      labels_.push_back(hot + 1);
    }
  }

  const Matrix& values() const { return values_; }
  const Labels& labels() const { return labels_; }
  Eigen::Index classes() const { return values_.rows(); }
  Eigen::Index samples() const { return values_.cols(); }

 private:
  Matrix values_;
  Labels labels_;
};

//! Contiguous block of structured rows owned by one class.
struct RowBlock {
  Eigen::Index offset = 0;
  Eigen::Index count = 0;
};

//! Binary structure target H (s x n). Class k owns rows blocks[k - 1]; the
//! column of a sample is one on its class block and zero elsewhere.
class StructureTarget {
 public:
  StructureTarget() = default;
  StructureTarget(Labels labels, std::vector<RowBlock> blocks) : labels_(std::move(labels)), blocks_(std::move(blocks)) {
    if (blocks_.empty()) throw Error(ErrorKind::kInvalidBlockSpec, "no row blocks");
    Eigen::Index next = 0;
    for (const auto& b : blocks_) {
      if (b.count < 1 || b.offset != next) {
        throw Error(ErrorKind::kInvalidBlockSpec, "row blocks must be nonempty, contiguous and ordered");
      }
      next += b.count;
    }
    const int c = static_cast<int>(blocks_.size());
    values_ = Matrix::Zero(next, static_cast<Eigen::Index>(labels_.size()));
    for (std::size_t j = 0; j < labels_.size(); ++j) {
      const int label = labels_[j];
      if (label < 1 || label > c) {
        throw Error(ErrorKind::kLabelOutOfRange, "label " + std::to_string(label) + " outside [1.." +
                                                     std::to_string(c) + "]");
      }
      const auto& b = blocks_[label - 1];
      values_.col(static_cast<Eigen::Index>(j)).segment(b.offset, b.count).setOnes();
    }
  }

  const Matrix& values() const { return values_; }
  const Labels& labels() const { return labels_; }
  const std::vector<RowBlock>& blocks() const { return blocks_; }
  Eigen::Index rows() const { return values_.rows(); }
  Eigen::Index samples() const { return values_.cols(); }
  Eigen::Index classes() const { return static_cast<Eigen::Index>(blocks_.size()); }

  //! Column pattern shared by every sample of class `label` (1-based).
  Vector prototype(int label) const {
    Vector p = Vector::Zero(rows());
    const auto& b = blocks_.at(static_cast<std::size_t>(label - 1));
    p.segment(b.offset, b.count).setOnes();
    return p;
  }

  //! All class prototypes as columns (s x c).
  Matrix prototypes() const {
    Matrix p(rows(), classes());
    for (int k = 1; k <= classes(); ++k) p.col(k - 1) = prototype(k);
    return p;
  }

 private:
  Labels labels_;
  std::vector<RowBlock> blocks_;
  Matrix values_;
};

struct ModelDims {
  Eigen::Index m = 0;  // features
  Eigen::Index n = 0;  // samples
  Eigen::Index r = 0;  // atoms
  Eigen::Index s = 0;  // structured rows
  Eigen::Index c = 0;  // classes

  bool operator==(const ModelDims&) const = default;
};

//! Checks that X, H and Y describe the same samples and the same classes.
//! The returned dims leave r at zero; the atom count is the caller's choice.
inline ModelDims validate_problem(const DataMatrix& x, const StructureTarget& h, const LabelMatrix& y) {
  if (h.samples() != x.samples() || y.samples() != x.samples()) {
    throw Error(ErrorKind::kDimensionMismatch,
                "column counts differ: X has " + std::to_string(x.samples()) + ", H has " +
                    std::to_string(h.samples()) + ", Y has " + std::to_string(y.samples()));
  }
  // H may omit blocks for trailing classes that have no samples (a single
  // sample of class 1 with Y over two classes is a valid problem).
  if (h.classes() > y.classes()) {
    throw Error(ErrorKind::kDimensionMismatch, "H has " + std::to_string(h.classes()) +
                                                   " class blocks but Y has only " + std::to_string(y.classes()) +
                                                   " classes");
  }
  for (std::size_t j = 0; j < y.labels().size(); ++j) {
    if (h.labels()[j] != y.labels()[j]) {
      throw Error(ErrorKind::kDimensionMismatch,
                  "H and Y disagree on the class of sample " + std::to_string(j));
    }
  }
  return {x.features(), x.samples(), 0, h.rows(), y.classes()};
}

//! The eight arrays updated by the solver.
struct ModelState {
  Matrix omega;  // r x m analysis dictionary
  Matrix u;      // r x n sparse codes
  Matrix q;      // s x r structure map
  Matrix w;      // c x s classifier
  Matrix eps1;   // s x n structure slack
  Matrix eps2;   // c x n label slack
  Matrix z1;     // s x n dual of H = QU + eps1
  Matrix z2;     // c x n dual of Y = WQU + eps2

  ModelDims dims() const { return {omega.cols(), u.cols(), omega.rows(), q.rows(), w.rows()}; }

  void check_shapes(const ModelDims& d) const {
    detail::require_shape(omega, d.r, d.m, "omega");
    detail::require_shape(u, d.r, d.n, "U");
    detail::require_shape(q, d.s, d.r, "Q");
    detail::require_shape(w, d.c, d.s, "W");
    detail::require_shape(eps1, d.s, d.n, "eps1");
    detail::require_shape(eps2, d.c, d.n, "eps2");
    detail::require_shape(z1, d.s, d.n, "Z1");
    detail::require_shape(z2, d.c, d.n, "Z2");
  }

  bool all_finite() const {
    return omega.allFinite() && u.allFinite() && q.allFinite() && w.allFinite() && eps1.allFinite() &&
           eps2.allFinite() && z1.allFinite() && z2.allFinite();
  }

  //! Omega, Q, W ~ N(0, 1) / sqrt(input dim); everything else zero.
  static ModelState initialize(const ModelDims& d, std::uint64_t seed) {
    if (d.m < 1 || d.n < 1 || d.r < 1 || d.s < 1 || d.c < 1) {
      throw Error(ErrorKind::kInvalidDims, "all model dimensions must be positive");
    }
    Rng rng(seed);
    ModelState st;
    st.omega = gaussian_matrix(d.r, d.m, rng) / std::sqrt(static_cast<double>(d.m));
    st.q = gaussian_matrix(d.s, d.r, rng) / std::sqrt(static_cast<double>(d.r));
    st.w = gaussian_matrix(d.c, d.s, rng) / std::sqrt(static_cast<double>(d.s));
    st.u = Matrix::Zero(d.r, d.n);
    st.eps1 = Matrix::Zero(d.s, d.n);
    st.eps2 = Matrix::Zero(d.c, d.n);
    st.z1 = Matrix::Zero(d.s, d.n);
    st.z2 = Matrix::Zero(d.c, d.n);
    return st;
  }
};

struct StepSizes {
  double eta_u = 1.0;
  double eta_q = 1.0;
  double eta_w = 1.0;
};

//! Which coupling constraints the objective keeps. The reduced forms are the
//! ablation variants: kStructureOnly drops Y = WQU (W frozen), kLabelOnly
//! drops H = QU (Q frozen, H never read).
enum class Constraints { kFull, kStructureOnly, kLabelOnly };

//! kAppendix: eps = (Z + mu R) / (rho + mu) and Z += mu (R - eps), the form
//! under which Z = rho * eps holds after every iteration.
//! kMainText: eps = (Z + mu R) / (rho - 1) and Z += mu R, kept for comparison.
enum class UpdateForm { kAppendix, kMainText };

struct Hyperparams {
  double lambda1 = 0.001;  // l1 weight on U
  double lambda2 = 0.005;  // ridge on Omega
  double rho1 = 1.0;
  double rho2 = 1.0;
  double delta1 = 1.0;  // ridge on Q
  double delta2 = 1.0;  // ridge on W
  std::optional<double> mu;  // unset: 2 * max(rho1, rho2)
  std::optional<StepSizes> fixed_steps;  // unset: Lipschitz steps, recomputed per block
  double step_margin = 0.1;
  int max_iter = 300;
  double tol = 1e-6;
  Eigen::Index atoms = 0;  // r; 0 means "same as feature count"
  std::uint64_t seed = 42;
  Constraints constraints = Constraints::kFull;
  UpdateForm update_form = UpdateForm::kAppendix;

  double resolved_mu() const { return mu.value_or(2.0 * std::max(rho1, rho2)); }

  Eigen::Index resolved_atoms(Eigen::Index features) const { return atoms > 0 ? atoms : features; }

  void validate(bool require_monotone = false) const {
    auto bad = [](const std::string& msg) { throw Error(ErrorKind::kInvalidHyper, msg); };
    if (!(lambda1 > 0)) bad("lambda1 must be > 0");
    if (!(lambda2 >= 0)) bad("lambda2 must be >= 0");
    if (!(rho1 > 0) || !(rho2 > 0)) bad("rho1, rho2 must be > 0");
    if (!(delta1 >= 0) || !(delta2 >= 0)) bad("delta1, delta2 must be >= 0");
    if (!(resolved_mu() > 0)) bad("mu must be > 0");
    if (fixed_steps && !(fixed_steps->eta_u > 0 && fixed_steps->eta_q > 0 && fixed_steps->eta_w > 0)) {
      bad("step sizes must be > 0");
    }
    if (!(step_margin >= 0)) bad("step margin must be >= 0");
    if (max_iter < 0) bad("max_iter must be >= 0");
    if (!(tol >= 0)) bad("tol must be >= 0");
    if (atoms < 0) bad("atoms must be >= 0");
    if (require_monotone && resolved_mu() < std::sqrt(2.0) * std::max(rho1, rho2)) {
      bad("monotone descent needs mu >= sqrt(2) * max(rho1, rho2)");
    }
  }
};

struct DistHyperparams {
  Hyperparams base;
  int n_clusters = 2;
  double xi1 = 0.1;
  double xi2 = 0.1;
  double xi3 = 0.1;
  double growth_rho = 1.01;
  std::optional<double> mu_max;   // unset: 10 * initial mu
  std::optional<double> xi1_max;  // unset: 10 * xi
  std::optional<double> xi2_max;
  std::optional<double> xi3_max;
  std::uint64_t seed = 42;  // partition seed
  int threads = 0;          // 0: one per worker

  double resolved_mu_max() const { return mu_max.value_or(10.0 * base.resolved_mu()); }
  double resolved_xi1_max() const { return xi1_max.value_or(10.0 * xi1); }
  double resolved_xi2_max() const { return xi2_max.value_or(10.0 * xi2); }
  double resolved_xi3_max() const { return xi3_max.value_or(10.0 * xi3); }

  void validate() const {
    base.validate();
    auto bad = [](const std::string& msg) { throw Error(ErrorKind::kInvalidHyper, msg); };
    if (n_clusters < 1) bad("n_clusters must be >= 1");
    if (!(xi1 >= 0 && xi2 >= 0 && xi3 >= 0)) bad("xi must be >= 0");
    if (!(growth_rho >= 1)) bad("growth_rho must be >= 1");
    if (resolved_mu_max() < base.resolved_mu()) bad("mu_max below initial mu");
    if (resolved_xi1_max() < xi1 || resolved_xi2_max() < xi2 || resolved_xi3_max() < xi3) {
      bad("xi cap below initial xi");
    }
    if (threads < 0) bad("threads must be >= 0");
  }
};

struct IterationRecord {
  int iter = 0;
  double lagrangian = 0;
  double res_h = 0;      // ||H - QU - eps1||
  double res_y = 0;      // ||Y - WQU - eps2||
  double dual_gap1 = 0;  // ||Z1 - rho1 eps1||
  double dual_gap2 = 0;  // ||Z2 - rho2 eps2||
  double d_omega = 0, d_u = 0, d_q = 0, d_w = 0;
  double d_eps1 = 0, d_eps2 = 0, d_z1 = 0, d_z2 = 0;
  double max_delta = 0;
  StepSizes steps;
  double consensus_gap = 0;  // distributed only: ||Omega_t - Omega|| after averaging

  void finish_deltas() {
    max_delta = std::max({d_omega, d_u, d_q, d_w, d_eps1, d_eps2, d_z1, d_z2});
  }
};

struct TrainTrace {
  double initial_lagrangian = 0;
  std::vector<IterationRecord> records;
  bool converged = false;
};

}  // namespace sadl

#endif  // SADL_MODEL_HPP_
