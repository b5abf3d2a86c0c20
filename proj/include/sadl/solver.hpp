#ifndef SADL_SOLVER_HPP_
#define SADL_SOLVER_HPP_

// Linearized alternating-direction solver for structured analysis dictionary
// learning. The augmented Lagrangian is
//
//   L = 1/2 ||U - Omega X||^2 + lambda1 ||U||_1
//     + <Z1, R1> + <Z2, R2> + mu/2 (||R1||^2 + ||R2||^2)
//     + rho1/2 ||eps1||^2 + rho2/2 ||eps2||^2
//     + delta1/2 ||Q||^2 + delta2/2 ||W||^2 + lambda2/2 ||Omega||^2
//
// with residuals R1 = H - QU - eps1 and R2 = Y - WQU - eps2. One iteration
// updates U (proximal gradient), Q and W (gradient steps), Omega (closed
// form), eps1 and eps2 (exact minimizers) and finally the duals.

#include <algorithm>
#include <cmath>
#include <string>
#include <utility>

#include <Eigen/Cholesky>
#include <Eigen/Core>
#include <Eigen/Eigenvalues>

#include "sadl/error.hpp"
#include "sadl/model.hpp"

namespace sadl {

namespace detail {

inline bool uses_structure(Constraints c) { return c != Constraints::kLabelOnly; }
inline bool uses_labels(Constraints c) { return c != Constraints::kStructureOnly; }

inline void require_finite(const Matrix& a, const char* name) {
  if (!a.allFinite()) throw Error(ErrorKind::kNonFiniteUpdate, std::string(name) + " update produced non-finite entries");
}

//! Largest eigenvalue of A^T A, i.e. the squared spectral norm of A.
inline double spectral_norm_sq(const Matrix& a) {
  if (a.size() == 0) return 0.0;
  const Matrix gram = a.rows() <= a.cols() ? Matrix(a * a.transpose()) : Matrix(a.transpose() * a);
  Eigen::SelfAdjointEigenSolver<Matrix> eig(gram, Eigen::EigenvaluesOnly);
  return std::max(0.0, eig.eigenvalues().maxCoeff());
}

}  // namespace detail

//! Elementwise sign(m) * max(|m| - theta, 0).
inline Matrix soft_threshold(const Matrix& m, double theta) {
  if (!(theta >= 0)) throw Error(ErrorKind::kInvalidHyper, "soft threshold needs theta >= 0");
  return (m.array().sign() * (m.array().abs() - theta).max(0.0)).matrix();
}

//! H - QU - eps1.
inline Matrix structure_residual(const ModelState& st, const Matrix& h) {
  return h - st.q * st.u - st.eps1;
}

//! Y - WQU - eps2.
inline Matrix label_residual(const ModelState& st, const Matrix& y) {
  return y - st.w * (st.q * st.u) - st.eps2;
}

struct GradUParts {
  Matrix u1;  // -(Omega X - U)
  Matrix u2;  // -Q^T (Z1 + mu R1)
  Matrix u3;  // -Q^T W^T (Z2 + mu R2)

  Matrix sum() const { return u1 + u2 + u3; }
};

inline GradUParts grad_u_parts(const ModelState& st, const Matrix& x, const Matrix& h, const Matrix& y, double mu,
                               Constraints constraints = Constraints::kFull) {
  detail::require_shape(x, st.omega.cols(), st.u.cols(), "X");
  GradUParts g;
  g.u1 = st.u - st.omega * x;
  const Matrix qu = st.q * st.u;
  if (detail::uses_structure(constraints)) {
    detail::require_shape(h, st.q.rows(), st.u.cols(), "H");
    g.u2 = -st.q.transpose() * (st.z1 + mu * (h - qu - st.eps1));
  } else {
    g.u2 = Matrix::Zero(st.u.rows(), st.u.cols());
  }
  if (detail::uses_labels(constraints)) {
    detail::require_shape(y, st.w.rows(), st.u.cols(), "Y");
    g.u3 = -st.q.transpose() * (st.w.transpose() * (st.z2 + mu * (y - st.w * qu - st.eps2)));
  } else {
    g.u3 = Matrix::Zero(st.u.rows(), st.u.cols());
  }
  return g;
}

//! Q1 + Q2: gradient of L in Q at the current state.
inline Matrix grad_q(const ModelState& st, const Matrix& h, const Matrix& y, const Hyperparams& hp) {
  const double mu = hp.resolved_mu();
  Matrix g = hp.delta1 * st.q;
  if (detail::uses_structure(hp.constraints)) {
    detail::require_shape(h, st.q.rows(), st.u.cols(), "H");
    g.noalias() -= (st.z1 + mu * structure_residual(st, h)) * st.u.transpose();
  }
  if (detail::uses_labels(hp.constraints)) {
    detail::require_shape(y, st.w.rows(), st.u.cols(), "Y");
    g.noalias() -= st.w.transpose() * ((st.z2 + mu * label_residual(st, y)) * st.u.transpose());
  }
  return g;
}

//! W1: gradient of L in W at the current state.
inline Matrix grad_w(const ModelState& st, const Matrix& y, const Hyperparams& hp) {
  const double mu = hp.resolved_mu();
  Matrix g = hp.delta2 * st.w;
  if (detail::uses_labels(hp.constraints)) {
    detail::require_shape(y, st.w.rows(), st.u.cols(), "Y");
    const Matrix qu = st.q * st.u;
    g.noalias() -= (st.z2 + mu * (y - st.w * qu - st.eps2)) * qu.transpose();
  }
  return g;
}

struct LipschitzConstants {
  double alpha_u = 0;
  double alpha_q = 0;
  double alpha_w = 0;
};

// Largest curvature of L along each block. For U this is
// 1 + mu ||Q^T Q + Q^T W^T W Q||_2; for Q the Hessian is
// delta1 I + mu (I + W^T W) (x) U U^T, whose norm is
// delta1 + mu ||U U^T||_2 (1 + ||W^T W||_2); for W it is
// delta2 + mu ||Q U U^T Q^T||_2.

inline double lipschitz_u(const ModelState& st, const Hyperparams& hp) {
  const Eigen::Index sr = detail::uses_structure(hp.constraints) ? st.q.rows() : 0;
  const Eigen::Index cr = detail::uses_labels(hp.constraints) ? st.w.rows() : 0;
  Matrix stacked(sr + cr, st.q.cols());
  if (sr > 0) stacked.topRows(sr) = st.q;
  if (cr > 0) stacked.bottomRows(cr) = st.w * st.q;
  return 1.0 + hp.resolved_mu() * detail::spectral_norm_sq(stacked);
}

inline double lipschitz_q(const ModelState& st, const Hyperparams& hp) {
  if (hp.constraints == Constraints::kLabelOnly) return hp.delta1;  // Q is frozen
  const double coupling = 1.0 + (detail::uses_labels(hp.constraints) ? detail::spectral_norm_sq(st.w) : 0.0);
  return hp.delta1 + hp.resolved_mu() * coupling * detail::spectral_norm_sq(st.u);
}

inline double lipschitz_w(const ModelState& st, const Hyperparams& hp) {
  if (!detail::uses_labels(hp.constraints)) return hp.delta2;
  return hp.delta2 + hp.resolved_mu() * detail::spectral_norm_sq(st.q * st.u);
}

inline LipschitzConstants lipschitz_constants(const ModelState& st, const Hyperparams& hp) {
  return {lipschitz_u(st, hp), lipschitz_q(st, hp), lipschitz_w(st, hp)};
}

//! Step parameter for a block with curvature alpha: the gradient step is
//! 1 / (mu * eta) = 1 / ((1 + margin) * alpha).
inline double eta_from_alpha(double alpha, const Hyperparams& hp) {
  return (1.0 + hp.step_margin) * alpha / hp.resolved_mu();
}

inline StepSizes lipschitz_steps(const ModelState& st, const Hyperparams& hp) {
  const auto a = lipschitz_constants(st, hp);
  return {eta_from_alpha(a.alpha_u, hp), eta_from_alpha(a.alpha_q, hp), eta_from_alpha(a.alpha_w, hp)};
}

inline Matrix update_u(const ModelState& st, const Matrix& x, const Matrix& h, const Matrix& y, const Hyperparams& hp,
                       const StepSizes& steps) {
  if (!(steps.eta_u > 0)) throw Error(ErrorKind::kInvalidHyper, "eta_u must be > 0");
  const double scale = hp.resolved_mu() * steps.eta_u;
  const auto g = grad_u_parts(st, x, h, y, hp.resolved_mu(), hp.constraints);
  Matrix out = soft_threshold(st.u - g.sum() / scale, hp.lambda1 / scale);
  detail::require_finite(out, "U");
  return out;
}

inline Matrix update_q(const ModelState& st, const Matrix& h, const Matrix& y, const Hyperparams& hp,
                       const StepSizes& steps) {
  if (hp.constraints == Constraints::kLabelOnly) return st.q;
  if (!(steps.eta_q > 0)) throw Error(ErrorKind::kInvalidHyper, "eta_q must be > 0");
  Matrix out = st.q - grad_q(st, h, y, hp) / (hp.resolved_mu() * steps.eta_q);
  detail::require_finite(out, "Q");
  return out;
}

inline Matrix update_w(const ModelState& st, const Matrix& y, const Hyperparams& hp, const StepSizes& steps) {
  if (!detail::uses_labels(hp.constraints)) return st.w;
  if (!(steps.eta_w > 0)) throw Error(ErrorKind::kInvalidHyper, "eta_w must be > 0");
  Matrix out = st.w - grad_w(st, y, hp) / (hp.resolved_mu() * steps.eta_w);
  detail::require_finite(out, "W");
  return out;
}

//! Solves Omega (X X^T + ridge I) = B for Omega. The Gram factorization is
//! computed once and reused for every right-hand side.
class OmegaSolver {
 public:
  OmegaSolver(const Matrix& x, double ridge) {
    gram_ = x * x.transpose();
    gram_.diagonal().array() += ridge;
    llt_.compute(gram_);
    if (llt_.info() != Eigen::Success) {
      throw Error(ErrorKind::kSingularSystem, "X X^T + ridge I is not positive definite");
    }
  }

  Matrix solve(const Matrix& rhs) const {
    // Gram is symmetric: Omega^T = G^-1 B^T.
    Matrix omega = llt_.solve(rhs.transpose()).transpose();
    const double bound = 1e-8 * (1.0 + rhs.norm());
    Matrix resid = omega * gram_ - rhs;
    if (resid.norm() > bound) {
      omega -= llt_.solve(resid.transpose()).transpose();
      resid = omega * gram_ - rhs;
    }
    if (!omega.allFinite() || resid.norm() > bound) {
      throw Error(ErrorKind::kSingularSystem, "Omega normal equations are numerically singular");
    }
    return omega;
  }

  const Matrix& gram() const { return gram_; }

 private:
  Matrix gram_;
  Eigen::LLT<Matrix> llt_;
};

//! Omega = U X^T (X X^T + lambda2 I)^-1.
inline Matrix update_omega(const Matrix& u, const Matrix& x, double lambda2) {
  if (u.cols() != x.cols()) {
    throw Error(ErrorKind::kDimensionMismatch, "U and X must have the same number of columns");
  }
  return OmegaSolver(x, lambda2).solve(u * x.transpose());
}

namespace detail {

inline Matrix eps_update(const Matrix& z, const Matrix& coupling_residual, double rho, double mu, UpdateForm form) {
  const double denom = form == UpdateForm::kAppendix ? rho + mu : rho - 1.0;
  Matrix out = (z + mu * coupling_residual) / denom;
  require_finite(out, "eps");
  return out;
}

}  // namespace detail

//! Exact minimizer of L in eps1: (Z1 + mu (H - QU)) / (rho1 + mu).
inline Matrix update_eps1(const ModelState& st, const Matrix& h, const Hyperparams& hp) {
  if (!detail::uses_structure(hp.constraints)) return st.eps1;
  detail::require_shape(h, st.q.rows(), st.u.cols(), "H");
  return detail::eps_update(st.z1, h - st.q * st.u, hp.rho1, hp.resolved_mu(), hp.update_form);
}

//! Exact minimizer of L in eps2: (Z2 + mu (Y - WQU)) / (rho2 + mu).
inline Matrix update_eps2(const ModelState& st, const Matrix& y, const Hyperparams& hp) {
  if (!detail::uses_labels(hp.constraints)) return st.eps2;
  detail::require_shape(y, st.w.rows(), st.u.cols(), "Y");
  return detail::eps_update(st.z2, y - st.w * (st.q * st.u), hp.rho2, hp.resolved_mu(), hp.update_form);
}

//! Dual ascent Z1 += mu R1, Z2 += mu R2. Returns the new (Z1, Z2).
inline std::pair<Matrix, Matrix> update_duals(const ModelState& st, const Matrix& h, const Matrix& y,
                                              const Hyperparams& hp) {
  const double mu = hp.resolved_mu();
  const bool appendix = hp.update_form == UpdateForm::kAppendix;
  Matrix z1 = st.z1;
  Matrix z2 = st.z2;
  const Matrix qu = st.q * st.u;
  if (detail::uses_structure(hp.constraints)) {
    z1 += mu * (appendix ? Matrix(h - qu - st.eps1) : Matrix(h - qu));
  }
  if (detail::uses_labels(hp.constraints)) {
    z2 += mu * (appendix ? Matrix(y - st.w * qu - st.eps2) : Matrix(y - st.w * qu));
  }
  detail::require_finite(z1, "Z1");
  detail::require_finite(z2, "Z2");
  return {std::move(z1), std::move(z2)};
}

//! L - lambda1 ||U||_1.
inline double smooth_lagrangian(const ModelState& st, const Matrix& x, const Matrix& h, const Matrix& y,
                                const Hyperparams& hp) {
  const double mu = hp.resolved_mu();
  double val = 0.5 * (st.u - st.omega * x).squaredNorm() + 0.5 * hp.lambda2 * st.omega.squaredNorm();
  const Matrix qu = st.q * st.u;
  if (detail::uses_structure(hp.constraints)) {
    const Matrix r1 = h - qu - st.eps1;
    val += (st.z1.array() * r1.array()).sum() + 0.5 * mu * r1.squaredNorm() + 0.5 * hp.rho1 * st.eps1.squaredNorm() +
           0.5 * hp.delta1 * st.q.squaredNorm();
  }
  if (detail::uses_labels(hp.constraints)) {
    const Matrix r2 = y - st.w * qu - st.eps2;
    val += (st.z2.array() * r2.array()).sum() + 0.5 * mu * r2.squaredNorm() + 0.5 * hp.rho2 * st.eps2.squaredNorm() +
           0.5 * hp.delta2 * st.w.squaredNorm();
  }
  return val;
}

inline double lagrangian(const ModelState& st, const Matrix& x, const Matrix& h, const Matrix& y,
                         const Hyperparams& hp) {
  return smooth_lagrangian(st, x, h, y, hp) + hp.lambda1 * st.u.lpNorm<1>();
}

enum class Variable { kU, kQ, kW, kOmega, kEps1, kEps2 };

//! Analytic gradient of the smooth part of L in one block.
inline Matrix smooth_grad(const ModelState& st, const Matrix& x, const Matrix& h, const Matrix& y,
                          const Hyperparams& hp, Variable which) {
  const double mu = hp.resolved_mu();
  switch (which) {
    case Variable::kU:
      return grad_u_parts(st, x, h, y, mu, hp.constraints).sum();
    case Variable::kQ:
      return grad_q(st, h, y, hp);
    case Variable::kW:
      return grad_w(st, y, hp);
    case Variable::kOmega:
      return (st.omega * x - st.u) * x.transpose() + hp.lambda2 * st.omega;
    case Variable::kEps1:
      if (!detail::uses_structure(hp.constraints)) return Matrix::Zero(st.eps1.rows(), st.eps1.cols());
      return hp.rho1 * st.eps1 - st.z1 - mu * structure_residual(st, h);
    case Variable::kEps2:
      if (!detail::uses_labels(hp.constraints)) return Matrix::Zero(st.eps2.rows(), st.eps2.cols());
      return hp.rho2 * st.eps2 - st.z2 - mu * label_residual(st, y);
  }
  return {};
}

//! Residual norms, dual gaps and successive changes between two states.
inline IterationRecord make_record(int iter, const ModelState& prev, const ModelState& st, const Matrix& x,
                                   const Matrix& h, const Matrix& y, const Hyperparams& hp) {
  IterationRecord rec;
  rec.iter = iter;
  rec.lagrangian = lagrangian(st, x, h, y, hp);
  if (detail::uses_structure(hp.constraints)) {
    rec.res_h = structure_residual(st, h).norm();
    rec.dual_gap1 = (st.z1 - hp.rho1 * st.eps1).norm();
  }
  if (detail::uses_labels(hp.constraints)) {
    rec.res_y = label_residual(st, y).norm();
    rec.dual_gap2 = (st.z2 - hp.rho2 * st.eps2).norm();
  }
  rec.d_omega = (st.omega - prev.omega).norm();
  rec.d_u = (st.u - prev.u).norm();
  rec.d_q = (st.q - prev.q).norm();
  rec.d_w = (st.w - prev.w).norm();
  rec.d_eps1 = (st.eps1 - prev.eps1).norm();
  rec.d_eps2 = (st.eps2 - prev.eps2).norm();
  rec.d_z1 = (st.z1 - prev.z1).norm();
  rec.d_z2 = (st.z2 - prev.z2).norm();
  rec.finish_deltas();
  return rec;
}

struct TrainResult {
  ModelState state;
  TrainTrace trace;
};

//! One full iteration in the fixed block order U, Q, W, Omega, eps1, eps2,
//! duals. With automatic steps each block's step is computed right before
//! its update, from the state the update sees. Returns the steps used.
inline StepSizes sadl_iteration(ModelState& st, const Matrix& x, const Matrix& h, const Matrix& y,
                                const Hyperparams& hp, const OmegaSolver& omega_solver) {
  StepSizes steps = hp.fixed_steps.value_or(StepSizes{});
  const bool automatic = !hp.fixed_steps.has_value();
  if (automatic) steps.eta_u = eta_from_alpha(lipschitz_u(st, hp), hp);
  st.u = update_u(st, x, h, y, hp, steps);
  if (automatic) steps.eta_q = eta_from_alpha(lipschitz_q(st, hp), hp);
  st.q = update_q(st, h, y, hp, steps);
  if (automatic) steps.eta_w = eta_from_alpha(lipschitz_w(st, hp), hp);
  st.w = update_w(st, y, hp, steps);
  st.omega = omega_solver.solve(st.u * x.transpose());
  st.eps1 = update_eps1(st, h, hp);
  st.eps2 = update_eps2(st, y, hp);
  auto [z1, z2] = update_duals(st, h, y, hp);
  st.z1 = std::move(z1);
  st.z2 = std::move(z2);
  return steps;
}

//! Runs the training loop from `init` on raw matrices. `h` is never read
//! when hp.constraints is kLabelOnly and `y` never read for kStructureOnly,
//! so either may be empty in those modes.
inline TrainResult solve_sadl(const Matrix& x, const Matrix& h, const Matrix& y, const Hyperparams& hp,
                              ModelState init) {
  hp.validate();
  ModelDims d = init.dims();
  init.check_shapes(d);
  detail::require_shape(x, d.m, d.n, "X");
  if (detail::uses_structure(hp.constraints)) detail::require_shape(h, d.s, d.n, "H");
  if (detail::uses_labels(hp.constraints)) detail::require_shape(y, d.c, d.n, "Y");

  TrainResult res;
  res.state = std::move(init);
  res.trace.initial_lagrangian = lagrangian(res.state, x, h, y, hp);
  res.trace.records.reserve(static_cast<std::size_t>(hp.max_iter));
  const OmegaSolver omega_solver(x, hp.lambda2);

  for (int k = 1; k <= hp.max_iter; ++k) {
    const ModelState prev = res.state;
    const StepSizes steps = sadl_iteration(res.state, x, h, y, hp, omega_solver);
    IterationRecord rec = make_record(k, prev, res.state, x, h, y, hp);
    rec.steps = steps;
    res.trace.records.push_back(rec);
    if (rec.max_delta < hp.tol) {
      res.trace.converged = true;
      break;
    }
  }
  return res;
}

inline TrainResult train_sadl(const DataMatrix& x, const StructureTarget& h, const LabelMatrix& y,
                              const Hyperparams& hp, ModelState init) {
  validate_problem(x, h, y);
  return solve_sadl(x.values(), h.values(), y.values(), hp, std::move(init));
}

//! Trains from the seeded initialization with hp.atoms atoms.
inline TrainResult train_sadl(const DataMatrix& x, const StructureTarget& h, const LabelMatrix& y,
                              const Hyperparams& hp) {
  hp.validate();
  ModelDims d = validate_problem(x, h, y);
  d.r = hp.resolved_atoms(d.m);
  return train_sadl(x, h, y, hp, ModelState::initialize(d, hp.seed));
}

}  // namespace sadl

#endif  // SADL_SOLVER_HPP_
