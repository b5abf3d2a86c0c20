#ifndef SADL_TESTS_ORACLES_HPP_
#define SADL_TESTS_ORACLES_HPP_

// Reference computations for the tests. None of these call into the solver;
// they are written with plain loops or textbook algorithms so that they fail
// independently of the code under test.

#include <cmath>
#include <cstdint>
#include <functional>
#include <random>
#include <stdexcept>
#include <vector>

#include <Eigen/Core>

#include "sadl/model.hpp"

namespace oracle {

using sadl::Matrix;
using sadl::Vector;

//! Central finite-difference gradient of f at a.
inline Matrix fd_gradient(const std::function<double(const Matrix&)>& f, const Matrix& a, double step = 1e-5) {
  Matrix g(a.rows(), a.cols());
  Matrix p = a;
  for (Eigen::Index j = 0; j < a.cols(); ++j) {
    for (Eigen::Index i = 0; i < a.rows(); ++i) {
      const double orig = p(i, j);
      p(i, j) = orig + step;
      const double up = f(p);
      p(i, j) = orig - step;
      const double down = f(p);
      p(i, j) = orig;
      g(i, j) = (up - down) / (2 * step);
    }
  }
  return g;
}

inline double rel_error(const Matrix& got, const Matrix& want) {
  return (got - want).norm() / std::max(1.0, want.norm());
}

//! Triple-loop product, no Eigen expression templates.
inline Matrix matmul(const Matrix& a, const Matrix& b) {
  if (a.cols() != b.rows()) throw std::invalid_argument("matmul shapes");
  Matrix c = Matrix::Zero(a.rows(), b.cols());
  for (Eigen::Index i = 0; i < a.rows(); ++i) {
    for (Eigen::Index j = 0; j < b.cols(); ++j) {
      long double acc = 0;
      for (Eigen::Index k = 0; k < a.cols(); ++k) acc += static_cast<long double>(a(i, k)) * b(k, j);
      c(i, j) = static_cast<double>(acc);
    }
  }
  return c;
}

inline long double sum_sq(const Matrix& a) {
  long double s = 0;
  for (Eigen::Index j = 0; j < a.cols(); ++j) {
    for (Eigen::Index i = 0; i < a.rows(); ++i) s += static_cast<long double>(a(i, j)) * a(i, j);
  }
  return s;
}

inline long double inner(const Matrix& a, const Matrix& b) {
  long double s = 0;
  for (Eigen::Index j = 0; j < a.cols(); ++j) {
    for (Eigen::Index i = 0; i < a.rows(); ++i) s += static_cast<long double>(a(i, j)) * b(i, j);
  }
  return s;
}

//! The augmented Lagrangian summed term by term in extended precision.
inline double lagrangian(const sadl::ModelState& st, const Matrix& x, const Matrix& h, const Matrix& y,
                         const sadl::Hyperparams& hp) {
  const double mu = hp.resolved_mu();
  const Matrix qu = matmul(st.q, st.u);
  const Matrix r1 = h - qu - st.eps1;
  const Matrix r2 = y - matmul(st.w, qu) - st.eps2;
  long double l1 = 0;
  for (Eigen::Index j = 0; j < st.u.cols(); ++j) {
    for (Eigen::Index i = 0; i < st.u.rows(); ++i) l1 += std::fabs(st.u(i, j));
  }
  long double total = 0.5L * sum_sq(st.u - matmul(st.omega, x));
  total += hp.lambda1 * l1;
  total += inner(st.z1, r1) + inner(st.z2, r2);
  total += 0.5L * mu * (sum_sq(r1) + sum_sq(r2));
  total += 0.5L * hp.rho1 * sum_sq(st.eps1) + 0.5L * hp.rho2 * sum_sq(st.eps2);
  total += 0.5L * hp.delta1 * sum_sq(st.q) + 0.5L * hp.delta2 * sum_sq(st.w);
  total += 0.5L * hp.lambda2 * sum_sq(st.omega);
  return static_cast<double>(total);
}

//! Solves A X = B by Gaussian elimination with partial pivoting.
inline Matrix gauss_solve(Matrix a, Matrix b) {
  const Eigen::Index n = a.rows();
  if (a.cols() != n || b.rows() != n) throw std::invalid_argument("gauss_solve shapes");
  for (Eigen::Index k = 0; k < n; ++k) {
    Eigen::Index piv = k;
    for (Eigen::Index i = k + 1; i < n; ++i) {
      if (std::fabs(a(i, k)) > std::fabs(a(piv, k))) piv = i;
    }
    if (a(piv, k) == 0.0) throw std::runtime_error("singular");
    a.row(k).swap(a.row(piv));
    b.row(k).swap(b.row(piv));
    for (Eigen::Index i = k + 1; i < n; ++i) {
      const double f = a(i, k) / a(k, k);
      for (Eigen::Index j = k; j < n; ++j) a(i, j) -= f * a(k, j);
      for (Eigen::Index j = 0; j < b.cols(); ++j) b(i, j) -= f * b(k, j);
    }
  }
  Matrix x(n, b.cols());
  for (Eigen::Index i = n - 1; i >= 0; --i) {
    for (Eigen::Index j = 0; j < b.cols(); ++j) {
      long double acc = b(i, j);
      for (Eigen::Index k = i + 1; k < n; ++k) acc -= static_cast<long double>(a(i, k)) * x(k, j);
      x(i, j) = static_cast<double>(acc / a(i, i));
    }
  }
  return x;
}

//! Omega = U X^T (X X^T + lambda2 I)^-1 through the transposed system
//! (X X^T + lambda2 I) Omega^T = X U^T.
inline Matrix omega_normal_equations(const Matrix& u, const Matrix& x, double lambda2) {
  Matrix g = matmul(x, Matrix(x.transpose()));
  for (Eigen::Index i = 0; i < g.rows(); ++i) g(i, i) += lambda2;
  return gauss_solve(g, matmul(x, Matrix(u.transpose()))).transpose();
}

//! Ridge regression on one-hot labels: W = Y X^T (X X^T + lambda I)^-1,
//! label = argmax W x (lowest index on ties).
struct RidgeClassifier {
  Matrix w;

  RidgeClassifier(const Matrix& x, const sadl::Labels& labels, int classes, double lambda) {
    Matrix y = Matrix::Zero(classes, x.cols());
    for (std::size_t j = 0; j < labels.size(); ++j) y(labels[j] - 1, static_cast<Eigen::Index>(j)) = 1.0;
    w = omega_normal_equations(y, x, lambda);
  }

  double accuracy(const Matrix& x, const sadl::Labels& labels) const {
    const Matrix s = matmul(w, x);
    int correct = 0;
    for (Eigen::Index j = 0; j < s.cols(); ++j) {
      Eigen::Index best = 0;
      for (Eigen::Index i = 1; i < s.rows(); ++i) {
        if (s(i, j) > s(best, j)) best = i;
      }
      if (best + 1 == labels[static_cast<std::size_t>(j)]) ++correct;
    }
    return static_cast<double>(correct) / static_cast<double>(s.cols());
  }
};

//! ISTA for min_u 1/2 ||x - D u||^2 + lambda ||u||_1, fixed iteration count.
//! Used as the cost yardstick for iterative sparse coding.
inline Vector ista(const Matrix& d, const Vector& x, double lambda, double step, int iters) {
  Vector u = Vector::Zero(d.cols());
  const Matrix dt = d.transpose();
  for (int k = 0; k < iters; ++k) {
    const Vector grad = dt * (d * u - x);
    u -= step * grad;
    for (Eigen::Index i = 0; i < u.size(); ++i) {
      const double v = u(i);
      u(i) = v > step * lambda ? v - step * lambda : (v < -step * lambda ? v + step * lambda : 0.0);
    }
  }
  return u;
}

//! Random problem with every state block nonzero, for gradient and identity
//! checks. H and Y are proper structure/label matrices.
struct Instance {
  Matrix x, h, y;
  sadl::ModelState st;
};

inline Instance random_instance(Eigen::Index m, Eigen::Index n, Eigen::Index r, Eigen::Index s, Eigen::Index c,
                                std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> nd(0.0, 1.0);
  auto rnd = [&](Eigen::Index rows, Eigen::Index cols) {
    Matrix a(rows, cols);
    for (Eigen::Index j = 0; j < cols; ++j) {
      for (Eigen::Index i = 0; i < rows; ++i) a(i, j) = nd(rng);
    }
    return a;
  };
  Instance in;
  in.x = rnd(m, n);
  in.h = Matrix::Zero(s, n);
  in.y = Matrix::Zero(c, n);
  // Blocks of s rows split as evenly as possible; sample j is in class j % c.
  std::vector<Eigen::Index> start(static_cast<std::size_t>(c) + 1, 0);
  for (Eigen::Index k = 0; k < c; ++k) start[k + 1] = start[k] + s / c + (k < s % c ? 1 : 0);
  for (Eigen::Index j = 0; j < n; ++j) {
    const Eigen::Index k = j % c;
    in.y(k, j) = 1.0;
    for (Eigen::Index i = start[k]; i < start[k + 1]; ++i) in.h(i, j) = 1.0;
  }
  in.st.omega = rnd(r, m) * 0.5;
  in.st.u = rnd(r, n) * 0.5;
  in.st.q = rnd(s, r) * 0.5;
  in.st.w = rnd(c, s) * 0.5;
  in.st.eps1 = rnd(s, n) * 0.1;
  in.st.eps2 = rnd(c, n) * 0.1;
  in.st.z1 = rnd(s, n) * 0.1;
  in.st.z2 = rnd(c, n) * 0.1;
  return in;
}

inline sadl::Labels labels_of(Eigen::Index n, Eigen::Index c) {
  sadl::Labels l(static_cast<std::size_t>(n));
  for (Eigen::Index j = 0; j < n; ++j) l[static_cast<std::size_t>(j)] = static_cast<int>(j % c) + 1;
  return l;
}

}  // namespace oracle

#endif  // SADL_TESTS_ORACLES_HPP_
