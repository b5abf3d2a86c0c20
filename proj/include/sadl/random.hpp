#ifndef SADL_RANDOM_HPP_
#define SADL_RANDOM_HPP_

#include <cstdint>
#include <random>

#include <Eigen/Core>

namespace sadl {

using Rng = std::mt19937_64;

//! Matrix with i.i.d. standard normal entries, filled column by column.
inline Eigen::MatrixXd gaussian_matrix(Eigen::Index rows, Eigen::Index cols, Rng& rng) {
  std::normal_distribution<double> normal(0.0, 1.0);
  Eigen::MatrixXd out(rows, cols);
  for (Eigen::Index j = 0; j < cols; ++j) {
    for (Eigen::Index i = 0; i < rows; ++i) out(i, j) = normal(rng);
  }
  return out;
}

}  // namespace sadl

#endif  // SADL_RANDOM_HPP_
