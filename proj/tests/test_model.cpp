#include <algorithm>
#include <random>

#include <gtest/gtest.h>

#include "sadl/sadl.hpp"

namespace {

using sadl::Error;
using sadl::ErrorKind;
using sadl::Matrix;

template <typename F>
ErrorKind kind_of(F&& f) {
  try {
    f();
  } catch (const Error& e) {
    return e.kind();
  }
  ADD_FAILURE() << "expected sadl::Error";
  return ErrorKind::kIoError;
}

TEST(DataMatrix, RejectsEmptyAndNonFinite) {
  EXPECT_EQ(kind_of([] { sadl::DataMatrix(Matrix(0, 3)); }), ErrorKind::kInvalidDims);
  Matrix bad = Matrix::Ones(2, 2);
  bad(1, 1) = std::numeric_limits<double>::quiet_NaN();
  EXPECT_EQ(kind_of([&] { sadl::DataMatrix{bad}; }), ErrorKind::kInvalidDims);
  EXPECT_NO_THROW(sadl::DataMatrix(Matrix::Ones(1, 1)));
}

TEST(LabelMatrix, OneHotColumnsOnly) {
  Matrix y = Matrix::Zero(2, 3);
  y(0, 0) = y(1, 1) = y(0, 2) = 1;
  const sadl::LabelMatrix lm(y);
  EXPECT_EQ(lm.labels(), (sadl::Labels{1, 2, 1}));
  y(1, 2) = 1;  // two hot entries
  EXPECT_EQ(kind_of([&] { sadl::LabelMatrix{y}; }), ErrorKind::kInvalidDims);
  EXPECT_EQ(kind_of([] { sadl::LabelMatrix(Matrix::Ones(1, 3)); }), ErrorKind::kInvalidDims);
  EXPECT_EQ(kind_of([] { sadl::LabelMatrix(Matrix::Zero(3, 1)); }), ErrorKind::kInvalidDims);
}

TEST(ValidateProblem, ExampleWithUnevenBlocks) {
  const sadl::Labels labels{1, 1, 1, 2, 2, 3, 3};
  const auto h = sadl::build_structure_target(labels, std::nullopt, std::nullopt, 3);
  const auto y = sadl::one_hot_labels(labels, 3);
  const auto d = sadl::validate_problem(sadl::DataMatrix(Matrix::Ones(4, 7)), h, y);
  EXPECT_EQ(d.m, 4);
  EXPECT_EQ(d.n, 7);
  EXPECT_EQ(d.s, 7);
  EXPECT_EQ(d.c, 3);
}

TEST(ValidateProblem, MinimalCase) {
  const sadl::StructureTarget h({1}, {{0, 1}});
  Matrix y(2, 1);
  y << 1, 0;
  const auto d = sadl::validate_problem(sadl::DataMatrix(Matrix::Ones(2, 1)), h, sadl::LabelMatrix(y));
  EXPECT_EQ(d.m, 2);
  EXPECT_EQ(d.n, 1);
  EXPECT_EQ(d.s, 1);
  EXPECT_EQ(d.c, 2);
}

TEST(ValidateProblem, ColumnCountMismatch) {
  const sadl::Labels labels{1, 2, 3, 1, 2, 3};
  const auto h = sadl::build_structure_target(labels, std::nullopt, std::nullopt, 3);
  const auto y = sadl::one_hot_labels(labels, 3);
  EXPECT_EQ(kind_of([&] { sadl::validate_problem(sadl::DataMatrix(Matrix::Ones(4, 7)), h, y); }),
            ErrorKind::kDimensionMismatch);
}

TEST(ValidateProblem, ClassDisagreement) {
  const auto h = sadl::build_structure_target({1, 2}, std::nullopt, std::nullopt, 2);
  const auto y = sadl::one_hot_labels({2, 1}, 2);
  EXPECT_EQ(kind_of([&] { sadl::validate_problem(sadl::DataMatrix(Matrix::Ones(3, 2)), h, y); }),
            ErrorKind::kDimensionMismatch);
  const auto h3 = sadl::build_structure_target({1, 2}, std::vector<Eigen::Index>{1, 1, 1}, std::nullopt, 3);
  EXPECT_EQ(kind_of([&] {
              sadl::validate_problem(sadl::DataMatrix(Matrix::Ones(3, 2)), h3, sadl::one_hot_labels({1, 2}, 2));
            }),
            ErrorKind::kDimensionMismatch);
}

TEST(StructureTarget, PermutedLabelsSortToBlockDiagonal) {
  std::mt19937_64 rng(7);
  for (int trial = 0; trial < 20; ++trial) {
    const int c = 2 + trial % 4;
    sadl::Labels labels;
    for (int k = 1; k <= c; ++k) labels.insert(labels.end(), 1 + trial % 3 + k % 2, k);
    std::shuffle(labels.begin(), labels.end(), rng);
    const auto h = sadl::build_structure_target(labels, std::nullopt, std::nullopt, c);
    std::vector<Eigen::Index> order(labels.size());
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(), [&](auto a, auto b) { return labels[a] < labels[b]; });
    for (std::size_t jj = 0; jj < order.size(); ++jj) {
      const int k = labels[order[jj]];
      const auto& b = h.blocks()[k - 1];
      for (Eigen::Index i = 0; i < h.rows(); ++i) {
        const bool inside = i >= b.offset && i < b.offset + b.count;
        EXPECT_EQ(h.values()(i, order[jj]), inside ? 1.0 : 0.0);
      }
    }
  }
}

TEST(ModelState, InitializeShapesOverRandomDims) {
  std::mt19937_64 rng(3);
  std::uniform_int_distribution<int> dim(1, 9);
  for (int trial = 0; trial < 50; ++trial) {
    const sadl::ModelDims d{dim(rng), dim(rng), dim(rng), dim(rng), dim(rng)};
    const auto st = sadl::ModelState::initialize(d, static_cast<std::uint64_t>(trial));
    EXPECT_EQ(st.dims(), d);
    EXPECT_NO_THROW(st.check_shapes(d));
    EXPECT_TRUE(st.all_finite());
    EXPECT_TRUE(st.u.isZero(0));
    EXPECT_TRUE(st.z1.isZero(0) && st.z2.isZero(0) && st.eps1.isZero(0) && st.eps2.isZero(0));
  }
}

TEST(ModelState, InitializeIsSeeded) {
  const sadl::ModelDims d{4, 5, 3, 6, 2};
  const auto a = sadl::ModelState::initialize(d, 11);
  const auto b = sadl::ModelState::initialize(d, 11);
  const auto c = sadl::ModelState::initialize(d, 12);
  EXPECT_EQ(a.omega, b.omega);
  EXPECT_EQ(a.q, b.q);
  EXPECT_EQ(a.w, b.w);
  EXPECT_NE(a.omega, c.omega);
}

TEST(ModelState, CheckShapesFlagsMismatch) {
  const sadl::ModelDims d{4, 5, 3, 6, 2};
  auto st = sadl::ModelState::initialize(d, 1);
  st.q = Matrix::Zero(6, 4);
  EXPECT_EQ(kind_of([&] { st.check_shapes(d); }), ErrorKind::kDimensionMismatch);
}

TEST(Hyperparams, Validation) {
  sadl::Hyperparams hp;
  EXPECT_NO_THROW(hp.validate(true));
  EXPECT_DOUBLE_EQ(hp.resolved_mu(), 2.0);
  hp.lambda1 = 0;
  EXPECT_EQ(kind_of([&] { hp.validate(); }), ErrorKind::kInvalidHyper);
  hp = {};
  hp.mu = 1.0;  // below sqrt(2) * max(rho)
  EXPECT_NO_THROW(hp.validate(false));
  EXPECT_EQ(kind_of([&] { hp.validate(true); }), ErrorKind::kInvalidHyper);
  hp = {};
  hp.fixed_steps = sadl::StepSizes{1, 0, 1};
  EXPECT_EQ(kind_of([&] { hp.validate(); }), ErrorKind::kInvalidHyper);
}

TEST(Hyperparams, ReferenceConfigurationAccepted) {
  sadl::Hyperparams hp;
  hp.atoms = 1216;
  hp.lambda1 = 0.001;
  hp.lambda2 = 0.005;
  hp.max_iter = 466;
  EXPECT_NO_THROW(hp.validate(true));
  EXPECT_EQ(hp.resolved_atoms(504), 1216);
}

TEST(DistHyperparams, Validation) {
  sadl::DistHyperparams dp;
  EXPECT_NO_THROW(dp.validate());
  dp.n_clusters = 0;
  EXPECT_EQ(kind_of([&] { dp.validate(); }), ErrorKind::kInvalidHyper);
  dp = {};
  dp.growth_rho = 0.9;
  EXPECT_EQ(kind_of([&] { dp.validate(); }), ErrorKind::kInvalidHyper);
  dp = {};
  dp.xi1_max = 0.01;
  EXPECT_EQ(kind_of([&] { dp.validate(); }), ErrorKind::kInvalidHyper);
  for (int n : {1, 2, 4, 6, 10}) {
    dp = {};
    dp.n_clusters = n;
    dp.xi1 = dp.xi2 = dp.xi3 = 0.1;
    EXPECT_NO_THROW(dp.validate());
  }
  dp = {};
  dp.n_clusters = 3;
  dp.xi1 = dp.xi2 = dp.xi3 = 3e-5;
  dp.base.max_iter = 4495;
  EXPECT_NO_THROW(dp.validate());
}

TEST(Errors, NumericalKinds) {
  EXPECT_TRUE(sadl::is_numerical(ErrorKind::kNonFiniteUpdate));
  EXPECT_TRUE(sadl::is_numerical(ErrorKind::kSingularSystem));
  EXPECT_FALSE(sadl::is_numerical(ErrorKind::kDimensionMismatch));
  const Error e(ErrorKind::kZeroRow, "row 3");
  EXPECT_EQ(e.message(), "row 3");
  EXPECT_STREQ(e.what(), "ZeroRow: row 3");
  const sadl::WorkerError we(2, e);
  EXPECT_EQ(we.worker(), 2);
  EXPECT_EQ(we.kind(), ErrorKind::kZeroRow);
  EXPECT_EQ(we.message(), "worker 2: row 3");
}

}  // namespace
