#include <gtest/gtest.h>

#include "oracles.hpp"
#include "sadl/sadl.hpp"

namespace {

using sadl::Matrix;
using sadl::Vector;

Vector unit(Eigen::Index n, Eigen::Index k) {
  Vector v = Vector::Zero(n);
  v(k) = 1;
  return v;
}

TEST(Encode, Examples) {
  const Vector x = Vector::Random(4);
  EXPECT_EQ(sadl::encode(Matrix::Identity(4, 4), x), x);
  EXPECT_TRUE(sadl::encode(Matrix::Zero(3, 4), x).isZero(0));
  const Matrix omega = Matrix::Random(5, 4);
  EXPECT_LT((sadl::encode(omega, x) - oracle::matmul(omega, x)).norm(), 1e-12);
  EXPECT_THROW(sadl::encode(omega, Vector::Zero(3)), sadl::Error);
}

TEST(StructuredRep, Examples) {
  const Vector u = Vector::Random(3);
  EXPECT_EQ(sadl::structured_rep(Matrix::Identity(3, 3), u), u);
  EXPECT_TRUE(sadl::structured_rep(Matrix::Random(4, 3), Vector::Zero(3)).isZero(0));
  const Matrix q = Matrix::Random(4, 3);
  EXPECT_LT((sadl::structured_rep(q, u) - oracle::matmul(q, u)).norm(), 1e-12);
  EXPECT_THROW(sadl::structured_rep(q, Vector::Zero(4)), sadl::Error);
}

TEST(Predict, IdentityMapsAndTies) {
  const Matrix id = Matrix::Identity(3, 3);
  EXPECT_EQ(sadl::predict(id, id, id, unit(3, 1)), 2);
  EXPECT_EQ(sadl::predict(id, id, id, Vector::Ones(3)), 1);
  EXPECT_EQ(sadl::predict(Matrix::Zero(3, 3), id, id, Vector::Random(3)), 1);
}

TEST(Predict, PositiveScalingOfWDoesNotChangeLabels) {
  const Matrix w = Matrix::Random(4, 5);
  const Matrix q = Matrix::Random(5, 6);
  const Matrix omega = Matrix::Random(6, 7);
  for (int k = 0; k < 50; ++k) {
    const Vector x = Vector::Random(7);
    const int base = sadl::predict(w, q, omega, x);
    EXPECT_EQ(base, sadl::predict(w * 3.7, q, omega, x));
    EXPECT_EQ(base, sadl::predict(w * 1e-3, q, omega, x));
    EXPECT_EQ(base, sadl::predict(w, q, omega, x));
  }
}

TEST(Predict, FusedMapAgrees) {
  const sadl::Model model{Matrix::Random(6, 7), Matrix::Random(5, 6), Matrix::Random(4, 5)};
  const sadl::FusedClassifier clf(model);
  for (int k = 0; k < 50; ++k) {
    const Vector x = Vector::Random(7);
    EXPECT_EQ(clf.predict(x), sadl::predict(model.w, model.q, model.omega, x));
    EXPECT_LT((clf.scores(x) - model.w * (model.q * (model.omega * x))).norm(), 1e-12);
  }
}

TEST(PredictHOnly, NearestPrototype) {
  const auto h = sadl::build_structure_target({1, 2, 3}, std::vector<Eigen::Index>{2, 2, 2}, std::nullopt, 3);
  const Matrix protos = h.prototypes();
  const Matrix id = Matrix::Identity(6, 6);
  EXPECT_EQ(sadl::predict_h_only(id, id, protos, protos.col(1)), 2);
  EXPECT_EQ(sadl::predict_h_only(id, id, protos, Vector::Zero(6)), 1);
  EXPECT_THROW(sadl::predict_h_only(id, id, Matrix::Ones(5, 3), Vector::Zero(6)), sadl::Error);
}

TEST(Evaluate, PerfectAndConstantPredictors) {
  // Identity maps on one-hot inputs: the label is the hot coordinate.
  const sadl::Model perfect{Matrix::Identity(3, 3), Matrix::Identity(3, 3), Matrix::Identity(3, 3)};
  Matrix x(3, 10);
  sadl::Labels labels;
  for (Eigen::Index j = 0; j < 10; ++j) {
    x.col(j) = unit(3, j % 3);
    labels.push_back(static_cast<int>(j % 3) + 1);
  }
  const auto rep = sadl::evaluate(perfect, x, labels);
  EXPECT_DOUBLE_EQ(rep.accuracy, 1.0);
  EXPECT_EQ(rep.confusion.trace(), 10);
  EXPECT_EQ(rep.confusion.sum(), 10);
  EXPECT_EQ(rep.predicted, labels);

  // W = 0 makes every score equal, so the tie rule always answers class 1.
  const sadl::Model constant{Matrix::Identity(3, 3), Matrix::Identity(3, 3), Matrix::Zero(3, 3)};
  Matrix xb(3, 9);
  sadl::Labels lb;
  for (Eigen::Index j = 0; j < 9; ++j) {
    xb.col(j) = unit(3, j % 3);
    lb.push_back(static_cast<int>(j % 3) + 1);
  }
  const auto rc = sadl::evaluate(constant, xb, lb);
  EXPECT_NEAR(rc.accuracy, 1.0 / 3.0, 1e-15);
  EXPECT_DOUBLE_EQ(rc.accuracy, static_cast<double>(rc.confusion.trace()) / rc.confusion.sum());
  for (int p : rc.predicted) EXPECT_EQ(p, 1);
}

TEST(Evaluate, Errors) {
  const sadl::Model m{Matrix::Identity(3, 3), Matrix::Identity(3, 3), Matrix::Identity(3, 3)};
  try {
    sadl::evaluate(m, Matrix(3, 0), {});
    FAIL();
  } catch (const sadl::Error& e) {
    EXPECT_EQ(e.kind(), sadl::ErrorKind::kEmptyTestSet);
  }
  try {
    sadl::evaluate(m, Matrix::Ones(4, 2), {1, 2});
    FAIL();
  } catch (const sadl::Error& e) {
    EXPECT_EQ(e.kind(), sadl::ErrorKind::kDimensionMismatch);
  }
  try {
    sadl::evaluate(m, Matrix::Ones(3, 2), {1, 4});
    FAIL();
  } catch (const sadl::Error& e) {
    EXPECT_EQ(e.kind(), sadl::ErrorKind::kLabelOutOfRange);
  }
}

TEST(Evaluate, PureFunction) {
  const sadl::Model m{Matrix::Random(5, 4), Matrix::Random(6, 5), Matrix::Random(3, 6)};
  const Matrix x = Matrix::Random(4, 20);
  sadl::Labels labels(20, 2);
  const auto a = sadl::evaluate(m, x, labels);
  const auto b = sadl::evaluate(m, x, labels);
  EXPECT_EQ(a.predicted, b.predicted);
  EXPECT_EQ(a.scores, b.scores);
}

class Trained : public ::testing::Test {
 protected:
  static void SetUpTestSuite() {
    data_ = new sadl::TrainTestSplit(sadl::synth_dataset(sadl::SynthParams{}));
    sadl::normalize_columns(data_->train.x);
    sadl::normalize_columns(data_->test.x);
    const auto h = sadl::build_structure_target(data_->train.labels, std::nullopt, std::nullopt, 3);
    const auto y = sadl::one_hot_labels(data_->train.labels, 3);
    sadl::Hyperparams hp;
    hp.max_iter = 150;
    model_ = new sadl::Model(sadl::Model::from_state(sadl::train_sadl(sadl::DataMatrix(data_->train.x), h, y, hp).state));
  }
  static void TearDownTestSuite() {
    delete data_;
    delete model_;
  }
  static sadl::TrainTestSplit* data_;
  static sadl::Model* model_;
};

sadl::TrainTestSplit* Trained::data_ = nullptr;
sadl::Model* Trained::model_ = nullptr;

TEST_F(Trained, HeldOutPointOfClassThree) {
  for (std::size_t j = 0; j < data_->test.labels.size(); ++j) {
    if (data_->test.labels[j] != 3) continue;
    const Vector x = data_->test.x.col(static_cast<Eigen::Index>(j));
    EXPECT_EQ(sadl::predict(model_->w, model_->q, model_->omega, x), 3);
    break;
  }
}

TEST_F(Trained, BenchmarkAccuracy) {
  EXPECT_GE(sadl::evaluate(*model_, data_->test.x, data_->test.labels).accuracy, 0.95);
}

}  // namespace
