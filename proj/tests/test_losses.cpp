#include <doctest.h>

#include <cmath>
#include <random>

#include "sibp/losses.hpp"

using namespace sibp;

namespace {

Matrix reference_logits() {
  Matrix z(3, 4);
  z << 0.3, -1.7, 12.5, -0.25,
       2.1, 0.4, -3.0, -0.25,
       -0.8, 0.9, 11.0, -0.25;
  return z;
}
const std::vector<int> kLabels{1, 2, 0, 1};

}  // namespace

TEST_CASE("parse_loss") {
  CHECK(parse_loss("ce") == LossKind::SoftmaxCrossEntropy);
  CHECK(parse_loss("mse") == LossKind::SquaredError);
  CHECK_THROWS(parse_loss("hinge"));
}

TEST_CASE("squared error") {
  const std::vector<int> y{2, 0, 1};
  const Matrix f = one_hot(y, 3);
  CHECK(loss_value(LossKind::SquaredError, f, y) == 0.0);
  CHECK(loss_grad(LossKind::SquaredError, f, y).norm() == 0.0);

  Matrix g = f;
  g(0, 1) += 2.0;  // one entry off by 2: 0.5 * 4 / B
  CHECK(loss_value(LossKind::SquaredError, g, y) == doctest::Approx(2.0 / 3.0));
  CHECK(loss_grad(LossKind::SquaredError, g, y)(0, 1) == doctest::Approx(2.0 / 3.0));

  const Matrix targets = Matrix::Constant(2, 2, 0.5);
  CHECK(loss_value(LossKind::SquaredError, targets, targets) == 0.0);
  CHECK_THROWS(loss_value(LossKind::SoftmaxCrossEntropy, targets, targets));
  CHECK_THROWS_AS(loss_value(LossKind::SquaredError, targets, Matrix(3, 2)), ShapeError);
}

TEST_CASE("softmax cross-entropy small cases") {
  SUBCASE("uniform logits give ln 10") {
    const Matrix f = Matrix::Zero(10, 4);
    CHECK(loss_value(LossKind::SoftmaxCrossEntropy, f, std::vector<int>{0, 3, 9, 5}) ==
          doctest::Approx(std::log(10.0)).epsilon(1e-15));
  }
  SUBCASE("two logits at zero") {
    const Matrix f = Matrix::Zero(2, 1);
    const Matrix d = loss_grad(LossKind::SoftmaxCrossEntropy, f, std::vector<int>{0});
    CHECK(d(0, 0) == -0.5);
    CHECK(d(1, 0) == 0.5);
  }
  SUBCASE("huge logits stay finite") {
    Matrix f(2, 1);
    f << 1000.0, -1000.0;
    CHECK(loss_value(LossKind::SoftmaxCrossEntropy, f, std::vector<int>{0}) == 0.0);
    CHECK(loss_value(LossKind::SoftmaxCrossEntropy, f, std::vector<int>{1}) == doctest::Approx(2000.0));
  }
  SUBCASE("errors") {
    const Matrix f = Matrix::Zero(3, 2);
    CHECK_THROWS_AS(loss_value(LossKind::SoftmaxCrossEntropy, f, std::vector<int>{0, 3}),
                    std::out_of_range);
    CHECK_THROWS_AS(loss_value(LossKind::SoftmaxCrossEntropy, f, std::vector<int>{0, -1}),
                    std::out_of_range);
    CHECK_THROWS_AS(loss_value(LossKind::SoftmaxCrossEntropy, f, std::vector<int>{0}), ShapeError);
    CHECK_THROWS(one_hot(std::vector<int>{4}, 3));
  }
}

TEST_CASE("softmax cross-entropy against a 50-digit reference") {
  // tests/oracles/softmax_ce.py
  const Matrix z = reference_logits();
  CHECK(std::abs(loss_value(LossKind::SoftmaxCrossEntropy, z, kLabels) - 0.50460323933479288818) <
        1e-12);
  Matrix expected(3, 4);
  expected << 0.033863782172815240181, 0.011047327305935961237, -0.045606411956473944125, 0.083333333333333333333,
              -0.045136056042795956271, 0.090214351860021281808, 3.7923009783004672687e-8, -0.16666666666666666667,
              0.01127227386998071609, -0.10126167916595724304, 0.04560637403346416112, 0.083333333333333333333;
  CHECK((loss_grad(LossKind::SoftmaxCrossEntropy, z, kLabels) - expected).cwiseAbs().maxCoeff() < 1e-15);
}

TEST_CASE("softmax invariants on random logits") {
  std::mt19937_64 gen(17);
  std::normal_distribution<double> n(0.0, 3.0);
  Matrix z(7, 9);
  for (Index i = 0; i < z.size(); ++i) z.data()[i] = n(gen);
  std::vector<int> y;
  for (int j = 0; j < 9; ++j) y.push_back(static_cast<int>(gen() % 7));

  const Matrix p = softmax(z);
  CHECK((p.colwise().sum().array() - 1.0).abs().maxCoeff() < 1e-12);
  const Matrix d = loss_grad(LossKind::SoftmaxCrossEntropy, z, y);
  CHECK(d.colwise().sum().cwiseAbs().maxCoeff() < 1e-12);

  Matrix shifted = z;
  for (Index j = 0; j < z.cols(); ++j) shifted.col(j).array() += 100.0 * (j - 4);
  CHECK(std::abs(loss_value(LossKind::SoftmaxCrossEntropy, shifted, y) -
                 loss_value(LossKind::SoftmaxCrossEntropy, z, y)) < 1e-10);

  // long-double scalar loop as an independent evaluation
  long double total = 0;
  for (Index j = 0; j < z.cols(); ++j) {
    long double s = 0;
    for (Index i = 0; i < z.rows(); ++i) s += std::exp(static_cast<long double>(z(i, j)));
    total += std::log(s) - z(y[j], j);
  }
  CHECK(std::abs(loss_value(LossKind::SoftmaxCrossEntropy, z, y) - double(total / 9)) < 1e-12);
}

TEST_CASE("loss_grad matches central differences") {
  std::mt19937_64 gen(3);
  std::normal_distribution<double> n(0.0, 1.0);
  for (LossKind kind : {LossKind::SoftmaxCrossEntropy, LossKind::SquaredError}) {
    Matrix z(4, 6);
    for (Index i = 0; i < z.size(); ++i) z.data()[i] = n(gen);
    const std::vector<int> y{0, 3, 1, 1, 2, 0};
    const Matrix d = loss_grad(kind, z, y);
    double worst = 0.0;
    for (Index i = 0; i < z.size(); ++i) {
      Matrix up = z, down = z;
      up.data()[i] += 1e-5;
      down.data()[i] -= 1e-5;
      const double fd = (loss_value(kind, up, y) - loss_value(kind, down, y)) / 2e-5;
      worst = std::max(worst, std::abs(fd - d.data()[i]) / std::max(std::abs(fd), 1e-4));
    }
    CHECK(worst < 1e-6);
  }
}

TEST_CASE("batch dispatch uses dense targets when present") {
  Batch b;
  b.inputs = Matrix::Zero(1, 2);
  b.labels = {0, 1};
  const Matrix out = Matrix::Constant(2, 2, 0.25);
  CHECK(loss_value(LossKind::SquaredError, out, b) == loss_value(LossKind::SquaredError, out, b.labels));
  b.targets = out;
  CHECK(loss_value(LossKind::SquaredError, out, b) == 0.0);
}
