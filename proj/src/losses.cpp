#include "sibp/losses.hpp"

#include <cmath>

namespace sibp {

std::string to_string(LossKind k) {
  return k == LossKind::SoftmaxCrossEntropy ? "softmax-ce" : "squared";
}

LossKind parse_loss(const std::string& name) {
  if (name == "softmax-ce" || name == "ce" || name == "cross-entropy")
    return LossKind::SoftmaxCrossEntropy;
  if (name == "squared" || name == "mse") return LossKind::SquaredError;
  throw std::invalid_argument("unknown loss '" + name + "'");
}

namespace {

void check_labels(const Matrix& output, std::span<const int> labels) {
  if (static_cast<Index>(labels.size()) != output.cols()) {
    throw ShapeError("loss: " + std::to_string(labels.size()) + " labels for " +
                     std::to_string(output.cols()) + " output columns");
  }
  if (output.cols() == 0) throw std::invalid_argument("loss of an empty batch");
  for (int y : labels) {
    if (y < 0 || y >= output.rows()) {
      throw std::out_of_range("label " + std::to_string(y) + " outside [0, " +
                              std::to_string(output.rows()) + ")");
    }
  }
}

void check_targets(LossKind kind, const Matrix& output, const Matrix& targets) {
  if (kind != LossKind::SquaredError) {
    throw std::invalid_argument("dense targets are only supported by the squared-error loss");
  }
  if (targets.rows() != output.rows() || targets.cols() != output.cols()) {
    throw ShapeError("loss: targets " + std::to_string(targets.rows()) + "x" +
                     std::to_string(targets.cols()) + " vs output " +
                     std::to_string(output.rows()) + "x" + std::to_string(output.cols()));
  }
  if (output.cols() == 0) throw std::invalid_argument("loss of an empty batch");
}

}  // namespace

Matrix softmax(const Matrix& logits) {
  Matrix p(logits.rows(), logits.cols());
  for (Index c = 0; c < logits.cols(); ++c) {
    const double m = logits.col(c).maxCoeff();
    p.col(c) = (logits.col(c).array() - m).exp();
    p.col(c) /= p.col(c).sum();
  }
  return p;
}

Matrix one_hot(std::span<const int> labels, Index classes) {
  Matrix y = Matrix::Zero(classes, static_cast<Index>(labels.size()));
  for (std::size_t i = 0; i < labels.size(); ++i) {
    if (labels[i] < 0 || labels[i] >= classes) {
      throw std::out_of_range("label " + std::to_string(labels[i]) + " outside [0, " +
                              std::to_string(classes) + ")");
    }
    y(labels[i], static_cast<Index>(i)) = 1.0;
  }
  return y;
}

double loss_value(LossKind kind, const Matrix& output, std::span<const int> labels) {
  check_labels(output, labels);
  const double batch = static_cast<double>(output.cols());
  if (kind == LossKind::SquaredError) {
    return 0.5 * (output - one_hot(labels, output.rows())).squaredNorm() / batch;
  }
  double total = 0.0;
  for (Index c = 0; c < output.cols(); ++c) {
    const double m = output.col(c).maxCoeff();
    const double lse = m + std::log((output.col(c).array() - m).exp().sum());
    total += lse - output(labels[static_cast<std::size_t>(c)], c);
  }
  return total / batch;
}

Matrix loss_grad(LossKind kind, const Matrix& output, std::span<const int> labels) {
  check_labels(output, labels);
  const double batch = static_cast<double>(output.cols());
  if (kind == LossKind::SquaredError) {
    return (output - one_hot(labels, output.rows())) / batch;
  }
  Matrix g = softmax(output);
  for (Index c = 0; c < output.cols(); ++c) g(labels[static_cast<std::size_t>(c)], c) -= 1.0;
  return g / batch;
}

double loss_value(LossKind kind, const Matrix& output, const Matrix& targets) {
  check_targets(kind, output, targets);
  return 0.5 * (output - targets).squaredNorm() / static_cast<double>(output.cols());
}

Matrix loss_grad(LossKind kind, const Matrix& output, const Matrix& targets) {
  check_targets(kind, output, targets);
  return (output - targets) / static_cast<double>(output.cols());
}

double loss_value(LossKind kind, const Matrix& output, const Batch& batch) {
  if (batch.targets.size() > 0) return loss_value(kind, output, batch.targets);
  return loss_value(kind, output, std::span<const int>(batch.labels));
}

Matrix loss_grad(LossKind kind, const Matrix& output, const Batch& batch) {
  if (batch.targets.size() > 0) return loss_grad(kind, output, batch.targets);
  return loss_grad(kind, output, std::span<const int>(batch.labels));
}

}  // namespace sibp
