#pragma once

#include <span>
#include <string>
#include <vector>

#include "sibp/network.hpp"

namespace sibp {

enum class LossKind { SoftmaxCrossEntropy, SquaredError };

std::string to_string(LossKind k);
LossKind parse_loss(const std::string& name);

// All losses are batch means over the columns of `output`. Squared error is
// 0.5 * ||F - Y||^2 per sample, so its gradient is (F - Y) / B.

/// Column-wise softmax with max subtraction.
Matrix softmax(const Matrix& logits);

/// One-hot encoding, classes x labels.size(). Throws on out-of-range labels.
Matrix one_hot(std::span<const int> labels, Index classes);

double loss_value(LossKind kind, const Matrix& output, std::span<const int> labels);
Matrix loss_grad(LossKind kind, const Matrix& output, std::span<const int> labels);

/// Squared error against a dense target; `kind` must be SquaredError.
double loss_value(LossKind kind, const Matrix& output, const Matrix& targets);
Matrix loss_grad(LossKind kind, const Matrix& output, const Matrix& targets);

/// Uses `batch.targets` when present, otherwise `batch.labels`.
double loss_value(LossKind kind, const Matrix& output, const Batch& batch);
Matrix loss_grad(LossKind kind, const Matrix& output, const Batch& batch);

}  // namespace sibp
