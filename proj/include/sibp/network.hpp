#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "sibp/common.hpp"

namespace sibp {

enum class Activation { ReLU, Identity, Sigmoid };

std::string to_string(Activation a);
Activation parse_activation(const std::string& name);

/// Layer widths and initialization settings of a fully connected network.
///
/// `layer_dims` lists every neuron level, input first and class count last,
/// so a network with N levels owns N-1 weight matrices. Hidden levels use
/// `hidden_activation`; the output level is always linear.
struct NetworkSpec {
  std::vector<Index> layer_dims;
  Activation hidden_activation = Activation::ReLU;
  double init_std = 0.01;
  std::uint64_t seed = 1;

  /// Throws std::invalid_argument when the spec cannot describe a network.
  void validate() const;

  /// Number of parameterized layers (N-1).
  int num_layers() const { return static_cast<int>(layer_dims.size()) - 1; }

  /// Activation applied to the output of parameterized layer `layer`.
  Activation activation(int layer) const {
    return layer == num_layers() - 1 ? Activation::Identity : hidden_activation;
  }

  Index input_dim() const { return layer_dims.front(); }
  Index output_dim() const { return layer_dims.back(); }
};

/// Parses "784x500x10" into {784, 500, 10}.
std::vector<Index> parse_arch(const std::string& text);
std::string format_arch(std::span<const Index> dims);

/// Weights W_l (dims[l+1] x dims[l]) and biases b_l (dims[l+1]) per layer.
struct ParameterSet {
  std::vector<Matrix> weights;
  std::vector<Vector> biases;

  int num_layers() const { return static_cast<int>(weights.size()); }
  bool all_finite() const;
  /// Total number of scalar parameters.
  Index size() const;
  /// Global 2-norm over all layers.
  double norm() const;
  /// Frobenius distance over all layers.
  double distance(const ParameterSet& other) const;
  /// Throws ShapeError if shapes disagree with `spec`.
  void check_shapes(const NetworkSpec& spec) const;
  /// Same layout with every entry zero.
  ParameterSet zeros_like() const;

  bool operator==(const ParameterSet& other) const;
};

/// Samples are columns. `labels` holds class indices; `targets`, when not
/// empty, holds real-valued regression targets (output_dim x B) used by the
/// squared-error loss instead of one-hot labels.
struct Batch {
  Matrix inputs;
  std::vector<int> labels;
  Matrix targets;

  Index size() const { return inputs.cols(); }
};

/// Pre-activations G_2..G_N (`pre[l]` is the output of layer l before the
/// activation) and post-activations F_1..F_N (`post[0]` is the input).
struct ForwardCache {
  std::vector<Matrix> pre;
  std::vector<Matrix> post;

  const Matrix& output() const { return post.back(); }
};

ParameterSet init_params(const NetworkSpec& spec);

ForwardCache forward(const NetworkSpec& spec, const ParameterSet& params, const Matrix& inputs);

/// Output F_N only; avoids keeping the intermediate levels.
Matrix forward_output(const NetworkSpec& spec, const ParameterSet& params, const Matrix& inputs);

Matrix relu(const Matrix& x);
/// Indicator of x > 0; the derivative at 0 is taken to be 0.
Matrix relu_derivative(const Matrix& x);

Matrix sigmoid(const Matrix& x);

Matrix activate(Activation a, const Matrix& x);
Matrix activation_derivative(Activation a, const Matrix& x);
/// act'(pre) .* delta
Matrix gate(Activation a, const Matrix& pre, const Matrix& delta);

/// Per-column argmax; the lowest index wins ties.
std::vector<int> argmax_columns(const Matrix& scores);

std::vector<int> predict(const NetworkSpec& spec, const ParameterSet& params, const Matrix& inputs);

/// Fraction of equal entries. Throws std::invalid_argument on empty or
/// mismatched input.
double accuracy(std::span<const int> predictions, std::span<const int> labels);

}  // namespace sibp
