#include "sibp/network.hpp"

#include <algorithm>
#include <cmath>
#include <random>
#include <sstream>

namespace sibp {

std::string to_string(Activation a) {
  switch (a) {
    case Activation::ReLU: return "relu";
    case Activation::Identity: return "identity";
    case Activation::Sigmoid: return "sigmoid";
  }
  return "?";
}

Activation parse_activation(const std::string& name) {
  if (name == "relu") return Activation::ReLU;
  if (name == "identity" || name == "linear") return Activation::Identity;
  if (name == "sigmoid") return Activation::Sigmoid;
  throw std::invalid_argument("unknown activation '" + name + "'");
}

void NetworkSpec::validate() const {
  if (layer_dims.size() < 2) {
    throw std::invalid_argument("network needs at least an input and an output level");
  }
  for (std::size_t i = 0; i < layer_dims.size(); ++i) {
    if (layer_dims[i] <= 0) {
      throw std::invalid_argument("layer dimension " + std::to_string(i) + " must be positive");
    }
  }
  if (!(init_std >= 0.0)) throw std::invalid_argument("init_std must be nonnegative");
}

std::vector<Index> parse_arch(const std::string& text) {
  std::vector<Index> dims;
  std::stringstream ss(text);
  std::string tok;
  while (std::getline(ss, tok, 'x')) {
    std::size_t used = 0;
    long long v = 0;
    try {
      v = std::stoll(tok, &used);
    } catch (const std::exception&) {
      used = 0;
    }
    if (used == 0 || used != tok.size() || v <= 0) {
      throw std::invalid_argument("bad architecture '" + text + "' (expected e.g. 784x500x10)");
    }
    dims.push_back(static_cast<Index>(v));
  }
  if (dims.size() < 2) {
    throw std::invalid_argument("architecture '" + text + "' needs at least two levels");
  }
  return dims;
}

std::string format_arch(std::span<const Index> dims) {
  std::string out;
  for (std::size_t i = 0; i < dims.size(); ++i) {
    if (i) out += 'x';
    out += std::to_string(dims[i]);
  }
  return out;
}

bool ParameterSet::all_finite() const {
  for (const auto& w : weights)
    if (!w.allFinite()) return false;
  for (const auto& b : biases)
    if (!b.allFinite()) return false;
  return true;
}

Index ParameterSet::size() const {
  Index n = 0;
  for (int l = 0; l < num_layers(); ++l) n += weights[l].size() + biases[l].size();
  return n;
}

double ParameterSet::norm() const {
  double sq = 0.0;
  for (int l = 0; l < num_layers(); ++l) sq += weights[l].squaredNorm() + biases[l].squaredNorm();
  return std::sqrt(sq);
}

double ParameterSet::distance(const ParameterSet& other) const {
  double sq = 0.0;
  for (int l = 0; l < num_layers(); ++l) {
    sq += (weights[l] - other.weights[l]).squaredNorm();
    sq += (biases[l] - other.biases[l]).squaredNorm();
  }
  return std::sqrt(sq);
}

void ParameterSet::check_shapes(const NetworkSpec& spec) const {
  if (num_layers() != spec.num_layers() || biases.size() != weights.size()) {
    throw ShapeError("parameter set has " + std::to_string(num_layers()) +
                     " layers, network has " + std::to_string(spec.num_layers()));
  }
  for (int l = 0; l < num_layers(); ++l) {
    const Index rows = spec.layer_dims[l + 1];
    const Index cols = spec.layer_dims[l];
    if (weights[l].rows() != rows || weights[l].cols() != cols || biases[l].size() != rows) {
      throw ShapeError("layer " + std::to_string(l + 1) + ": expected W " + std::to_string(rows) +
                       "x" + std::to_string(cols) + ", got " + std::to_string(weights[l].rows()) +
                       "x" + std::to_string(weights[l].cols()) + " with bias length " +
                       std::to_string(biases[l].size()));
    }
  }
}

ParameterSet ParameterSet::zeros_like() const {
  ParameterSet z;
  for (int l = 0; l < num_layers(); ++l) {
    z.weights.push_back(Matrix::Zero(weights[l].rows(), weights[l].cols()));
    z.biases.push_back(Vector::Zero(biases[l].size()));
  }
  return z;
}

bool ParameterSet::operator==(const ParameterSet& other) const {
  if (num_layers() != other.num_layers()) return false;
  for (int l = 0; l < num_layers(); ++l) {
    if (weights[l].rows() != other.weights[l].rows() || weights[l].cols() != other.weights[l].cols())
      return false;
    if (weights[l] != other.weights[l] || biases[l] != other.biases[l]) return false;
  }
  return true;
}

ParameterSet init_params(const NetworkSpec& spec) {
  spec.validate();
  std::mt19937_64 gen(spec.seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  auto draw = [&] { return spec.init_std * normal(gen); };

  ParameterSet p;
  for (int l = 0; l < spec.num_layers(); ++l) {
    const Index rows = spec.layer_dims[l + 1];
    const Index cols = spec.layer_dims[l];
    Matrix w(rows, cols);
    // Row-major draw order so the stream does not depend on Eigen's storage.
    for (Index r = 0; r < rows; ++r)
      for (Index c = 0; c < cols; ++c) w(r, c) = draw();
    Vector b(rows);
    for (Index r = 0; r < rows; ++r) b(r) = draw();
    p.weights.push_back(std::move(w));
    p.biases.push_back(std::move(b));
  }
  return p;
}

Matrix relu(const Matrix& x) { return x.cwiseMax(0.0); }

Matrix relu_derivative(const Matrix& x) {
  return x.unaryExpr([](double v) { return v > 0.0 ? 1.0 : 0.0; });
}

Matrix sigmoid(const Matrix& x) {
  return x.unaryExpr([](double v) { return 1.0 / (1.0 + std::exp(-v)); });
}

Matrix activate(Activation a, const Matrix& x) {
  switch (a) {
    case Activation::ReLU: return relu(x);
    case Activation::Sigmoid: return sigmoid(x);
    case Activation::Identity: break;
  }
  return x;
}

Matrix activation_derivative(Activation a, const Matrix& x) {
  switch (a) {
    case Activation::ReLU: return relu_derivative(x);
    case Activation::Sigmoid: {
      const Matrix s = sigmoid(x);
      return (s.array() * (1.0 - s.array())).matrix();
    }
    case Activation::Identity: break;
  }
  return Matrix::Ones(x.rows(), x.cols());
}

Matrix gate(Activation a, const Matrix& pre, const Matrix& delta) {
  switch (a) {
    case Activation::ReLU: return (pre.array() > 0.0).select(delta.array(), 0.0).matrix();
    case Activation::Sigmoid:
      return (activation_derivative(a, pre).array() * delta.array()).matrix();
    case Activation::Identity: break;
  }
  return delta;
}

namespace {

void check_input(const NetworkSpec& spec, const ParameterSet& params, const Matrix& inputs) {
  params.check_shapes(spec);
  if (inputs.rows() != spec.input_dim()) {
    throw ShapeError("layer 1: input has " + std::to_string(inputs.rows()) + " rows, expected " +
                     std::to_string(spec.input_dim()));
  }
}

}  // namespace

ForwardCache forward(const NetworkSpec& spec, const ParameterSet& params, const Matrix& inputs) {
  check_input(spec, params, inputs);
  ForwardCache cache;
  cache.pre.reserve(params.num_layers());
  cache.post.reserve(params.num_layers() + 1);
  cache.post.push_back(inputs);
  for (int l = 0; l < params.num_layers(); ++l) {
    Matrix g = params.weights[l] * cache.post.back();
    g.colwise() += params.biases[l];
    cache.post.push_back(activate(spec.activation(l), g));
    cache.pre.push_back(std::move(g));
  }
  return cache;
}

Matrix forward_output(const NetworkSpec& spec, const ParameterSet& params, const Matrix& inputs) {
  check_input(spec, params, inputs);
  Matrix f = inputs;
  for (int l = 0; l < params.num_layers(); ++l) {
    Matrix g = params.weights[l] * f;
    g.colwise() += params.biases[l];
    f = activate(spec.activation(l), g);
  }
  return f;
}

std::vector<int> argmax_columns(const Matrix& scores) {
  std::vector<int> out(static_cast<std::size_t>(scores.cols()), 0);
  for (Index c = 0; c < scores.cols(); ++c) {
    Index best = 0;
    for (Index r = 1; r < scores.rows(); ++r)
      if (scores(r, c) > scores(best, c)) best = r;
    out[static_cast<std::size_t>(c)] = static_cast<int>(best);
  }
  return out;
}

std::vector<int> predict(const NetworkSpec& spec, const ParameterSet& params, const Matrix& inputs) {
  if (inputs.cols() == 0) throw std::invalid_argument("predict on an empty batch");
  return argmax_columns(forward_output(spec, params, inputs));
}

double accuracy(std::span<const int> predictions, std::span<const int> labels) {
  if (predictions.empty()) throw std::invalid_argument("accuracy of an empty batch");
  if (predictions.size() != labels.size()) {
    throw std::invalid_argument("accuracy: " + std::to_string(predictions.size()) +
                                " predictions for " + std::to_string(labels.size()) + " labels");
  }
  std::size_t hits = 0;
  for (std::size_t i = 0; i < labels.size(); ++i) hits += predictions[i] == labels[i];
  return static_cast<double>(hits) / static_cast<double>(labels.size());
}

}  // namespace sibp
