#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>

#include <Eigen/Dense>

namespace sibp {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;
using Index = Eigen::Index;

/// Thrown when matrix dimensions do not compose.
class ShapeError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Thrown when a training step produces NaN or Inf. The message names the
/// layer and the phase of the step in which it happened.
class NonFiniteError : public std::runtime_error {
 public:
  NonFiniteError(int layer, std::string phase)
      : std::runtime_error("non-finite values at layer " + std::to_string(layer) +
                           " during " + phase),
        layer_(layer),
        phase_(std::move(phase)) {}

  int layer() const noexcept { return layer_; }
  const std::string& phase() const noexcept { return phase_; }

 private:
  int layer_;
  std::string phase_;
};

/// Malformed or unreadable dataset files.
class DataError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace sibp
