#pragma once

#include <string>

#include "sibp/losses.hpp"
#include "sibp/network.hpp"
#include "sibp/semibp.hpp"

namespace sibp {

/// Back propagation: dJ/dW_l and dJ/db_l for every layer, given the forward
/// cache at `params` and the output error delta_N = dJ/dF_N.
ParameterSet bp_gradients(const NetworkSpec& spec, const ParameterSet& params,
                          const ForwardCache& cache, const Matrix& delta_out);

/// Forward pass, loss gradient and back propagation in one call.
ParameterSet full_gradient(const NetworkSpec& spec, const ParameterSet& params, const Batch& batch,
                           LossKind loss);

ParameterSet sgd_step(const ParameterSet& params, const ParameterSet& grads, double step_size);

enum class OptimizerKind { SGD, Adam, RMSprop, ProxBP };

std::string to_string(OptimizerKind k);

/// Moment buffers and constants of an explicit optimizer.
struct OptimizerState {
  OptimizerKind kind = OptimizerKind::SGD;
  double step_size = 0.01;
  double adam_beta1 = 0.9;
  double adam_beta2 = 0.999;
  double rms_rho = 0.9;
  double epsilon = 1e-8;
  ParameterSet first;   // Adam m
  ParameterSet second;  // Adam v, RMSprop running mean of g^2
  long step_count = 0;

  /// Zero buffers shaped like `params`.
  static OptimizerState make(OptimizerKind kind, const ParameterSet& params, double step_size);
};

ParameterSet adam_step(OptimizerState& state, const ParameterSet& params, const ParameterSet& grads);
ParameterSet rmsprop_step(OptimizerState& state, const ParameterSet& params,
                          const ParameterSet& grads);

/// Linear CG on W (2 F F^T + lambda I) = 2 (T - b 1^T) F^T + lambda W_k,
/// i.e. min ||W F + b - T||^2 + lambda/2 ||W - W_k||^2, started at W_k.
Matrix linear_prox_solve(const Matrix& w_k, const Vector& b, const Matrix& inputs,
                         const Matrix& target, double lambda, int cg_iters);

/// Proximal back propagation baseline: layer targets are pre-activations
/// T = G - eta * (act'(G) .* delta), weights solve the linear least-squares
/// prox by linear CG, the bias prox is solved exactly, and errors are
/// propagated through the old weights.
ParameterSet proxbp_step(const NetworkSpec& spec, const ParameterSet& params, const Batch& batch,
                         const HyperParams& hyper, LossKind loss);

}  // namespace sibp
