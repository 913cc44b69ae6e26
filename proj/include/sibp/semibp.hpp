#pragma once

#include <vector>

#include "sibp/losses.hpp"
#include "sibp/network.hpp"
#include "sibp/nlcg.hpp"

namespace sibp {

/// Step sizes of the semi-implicit sweep.
///
/// `eta` moves the neurons (F^{k+1/2} = F^k - eta*delta); `lambda` weights the
/// proximal term of each layer subproblem, so 1/lambda acts as the parameter
/// step size. `cg_iters` nonlinear-CG iterations are spent on each
/// subproblem per outer step.
struct HyperParams {
  double eta = 1.0;
  double lambda = 1.0;
  int cg_iters = 5;
  double cg_tol = 0.0;

  void validate() const;
};

/// Error signal and half-updated neurons of one level during the sweep.
struct BackwardState {
  Matrix delta;
  Matrix half;  // F - eta * delta

  static BackwardState make(const Matrix& neurons, Matrix delta, double eta);
};

struct SubproblemStats {
  double initial_value = 0.0;
  double value = 0.0;
  int iterations = 0;
  int fallback_steps = 0;
  int failed_searches = 0;
};

struct LayerStats {
  int layer = 0;  // 1-based
  SubproblemStats weight;
  SubproblemStats bias;
};

struct StepDiagnostics {
  std::vector<LayerStats> layers;  // in sweep order (last layer first)
};

/// f(W) = ||act(W F + b) - T||_F^2 + lambda/2 ||W - W_k||_F^2
double weight_objective(const Matrix& w, const Matrix& w_k, const Vector& b, const Matrix& inputs,
                        const Matrix& target, double lambda, Activation act);

/// f(b) = ||act(W F + b) - T||_F^2 + lambda/2 ||b - b_k||^2
double bias_objective(const Vector& b, const Vector& b_k, const Matrix& w, const Matrix& inputs,
                      const Matrix& target, double lambda, Activation act);

/// Approximate proximal weight update, warm-started at `w_k`.
Matrix solve_W_subproblem(const Matrix& w_k, const Vector& b_k, const Matrix& inputs,
                          const Matrix& target, double lambda, int cg_iters, Activation act,
                          double cg_tol = 0.0, SubproblemStats* stats = nullptr);

/// Approximate proximal bias update with the already-updated weights held
/// fixed, warm-started at `b_k`.
Vector solve_b_subproblem(const Matrix& w_new, const Vector& b_k, const Matrix& inputs,
                          const Matrix& target, double lambda, int cg_iters, Activation act,
                          double cg_tol = 0.0, SubproblemStats* stats = nullptr);

/// (W_new)^T (act'(G_next) .* delta_next), using the freshly updated weights.
Matrix propagate_delta(const Matrix& w_new, const Matrix& pre_next, const Matrix& delta_next,
                       Activation act = Activation::ReLU);

/// One outer iteration of semi-implicit back propagation on `batch`.
/// Throws NonFiniteError if any phase yields NaN/Inf.
ParameterSet semi_implicit_step(const NetworkSpec& spec, const ParameterSet& params,
                                const Batch& batch, const HyperParams& hyper, LossKind loss,
                                StepDiagnostics* diagnostics = nullptr);

/// Global 2-norm of the exact loss gradient at `params` over `data`.
double stationarity_check(const NetworkSpec& spec, const ParameterSet& params, const Batch& data,
                          LossKind loss);

}  // namespace sibp
