#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "sibp/baselines.hpp"
#include "sibp/semibp.hpp"

namespace sibp {

/// Outcome of one numerical self-check. `value` is the measured error and
/// `tolerance` the bound it was held to.
struct CheckResult {
  std::string name;
  bool passed = false;
  double value = 0.0;
  double tolerance = 0.0;
  double seconds = 0.0;
  std::string detail;
};

/// Central differences of the batch loss, entry by entry.
ParameterSet finite_difference_gradient(const NetworkSpec& spec, const ParameterSet& params,
                                        const Batch& batch, LossKind loss, double step);

/// Largest |a - b| / max(|a|, |b|, floor) over all entries.
double max_relative_error(const ParameterSet& a, const ParameterSet& b, double floor);

/// Exact minimizer of ||W F + b - T||^2 + lambda/2 ||W - W_k||^2.
Matrix ridge_solution(const Matrix& w_k, const Vector& b, const Matrix& inputs,
                      const Matrix& target, double lambda);

/// Random network plus a batch whose squared-error targets are the
/// network's own outputs, so the loss and its gradient are exactly zero.
struct InterpolationProblem {
  NetworkSpec spec;
  ParameterSet params;
  Batch batch;
};
InterpolationProblem interpolating_problem(std::vector<Index> dims, Index batch_size,
                                           std::uint64_t seed);

/// Two overlapping Gaussian classes in the plane, labels alternating 0/1.
Batch two_class_task(Index samples, double separation, std::uint64_t seed);

/// Gradient norm reached by running semi-implicit full-batch steps until
/// the parameter change drops below `step_tol`.
struct ConvergenceRun {
  long iterations = 0;
  double last_step = 0.0;
  double gradient_norm = 0.0;
  double loss = 0.0;
  bool reached_tol = false;
};

/// Identity hidden units by default: the fixed-point argument needs a
/// differentiable activation, and ReLU iterates tend to settle on kinks
/// where the loss gradient is not defined.
struct StationaritySetup {
  std::vector<Index> dims{2, 8, 2};
  Activation activation = Activation::Identity;
  LossKind loss = LossKind::SoftmaxCrossEntropy;
  Index samples = 64;
  double separation = 0.5;
  double init_std = 0.5;
  std::uint64_t data_seed = 7;
  std::uint64_t seed = 1;  // initialization
  HyperParams hyper{1.0, 1.0, 5, 0.0};
  double step_tol = 1e-10;
  long max_iters = 200000;
};

ConvergenceRun run_to_convergence(const StationaritySetup& setup);

CheckResult check_gradient_oracle(std::uint64_t seed = 1);
/// Returns two results: the 50-iteration ridge match and the 5-iteration
/// optimality gap.
std::vector<CheckResult> check_prox_oracle(std::uint64_t seed = 1);
CheckResult check_fixed_point(std::uint64_t seed = 1);
CheckResult check_stationarity(const StationaritySetup& setup = {});

std::vector<CheckResult> run_all_checks();

}  // namespace sibp
