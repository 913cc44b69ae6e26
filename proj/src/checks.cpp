#include "sibp/checks.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <random>

namespace sibp {

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point start) {
  return std::chrono::duration<double>(Clock::now() - start).count();
}

std::string format(const char* fmt, double a, double b = 0.0) {
  char buf[160];
  std::snprintf(buf, sizeof buf, fmt, a, b);
  return buf;
}

Matrix random_matrix(Index rows, Index cols, std::mt19937_64& gen) {
  std::normal_distribution<double> normal(0.0, 1.0);
  Matrix m(rows, cols);
  for (Index i = 0; i < rows; ++i)
    for (Index j = 0; j < cols; ++j) m(i, j) = normal(gen);
  return m;
}

// Visits every scalar parameter in a fixed order.
template <class F>
void for_each_entry(ParameterSet& p, F&& f) {
  for (int l = 0; l < p.num_layers(); ++l) {
    for (Index k = 0; k < p.weights[l].size(); ++k) f(p.weights[l].data()[k]);
    for (Index k = 0; k < p.biases[l].size(); ++k) f(p.biases[l].data()[k]);
  }
}

std::vector<double> flatten(const ParameterSet& p) {
  std::vector<double> out;
  ParameterSet copy = p;
  for_each_entry(copy, [&](double& x) { out.push_back(x); });
  return out;
}

}  // namespace

ParameterSet finite_difference_gradient(const NetworkSpec& spec, const ParameterSet& params,
                                        const Batch& batch, LossKind loss, double step) {
  ParameterSet probe = params;
  ParameterSet grad = params.zeros_like();
  std::vector<double*> slots;
  for_each_entry(grad, [&](double& g) { slots.push_back(&g); });
  std::size_t k = 0;
  for_each_entry(probe, [&](double& x) {
    const double saved = x;
    x = saved + step;
    const double up = loss_value(loss, forward_output(spec, probe, batch.inputs), batch);
    x = saved - step;
    const double down = loss_value(loss, forward_output(spec, probe, batch.inputs), batch);
    x = saved;
    *slots[k++] = (up - down) / (2.0 * step);
  });
  return grad;
}

double max_relative_error(const ParameterSet& a, const ParameterSet& b, double floor) {
  const auto va = flatten(a), vb = flatten(b);
  if (va.size() != vb.size()) throw ShapeError("max_relative_error: layouts differ");
  double worst = 0.0;
  for (std::size_t i = 0; i < va.size(); ++i) {
    const double scale = std::max({std::abs(va[i]), std::abs(vb[i]), floor});
    worst = std::max(worst, std::abs(va[i] - vb[i]) / scale);
  }
  return worst;
}

Matrix ridge_solution(const Matrix& w_k, const Vector& b, const Matrix& inputs,
                      const Matrix& target, double lambda) {
  Matrix shifted = target;
  shifted.colwise() -= b;
  const Matrix gram = 2.0 * inputs * inputs.transpose() +
                      lambda * Matrix::Identity(inputs.rows(), inputs.rows());
  const Matrix rhs = 2.0 * shifted * inputs.transpose() + lambda * w_k;
  // W gram = rhs, gram symmetric
  return gram.ldlt().solve(rhs.transpose()).transpose();
}

InterpolationProblem interpolating_problem(std::vector<Index> dims, Index batch_size,
                                           std::uint64_t seed) {
  InterpolationProblem p;
  p.spec.layer_dims = std::move(dims);
  p.spec.init_std = 0.5;
  p.spec.seed = seed;
  p.spec.validate();
  p.params = init_params(p.spec);
  std::mt19937_64 gen(seed ^ 0x5bd1e995ULL);
  p.batch.inputs = random_matrix(p.spec.input_dim(), batch_size, gen);
  p.batch.targets = forward_output(p.spec, p.params, p.batch.inputs);
  p.batch.labels = argmax_columns(p.batch.targets);
  return p;
}

Batch two_class_task(Index samples, double separation, std::uint64_t seed) {
  std::mt19937_64 gen(seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  Batch b;
  b.inputs.resize(2, samples);
  b.labels.resize(static_cast<std::size_t>(samples));
  for (Index i = 0; i < samples; ++i) {
    const int y = static_cast<int>(i % 2);
    b.labels[static_cast<std::size_t>(i)] = y;
    b.inputs(0, i) = normal(gen) + (y ? separation : -separation);
    b.inputs(1, i) = normal(gen);
  }
  return b;
}

ConvergenceRun run_to_convergence(const StationaritySetup& setup) {
  NetworkSpec spec{setup.dims, setup.activation, setup.init_std, setup.seed};
  spec.validate();
  const Batch batch = two_class_task(setup.samples, setup.separation, setup.data_seed);
  ParameterSet params = init_params(spec);

  ConvergenceRun run;
  for (run.iterations = 0; run.iterations < setup.max_iters;) {
    ParameterSet next = semi_implicit_step(spec, params, batch, setup.hyper, setup.loss);
    ++run.iterations;
    run.last_step = next.distance(params);
    params = std::move(next);
    if (run.last_step <= setup.step_tol) {
      run.reached_tol = true;
      break;
    }
  }
  run.gradient_norm = stationarity_check(spec, params, batch, setup.loss);
  run.loss = loss_value(setup.loss, forward_output(spec, params, batch.inputs), batch);
  return run;
}

CheckResult check_gradient_oracle(std::uint64_t seed) {
  const auto start = Clock::now();
  NetworkSpec spec{{4, 5, 3}, Activation::ReLU, 1.0, seed};
  const ParameterSet params = init_params(spec);
  std::mt19937_64 gen(seed + 101);
  Batch batch;
  batch.inputs = random_matrix(4, 7, gen);
  for (int i = 0; i < 7; ++i) batch.labels.push_back(static_cast<int>(gen() % 3));

  const ParameterSet bp = full_gradient(spec, params, batch, LossKind::SoftmaxCrossEntropy);
  const ParameterSet fd =
      finite_difference_gradient(spec, params, batch, LossKind::SoftmaxCrossEntropy, 1e-5);
  CheckResult r;
  r.name = "gradient oracle";
  r.value = max_relative_error(bp, fd, 1e-8);
  r.tolerance = 1e-6;
  r.seconds = seconds_since(start);
  r.passed = r.value < r.tolerance && r.seconds < 1.0;
  r.detail = format("max rel err %.3e, %.3f s", r.value, r.seconds);
  return r;
}

std::vector<CheckResult> check_prox_oracle(std::uint64_t seed) {
  std::mt19937_64 gen(seed);
  const Matrix w_k = random_matrix(5, 7, gen);
  const Vector b = random_matrix(5, 1, gen);
  const Matrix inputs = random_matrix(7, 11, gen);
  const Matrix target = random_matrix(5, 11, gen);
  const double lambda = 1.0;
  const Matrix exact = ridge_solution(w_k, b, inputs, target, lambda);
  const double optimum =
      weight_objective(exact, w_k, b, inputs, target, lambda, Activation::Identity);

  std::vector<CheckResult> out;
  {
    const auto start = Clock::now();
    const Matrix w = solve_W_subproblem(w_k, b, inputs, target, lambda, 50, Activation::Identity);
    CheckResult r;
    r.name = "prox oracle (50 CG iterations)";
    r.value = (w - exact).norm();
    r.tolerance = 1e-6;
    r.seconds = seconds_since(start);
    r.passed = r.value <= r.tolerance && r.seconds < 1.0;
    r.detail = format("||W - W_ridge||_F = %.3e, %.3f s", r.value, r.seconds);
    out.push_back(r);
  }
  {
    const auto start = Clock::now();
    const Matrix w = solve_W_subproblem(w_k, b, inputs, target, lambda, 5, Activation::Identity);
    const double f = weight_objective(w, w_k, b, inputs, target, lambda, Activation::Identity);
    CheckResult r;
    r.name = "prox oracle (5 CG iterations)";
    r.value = (f - optimum) / std::abs(optimum);
    r.tolerance = 0.01;
    r.seconds = seconds_since(start);
    r.passed = r.value <= r.tolerance && r.seconds < 1.0;
    r.detail = format("relative gap to optimum %.3e, optimum %.6g", r.value, optimum);
    out.push_back(r);
  }
  return out;
}

CheckResult check_fixed_point(std::uint64_t seed) {
  const auto start = Clock::now();
  const InterpolationProblem p = interpolating_problem({3, 6, 4, 2}, 5, seed);
  const ParameterSet next =
      semi_implicit_step(p.spec, p.params, p.batch, HyperParams{}, LossKind::SquaredError);
  double worst = 0.0;
  for (int l = 0; l < p.params.num_layers(); ++l) {
    worst = std::max(worst, (next.weights[l] - p.params.weights[l]).cwiseAbs().maxCoeff());
    worst = std::max(worst, (next.biases[l] - p.params.biases[l]).cwiseAbs().maxCoeff());
  }
  CheckResult r;
  r.name = "fixed-point no-op";
  r.value = worst;
  r.tolerance = 1e-8;
  r.seconds = seconds_since(start);
  r.passed = r.value <= r.tolerance;
  r.detail = format("largest parameter change %.3e", r.value);
  return r;
}

CheckResult check_stationarity(const StationaritySetup& setup) {
  const auto start = Clock::now();
  const ConvergenceRun run = run_to_convergence(setup);
  CheckResult r;
  r.name = "stationarity at convergence";
  r.value = run.gradient_norm;
  r.tolerance = 1e-6;
  r.seconds = seconds_since(start);
  r.passed = run.reached_tol && r.value <= r.tolerance;
  char buf[200];
  std::snprintf(buf, sizeof buf, "%ld steps, last step %.3e%s, gradient norm %.3e, loss %.6g",
                run.iterations, run.last_step, run.reached_tol ? "" : " (not converged)",
                run.gradient_norm, run.loss);
  r.detail = buf;
  return r;
}

std::vector<CheckResult> run_all_checks() {
  std::vector<CheckResult> out;
  out.push_back(check_gradient_oracle());
  for (auto& r : check_prox_oracle()) out.push_back(std::move(r));
  out.push_back(check_fixed_point());
  out.push_back(check_stationarity());
  return out;
}

}  // namespace sibp
