#include "sibp/baselines.hpp"

#include <cmath>

namespace sibp {

std::string to_string(OptimizerKind k) {
  switch (k) {
    case OptimizerKind::SGD: return "sgd";
    case OptimizerKind::Adam: return "adam";
    case OptimizerKind::RMSprop: return "rmsprop";
    case OptimizerKind::ProxBP: return "proxbp";
  }
  return "?";
}

ParameterSet bp_gradients(const NetworkSpec& spec, const ParameterSet& params,
                          const ForwardCache& cache, const Matrix& delta_out) {
  params.check_shapes(spec);
  const int layers = params.num_layers();
  if (static_cast<int>(cache.pre.size()) != layers ||
      static_cast<int>(cache.post.size()) != layers + 1) {
    throw ShapeError("bp_gradients: forward cache does not match the network depth");
  }
  if (delta_out.rows() != spec.output_dim() || delta_out.cols() != cache.output().cols()) {
    throw ShapeError("bp_gradients: output error is " + std::to_string(delta_out.rows()) + "x" +
                     std::to_string(delta_out.cols()) + ", expected " +
                     std::to_string(spec.output_dim()) + "x" +
                     std::to_string(cache.output().cols()));
  }

  ParameterSet grads;
  grads.weights.resize(layers);
  grads.biases.resize(layers);
  Matrix delta = delta_out;
  for (int l = layers - 1; l >= 0; --l) {
    const Matrix gated = gate(spec.activation(l), cache.pre[l], delta);
    grads.weights[l].noalias() = gated * cache.post[l].transpose();
    grads.biases[l] = gated.rowwise().sum();
    if (l > 0) delta = params.weights[l].transpose() * gated;
  }
  return grads;
}

ParameterSet full_gradient(const NetworkSpec& spec, const ParameterSet& params, const Batch& batch,
                           LossKind loss) {
  const ForwardCache cache = forward(spec, params, batch.inputs);
  return bp_gradients(spec, params, cache, loss_grad(loss, cache.output(), batch));
}

namespace {

void check_same_layout(const ParameterSet& a, const ParameterSet& b) {
  if (a.num_layers() != b.num_layers()) throw ShapeError("parameter/gradient layer count mismatch");
  for (int l = 0; l < a.num_layers(); ++l) {
    if (a.weights[l].rows() != b.weights[l].rows() || a.weights[l].cols() != b.weights[l].cols() ||
        a.biases[l].size() != b.biases[l].size()) {
      throw ShapeError("parameter/gradient shape mismatch at layer " + std::to_string(l + 1));
    }
  }
}

// Applies `update(param, grad, m, v)` entrywise on every weight and bias array.
template <class F>
ParameterSet elementwise(OptimizerState& s, const ParameterSet& params, const ParameterSet& grads,
                         F&& update) {
  check_same_layout(params, grads);
  check_same_layout(params, s.second);
  ParameterSet next = params;
  for (int l = 0; l < params.num_layers(); ++l) {
    update(next.weights[l].array(), grads.weights[l].array(), s.first.weights[l].array(),
           s.second.weights[l].array());
    update(next.biases[l].array(), grads.biases[l].array(), s.first.biases[l].array(),
           s.second.biases[l].array());
  }
  return next;
}

}  // namespace

ParameterSet sgd_step(const ParameterSet& params, const ParameterSet& grads, double step_size) {
  check_same_layout(params, grads);
  ParameterSet next = params;
  for (int l = 0; l < params.num_layers(); ++l) {
    next.weights[l] -= step_size * grads.weights[l];
    next.biases[l] -= step_size * grads.biases[l];
  }
  return next;
}

OptimizerState OptimizerState::make(OptimizerKind kind, const ParameterSet& params,
                                    double step_size) {
  OptimizerState s;
  s.kind = kind;
  s.step_size = step_size;
  s.first = params.zeros_like();
  s.second = params.zeros_like();
  return s;
}

ParameterSet adam_step(OptimizerState& s, const ParameterSet& params, const ParameterSet& grads) {
  if (s.kind != OptimizerKind::Adam) throw std::invalid_argument("adam_step on a non-Adam state");
  ++s.step_count;
  const double b1 = s.adam_beta1, b2 = s.adam_beta2, eps = s.epsilon, lr = s.step_size;
  const double c1 = 1.0 - std::pow(b1, static_cast<double>(s.step_count));
  const double c2 = 1.0 - std::pow(b2, static_cast<double>(s.step_count));
  return elementwise(s, params, grads, [&](auto p, auto g, auto m, auto v) {
    m = b1 * m + (1.0 - b1) * g;
    v = b2 * v + (1.0 - b2) * g.square();
    p -= lr * (m / c1) / ((v / c2).sqrt() + eps);
  });
}

ParameterSet rmsprop_step(OptimizerState& s, const ParameterSet& params,
                          const ParameterSet& grads) {
  if (s.kind != OptimizerKind::RMSprop) {
    throw std::invalid_argument("rmsprop_step on a non-RMSprop state");
  }
  ++s.step_count;
  const double rho = s.rms_rho, eps = s.epsilon, lr = s.step_size;
  return elementwise(s, params, grads, [&](auto p, auto g, auto, auto v) {
    v = rho * v + (1.0 - rho) * g.square();
    p -= lr * g / (v.sqrt() + eps);
  });
}

Matrix linear_prox_solve(const Matrix& w_k, const Vector& b, const Matrix& inputs,
                         const Matrix& target, double lambda, int cg_iters) {
  if (w_k.cols() != inputs.rows() || w_k.rows() != b.size() || target.rows() != w_k.rows() ||
      target.cols() != inputs.cols()) {
    throw ShapeError("linear_prox_solve: shapes do not compose");
  }
  auto apply = [&](const Matrix& w) -> Matrix {
    return 2.0 * (w * inputs) * inputs.transpose() + lambda * w;
  };
  Matrix shifted = target;
  shifted.colwise() -= b;
  const Matrix rhs = 2.0 * shifted * inputs.transpose() + lambda * w_k;

  Matrix w = w_k;
  Matrix r = rhs - apply(w);
  Matrix p = r;
  double rr = r.squaredNorm();
  for (int it = 0; it < cg_iters && rr > 0.0; ++it) {
    const Matrix ap = apply(p);
    const double curv = (p.array() * ap.array()).sum();
    if (!(curv > 0.0)) break;
    const double alpha = rr / curv;
    w += alpha * p;
    r -= alpha * ap;
    const double rr_next = r.squaredNorm();
    p = r + (rr_next / rr) * p;
    rr = rr_next;
  }
  return w;
}

ParameterSet proxbp_step(const NetworkSpec& spec, const ParameterSet& params, const Batch& batch,
                         const HyperParams& hyper, LossKind loss) {
  hyper.validate();
  const ForwardCache cache = forward(spec, params, batch.inputs);
  const int layers = params.num_layers();
  const double batch_cols = static_cast<double>(batch.size());

  Matrix delta = loss_grad(loss, cache.output(), batch);
  ParameterSet next = params;
  for (int l = layers - 1; l >= 0; --l) {
    const Matrix gated = gate(spec.activation(l), cache.pre[l], delta);
    const Matrix target = cache.pre[l] - hyper.eta * gated;
    const Matrix& inputs = cache.post[l];

    next.weights[l] = linear_prox_solve(params.weights[l], params.biases[l], inputs, target,
                                        hyper.lambda, hyper.cg_iters);
    if (!next.weights[l].allFinite()) throw NonFiniteError(l + 1, "weight subproblem");
    const Vector fit = (target - next.weights[l] * inputs).rowwise().sum();
    next.biases[l] = (2.0 * fit + hyper.lambda * params.biases[l]) / (2.0 * batch_cols + hyper.lambda);
    if (!next.biases[l].allFinite()) throw NonFiniteError(l + 1, "bias subproblem");

    if (l > 0) delta = params.weights[l].transpose() * gated;
  }
  return next;
}

}  // namespace sibp
