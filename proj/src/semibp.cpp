#include "sibp/semibp.hpp"

#include "sibp/baselines.hpp"

namespace sibp {

void HyperParams::validate() const {
  if (!(eta > 0.0)) throw std::invalid_argument("eta must be positive");
  if (!(lambda > 0.0)) throw std::invalid_argument("lambda must be positive");
  if (cg_iters < 1) throw std::invalid_argument("cg_iters must be at least 1");
  if (!(cg_tol >= 0.0)) throw std::invalid_argument("cg_tol must be nonnegative");
}

BackwardState BackwardState::make(const Matrix& neurons, Matrix delta, double eta) {
  BackwardState s;
  s.half = neurons - eta * delta;
  s.delta = std::move(delta);
  return s;
}

namespace {

// sum (act(z) - target)^2
double fit_value(Activation act, const Matrix& z, const Matrix& target) {
  switch (act) {
    case Activation::ReLU: return (z.cwiseMax(0.0) - target).squaredNorm();
    case Activation::Sigmoid: return (sigmoid(z) - target).squaredNorm();
    case Activation::Identity: break;
  }
  return (z - target).squaredNorm();
}

// act'(z) .* (act(z) - target); returns the fit value.
double fit_residual(Activation act, const Matrix& z, const Matrix& target, Matrix& residual) {
  residual = activate(act, z) - target;
  const double v = residual.squaredNorm();
  residual = gate(act, z, residual);
  return v;
}

void check_layer_shapes(const Matrix& w, Index bias_len, const Matrix& inputs,
                        const Matrix& target) {
  if (w.cols() != inputs.rows() || w.rows() != bias_len || target.rows() != w.rows() ||
      target.cols() != inputs.cols()) {
    throw ShapeError("layer subproblem: W " + std::to_string(w.rows()) + "x" +
                     std::to_string(w.cols()) + ", b " + std::to_string(bias_len) + ", inputs " +
                     std::to_string(inputs.rows()) + "x" + std::to_string(inputs.cols()) +
                     ", target " + std::to_string(target.rows()) + "x" +
                     std::to_string(target.cols()));
  }
}

// Weight subproblem. Along a search ray W0 + t*D the pre-activation is
// Z0 + t*(D F), so trial steps only touch rows x batch entries.
class WeightObjective final : public Objective {
 public:
  WeightObjective(const Matrix& w_k, const Vector& b, const Matrix& inputs, const Matrix& target,
                  double lambda, Activation act)
      : w_k_(w_k), b_(b), inputs_(inputs), target_(target), lambda_(lambda), act_(act) {}

  double value_gradient(const Vector& x, Vector& grad) override {
    const auto w = as_matrix(x);
    z_ = w * inputs_;
    z_.colwise() += b_;
    z_point_ = x;
    return finish(w, grad);
  }

  void begin_line(const Vector& x, const Vector& direction) override {
    Objective::begin_line(x, direction);
    if (z_point_.size() != x.size() || z_point_ != x) {
      z_ = as_matrix(x) * inputs_;
      z_.colwise() += b_;
      z_point_ = x;
    }
    z0_ = z_;
    const auto d = as_matrix(direction);
    dz_ = d * inputs_;
    const Matrix offset = as_matrix(x) - w_k_;
    prox0_ = offset.squaredNorm();
    prox_cross_ = (offset.array() * d.array()).sum();
    prox_dd_ = d.squaredNorm();
  }

  double line_value(double t) override {
    const double prox = prox0_ + 2.0 * t * prox_cross_ + t * t * prox_dd_;
    switch (act_) {
      case Activation::ReLU:
        return ((z0_ + t * dz_).cwiseMax(0.0) - target_).squaredNorm() + 0.5 * lambda_ * prox;
      case Activation::Identity:
        return ((z0_ + t * dz_) - target_).squaredNorm() + 0.5 * lambda_ * prox;
      case Activation::Sigmoid: break;
    }
    return fit_value(act_, z0_ + t * dz_, target_) + 0.5 * lambda_ * prox;
  }

  double line_value_gradient(double t, Vector& grad) override {
    z_ = z0_ + t * dz_;
    z_point_ = line_origin_ + t * line_direction_;
    return finish(as_matrix(z_point_), grad);
  }

 private:
  Eigen::Map<const Matrix> as_matrix(const Vector& x) const {
    return {x.data(), w_k_.rows(), w_k_.cols()};
  }

  double finish(const Eigen::Map<const Matrix>& w, Vector& grad) {
    const double fit = fit_residual(act_, z_, target_, residual_);
    grad.resize(w.size());
    Eigen::Map<Matrix> g(grad.data(), w.rows(), w.cols());
    g.noalias() = 2.0 * residual_ * inputs_.transpose();
    g += lambda_ * (w - w_k_);
    return fit + 0.5 * lambda_ * (w - w_k_).squaredNorm();
  }

  const Matrix& w_k_;
  const Vector& b_;
  const Matrix& inputs_;
  const Matrix& target_;
  double lambda_;
  Activation act_;

  Matrix z_;
  Vector z_point_;
  Matrix residual_;
  Matrix z0_, dz_;
  double prox0_ = 0.0, prox_cross_ = 0.0, prox_dd_ = 0.0;
};

class BiasObjective final : public Objective {
 public:
  BiasObjective(const Matrix& w, const Vector& b_k, const Matrix& inputs, const Matrix& target,
                double lambda, Activation act)
      : b_k_(b_k), base_(w * inputs), target_(target), lambda_(lambda), act_(act) {}

  double value_gradient(const Vector& b, Vector& grad) override {
    Matrix z = base_;
    z.colwise() += b;
    const double fit = fit_residual(act_, z, target_, residual_);
    grad = 2.0 * residual_.rowwise().sum() + lambda_ * (b - b_k_);
    return fit + 0.5 * lambda_ * (b - b_k_).squaredNorm();
  }

  double value(const Vector& b) override {
    Matrix z = base_;
    z.colwise() += b;
    return fit_value(act_, z, target_) + 0.5 * lambda_ * (b - b_k_).squaredNorm();
  }

 private:
  const Vector& b_k_;
  Matrix base_;
  const Matrix& target_;
  double lambda_;
  Activation act_;
  Matrix residual_;
};

SubproblemStats to_stats(const CgReport& r) {
  return {r.initial_value, r.value, r.iterations, r.fallback_steps, r.failed_searches};
}

CgOptions cg_options(int iters, double tol) {
  if (iters < 1) throw std::invalid_argument("cg_iters must be at least 1");
  CgOptions opt;
  opt.max_iters = iters;
  opt.grad_tol = tol;
  return opt;
}

}  // namespace

double weight_objective(const Matrix& w, const Matrix& w_k, const Vector& b, const Matrix& inputs,
                        const Matrix& target, double lambda, Activation act) {
  check_layer_shapes(w, b.size(), inputs, target);
  Matrix z = w * inputs;
  z.colwise() += b;
  return fit_value(act, z, target) + 0.5 * lambda * (w - w_k).squaredNorm();
}

double bias_objective(const Vector& b, const Vector& b_k, const Matrix& w, const Matrix& inputs,
                      const Matrix& target, double lambda, Activation act) {
  check_layer_shapes(w, b.size(), inputs, target);
  Matrix z = w * inputs;
  z.colwise() += b;
  return fit_value(act, z, target) + 0.5 * lambda * (b - b_k).squaredNorm();
}

Matrix solve_W_subproblem(const Matrix& w_k, const Vector& b_k, const Matrix& inputs,
                          const Matrix& target, double lambda, int cg_iters, Activation act,
                          double cg_tol, SubproblemStats* stats) {
  check_layer_shapes(w_k, b_k.size(), inputs, target);
  if (!(lambda > 0.0)) throw std::invalid_argument("lambda must be positive");
  WeightObjective obj(w_k, b_k, inputs, target, lambda, act);
  const Vector x0 = Eigen::Map<const Vector>(w_k.data(), w_k.size());
  const CgReport rep = nonlinear_cg(obj, x0, cg_options(cg_iters, cg_tol));
  if (stats) *stats = to_stats(rep);
  return Eigen::Map<const Matrix>(rep.x.data(), w_k.rows(), w_k.cols());
}

Vector solve_b_subproblem(const Matrix& w_new, const Vector& b_k, const Matrix& inputs,
                          const Matrix& target, double lambda, int cg_iters, Activation act,
                          double cg_tol, SubproblemStats* stats) {
  check_layer_shapes(w_new, b_k.size(), inputs, target);
  if (!(lambda > 0.0)) throw std::invalid_argument("lambda must be positive");
  BiasObjective obj(w_new, b_k, inputs, target, lambda, act);
  const CgReport rep = nonlinear_cg(obj, b_k, cg_options(cg_iters, cg_tol));
  if (stats) *stats = to_stats(rep);
  return rep.x;
}

Matrix propagate_delta(const Matrix& w_new, const Matrix& pre_next, const Matrix& delta_next,
                       Activation act) {
  if (pre_next.rows() != w_new.rows() || delta_next.rows() != w_new.rows() ||
      pre_next.cols() != delta_next.cols()) {
    throw ShapeError("propagate_delta: W " + std::to_string(w_new.rows()) + "x" +
                     std::to_string(w_new.cols()) + ", G " + std::to_string(pre_next.rows()) +
                     "x" + std::to_string(pre_next.cols()) + ", delta " +
                     std::to_string(delta_next.rows()) + "x" + std::to_string(delta_next.cols()));
  }
  return w_new.transpose() * gate(act, pre_next, delta_next);
}

ParameterSet semi_implicit_step(const NetworkSpec& spec, const ParameterSet& params,
                                const Batch& batch, const HyperParams& hyper, LossKind loss,
                                StepDiagnostics* diagnostics) {
  hyper.validate();
  const ForwardCache cache = forward(spec, params, batch.inputs);
  const int layers = params.num_layers();

  BackwardState level =
      BackwardState::make(cache.output(), loss_grad(loss, cache.output(), batch), hyper.eta);
  if (!level.half.allFinite()) throw NonFiniteError(layers, "output neuron update");

  ParameterSet next = params;
  if (diagnostics) diagnostics->layers.clear();

  for (int l = layers - 1; l >= 0; --l) {
    const Activation act = spec.activation(l);
    LayerStats ls;
    ls.layer = l + 1;

    next.weights[l] = solve_W_subproblem(params.weights[l], params.biases[l], cache.post[l],
                                         level.half, hyper.lambda, hyper.cg_iters, act,
                                         hyper.cg_tol, &ls.weight);
    if (!next.weights[l].allFinite()) throw NonFiniteError(l + 1, "weight subproblem");

    next.biases[l] = solve_b_subproblem(next.weights[l], params.biases[l], cache.post[l],
                                        level.half, hyper.lambda, hyper.cg_iters, act,
                                        hyper.cg_tol, &ls.bias);
    if (!next.biases[l].allFinite()) throw NonFiniteError(l + 1, "bias subproblem");

    if (diagnostics) diagnostics->layers.push_back(ls);

    if (l > 0) {
      level = BackwardState::make(
          cache.post[l], propagate_delta(next.weights[l], cache.pre[l], level.delta, act),
          hyper.eta);
      if (!level.half.allFinite()) throw NonFiniteError(l, "error propagation");
    }
  }
  return next;
}

double stationarity_check(const NetworkSpec& spec, const ParameterSet& params, const Batch& data,
                          LossKind loss) {
  return full_gradient(spec, params, data, loss).norm();
}

}  // namespace sibp
