#include <doctest.h>

#include <random>

#include "sibp/baselines.hpp"
#include "sibp/checks.hpp"
#include "sibp/semibp.hpp"

using namespace sibp;

namespace {

Matrix randn(Index r, Index c, std::mt19937_64& gen, double scale = 1.0) {
  std::normal_distribution<double> n(0.0, scale);
  Matrix m(r, c);
  for (Index i = 0; i < m.size(); ++i) m.data()[i] = n(gen);
  return m;
}

struct Layer {
  Matrix w;
  Vector b;
  Matrix inputs;
  Matrix target;
};

Layer random_layer(Index out, Index in, Index batch, std::uint64_t seed) {
  std::mt19937_64 gen(seed);
  Layer l;
  l.w = randn(out, in, gen);
  l.b = randn(out, 1, gen);
  l.inputs = randn(in, batch, gen);
  l.target = randn(out, batch, gen).cwiseAbs();
  return l;
}

Matrix pre(const Layer& l, const Matrix& w, const Vector& b) {
  Matrix z = w * l.inputs;
  z.colwise() += b;
  return z;
}

}  // namespace

TEST_CASE("hyperparameter validation") {
  CHECK_NOTHROW(HyperParams{}.validate());
  CHECK_THROWS((HyperParams{0.0, 1.0}.validate()));
  CHECK_THROWS((HyperParams{1.0, -1.0}.validate()));
  CHECK_THROWS((HyperParams{1.0, 1.0, 0}.validate()));
  CHECK_THROWS((HyperParams{1.0, 1.0, 5, -1.0}.validate()));
}

TEST_CASE("backward state half-update is exact") {
  std::mt19937_64 gen(1);
  const Matrix f = randn(4, 3, gen), d = randn(4, 3, gen);
  const BackwardState s = BackwardState::make(f, d, 0.3);
  CHECK(s.half == f - 0.3 * d);
  CHECK(s.delta == d);
}

TEST_CASE("W subproblem") {
  SUBCASE("target already fitted leaves W_k in place") {
    for (Activation act : {Activation::ReLU, Activation::Identity, Activation::Sigmoid}) {
      Layer l = random_layer(4, 3, 6, 2);
      const Matrix target = activate(act, pre(l, l.w, l.b));
      const Matrix w = solve_W_subproblem(l.w, l.b, l.inputs, target, 1.0, 5, act);
      CHECK((w - l.w).norm() <= 1e-10);
    }
  }
  SUBCASE("identity layer matches closed-form ridge, and the implicit-gradient identity holds") {
    Layer l = random_layer(5, 7, 11, 3);
    const Matrix exact = ridge_solution(l.w, l.b, l.inputs, l.target, 1.0);
    const Matrix w = solve_W_subproblem(l.w, l.b, l.inputs, l.target, 1.0, 50, Activation::Identity);
    CHECK((w - exact).norm() <= 1e-6);
    // W* = W_k - (1/lambda) grad f(W*), f = ||W F + b - T||^2
    const double lambda = 2.5;
    const Matrix star = ridge_solution(l.w, l.b, l.inputs, l.target, lambda);
    const Matrix grad = 2.0 * (pre(l, star, l.b) - l.target) * l.inputs.transpose();
    CHECK((star - (l.w - grad / lambda)).norm() <= 1e-8);
  }
  SUBCASE("objective does not increase on a random ReLU instance") {
    for (std::uint64_t seed = 1; seed <= 20; ++seed) {
      Layer l = random_layer(6, 5, 9, seed);
      SubproblemStats st;
      const Matrix w =
          solve_W_subproblem(l.w, l.b, l.inputs, l.target, 0.7, 5, Activation::ReLU, 0.0, &st);
      const double before = weight_objective(l.w, l.w, l.b, l.inputs, l.target, 0.7, Activation::ReLU);
      const double after = weight_objective(w, l.w, l.b, l.inputs, l.target, 0.7, Activation::ReLU);
      CHECK(after <= before);
      CHECK(st.initial_value == doctest::Approx(before));
      CHECK(st.value == doctest::Approx(after));
    }
  }
  SUBCASE("huge lambda makes the step negligible") {
    Layer l = random_layer(4, 6, 8, 5);
    const double lambda = 1e12;
    const Matrix grad_term =
        2.0 * gate(Activation::ReLU, pre(l, l.w, l.b), relu(pre(l, l.w, l.b)) - l.target) *
        l.inputs.transpose();
    const Matrix w = solve_W_subproblem(l.w, l.b, l.inputs, l.target, lambda, 5, Activation::ReLU);
    CHECK((w - l.w).norm() <= 1e-6 * grad_term.norm());
    CHECK((w - l.w).norm() > 0.0);
  }
  SUBCASE("shape and lambda errors") {
    Layer l = random_layer(3, 2, 4, 6);
    CHECK_THROWS_AS(solve_W_subproblem(l.w, l.b, l.inputs, Matrix(2, 4), 1.0, 5, Activation::ReLU),
                    ShapeError);
    CHECK_THROWS(solve_W_subproblem(l.w, l.b, l.inputs, l.target, 0.0, 5, Activation::ReLU));
    CHECK_THROWS(solve_W_subproblem(l.w, l.b, l.inputs, l.target, 1.0, 0, Activation::ReLU));
  }
}

TEST_CASE("b subproblem") {
  SUBCASE("target already fitted returns b_k") {
    Layer l = random_layer(4, 3, 6, 7);
    const Matrix target = relu(pre(l, l.w, l.b));
    const Vector b = solve_b_subproblem(l.w, l.b, l.inputs, target, 1.0, 5, Activation::ReLU);
    CHECK((b - l.b).norm() <= 1e-10);
  }
  SUBCASE("identity, single sample: closed form") {
    Layer l = random_layer(5, 3, 1, 8);
    const double lambda = 0.8;
    const Vector expected =
        (2.0 * (l.target - l.w * l.inputs).col(0) + lambda * l.b) / (2.0 + lambda);
    const Vector b = solve_b_subproblem(l.w, l.b, l.inputs, l.target, lambda, 5, Activation::Identity);
    CHECK((b - expected).norm() <= 1e-8);
  }
  SUBCASE("objective does not increase") {
    for (std::uint64_t seed = 1; seed <= 20; ++seed) {
      Layer l = random_layer(6, 5, 9, 100 + seed);
      const Vector b = solve_b_subproblem(l.w, l.b, l.inputs, l.target, 1.3, 5, Activation::ReLU);
      CHECK(bias_objective(b, l.b, l.w, l.inputs, l.target, 1.3, Activation::ReLU) <=
            bias_objective(l.b, l.b, l.w, l.inputs, l.target, 1.3, Activation::ReLU));
    }
  }
}

TEST_CASE("propagate_delta") {
  std::mt19937_64 gen(9);
  const Matrix w = randn(4, 3, gen), g = randn(4, 5, gen), d = randn(4, 5, gen);
  CHECK(propagate_delta(w, g, Matrix::Zero(4, 5)).norm() == 0.0);
  CHECK(propagate_delta(w, -g.cwiseAbs() - Matrix::Constant(4, 5, 0.1), d).norm() == 0.0);
  CHECK_THROWS_AS(propagate_delta(w, g, Matrix::Zero(3, 5)), ShapeError);

  // with the old weights it is exactly back propagation's error recursion
  NetworkSpec spec{{3, 4, 6, 2}, Activation::ReLU, 1.0, 4};
  const ParameterSet p = init_params(spec);
  Batch batch;
  batch.inputs = randn(3, 5, gen);
  batch.labels = {0, 1, 1, 0, 1};
  const ForwardCache cache = forward(spec, p, batch.inputs);
  const Matrix delta_out = loss_grad(LossKind::SoftmaxCrossEntropy, cache.output(), batch);
  const ParameterSet grads = bp_gradients(spec, p, cache, delta_out);
  const Matrix delta2 = propagate_delta(p.weights[2], cache.pre[2], delta_out, Activation::Identity);
  const Matrix delta1 = propagate_delta(p.weights[1], cache.pre[1], delta2, Activation::ReLU);
  // dJ/dW_1 = (relu'(G_2) .* delta_1) F_1^T
  CHECK((gate(Activation::ReLU, cache.pre[0], delta1) * cache.post[0].transpose() - grads.weights[0])
            .norm() < 1e-14);
}

TEST_CASE("semi-implicit step") {
  SUBCASE("interpolating network is a fixed point") {
    const auto prob = interpolating_problem({3, 6, 4, 2}, 5, 11);
    const ParameterSet next =
        semi_implicit_step(prob.spec, prob.params, prob.batch, HyperParams{}, LossKind::SquaredError);
    CHECK(next.distance(prob.params) <= 1e-8);
    CHECK(stationarity_check(prob.spec, prob.params, prob.batch, LossKind::SquaredError) <= 1e-12);
  }
  SUBCASE("every subproblem objective decreases, and the input is untouched") {
    NetworkSpec spec{{4, 7, 5, 3}, Activation::ReLU, 0.5, 12};
    const ParameterSet p = init_params(spec);
    const ParameterSet copy = p;
    std::mt19937_64 gen(12);
    Batch batch;
    batch.inputs = randn(4, 10, gen);
    for (int i = 0; i < 10; ++i) batch.labels.push_back(i % 3);
    StepDiagnostics diag;
    const ParameterSet next =
        semi_implicit_step(spec, p, batch, HyperParams{}, LossKind::SoftmaxCrossEntropy, &diag);
    CHECK(p == copy);
    REQUIRE(diag.layers.size() == 3);
    CHECK(diag.layers[0].layer == 3);
    CHECK(diag.layers[2].layer == 1);
    for (const auto& l : diag.layers) {
      CHECK(l.weight.value <= l.weight.initial_value);
      CHECK(l.bias.value <= l.bias.initial_value);
    }
    CHECK(next.all_finite());
    // deterministic
    CHECK(semi_implicit_step(spec, p, batch, HyperParams{}, LossKind::SoftmaxCrossEntropy) == next);
  }
  SUBCASE("overflow is reported with layer and phase") {
    NetworkSpec spec{{2, 3, 2}, Activation::ReLU, 1.0, 13};
    ParameterSet p = init_params(spec);
    for (auto& w : p.weights) w.setConstant(1e200);
    Batch batch;
    batch.inputs = Matrix::Constant(2, 2, 1e200);
    batch.labels = {0, 1};
    try {
      semi_implicit_step(spec, p, batch, HyperParams{}, LossKind::SoftmaxCrossEntropy);
      FAIL("expected NonFiniteError");
    } catch (const NonFiniteError& e) {
      CHECK(e.layer() == 2);
      CHECK(e.phase() == "output neuron update");
    }
  }
}

TEST_CASE("stationarity_check equals the finite-difference gradient norm") {
  NetworkSpec spec{{3, 5, 4}, Activation::Sigmoid, 1.0, 21};
  const ParameterSet p = init_params(spec);
  std::mt19937_64 gen(21);
  Batch batch;
  batch.inputs = randn(3, 6, gen);
  batch.labels = {0, 1, 2, 3, 0, 1};
  const double fd = finite_difference_gradient(spec, p, batch, LossKind::SoftmaxCrossEntropy, 1e-5).norm();
  CHECK(std::abs(stationarity_check(spec, p, batch, LossKind::SoftmaxCrossEntropy) - fd) <= 1e-5 * fd);
}
