#include <pybind11/eigen.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include "sibp/checks.hpp"
#include "sibp/harness.hpp"

namespace py = pybind11;
using namespace sibp;

namespace {

// Labels arrive as any int sequence; inputs as a (dim, samples) array.
Batch make_batch(const Matrix& inputs, std::vector<int> labels, const Matrix& targets) {
  Batch b{inputs, std::move(labels), targets};
  return b;
}

py::dict row_dict(const MetricsRow& r) {
  py::dict d;
  d["run_id"] = r.run_id;
  d["method"] = r.method;
  d["epoch"] = r.epoch;
  d["iteration"] = r.iteration;
  d["wall_seconds"] = r.wall_seconds;
  d["train_loss"] = r.train_loss;
  d["train_acc"] = r.train_acc;
  d["val_acc"] = r.val_acc;
  return d;
}

py::list rows_list(const std::vector<MetricsRow>& rows) {
  py::list out;
  for (const auto& r : rows) out.append(row_dict(r));
  return out;
}

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "Semi-implicit back propagation for fully connected networks";

  py::register_exception<ShapeError>(m, "ShapeError", PyExc_ValueError);
  py::register_exception<DataError>(m, "DataError", PyExc_OSError);
  py::register_exception<NonFiniteError>(m, "NonFiniteError", PyExc_ArithmeticError);

  py::enum_<Activation>(m, "Activation")
      .value("ReLU", Activation::ReLU)
      .value("Identity", Activation::Identity)
      .value("Sigmoid", Activation::Sigmoid);
  py::enum_<LossKind>(m, "Loss")
      .value("SoftmaxCrossEntropy", LossKind::SoftmaxCrossEntropy)
      .value("SquaredError", LossKind::SquaredError);
  py::enum_<Method>(m, "Method")
      .value("SGD", Method::SGD)
      .value("Adam", Method::Adam)
      .value("RMSprop", Method::RMSprop)
      .value("ProxBP", Method::ProxBP)
      .value("SemiImplicit", Method::SemiImplicit);

  py::class_<NetworkSpec>(m, "NetworkSpec")
      .def(py::init([](std::vector<Index> dims, Activation act, double init_std, std::uint64_t seed) {
             NetworkSpec s{std::move(dims), act, init_std, seed};
             s.validate();
             return s;
           }),
           py::arg("layer_dims"), py::arg("activation") = Activation::ReLU,
           py::arg("init_std") = 0.01, py::arg("seed") = 1)
      .def_readonly("layer_dims", &NetworkSpec::layer_dims)
      .def_readonly("activation", &NetworkSpec::hidden_activation)
      .def_readonly("init_std", &NetworkSpec::init_std)
      .def_readonly("seed", &NetworkSpec::seed)
      .def_property_readonly("num_layers", &NetworkSpec::num_layers);

  py::class_<ParameterSet>(m, "ParameterSet")
      .def(py::init<>())
      .def(py::init([](std::vector<Matrix> w, std::vector<Vector> b) {
             return ParameterSet{std::move(w), std::move(b)};
           }),
           py::arg("weights"), py::arg("biases"))
      .def_readwrite("weights", &ParameterSet::weights)
      .def_readwrite("biases", &ParameterSet::biases)
      .def("norm", &ParameterSet::norm)
      .def("distance", &ParameterSet::distance)
      .def("__eq__", &ParameterSet::operator==);

  m.def("init_params", &init_params, py::arg("spec"));
  m.def("forward", &forward_output, py::arg("spec"), py::arg("params"), py::arg("inputs"),
        "Network output for inputs of shape (input_dim, samples).");
  m.def("predict", &predict, py::arg("spec"), py::arg("params"), py::arg("inputs"));

  m.def("loss_value",
        [](LossKind k, const Matrix& out, std::vector<int> labels, const Matrix& targets) {
          return loss_value(k, out, make_batch(Matrix(), std::move(labels), targets));
        },
        py::arg("loss"), py::arg("output"), py::arg("labels"), py::arg("targets") = Matrix());
  m.def("loss_grad",
        [](LossKind k, const Matrix& out, std::vector<int> labels, const Matrix& targets) {
          return loss_grad(k, out, make_batch(Matrix(), std::move(labels), targets));
        },
        py::arg("loss"), py::arg("output"), py::arg("labels"), py::arg("targets") = Matrix());

  m.def("gradient",
        [](const NetworkSpec& spec, const ParameterSet& p, const Matrix& x, std::vector<int> y,
           LossKind loss, const Matrix& targets) {
          return full_gradient(spec, p, make_batch(x, std::move(y), targets), loss);
        },
        py::arg("spec"), py::arg("params"), py::arg("inputs"), py::arg("labels"),
        py::arg("loss") = LossKind::SoftmaxCrossEntropy, py::arg("targets") = Matrix());

  m.def("semi_implicit_step",
        [](const NetworkSpec& spec, const ParameterSet& p, const Matrix& x, std::vector<int> y,
           double eta, double lambda, int cg_iters, LossKind loss, const Matrix& targets) {
          return semi_implicit_step(spec, p, make_batch(x, std::move(y), targets),
                                    HyperParams{eta, lambda, cg_iters, 0.0}, loss);
        },
        py::arg("spec"), py::arg("params"), py::arg("inputs"), py::arg("labels"),
        py::arg("eta") = 1.0, py::arg("lam") = 1.0, py::arg("cg_iters") = 5,
        py::arg("loss") = LossKind::SoftmaxCrossEntropy, py::arg("targets") = Matrix());

  m.def("proxbp_step",
        [](const NetworkSpec& spec, const ParameterSet& p, const Matrix& x, std::vector<int> y,
           double eta, double lambda, int cg_iters, LossKind loss, const Matrix& targets) {
          return proxbp_step(spec, p, make_batch(x, std::move(y), targets),
                             HyperParams{eta, lambda, cg_iters, 0.0}, loss);
        },
        py::arg("spec"), py::arg("params"), py::arg("inputs"), py::arg("labels"),
        py::arg("eta") = 1.0, py::arg("lam") = 1.0, py::arg("cg_iters") = 5,
        py::arg("loss") = LossKind::SoftmaxCrossEntropy, py::arg("targets") = Matrix());

  m.def("solve_W_subproblem",
        [](const Matrix& w_k, const Vector& b_k, const Matrix& inputs, const Matrix& target,
           double lambda, int cg_iters, Activation act) {
          return solve_W_subproblem(w_k, b_k, inputs, target, lambda, cg_iters, act);
        },
        py::arg("w_k"), py::arg("b_k"), py::arg("inputs"), py::arg("target"), py::arg("lam"),
        py::arg("cg_iters") = 5, py::arg("activation") = Activation::ReLU);

  m.def("stationarity_check",
        [](const NetworkSpec& spec, const ParameterSet& p, const Matrix& x, std::vector<int> y,
           LossKind loss, const Matrix& targets) {
          return stationarity_check(spec, p, make_batch(x, std::move(y), targets), loss);
        },
        py::arg("spec"), py::arg("params"), py::arg("inputs"), py::arg("labels"),
        py::arg("loss") = LossKind::SoftmaxCrossEntropy, py::arg("targets") = Matrix());

  m.def("load_mnist",
        [](const std::filesystem::path& dir) {
          Dataset d = load_mnist_dir(dir);
          return py::make_tuple(std::move(d.inputs), std::move(d.labels));
        },
        py::arg("directory"), "(inputs of shape (784, n) in [0, 1], labels)");

  m.def("train",
        [](const std::filesystem::path& data_dir, std::vector<Index> arch, Method method,
           double eta, double lambda, int cg_iters, int epochs, Index batch_size,
           std::uint64_t seed, int repeats, double init_std, Index max_samples,
           Index train_count) {
          ExperimentConfig c;
          c.data_dir = data_dir;
          c.arch = std::move(arch);
          c.method = method;
          c.hyper = {eta, lambda, cg_iters, 0.0};
          c.epochs = epochs;
          c.batch_size = batch_size;
          c.seed = seed;
          c.repeats = repeats;
          c.init_std = init_std;
          c.max_samples = max_samples;
          c.train_count = train_count;
          c.deterministic = true;
          ExperimentResult res;
          {
            py::gil_scoped_release release;
            res = run_experiment(c);
          }
          py::dict d;
          d["rows"] = rows_list(res.rows);
          d["aggregate"] = rows_list(res.aggregate);
          d["diverged_runs"] = res.diverged_runs;
          return d;
        },
        py::arg("data_dir"), py::arg("arch") = std::vector<Index>{784, 500, 10},
        py::arg("method") = Method::SemiImplicit, py::arg("eta") = 1.0, py::arg("lam") = 1.0,
        py::arg("cg_iters") = 5, py::arg("epochs") = 2, py::arg("batch_size") = 100,
        py::arg("seed") = 1, py::arg("repeats") = 1, py::arg("init_std") = 0.01,
        py::arg("max_samples") = 0, py::arg("train_count") = 0,
        "Run a seeded experiment on an MNIST directory; returns metrics rows as dicts.");

  m.def("run_checks", [] {
    py::list out;
    for (const auto& r : run_all_checks()) {
      py::dict d;
      d["name"] = r.name;
      d["passed"] = r.passed;
      d["value"] = r.value;
      d["tolerance"] = r.tolerance;
      d["detail"] = r.detail;
      out.append(d);
    }
    return out;
  });
}
