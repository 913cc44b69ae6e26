// Command-line front end: train, sweep, check.

#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <iostream>
#include <sstream>

#include <CLI11.hpp>

#include "sibp/checks.hpp"
#include "sibp/harness.hpp"

namespace {

using namespace sibp;

std::vector<double> parse_list(const std::string& text, const std::string& flag) {
  std::vector<double> out;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    std::size_t used = 0;
    double v = 0.0;
    try {
      v = std::stod(item, &used);
    } catch (const std::exception&) {
      used = 0;
    }
    if (used == 0 || used != item.size()) {
      throw CLI::ValidationError(flag, "'" + item + "' is not a number");
    }
    out.push_back(v);
  }
  if (out.empty()) throw CLI::ValidationError(flag, "empty value list");
  return out;
}

double single(const std::string& text, const std::string& flag) {
  const auto values = parse_list(text, flag);
  if (values.size() != 1) {
    throw CLI::ValidationError(flag, "takes one value here; lists are for `sweep`");
  }
  return values.front();
}

void print_summary(const ExperimentResult& res) {
  const MetricsRow& last = res.final();
  std::printf("%s epoch %d: train_loss %.6g train_acc %.4f val_acc %.4f (%d diverged)\n",
              last.method.c_str(), last.epoch, last.train_loss, last.train_acc, last.val_acc,
              res.diverged_runs);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Semi-implicit back propagation trainer"};
  app.require_subcommand(1);
  app.set_config("--config", "", "key=value file mirroring the long flags");

  std::string dataset = "mnist", data_dir, arch = "784x500x10", method = "semi-implicit";
  std::string activation = "relu", loss = "softmax-ce";
  std::string eta = "1", lambda = "1", cg_iters = "5";
  ExperimentConfig cfg;
  std::string out;

  app.add_option("--dataset", dataset, "mnist or cifar10")->capture_default_str();
  app.add_option("--data-dir", data_dir,
                 "directory with the IDX or CIFAR batch files (default: $SIBP_DATA_DIR)");
  app.add_option("--arch", arch, "layer widths, e.g. 784x500x10")->capture_default_str();
  app.add_option("--method", method, "semi-implicit, proxbp, sgd, adam or rmsprop")
      ->capture_default_str();
  app.add_option("--activation", activation, "hidden activation: relu, sigmoid or identity")
      ->capture_default_str();
  app.add_option("--loss", loss, "softmax-ce or squared")->capture_default_str();
  app.add_option("--eta", eta, "neuron step / learning rate (comma list for sweep)")
      ->capture_default_str();
  app.add_option("--lambda", lambda, "proximal weight (comma list for sweep)")
      ->capture_default_str();
  app.add_option("--cg-iters", cg_iters, "CG iterations per subproblem (comma list for sweep)")
      ->capture_default_str();
  app.add_option("--batch-size", cfg.batch_size)->capture_default_str()->check(CLI::PositiveNumber);
  app.add_option("--epochs", cfg.epochs)->capture_default_str()->check(CLI::NonNegativeNumber);
  app.add_option("--seed", cfg.seed)->capture_default_str();
  app.add_option("--repeats", cfg.repeats)->capture_default_str()->check(CLI::PositiveNumber);
  app.add_option("--init-std", cfg.init_std)->capture_default_str();
  app.add_option("--eval-every", cfg.eval_every, "iterations between evaluations; 0 = per epoch")
      ->capture_default_str();
  app.add_option("--max-samples", cfg.max_samples, "use only the first N samples")
      ->capture_default_str();
  app.add_option("--train-count", cfg.train_count, "training split size; 0 = default")
      ->capture_default_str();
  app.add_option("--out", out, "metrics CSV path");
  app.add_flag("--deterministic", cfg.deterministic, "run repeats one at a time");
  app.add_flag("--standardize", cfg.standardize, "per-feature standardization from the training split");

  auto* train = app.add_subcommand("train", "run one configuration");
  auto* sweep = app.add_subcommand("sweep", "grid over eta, lambda or cg-iters");
  auto* check = app.add_subcommand("check", "run the numerical self-checks");
  for (auto* sub : {train, sweep, check}) sub->fallthrough();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e);
  }

  try {
    if (check->parsed()) {
      bool all = true;
      for (const auto& r : run_all_checks()) {
        std::printf("%s %s: %s\n", r.passed ? "PASS" : "FAIL", r.name.c_str(), r.detail.c_str());
        all = all && r.passed;
      }
      return all ? 0 : 1;
    }

    cfg.dataset = parse_dataset(dataset);
    if (data_dir.empty()) {
      if (const char* env = std::getenv("SIBP_DATA_DIR")) data_dir = env;
    }
    cfg.data_dir = data_dir;
    cfg.arch = parse_arch(arch);
    cfg.method = parse_method(method);
    cfg.activation = parse_activation(activation);
    cfg.loss = parse_loss(loss);
    cfg.output_path = out;

    if (train->parsed()) {
      cfg.hyper.eta = single(eta, "--eta");
      cfg.hyper.lambda = single(lambda, "--lambda");
      cfg.hyper.cg_iters = static_cast<int>(single(cg_iters, "--cg-iters"));
      cfg.validate();
      print_summary(run_experiment(cfg));
      if (!out.empty()) std::printf("wrote %s and %s\n", out.c_str(), aggregate_path(out).c_str());
      return 0;
    }

    // sweep: exactly one of the step-size flags may carry a list
    const auto etas = parse_list(eta, "--eta");
    const auto lambdas = parse_list(lambda, "--lambda");
    const auto cgs = parse_list(cg_iters, "--cg-iters");
    const int lists = (etas.size() > 1) + (lambdas.size() > 1) + (cgs.size() > 1);
    if (lists > 1) {
      throw CLI::ValidationError("sweep", "give a list for only one of --eta, --lambda, --cg-iters");
    }
    cfg.hyper.eta = etas.front();
    cfg.hyper.lambda = lambdas.front();
    cfg.hyper.cg_iters = static_cast<int>(cgs.front());
    std::string parameter = "eta";
    std::vector<double> values = etas;
    if (lambdas.size() > 1) parameter = "lambda", values = lambdas;
    if (cgs.size() > 1) parameter = "cg_iters", values = cgs;
    cfg.validate();

    const Dataset all = load_dataset(cfg);
    cfg.validate_for(all);
    const Index n_train = cfg.train_count > 0 ? cfg.train_count : default_train_count(all.size());
    const auto [tr, va] = split(all, n_train);
    const auto rows = run_sweep(cfg, parameter, values, tr, va);
    write_sweep_csv(std::cout, rows);
    if (!out.empty()) {
      std::filesystem::path summary = out;
      summary.replace_filename(summary.stem().string() + "_sweep.csv");
      std::ofstream f(summary);
      write_sweep_csv(f, rows);
      if (!f) throw std::runtime_error("cannot write " + summary.string());
    }
    return 0;
  } catch (const CLI::Error& e) {
    return app.exit(e);
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 2;
  }
}
