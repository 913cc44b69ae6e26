#include "sibp/harness.hpp"

#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <mutex>
#include <sstream>
#include <thread>

namespace sibp {

namespace fs = std::filesystem;

std::string to_string(DatasetKind k) { return k == DatasetKind::MNIST ? "mnist" : "cifar10"; }

std::string to_string(Method m) {
  switch (m) {
    case Method::SGD: return "sgd";
    case Method::Adam: return "adam";
    case Method::RMSprop: return "rmsprop";
    case Method::ProxBP: return "proxbp";
    case Method::SemiImplicit: return "semi-implicit";
  }
  return "?";
}

DatasetKind parse_dataset(const std::string& name) {
  if (name == "mnist") return DatasetKind::MNIST;
  if (name == "cifar10" || name == "cifar-10" || name == "cifar") return DatasetKind::CIFAR10;
  throw std::invalid_argument("unknown dataset '" + name + "'");
}

Method parse_method(const std::string& name) {
  if (name == "sgd") return Method::SGD;
  if (name == "adam") return Method::Adam;
  if (name == "rmsprop") return Method::RMSprop;
  if (name == "proxbp") return Method::ProxBP;
  if (name == "semi-implicit" || name == "semi" || name == "sibp") return Method::SemiImplicit;
  throw std::invalid_argument("unknown method '" + name + "'");
}

void ExperimentConfig::validate() const {
  NetworkSpec{arch, activation, init_std, seed}.validate();
  if (arch.back() != 10) {
    throw std::invalid_argument("architecture " + format_arch(arch) + " must end in 10 classes");
  }
  const Index expected = dataset == DatasetKind::MNIST ? 784 : 3072;
  if (arch.front() != expected) {
    throw std::invalid_argument("architecture " + format_arch(arch) + " does not match " +
                                to_string(dataset) + " input dimension " +
                                std::to_string(expected));
  }
  if (method == Method::SemiImplicit || method == Method::ProxBP) {
    hyper.validate();
  } else if (!(hyper.eta > 0.0)) {
    throw std::invalid_argument("learning rate (eta) must be positive");
  }
  if (epochs < 0) throw std::invalid_argument("epochs must be nonnegative");
  if (batch_size <= 0) throw std::invalid_argument("batch size must be positive");
  if (repeats < 1) throw std::invalid_argument("repeats must be at least 1");
  if (eval_every < 0) throw std::invalid_argument("eval_every must be nonnegative");
  if (max_samples < 0 || train_count < 0) throw std::invalid_argument("sample counts must be >= 0");
}

void ExperimentConfig::validate_for(const Dataset& data) const {
  if (arch.front() != data.dim()) {
    throw std::invalid_argument("architecture " + format_arch(arch) + " expects " +
                                std::to_string(arch.front()) + " inputs, dataset has " +
                                std::to_string(data.dim()));
  }
}

bool MetricsRow::diverged() const { return !std::isfinite(train_loss); }

Index default_train_count(Index total) {
  if (total == 60000) return 55000;
  if (total == 50000) return 45000;
  return total - std::max<Index>(1, total / 10);
}

Dataset load_dataset(const ExperimentConfig& config) {
  if (config.data_dir.empty()) throw DataError("no data directory given");
  Dataset d = config.dataset == DatasetKind::MNIST ? load_mnist_dir(config.data_dir)
                                                   : load_cifar10_dir(config.data_dir);
  if (config.max_samples > 0 && config.max_samples < d.size()) d = d.head(config.max_samples);
  return d;
}

namespace {

using Clock = std::chrono::steady_clock;

constexpr Index kEvalChunk = 5000;

struct Evaluation {
  double loss = 0.0;
  double acc = 0.0;
};

// Batch-mean loss and accuracy over a whole dataset, in column chunks.
Evaluation evaluate(const NetworkSpec& spec, const ParameterSet& params, const Dataset& data,
                    LossKind loss, bool with_loss) {
  Evaluation ev;
  if (data.size() == 0) return ev;
  double loss_sum = 0.0;
  Index hits = 0;
  for (Index start = 0; start < data.size(); start += kEvalChunk) {
    const Index n = std::min(kEvalChunk, data.size() - start);
    const Matrix out = forward_output(spec, params, data.inputs.middleCols(start, n));
    const std::span<const int> labels(data.labels.data() + start, static_cast<std::size_t>(n));
    if (with_loss) {
      loss_sum += static_cast<double>(n) * (out.allFinite()
                                                ? loss_value(loss, out, labels)
                                                : std::numeric_limits<double>::infinity());
    }
    const auto pred = argmax_columns(out);
    for (Index i = 0; i < n; ++i) hits += pred[static_cast<std::size_t>(i)] == labels[i];
  }
  ev.loss = loss_sum / static_cast<double>(data.size());
  ev.acc = static_cast<double>(hits) / static_cast<double>(data.size());
  return ev;
}

// Training-time clock that excludes evaluation.
class Stopwatch {
 public:
  void start() { since_ = Clock::now(); }
  void stop() { total_ += std::chrono::duration<double>(Clock::now() - since_).count(); }
  double seconds() const { return total_; }

 private:
  Clock::time_point since_{};
  double total_ = 0.0;
};

}  // namespace

std::vector<MetricsRow> run_single(const ExperimentConfig& config, const Dataset& train,
                                   const Dataset& val, int repeat) {
  config.validate_for(train);
  NetworkSpec spec{config.arch, config.activation, config.init_std,
                   config.seed + static_cast<std::uint64_t>(repeat)};
  ParameterSet params = init_params(spec);

  OptimizerState state;
  if (config.method == Method::Adam || config.method == Method::RMSprop) {
    state = OptimizerState::make(
        config.method == Method::Adam ? OptimizerKind::Adam : OptimizerKind::RMSprop, params,
        config.hyper.eta);
    state.adam_beta1 = config.adam_beta1;
    state.adam_beta2 = config.adam_beta2;
    state.rms_rho = config.rms_rho;
    state.epsilon = config.epsilon;
  }

  std::vector<MetricsRow> rows;
  Stopwatch clock;
  long iteration = 0;
  const std::string run_id = std::to_string(repeat);
  const std::string method = to_string(config.method);

  auto record = [&](int epoch, bool diverged) {
    const Evaluation tr = evaluate(spec, params, train, config.loss, true);
    const Evaluation va = evaluate(spec, params, val, config.loss, false);
    MetricsRow row{run_id, method, epoch, iteration, clock.seconds(), tr.loss, tr.acc, va.acc};
    if (diverged || !std::isfinite(tr.loss) || tr.loss > kDivergenceLoss) {
      row.train_loss = std::numeric_limits<double>::infinity();
    }
    rows.push_back(row);
    return row.diverged();
  };

  if (record(0, false)) return rows;

  const BatchPlan plan{std::min(config.batch_size, train.size()),
                       config.seed + static_cast<std::uint64_t>(repeat), config.shuffle};
  for (int epoch = 1; epoch <= config.epochs; ++epoch) {
    bool evaluated_at_end = false;
    for (const auto& idx : batches(train.size(), plan, epoch)) {
      const Batch batch = train.gather(idx);
      clock.start();
      bool blew_up = false;
      try {
        switch (config.method) {
          case Method::SemiImplicit:
            params = semi_implicit_step(spec, params, batch, config.hyper, config.loss);
            break;
          case Method::ProxBP:
            params = proxbp_step(spec, params, batch, config.hyper, config.loss);
            break;
          case Method::SGD:
            params = sgd_step(params, full_gradient(spec, params, batch, config.loss),
                              config.hyper.eta);
            break;
          case Method::Adam:
            params = adam_step(state, params, full_gradient(spec, params, batch, config.loss));
            break;
          case Method::RMSprop:
            params = rmsprop_step(state, params, full_gradient(spec, params, batch, config.loss));
            break;
        }
        blew_up = !params.all_finite();
      } catch (const NonFiniteError&) {
        blew_up = true;
      }
      clock.stop();
      ++iteration;
      evaluated_at_end = false;
      if (blew_up) {
        record(epoch, true);
        return rows;
      }
      if (config.eval_every > 0 && iteration % config.eval_every == 0) {
        if (record(epoch, false)) return rows;
        evaluated_at_end = true;
      }
    }
    if (!evaluated_at_end && config.eval_every == 0) {
      if (record(epoch, false)) return rows;
    } else if (!evaluated_at_end && epoch == config.epochs) {
      if (record(epoch, false)) return rows;
    }
  }
  return rows;
}

std::vector<MetricsRow> aggregate_runs(const std::vector<MetricsRow>& rows) {
  std::vector<std::vector<MetricsRow>> runs;
  std::vector<std::string> ids;
  for (const auto& r : rows) {
    if (ids.empty() || ids.back() != r.run_id) {
      ids.push_back(r.run_id);
      runs.emplace_back();
    }
    runs.back().push_back(r);
  }
  std::size_t longest = 0;
  for (const auto& run : runs) longest = std::max(longest, run.size());

  std::vector<MetricsRow> out;
  for (std::size_t i = 0; i < longest; ++i) {
    MetricsRow m;
    m.run_id = "mean";
    const double n = static_cast<double>(runs.size());
    double epoch = 0.0, iteration = 0.0;
    for (const auto& run : runs) {
      const MetricsRow& r = run[std::min(i, run.size() - 1)];
      m.method = r.method;
      epoch += r.epoch;
      iteration += static_cast<double>(r.iteration);
      m.wall_seconds += r.wall_seconds;
      m.train_loss += r.train_loss;
      m.train_acc += r.train_acc;
      m.val_acc += r.val_acc;
    }
    m.epoch = static_cast<int>(std::lround(epoch / n));
    m.iteration = std::lround(iteration / n);
    m.wall_seconds /= n;
    m.train_loss /= n;
    m.train_acc /= n;
    m.val_acc /= n;
    out.push_back(m);
  }
  return out;
}

int thread_count_from_env() {
  if (const char* v = std::getenv("SIBP_THREADS")) {
    const int n = std::atoi(v);
    if (n > 0) return n;
  }
  return 1;
}

ExperimentResult run_experiment(const ExperimentConfig& config, const Dataset& train,
                                const Dataset& val) {
  config.validate();
  config.validate_for(train);
  if (config.standardize) {
    Dataset tr = train, va = val;
    standardize(tr, va);
    ExperimentConfig plain = config;
    plain.standardize = false;
    return run_experiment(plain, tr, va);
  }

  std::vector<std::vector<MetricsRow>> per_run(static_cast<std::size_t>(config.repeats));
  const int threads = config.deterministic ? 1 : std::min(thread_count_from_env(), config.repeats);
  if (threads <= 1) {
    for (int r = 0; r < config.repeats; ++r) per_run[r] = run_single(config, train, val, r);
  } else {
    std::mutex next_mutex;
    int next = 0;
    std::exception_ptr failure;
    std::vector<std::jthread> pool;
    for (int t = 0; t < threads; ++t) {
      pool.emplace_back([&] {
        for (;;) {
          int r;
          {
            std::lock_guard lock(next_mutex);
            if (next >= config.repeats || failure) return;
            r = next++;
          }
          try {
            per_run[r] = run_single(config, train, val, r);
          } catch (...) {
            std::lock_guard lock(next_mutex);
            failure = std::current_exception();
          }
        }
      });
    }
    pool.clear();
    if (failure) std::rethrow_exception(failure);
  }

  ExperimentResult result;
  for (auto& run : per_run) {
    if (!run.empty() && run.back().diverged()) ++result.diverged_runs;
    result.rows.insert(result.rows.end(), run.begin(), run.end());
  }
  result.aggregate = aggregate_runs(result.rows);
  return result;
}

ExperimentResult run_experiment(const ExperimentConfig& config) {
  config.validate();
  const Dataset all = load_dataset(config);
  config.validate_for(all);
  const Index train_count = config.train_count > 0 ? config.train_count
                                                   : default_train_count(all.size());
  const auto [train, val] = split(all, train_count);
  ExperimentResult result = run_experiment(config, train, val);
  if (!config.output_path.empty()) {
    write_metrics_csv(config.output_path, result.rows);
    write_metrics_csv(aggregate_path(config.output_path), result.aggregate);
  }
  return result;
}

namespace {

std::string num(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

}  // namespace

void write_metrics_csv(std::ostream& out, const std::vector<MetricsRow>& rows, bool include_wall) {
  if (include_wall) {
    out << kMetricsHeader << '\n';
  } else {
    out << "run_id,method,epoch,iteration,train_loss,train_acc,val_acc\n";
  }
  for (const auto& r : rows) {
    out << r.run_id << ',' << r.method << ',' << r.epoch << ',' << r.iteration << ',';
    if (include_wall) out << num(r.wall_seconds) << ',';
    out << num(r.train_loss) << ',' << num(r.train_acc) << ',' << num(r.val_acc) << '\n';
  }
}

void write_metrics_csv(const fs::path& path, const std::vector<MetricsRow>& rows) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  write_metrics_csv(out, rows, true);
}

std::vector<MetricsRow> read_metrics_csv(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot read " + path.string());
  std::string line;
  std::getline(in, line);
  if (line != kMetricsHeader) throw std::runtime_error(path.string() + ": unexpected header");
  std::vector<MetricsRow> rows;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::stringstream ss(line);
    std::vector<std::string> f;
    std::string cell;
    while (std::getline(ss, cell, ',')) f.push_back(cell);
    if (f.size() != 8) throw std::runtime_error(path.string() + ": bad row '" + line + "'");
    rows.push_back({f[0], f[1], std::stoi(f[2]), std::stol(f[3]), std::stod(f[4]), std::stod(f[5]),
                    std::stod(f[6]), std::stod(f[7])});
  }
  return rows;
}

fs::path aggregate_path(const fs::path& output_path) {
  fs::path p = output_path;
  p.replace_filename(output_path.stem().string() + "_aggregate" + output_path.extension().string());
  return p;
}

std::vector<SweepRow> run_sweep(const ExperimentConfig& base, const std::string& parameter,
                                const std::vector<double>& values, const Dataset& train,
                                const Dataset& val) {
  std::vector<SweepRow> out;
  for (double v : values) {
    ExperimentConfig cfg = base;
    if (parameter == "eta") cfg.hyper.eta = v;
    else if (parameter == "lambda") cfg.hyper.lambda = v;
    else if (parameter == "cg_iters") cfg.hyper.cg_iters = static_cast<int>(v);
    else throw std::invalid_argument("cannot sweep over '" + parameter + "'");
    if (!base.output_path.empty()) {
      fs::path p = base.output_path;
      p.replace_filename(base.output_path.stem().string() + "_" + parameter + "=" + num(v) +
                         base.output_path.extension().string());
      cfg.output_path = p;
    }
    const ExperimentResult res = run_experiment(cfg, train, val);
    if (!cfg.output_path.empty()) {
      write_metrics_csv(cfg.output_path, res.rows);
      write_metrics_csv(aggregate_path(cfg.output_path), res.aggregate);
    }
    const MetricsRow& last = res.final();
    out.push_back({parameter, v, last.train_loss, last.train_acc, last.val_acc, res.diverged_runs,
                   cfg.repeats});
  }
  return out;
}

void write_sweep_csv(std::ostream& out, const std::vector<SweepRow>& rows) {
  out << "parameter,value,train_loss,train_acc,val_acc,diverged_runs,repeats\n";
  for (const auto& r : rows) {
    out << r.parameter << ',' << num(r.value) << ',' << num(r.train_loss) << ','
        << num(r.train_acc) << ',' << num(r.val_acc) << ',' << r.diverged_runs << ','
        << r.repeats << '\n';
  }
}

}  // namespace sibp
