#pragma once

#include <filesystem>
#include <iosfwd>
#include <string>
#include <vector>

#include "sibp/baselines.hpp"
#include "sibp/data.hpp"
#include "sibp/semibp.hpp"

namespace sibp {

enum class DatasetKind { MNIST, CIFAR10 };
enum class Method { SGD, Adam, RMSprop, ProxBP, SemiImplicit };

std::string to_string(DatasetKind k);
std::string to_string(Method m);
DatasetKind parse_dataset(const std::string& name);
Method parse_method(const std::string& name);

struct ExperimentConfig {
  DatasetKind dataset = DatasetKind::MNIST;
  std::filesystem::path data_dir;
  std::vector<Index> arch{784, 500, 10};
  Activation activation = Activation::ReLU;
  Method method = Method::SemiImplicit;
  LossKind loss = LossKind::SoftmaxCrossEntropy;

  // eta is the neuron step for SemiImplicit/ProxBP and the learning rate
  // for SGD, Adam and RMSprop.
  HyperParams hyper;
  double adam_beta1 = 0.9;
  double adam_beta2 = 0.999;
  double rms_rho = 0.9;
  double epsilon = 1e-8;

  int epochs = 2;
  Index batch_size = 100;
  std::uint64_t seed = 1;
  double init_std = 0.01;
  int eval_every = 0;          // iterations between evaluations; 0 = end of each epoch
  int repeats = 1;
  bool deterministic = false;  // also forces repeats to run one at a time
  bool shuffle = true;
  bool standardize = false;    // per-feature, statistics from the training split
  Index max_samples = 0;       // use only the first N samples; 0 = all
  Index train_count = 0;       // 0 = 55000/60000, 45000/50000, otherwise 90%
  std::filesystem::path output_path;  // metrics CSV; aggregate goes next to it

  void validate() const;
  /// Checks the architecture against the dataset dimension.
  void validate_for(const Dataset& data) const;
};

/// One evaluation point. A diverged run ends with a row whose train_loss is
/// +inf.
struct MetricsRow {
  std::string run_id;
  std::string method;
  int epoch = 0;
  long iteration = 0;
  double wall_seconds = 0.0;
  double train_loss = 0.0;
  double train_acc = 0.0;
  double val_acc = 0.0;

  bool diverged() const;
};

struct ExperimentResult {
  std::vector<MetricsRow> rows;       // every run, run by run
  std::vector<MetricsRow> aggregate;  // mean over runs per evaluation point
  int diverged_runs = 0;

  /// Last aggregate row.
  const MetricsRow& final() const { return aggregate.back(); }
};

/// Losses above this, or non-finite, mark a run as diverged.
inline constexpr double kDivergenceLoss = 1e6;

/// Default training-set size for a dataset of `total` samples.
Index default_train_count(Index total);

Dataset load_dataset(const ExperimentConfig& config);

/// One seeded training run. `repeat` offsets the seed.
std::vector<MetricsRow> run_single(const ExperimentConfig& config, const Dataset& train,
                                   const Dataset& val, int repeat);

/// All repeats on preloaded data; does not write files.
ExperimentResult run_experiment(const ExperimentConfig& config, const Dataset& train,
                                const Dataset& val);

/// Loads and splits the dataset, runs all repeats, and writes the metrics
/// and aggregate CSVs when `output_path` is set.
ExperimentResult run_experiment(const ExperimentConfig& config);

/// Mean over runs per evaluation index. Runs that stopped early contribute
/// their last row to later indices.
std::vector<MetricsRow> aggregate_runs(const std::vector<MetricsRow>& rows);

inline const char* kMetricsHeader =
    "run_id,method,epoch,iteration,wall_seconds,train_loss,train_acc,val_acc";

void write_metrics_csv(std::ostream& out, const std::vector<MetricsRow>& rows,
                       bool include_wall = true);
void write_metrics_csv(const std::filesystem::path& path, const std::vector<MetricsRow>& rows);
std::vector<MetricsRow> read_metrics_csv(const std::filesystem::path& path);

/// <stem>_aggregate.csv next to `output_path`.
std::filesystem::path aggregate_path(const std::filesystem::path& output_path);

/// Grid over one hyperparameter (eta, lambda or cg_iters).
struct SweepRow {
  std::string parameter;
  double value = 0.0;
  double train_loss = 0.0;
  double train_acc = 0.0;
  double val_acc = 0.0;
  int diverged_runs = 0;
  int repeats = 0;
};

std::vector<SweepRow> run_sweep(const ExperimentConfig& base, const std::string& parameter,
                                const std::vector<double>& values, const Dataset& train,
                                const Dataset& val);

void write_sweep_csv(std::ostream& out, const std::vector<SweepRow>& rows);

/// Number of concurrent repeats from SIBP_THREADS (default 1).
int thread_count_from_env();

}  // namespace sibp
