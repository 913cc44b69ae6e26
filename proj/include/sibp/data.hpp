#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "sibp/network.hpp"

namespace sibp {

/// Column-per-sample inputs scaled to [0, 1] and integer labels.
struct Dataset {
  Matrix inputs;
  std::vector<int> labels;
  std::string name;

  Index size() const { return inputs.cols(); }
  Index dim() const { return inputs.rows(); }

  /// Copies the listed samples into a batch.
  Batch gather(std::span<const Index> indices) const;
  /// Whole dataset as one batch.
  Batch as_batch() const;
  /// First `count` samples.
  Dataset head(Index count) const;
};

/// Reads a whole file, transparently inflating gzip streams.
std::vector<std::uint8_t> read_file_bytes(const std::filesystem::path& path);

/// IDX image + label pair (MNIST layout). Pixels are divided by 255.
Dataset load_mnist(const std::filesystem::path& images_path,
                   const std::filesystem::path& labels_path);

/// Looks for train-images-idx3-ubyte[.gz] and train-labels-idx1-ubyte[.gz]
/// in `dir`.
Dataset load_mnist_dir(const std::filesystem::path& dir);

/// CIFAR-10 binary batches: records of 1 label byte + 3072 pixel bytes.
Dataset load_cifar10(std::span<const std::filesystem::path> batch_paths);

/// data_batch_1.bin .. data_batch_5.bin in `dir` (whichever exist, at least one).
Dataset load_cifar10_dir(const std::filesystem::path& dir);

/// Prefix of `train_count` samples and the remaining tail.
std::pair<Dataset, Dataset> split(const Dataset& data, Index train_count);

/// Per-feature standardization with mean and std taken from `train`, applied
/// to both. Constant features are only centered.
void standardize(Dataset& train, Dataset& val);

struct BatchPlan {
  Index batch_size = 100;
  std::uint64_t seed = 0;
  bool shuffle = true;
};

/// Index lists for one epoch. With `shuffle` the order is a permutation
/// seeded by (plan.seed, epoch); the final short batch is kept.
std::vector<std::vector<Index>> batches(Index sample_count, const BatchPlan& plan, int epoch);

/// Fisher-Yates permutation of 0..n-1 from a seeded mt19937_64; the
/// bounded draws avoid std::uniform_int_distribution so the order is the
/// same on every standard library.
std::vector<Index> seeded_permutation(Index n, std::uint64_t seed);

}  // namespace sibp
