#include "sibp/data.hpp"

#include <fstream>
#include <iterator>
#include <numeric>
#include <random>

#include <zlib.h>

namespace sibp {

namespace fs = std::filesystem;

Batch Dataset::gather(std::span<const Index> indices) const {
  Batch b;
  b.inputs.resize(dim(), static_cast<Index>(indices.size()));
  b.labels.resize(indices.size());
  for (std::size_t j = 0; j < indices.size(); ++j) {
    const Index i = indices[j];
    if (i < 0 || i >= size()) throw std::out_of_range("sample index " + std::to_string(i));
    b.inputs.col(static_cast<Index>(j)) = inputs.col(i);
    b.labels[j] = labels[static_cast<std::size_t>(i)];
  }
  return b;
}

Batch Dataset::as_batch() const {
  Batch b;
  b.inputs = inputs;
  b.labels = labels;
  return b;
}

Dataset Dataset::head(Index count) const {
  if (count < 0 || count > size()) throw std::out_of_range("head: count exceeds dataset size");
  Dataset d;
  d.name = name;
  d.inputs = inputs.leftCols(count);
  d.labels.assign(labels.begin(), labels.begin() + count);
  return d;
}

namespace {

std::vector<std::uint8_t> inflate_gzip(const std::vector<std::uint8_t>& packed,
                                       const fs::path& path) {
  z_stream zs{};
  if (inflateInit2(&zs, 15 + 32) != Z_OK) throw DataError("zlib init failed");
  zs.next_in = const_cast<Bytef*>(packed.data());
  zs.avail_in = static_cast<uInt>(packed.size());

  std::vector<std::uint8_t> out;
  std::vector<std::uint8_t> chunk(1 << 20);
  int rc = Z_OK;
  while (rc != Z_STREAM_END) {
    zs.next_out = chunk.data();
    zs.avail_out = static_cast<uInt>(chunk.size());
    rc = inflate(&zs, Z_NO_FLUSH);
    if (rc != Z_OK && rc != Z_STREAM_END) {
      inflateEnd(&zs);
      throw DataError(path.string() + ": corrupt gzip stream");
    }
    out.insert(out.end(), chunk.data(), chunk.data() + (chunk.size() - zs.avail_out));
    if (rc == Z_OK && zs.avail_in == 0 && zs.avail_out != 0) {
      inflateEnd(&zs);
      throw DataError(path.string() + ": truncated gzip stream");
    }
  }
  inflateEnd(&zs);
  return out;
}

std::uint32_t read_be32(const std::vector<std::uint8_t>& bytes, std::size_t offset) {
  return (std::uint32_t{bytes[offset]} << 24) | (std::uint32_t{bytes[offset + 1]} << 16) |
         (std::uint32_t{bytes[offset + 2]} << 8) | std::uint32_t{bytes[offset + 3]};
}

fs::path find_either(const fs::path& dir, const std::string& stem) {
  for (const auto& candidate : {dir / stem, dir / (stem + ".gz")}) {
    if (fs::exists(candidate)) return candidate;
  }
  throw DataError("neither " + (dir / stem).string() + " nor its .gz variant exists");
}

}  // namespace

std::vector<std::uint8_t> read_file_bytes(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open " + path.string());
  std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)),
                                  std::istreambuf_iterator<char>());
  if (bytes.size() >= 2 && bytes[0] == 0x1f && bytes[1] == 0x8b) return inflate_gzip(bytes, path);
  return bytes;
}

Dataset load_mnist(const fs::path& images_path, const fs::path& labels_path) {
  const auto images = read_file_bytes(images_path);
  const auto labels = read_file_bytes(labels_path);

  if (images.size() < 16) throw DataError(images_path.string() + ": truncated IDX header");
  if (labels.size() < 8) throw DataError(labels_path.string() + ": truncated IDX header");
  if (read_be32(images, 0) != 0x00000803) {
    throw DataError(images_path.string() + ": bad magic (expected 0x00000803)");
  }
  if (read_be32(labels, 0) != 0x00000801) {
    throw DataError(labels_path.string() + ": bad magic (expected 0x00000801)");
  }
  const std::size_t count = read_be32(images, 4);
  const std::size_t rows = read_be32(images, 8);
  const std::size_t cols = read_be32(images, 12);
  const std::size_t label_count = read_be32(labels, 4);
  if (count != label_count) {
    throw DataError("MNIST sample count mismatch: " + std::to_string(count) + " images, " +
                    std::to_string(label_count) + " labels");
  }
  const std::size_t pixels = rows * cols;
  if (images.size() != 16 + count * pixels) {
    throw DataError(images_path.string() + ": expected " + std::to_string(16 + count * pixels) +
                    " bytes, found " + std::to_string(images.size()));
  }
  if (labels.size() != 8 + count) {
    throw DataError(labels_path.string() + ": expected " + std::to_string(8 + count) +
                    " bytes, found " + std::to_string(labels.size()));
  }

  Dataset d;
  d.name = "mnist";
  d.inputs.resize(static_cast<Index>(pixels), static_cast<Index>(count));
  d.labels.resize(count);
  for (std::size_t s = 0; s < count; ++s) {
    const std::uint8_t* src = images.data() + 16 + s * pixels;
    for (std::size_t p = 0; p < pixels; ++p) {
      d.inputs(static_cast<Index>(p), static_cast<Index>(s)) = src[p] / 255.0;
    }
    const int y = labels[8 + s];
    if (y > 9) throw DataError(labels_path.string() + ": label " + std::to_string(y) + " > 9");
    d.labels[s] = y;
  }
  return d;
}

Dataset load_mnist_dir(const fs::path& dir) {
  return load_mnist(find_either(dir, "train-images-idx3-ubyte"),
                    find_either(dir, "train-labels-idx1-ubyte"));
}

Dataset load_cifar10(std::span<const fs::path> batch_paths) {
  constexpr std::size_t pixels = 3072;
  constexpr std::size_t record = pixels + 1;
  if (batch_paths.empty()) throw DataError("no CIFAR-10 batch files given");

  std::vector<std::vector<std::uint8_t>> files;
  std::size_t total = 0;
  for (const auto& path : batch_paths) {
    files.push_back(read_file_bytes(path));
    if (files.back().size() % record != 0) {
      throw DataError(path.string() + ": size " + std::to_string(files.back().size()) +
                      " is not a multiple of 3073-byte records");
    }
    total += files.back().size() / record;
  }

  Dataset d;
  d.name = "cifar10";
  d.inputs.resize(static_cast<Index>(pixels), static_cast<Index>(total));
  d.labels.resize(total);
  std::size_t s = 0;
  for (std::size_t f = 0; f < files.size(); ++f) {
    const auto& bytes = files[f];
    for (std::size_t off = 0; off < bytes.size(); off += record, ++s) {
      const int y = bytes[off];
      if (y > 9) {
        throw DataError(batch_paths[f].string() + ": label " + std::to_string(y) + " > 9");
      }
      d.labels[s] = y;
      for (std::size_t p = 0; p < pixels; ++p) {
        d.inputs(static_cast<Index>(p), static_cast<Index>(s)) = bytes[off + 1 + p] / 255.0;
      }
    }
  }
  return d;
}

Dataset load_cifar10_dir(const fs::path& dir) {
  std::vector<fs::path> paths;
  for (int i = 1; i <= 5; ++i) {
    const std::string stem = "data_batch_" + std::to_string(i) + ".bin";
    if (fs::exists(dir / stem)) paths.push_back(dir / stem);
    else if (fs::exists(dir / (stem + ".gz"))) paths.push_back(dir / (stem + ".gz"));
  }
  if (paths.empty()) throw DataError("no data_batch_*.bin files in " + dir.string());
  return load_cifar10(paths);
}

std::pair<Dataset, Dataset> split(const Dataset& data, Index train_count) {
  if (train_count <= 0 || train_count >= data.size()) {
    throw std::out_of_range("split: train count " + std::to_string(train_count) +
                            " must lie strictly between 0 and " + std::to_string(data.size()));
  }
  Dataset train = data.head(train_count);
  Dataset val;
  val.name = data.name;
  val.inputs = data.inputs.rightCols(data.size() - train_count);
  val.labels.assign(data.labels.begin() + train_count, data.labels.end());
  return {std::move(train), std::move(val)};
}

void standardize(Dataset& train, Dataset& val) {
  if (train.size() == 0) throw std::invalid_argument("standardize: empty training set");
  if (val.size() > 0 && val.dim() != train.dim()) throw ShapeError("standardize: dimension mismatch");
  const Vector mean = train.inputs.rowwise().mean();
  Vector scale = ((train.inputs.colwise() - mean).rowwise().squaredNorm() / double(train.size()))
                     .cwiseSqrt();
  scale = scale.unaryExpr([](double s) { return s > 0.0 ? 1.0 / s : 1.0; });
  for (Dataset* d : {&train, &val}) {
    if (d->size() == 0) continue;
    d->inputs.colwise() -= mean;
    d->inputs = scale.asDiagonal() * d->inputs;
  }
}

std::vector<Index> seeded_permutation(Index n, std::uint64_t seed) {
  std::vector<Index> perm(static_cast<std::size_t>(n));
  std::iota(perm.begin(), perm.end(), Index{0});
  std::mt19937_64 gen(seed);
  for (Index i = n - 1; i > 0; --i) {
    // Rejection sampling for an unbiased draw from [0, i].
    const std::uint64_t bound = static_cast<std::uint64_t>(i) + 1;
    const std::uint64_t limit = gen.max() - (gen.max() % bound);
    std::uint64_t r = gen();
    while (r >= limit) r = gen();
    std::swap(perm[static_cast<std::size_t>(i)], perm[static_cast<std::size_t>(r % bound)]);
  }
  return perm;
}

std::vector<std::vector<Index>> batches(Index sample_count, const BatchPlan& plan, int epoch) {
  if (plan.batch_size <= 0) throw std::invalid_argument("batch size must be positive");
  if (sample_count <= 0) throw std::invalid_argument("no samples to batch");
  if (plan.batch_size > sample_count) {
    throw std::invalid_argument("batch size " + std::to_string(plan.batch_size) +
                                " exceeds sample count " + std::to_string(sample_count));
  }
  std::vector<Index> order;
  if (plan.shuffle) {
    // splitmix-style mix so neighbouring (seed, epoch) pairs give unrelated streams
    std::uint64_t s = plan.seed + 0x9e3779b97f4a7c15ULL * (static_cast<std::uint64_t>(epoch) + 1);
    s = (s ^ (s >> 30)) * 0xbf58476d1ce4e5b9ULL;
    s = (s ^ (s >> 27)) * 0x94d049bb133111ebULL;
    order = seeded_permutation(sample_count, s ^ (s >> 31));
  } else {
    order.resize(static_cast<std::size_t>(sample_count));
    std::iota(order.begin(), order.end(), Index{0});
  }
  std::vector<std::vector<Index>> out;
  for (Index start = 0; start < sample_count; start += plan.batch_size) {
    const Index stop = std::min(sample_count, start + plan.batch_size);
    out.emplace_back(order.begin() + start, order.begin() + stop);
  }
  return out;
}

}  // namespace sibp
