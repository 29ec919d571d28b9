#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "pathnorm/network.hpp"

namespace pathnorm {

/// In-memory classification dataset with features in [0, 1].
struct Dataset {
  std::string name;
  std::size_t dim = 0;
  std::size_t classes = 0;
  std::vector<double> features;  // row-major size() x dim
  std::vector<std::size_t> labels;

  std::size_t size() const noexcept { return labels.size(); }
  BatchView view() const { return {features, labels, dim}; }
  std::span<const double> row(std::size_t i) const { return std::span(features).subspan(i * dim, dim); }
};

/// Rows `indices` of `d`, in the given order.
Dataset subset(const Dataset& d, std::span<const std::size_t> indices);

/// Raw IDX tensor of unsigned bytes.
struct IdxTensor {
  std::uint32_t magic = 0;
  std::vector<std::uint32_t> dims;
  std::vector<std::uint8_t> data;
};

inline constexpr std::uint32_t kIdxImagesMagic = 0x00000803;
inline constexpr std::uint32_t kIdxLabelsMagic = 0x00000801;

/// Reads a big-endian IDX file of unsigned bytes; gzip-compressed files are
/// decompressed transparently. Throws ParseError with the failing byte
/// offset on a bad header or a short file, IoError if the file cannot be opened.
IdxTensor read_idx(const std::filesystem::path& path);

/// Writes an IDX file, gzip-compressed when `compress` is set.
void write_idx(const std::filesystem::path& path, const IdxTensor& tensor, bool compress = false);

/// Pairs an image file (magic 0x803) with a label file (magic 0x801). Pixels
/// are scaled by 1/255. `limit` > 0 keeps only the first `limit` examples.
Dataset load_mnist_idx(const std::filesystem::path& images, const std::filesystem::path& labels,
                       std::size_t limit = 0);

/// Loads `<split>-images-idx3-ubyte` / `<split>-labels-idx1-ubyte` from `dir`
/// (a `.gz` suffix is tried too); `split` is "train" or "t10k".
Dataset load_mnist_dir(const std::filesystem::path& dir, const std::string& split, std::size_t limit = 0);

struct SyntheticSpec {
  std::vector<std::size_t> teacher_arch{20, 16, 4};
  std::size_t n = 1000;
  double label_noise = 0.0;  // probability of replacing a label by a uniform draw
  std::uint64_t seed = 1;
};

/// Inputs uniform in [0,1]^D; the label is the argmax of a balanced random
/// teacher network evaluated at x - 0.5.
Dataset make_synthetic(const SyntheticSpec& spec);

/// Uniformly random disjoint split into (train, validation) with
/// `n_holdout` validation rows. Both parts keep the original row order.
std::pair<Dataset, Dataset> split_validation(const Dataset& d, std::size_t n_holdout, std::uint64_t seed);

/// One row of a learning curve. Non-finite values mark divergence and are
/// written as `inf`.
struct MetricRecord {
  std::size_t epoch = 0;
  std::string optimizer;
  double ce_train = 0.0;
  double err_train = 0.0;
  double err_test = 0.0;
  double wall_seconds = 0.0;

  bool diverged() const;
  friend bool operator==(const MetricRecord&, const MetricRecord&) = default;
};

inline constexpr const char* kMetricsHeader = "epoch,optimizer,ce_train,err_train,err_test,wall_s";

/// CSV text for `records`, header included.
std::string format_metrics(std::span<const MetricRecord> records);

/// Writes `csv_path` and a `config.json` sidecar holding `config` next to it.
void write_metrics(std::span<const MetricRecord> records, const std::filesystem::path& csv_path,
                   const nlohmann::json& config);

std::vector<MetricRecord> read_metrics(const std::filesystem::path& csv_path);
std::vector<MetricRecord> parse_metrics(const std::string& text);

/// Shortest round-trip representation; non-finite values become "inf".
std::string format_double(double x);

}  // namespace pathnorm
