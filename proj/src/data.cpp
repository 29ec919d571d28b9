#include "pathnorm/data.hpp"

#include <zlib.h>

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <memory>
#include <numeric>
#include <random>
#include <sstream>

#include "pathnorm/error.hpp"
#include "pathnorm/init.hpp"

namespace pathnorm {

Dataset subset(const Dataset& d, std::span<const std::size_t> indices) {
  Dataset out;
  out.name = d.name;
  out.dim = d.dim;
  out.classes = d.classes;
  out.features.reserve(indices.size() * d.dim);
  out.labels.reserve(indices.size());
  for (std::size_t i : indices) {
    if (i >= d.size()) throw InputError("row index " + std::to_string(i) + " out of range");
    const auto r = d.row(i);
    out.features.insert(out.features.end(), r.begin(), r.end());
    out.labels.push_back(d.labels[i]);
  }
  return out;
}

namespace {

struct GzCloser {
  void operator()(gzFile f) const { gzclose(f); }
};
using GzHandle = std::unique_ptr<std::remove_pointer_t<gzFile>, GzCloser>;

class IdxReader {
 public:
  explicit IdxReader(const std::filesystem::path& path) : path_(path), file_(gzopen(path.c_str(), "rb")) {
    if (!file_) throw IoError("cannot open " + path.string());
  }

  void read(void* dst, std::size_t n, const char* what) {
    auto* out = static_cast<unsigned char*>(dst);
    std::size_t done = 0;
    while (done < n) {
      const unsigned chunk = static_cast<unsigned>(std::min<std::size_t>(n - done, 1u << 30));
      const int got = gzread(file_.get(), out + done, chunk);
      if (got < 0) throw IoError("read error in " + path_.string());
      if (got == 0) {
        throw ParseError(path_.string() + ": truncated while reading " + what + " (needed " + std::to_string(n) +
                             " bytes, got " + std::to_string(done) + ")",
                         offset_ + done);
      }
      done += static_cast<std::size_t>(got);
    }
    offset_ += n;
  }

  std::uint32_t read_be32(const char* what) {
    unsigned char b[4];
    read(b, 4, what);
    return (std::uint32_t{b[0]} << 24) | (std::uint32_t{b[1]} << 16) | (std::uint32_t{b[2]} << 8) | b[3];
  }

  std::size_t offset() const { return offset_; }
  bool at_end() {
    unsigned char extra;
    return gzread(file_.get(), &extra, 1) == 0;
  }

 private:
  std::filesystem::path path_;
  GzHandle file_;
  std::size_t offset_ = 0;
};

}  // namespace

IdxTensor read_idx(const std::filesystem::path& path) {
  IdxReader in(path);
  IdxTensor t;
  t.magic = in.read_be32("magic number");
  const std::uint32_t type = (t.magic >> 8) & 0xff;
  const std::uint32_t ndims = t.magic & 0xff;
  if ((t.magic >> 16) != 0 || type != 0x08 || ndims == 0) {
    char buf[16];
    std::snprintf(buf, sizeof buf, "0x%08x", t.magic);
    throw ParseError(path.string() + ": bad IDX magic " + buf, 0);
  }
  std::size_t total = 1;
  for (std::uint32_t i = 0; i < ndims; ++i) {
    t.dims.push_back(in.read_be32("dimension size"));
    total *= t.dims.back();
  }
  t.data.resize(total);
  in.read(t.data.data(), total, "payload");
  if (!in.at_end()) throw ParseError(path.string() + ": trailing bytes after payload", in.offset());
  return t;
}

void write_idx(const std::filesystem::path& path, const IdxTensor& tensor, bool compress) {
  std::size_t total = 1;
  for (std::uint32_t d : tensor.dims) total *= d;
  if (total != tensor.data.size()) throw InputError("IDX payload size does not match dimensions");
  if ((tensor.magic & 0xff) != tensor.dims.size()) throw InputError("IDX magic does not match dimension count");

  std::string bytes;
  auto put32 = [&](std::uint32_t v) {
    for (int s = 24; s >= 0; s -= 8) bytes.push_back(static_cast<char>((v >> s) & 0xff));
  };
  put32(tensor.magic);
  for (std::uint32_t d : tensor.dims) put32(d);
  bytes.append(reinterpret_cast<const char*>(tensor.data.data()), tensor.data.size());

  if (compress) {
    GzHandle f(gzopen(path.c_str(), "wb9"));
    if (!f) throw IoError("cannot open " + path.string() + " for writing");
    if (gzwrite(f.get(), bytes.data(), static_cast<unsigned>(bytes.size())) != static_cast<int>(bytes.size()))
      throw IoError("write failed for " + path.string());
  } else {
    std::ofstream out(path, std::ios::binary);
    if (!out || !out.write(bytes.data(), static_cast<std::streamsize>(bytes.size())))
      throw IoError("write failed for " + path.string());
  }
}

Dataset load_mnist_idx(const std::filesystem::path& images, const std::filesystem::path& labels, std::size_t limit) {
  const IdxTensor img = read_idx(images);
  const IdxTensor lab = read_idx(labels);
  if (img.magic != kIdxImagesMagic) throw ParseError(images.string() + ": expected image magic 0x00000803", 0);
  if (lab.magic != kIdxLabelsMagic) throw ParseError(labels.string() + ": expected label magic 0x00000801", 0);
  if (img.dims[0] != lab.dims[0]) {
    throw InputError("image count " + std::to_string(img.dims[0]) + " does not match label count " +
                     std::to_string(lab.dims[0]));
  }
  std::size_t n = img.dims[0];
  if (limit > 0) n = std::min(n, limit);

  Dataset d;
  d.name = "mnist";
  d.dim = std::size_t{img.dims[1]} * img.dims[2];
  d.classes = 10;
  d.features.resize(n * d.dim);
  for (std::size_t i = 0; i < d.features.size(); ++i) d.features[i] = img.data[i] / 255.0;
  d.labels.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    if (lab.data[i] >= d.classes)
      throw InputError(labels.string() + ": label " + std::to_string(lab.data[i]) + " at row " + std::to_string(i));
    d.labels[i] = lab.data[i];
  }
  return d;
}

Dataset load_mnist_dir(const std::filesystem::path& dir, const std::string& split, std::size_t limit) {
  auto find = [&](const std::string& stem) {
    for (const char* suffix : {"", ".gz"}) {
      const auto p = dir / (stem + suffix);
      if (std::filesystem::exists(p)) return p;
    }
    throw IoError("no " + stem + "[.gz] in " + dir.string());
  };
  return load_mnist_idx(find(split + "-images-idx3-ubyte"), find(split + "-labels-idx1-ubyte"), limit);
}

Dataset make_synthetic(const SyntheticSpec& spec) {
  if (!(spec.label_noise >= 0.0 && spec.label_noise <= 1.0)) throw ConfigError("label_noise must be in [0, 1]");
  const NetworkGraph teacher = build_layered(spec.teacher_arch);
  if (teacher.outputs().size() < 2) throw ConfigError("synthetic teacher needs at least 2 outputs");
  const WeightVector tw = init_balanced(teacher, spec.seed);

  Dataset d;
  d.name = "synthetic";
  d.dim = spec.teacher_arch.front();
  d.classes = spec.teacher_arch.back();
  d.features.resize(spec.n * d.dim);
  d.labels.resize(spec.n);

  std::mt19937_64 rng(spec.seed ^ 0x5eedda7aULL);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::uniform_int_distribution<std::size_t> any_class(0, d.classes - 1);
  std::vector<double> centered(d.dim);
  for (std::size_t i = 0; i < spec.n; ++i) {
    for (std::size_t j = 0; j < d.dim; ++j) {
      d.features[i * d.dim + j] = unit(rng);
      centered[j] = d.features[i * d.dim + j] - 0.5;
    }
    const auto scores = forward(teacher, tw, centered);
    std::size_t label = static_cast<std::size_t>(std::max_element(scores.begin(), scores.end()) - scores.begin());
    if (spec.label_noise > 0.0 && unit(rng) < spec.label_noise) label = any_class(rng);
    d.labels[i] = label;
  }
  return d;
}

std::pair<Dataset, Dataset> split_validation(const Dataset& d, std::size_t n_holdout, std::uint64_t seed) {
  if (n_holdout >= d.size() && !(n_holdout == 0 && d.size() == 0)) {
    throw ConfigError("holdout of " + std::to_string(n_holdout) + " rows needs a dataset larger than " +
                      std::to_string(d.size()));
  }
  std::vector<std::size_t> perm(d.size());
  std::iota(perm.begin(), perm.end(), 0);
  std::mt19937_64 rng(seed);
  for (std::size_t i = perm.size(); i > 1; --i) {
    std::uniform_int_distribution<std::size_t> pick(0, i - 1);
    std::swap(perm[i - 1], perm[pick(rng)]);
  }
  std::vector<std::size_t> hold(perm.begin(), perm.begin() + static_cast<std::ptrdiff_t>(n_holdout));
  std::vector<std::size_t> keep(perm.begin() + static_cast<std::ptrdiff_t>(n_holdout), perm.end());
  std::sort(hold.begin(), hold.end());
  std::sort(keep.begin(), keep.end());
  return {subset(d, keep), subset(d, hold)};
}

bool MetricRecord::diverged() const {
  return !std::isfinite(ce_train) || !std::isfinite(err_train) || !std::isfinite(err_test);
}

std::string format_double(double x) {
  if (!std::isfinite(x)) return "inf";
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof buf, x);
  return std::string(buf, res.ptr);
}

std::string format_metrics(std::span<const MetricRecord> records) {
  std::string out = std::string(kMetricsHeader) + "\n";
  for (const MetricRecord& r : records) {
    out += std::to_string(r.epoch) + "," + r.optimizer + "," + format_double(r.ce_train) + "," +
           format_double(r.err_train) + "," + format_double(r.err_test) + "," + format_double(r.wall_seconds) + "\n";
  }
  return out;
}

void write_metrics(std::span<const MetricRecord> records, const std::filesystem::path& csv_path,
                   const nlohmann::json& config) {
  {
    std::ofstream out(csv_path, std::ios::binary);
    const std::string text = format_metrics(records);
    if (!out || !out.write(text.data(), static_cast<std::streamsize>(text.size())))
      throw IoError("cannot write metrics to " + csv_path.string());
  }
  const auto sidecar = csv_path.parent_path() / "config.json";
  std::ofstream out(sidecar, std::ios::binary);
  if (!out || !(out << config.dump(2) << '\n')) throw IoError("cannot write config sidecar " + sidecar.string());
}

namespace {

double parse_double_field(const std::string& s, std::size_t line) {
  if (s == "inf") return std::numeric_limits<double>::infinity();
  double v = 0.0;
  const auto res = std::from_chars(s.data(), s.data() + s.size(), v);
  if (res.ec != std::errc() || res.ptr != s.data() + s.size())
    throw InputError("bad number '" + s + "' on metrics line " + std::to_string(line));
  return v;
}

}  // namespace

std::vector<MetricRecord> parse_metrics(const std::string& text) {
  std::istringstream in(text);
  std::string line;
  if (!std::getline(in, line) || line != kMetricsHeader) throw InputError("metrics CSV header mismatch");
  std::vector<MetricRecord> out;
  std::size_t lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    std::vector<std::string> f;
    std::stringstream ss(line);
    std::string field;
    while (std::getline(ss, field, ',')) f.push_back(field);
    if (f.size() != 6) throw InputError("expected 6 fields on metrics line " + std::to_string(lineno));
    MetricRecord r;
    r.epoch = static_cast<std::size_t>(parse_double_field(f[0], lineno));
    r.optimizer = f[1];
    r.ce_train = parse_double_field(f[2], lineno);
    r.err_train = parse_double_field(f[3], lineno);
    r.err_test = parse_double_field(f[4], lineno);
    r.wall_seconds = parse_double_field(f[5], lineno);
    out.push_back(std::move(r));
  }
  return out;
}

std::vector<MetricRecord> read_metrics(const std::filesystem::path& csv_path) {
  std::ifstream in(csv_path, std::ios::binary);
  if (!in) throw IoError("cannot open " + csv_path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_metrics(ss.str());
}

}  // namespace pathnorm
