#include "pathnorm/harness.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <fstream>
#include <iostream>
#include <map>
#include <numeric>
#include <random>
#include <set>
#include <tuple>

#include "pathnorm/error.hpp"
#include "pathnorm/init.hpp"
#include "pathnorm/network.hpp"

namespace pathnorm {

using nlohmann::json;

double ExperimentConfig::step_size() const { return std::pow(10.0, -static_cast<double>(alpha)); }

void ExperimentConfig::validate() const {
  if (architecture.size() < 2) throw ConfigError("architecture needs at least two layers");
  for (std::size_t s : architecture)
    if (s == 0) throw ConfigError("architecture layer sizes must be positive");
  if (batch_size == 0) throw ConfigError("batch_size must be >= 1");
  if (alpha < 0 || alpha > 10) throw ConfigError("alpha must be an integer in [0, 10]");
  for (int a : alpha_grid)
    if (a < 0 || a > 10) throw ConfigError("alpha grid entries must be integers in [0, 10]");
  if (!alpha_grid.empty() && tuning_epochs == 0) throw ConfigError("tuning_epochs must be >= 1 when tuning");
  if (!(p >= 1.0)) throw ConfigError("p must be >= 1");
  if (!(epsilon >= 0.0)) throw ConfigError("epsilon must be non-negative");
  if (!(dropout > 0.0 && dropout <= 1.0)) throw ConfigError("dropout retain probability must be in (0, 1]");
  if (init.scheme != "balanced" && init.scheme != "unbalanced")
    throw ConfigError("init scheme must be 'balanced' or 'unbalanced', got '" + init.scheme + "'");
  if (data.kind != "mnist" && data.kind != "synthetic")
    throw ConfigError("data kind must be 'mnist' or 'synthetic', got '" + data.kind + "'");
}

namespace {

void check_keys(const json& j, std::initializer_list<const char*> allowed, const std::string& where) {
  if (!j.is_object()) throw ConfigError(where + " must be a JSON object");
  for (const auto& [key, _] : j.items()) {
    if (std::none_of(allowed.begin(), allowed.end(), [&](const char* a) { return key == a; }))
      throw ConfigError("unknown key '" + key + "' in " + where);
  }
}

template <class T>
void get_if(const json& j, const char* key, T& out) {
  if (auto it = j.find(key); it != j.end()) {
    try {
      out = it->get<T>();
    } catch (const json::exception& e) {
      throw ConfigError(std::string("bad value for '") + key + "': " + e.what());
    }
  }
}

std::vector<std::size_t> arch_from_json(const json& j) {
  if (j.is_string()) return parse_arch(j.get<std::string>());
  try {
    return j.get<std::vector<std::size_t>>();
  } catch (const json::exception&) {
    throw ConfigError("architecture must be a string like 784x128x10 or an array of sizes");
  }
}

}  // namespace

void to_json(json& j, const ExperimentConfig& c) {
  j = json{
      {"name", c.name},
      {"architecture", format_arch(c.architecture)},
      {"data",
       {{"kind", c.data.kind},
        {"mnist_dir", c.data.mnist_dir},
        {"train_limit", c.data.train_limit},
        {"test_limit", c.data.test_limit},
        {"synthetic",
         {{"teacher_arch", format_arch(c.data.synthetic.teacher_arch)},
          {"n", c.data.synthetic.n},
          {"label_noise", c.data.synthetic.label_noise},
          {"seed", c.data.synthetic.seed}}},
        {"synthetic_test", c.data.synthetic_test}}},
      {"optimizer", std::string(to_string(c.optimizer))},
      {"alpha", c.alpha},
      {"alpha_grid", c.alpha_grid},
      {"p", c.p},
      {"epsilon", c.epsilon},
      {"init",
       {{"scheme", c.init.scheme},
        {"unbalance_k", c.init.unbalance_k ? json(*c.init.unbalance_k) : json(nullptr)},
        {"unbalance_seed", c.init.unbalance_seed},
        {"lognormal_mu", c.init.unbalance.lognormal_mu},
        {"lognormal_sigma", c.init.unbalance.lognormal_sigma},
        {"multiplier", c.init.unbalance.multiplier}}},
      {"dropout", c.dropout},
      {"epochs", c.epochs},
      {"batch_size", c.batch_size},
      {"seed", c.seed},
      {"shuffle_seed", c.shuffle_seed},
      {"dropout_seed", c.dropout_seed},
      {"split_seed", c.split_seed},
      {"validation_holdout", c.validation_holdout},
      {"tuning_epochs", c.tuning_epochs},
      {"output_dir", c.output_dir},
      {"record_wall_time", c.record_wall_time},
  };
}

void from_json(const json& j, ExperimentConfig& c) {
  check_keys(j,
             {"name", "architecture", "data", "optimizer", "alpha", "alpha_grid", "p", "epsilon", "init", "dropout",
              "epochs", "batch_size", "seed", "shuffle_seed", "dropout_seed", "split_seed", "validation_holdout",
              "tuning_epochs", "output_dir", "record_wall_time", "provenance"},
             "config");
  get_if(j, "name", c.name);
  if (auto it = j.find("architecture"); it != j.end()) c.architecture = arch_from_json(*it);
  if (auto it = j.find("data"); it != j.end()) {
    check_keys(*it, {"kind", "mnist_dir", "train_limit", "test_limit", "synthetic", "synthetic_test"}, "data");
    get_if(*it, "kind", c.data.kind);
    get_if(*it, "mnist_dir", c.data.mnist_dir);
    get_if(*it, "train_limit", c.data.train_limit);
    get_if(*it, "test_limit", c.data.test_limit);
    get_if(*it, "synthetic_test", c.data.synthetic_test);
    if (auto s = it->find("synthetic"); s != it->end()) {
      check_keys(*s, {"teacher_arch", "n", "label_noise", "seed"}, "data.synthetic");
      if (auto a = s->find("teacher_arch"); a != s->end()) c.data.synthetic.teacher_arch = arch_from_json(*a);
      get_if(*s, "n", c.data.synthetic.n);
      get_if(*s, "label_noise", c.data.synthetic.label_noise);
      get_if(*s, "seed", c.data.synthetic.seed);
    }
  }
  if (auto it = j.find("optimizer"); it != j.end()) c.optimizer = parse_optimizer_kind(it->get<std::string>());
  get_if(j, "alpha", c.alpha);
  get_if(j, "alpha_grid", c.alpha_grid);
  get_if(j, "p", c.p);
  get_if(j, "epsilon", c.epsilon);
  if (auto it = j.find("init"); it != j.end()) {
    check_keys(*it, {"scheme", "unbalance_k", "unbalance_seed", "lognormal_mu", "lognormal_sigma", "multiplier"},
               "init");
    get_if(*it, "scheme", c.init.scheme);
    if (auto k = it->find("unbalance_k"); k != it->end()) {
      if (k->is_null()) {
        c.init.unbalance_k.reset();
      } else {
        std::size_t value = 0;
        get_if(*it, "unbalance_k", value);
        c.init.unbalance_k = value;
      }
    }
    get_if(*it, "unbalance_seed", c.init.unbalance_seed);
    get_if(*it, "lognormal_mu", c.init.unbalance.lognormal_mu);
    get_if(*it, "lognormal_sigma", c.init.unbalance.lognormal_sigma);
    get_if(*it, "multiplier", c.init.unbalance.multiplier);
  }
  get_if(j, "dropout", c.dropout);
  get_if(j, "epochs", c.epochs);
  get_if(j, "batch_size", c.batch_size);
  get_if(j, "seed", c.seed);
  get_if(j, "shuffle_seed", c.shuffle_seed);
  get_if(j, "dropout_seed", c.dropout_seed);
  get_if(j, "split_seed", c.split_seed);
  get_if(j, "validation_holdout", c.validation_holdout);
  get_if(j, "tuning_epochs", c.tuning_epochs);
  get_if(j, "output_dir", c.output_dir);
  get_if(j, "record_wall_time", c.record_wall_time);
}

ExperimentConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open config " + path.string());
  json j;
  try {
    in >> j;
  } catch (const json::parse_error& e) {
    throw ConfigError("config " + path.string() + " is not valid JSON: " + e.what());
  }
  ExperimentConfig c = j.get<ExperimentConfig>();
  c.validate();
  return c;
}

std::pair<Dataset, Dataset> load_datasets(const DataSpec& spec) {
  if (spec.kind == "mnist") {
    return {load_mnist_dir(spec.mnist_dir, "train", spec.train_limit),
            load_mnist_dir(spec.mnist_dir, "t10k", spec.test_limit)};
  }
  if (spec.kind == "synthetic") {
    SyntheticSpec all = spec.synthetic;
    all.n = spec.synthetic.n + spec.synthetic_test;
    const Dataset full = make_synthetic(all);
    std::vector<std::size_t> tr(spec.synthetic.n), te(spec.synthetic_test);
    std::iota(tr.begin(), tr.end(), 0);
    std::iota(te.begin(), te.end(), spec.synthetic.n);
    return {subset(full, tr), subset(full, te)};
  }
  throw ConfigError("unknown data kind '" + spec.kind + "'");
}

WeightVector initial_weights(const ExperimentConfig& config, const NetworkGraph& g) {
  if (config.init.scheme == "balanced") return init_balanced(g, config.seed);
  const std::size_t k = config.init.unbalance_k.value_or(g.hidden().size() / 2);
  return init_unbalanced(g, config.seed, k, config.init.unbalance_seed, config.init.unbalance);
}

std::vector<std::size_t> epoch_permutation(std::size_t n, std::uint64_t shuffle_seed, std::size_t epoch) {
  std::vector<std::size_t> perm(n);
  std::iota(perm.begin(), perm.end(), 0);
  std::mt19937_64 rng(shuffle_seed * 0x9e3779b97f4a7c15ULL + epoch);
  for (std::size_t i = n; i > 1; --i) {
    std::uniform_int_distribution<std::size_t> pick(0, i - 1);
    std::swap(perm[i - 1], perm[pick(rng)]);
  }
  return perm;
}

namespace {

MetricRecord measure(const NetworkGraph& g, const WeightVector& w, const Dataset& train, const Dataset& test,
                     const ForwardOptions& opts, std::size_t epoch, const std::string& optimizer, double wall) {
  MetricRecord r;
  r.epoch = epoch;
  r.optimizer = optimizer;
  r.wall_seconds = wall;
  try {
    const LossReport tr = evaluate(g, w, train.view(), opts);
    const LossReport te = evaluate(g, w, test.view(), opts);
    r.ce_train = tr.loss;
    r.err_train = tr.zero_one_error;
    r.err_test = te.zero_one_error;
  } catch (const NumericError&) {
    r.ce_train = r.err_train = r.err_test = std::numeric_limits<double>::infinity();
  }
  return r;
}

bool all_finite(std::span<const double> v) {
  return std::all_of(v.begin(), v.end(), [](double x) { return std::isfinite(x); });
}

}  // namespace

RunResult run_training(const ExperimentConfig& config, const NetworkGraph& g, WeightVector w, const Dataset& train,
                       const Dataset& test) {
  config.validate();
  check_weights(g, w);
  if (train.size() == 0 || test.size() == 0) throw InputError("training and test sets must be non-empty");
  if (train.dim != g.inputs().size() || test.dim != g.inputs().size())
    throw ConfigError("dataset dimension does not match the network's input layer");
  if (train.classes != g.outputs().size()) throw ConfigError("dataset class count does not match the output layer");

  const LevelSets levels = compute_levels(g);
  OptimizerState opt = make_optimizer(config.optimizer, config.step_size(), g.num_edges(), config.p, config.epsilon);
  const ForwardOptions eval_opts = inference_options(config.dropout);
  const std::string opt_name(to_string(config.optimizer));

  RunResult result;
  double wall_total = 0.0;
  auto wall_field = [&] { return config.record_wall_time ? wall_total : 0.0; };

  result.records.push_back(measure(g, w, train, test, eval_opts, 0, opt_name, 0.0));
  result.diverged = result.records.back().diverged();

  const std::size_t dim = train.dim;
  std::vector<double> inputs;
  std::vector<std::size_t> labels;
  std::uint64_t step = 0;

  for (std::size_t epoch = 1; epoch <= config.epochs && !result.diverged; ++epoch) {
    const auto perm = epoch_permutation(train.size(), config.shuffle_seed, epoch);
    const auto t0 = std::chrono::steady_clock::now();
    for (std::size_t first = 0; first < perm.size() && !result.diverged; first += config.batch_size) {
      const std::size_t count = std::min(config.batch_size, perm.size() - first);
      inputs.resize(count * dim);
      labels.resize(count);
      for (std::size_t b = 0; b < count; ++b) {
        const auto r = train.row(perm[first + b]);
        std::copy(r.begin(), r.end(), inputs.begin() + static_cast<std::ptrdiff_t>(b * dim));
        labels[b] = train.labels[perm[first + b]];
      }
      const BatchView batch{inputs, labels, dim};
      try {
        LossAndGradient lg = config.dropout < 1.0
                                 ? apply_dropout(draw_dropout_mask(g, config.dropout, config.dropout_seed, step), g, w,
                                                 batch)
                                 : loss_and_grad(g, w, batch);
        if (!std::isfinite(lg.report.loss)) {
          result.diverged = true;
          break;
        }
        apply_step(g, levels, opt, w, lg.gradient);
      } catch (const NumericError&) {
        result.diverged = true;
        break;
      }
      if (!all_finite(w)) result.diverged = true;
      ++step;
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    result.epoch_seconds.push_back(secs);
    wall_total += secs;

    if (result.diverged) {
      const double inf = std::numeric_limits<double>::infinity();
      result.records.push_back({epoch, opt_name, inf, inf, inf, wall_field()});
      break;
    }
    result.records.push_back(measure(g, w, train, test, eval_opts, epoch, opt_name, wall_field()));
    result.diverged = result.records.back().diverged();
  }
  result.clamped_edges = opt.clamped_edges;
  result.final_weights = std::move(w);
  return result;
}

RunResult run_training(const ExperimentConfig& config, const Dataset& train, const Dataset& test) {
  config.validate();
  const NetworkGraph g = build_layered(config.architecture);
  return run_training(config, g, initial_weights(config, g), train, test);
}

int pick_step_size(const std::vector<GridCell>& grid) {
  if (grid.empty()) throw ConfigError("step-size grid is empty");
  const GridCell* best = nullptr;
  for (const GridCell& c : grid) {
    if (c.diverged) continue;
    if (!best || std::tie(c.best_error, c.best_epoch, c.alpha) < std::tie(best->best_error, best->best_epoch, best->alpha))
      best = &c;
  }
  if (!best) {
    std::string names;
    for (const GridCell& c : grid) names += (names.empty() ? "" : ",") + std::to_string(c.alpha);
    throw NumericError("every step size diverged for alpha grid {" + names + "}");
  }
  return best->alpha;
}

StepSizeSelection select_step_size(const ExperimentConfig& config, const Dataset& train, const Dataset& validation) {
  if (config.alpha_grid.empty()) throw ConfigError("step-size grid is empty");
  StepSizeSelection sel;
  const NetworkGraph g = build_layered(config.architecture);
  for (int alpha : config.alpha_grid) {
    ExperimentConfig c = config;
    c.alpha = alpha;
    c.alpha_grid.clear();
    c.epochs = config.tuning_epochs;
    const RunResult run = run_training(c, g, initial_weights(c, g), train, validation);
    GridCell cell{alpha, std::numeric_limits<double>::infinity(), 0, run.diverged};
    for (const MetricRecord& r : run.records) {
      if (r.epoch == 0 || r.diverged()) continue;
      if (r.err_test < cell.best_error) {
        cell.best_error = r.err_test;
        cell.best_epoch = r.epoch;
      }
    }
    sel.grid.push_back(cell);
  }
  sel.best_alpha = pick_step_size(sel.grid);
  return sel;
}

std::string format_grid(const std::vector<GridCell>& grid) {
  std::string out = "alpha,best_val_err,best_epoch,diverged\n";
  for (const GridCell& c : grid) {
    out += std::to_string(c.alpha) + "," + format_double(c.best_error) + "," + std::to_string(c.best_epoch) + "," +
           (c.diverged ? "1" : "0") + "\n";
  }
  return out;
}

namespace {

void write_text(const std::filesystem::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out || !out.write(text.data(), static_cast<std::streamsize>(text.size())))
    throw IoError("cannot write " + path.string());
}

std::string summary_row(const std::string& run, const MetricRecord& r) {
  return run + "," + r.optimizer + "," + std::to_string(r.epoch) + "," + format_double(r.ce_train) + "," +
         format_double(r.err_train) + "," + format_double(r.err_test) + "," + format_double(r.wall_seconds) + "\n";
}

}  // namespace

ExperimentOutcome run_experiment(ExperimentConfig config) {
  config.validate();
  ExperimentOutcome outcome;
  const auto [train, test] = load_datasets(config.data);
  if (config.architecture.front() != train.dim || config.architecture.back() != train.classes) {
    throw ConfigError("architecture " + format_arch(config.architecture) + " does not fit data with " +
                      std::to_string(train.dim) + " features and " + std::to_string(train.classes) + " classes");
  }
  const NetworkGraph g = build_layered(config.architecture);

  if (!config.alpha_grid.empty()) {
    const auto [fit, validation] = split_validation(train, config.validation_holdout, config.split_seed);
    outcome.selection = select_step_size(config, fit, validation);
    config.alpha = outcome.selection->best_alpha;
  }
  outcome.run = run_training(config, g, initial_weights(config, g), train, test);
  outcome.config = config;

  const std::filesystem::path dir = config.output_dir;
  std::filesystem::create_directories(dir);
  json sidecar = config;
  sidecar["provenance"] = {{"pixel_normalization", config.data.kind == "mnist" ? "byte/255" : "uniform [0,1]"},
                           {"train_rows", train.size()},
                           {"test_rows", test.size()},
                           {"diverged", outcome.run.diverged},
                           {"clamped_edges", outcome.run.clamped_edges}};
  write_metrics(outcome.run.records, dir / "metrics.csv", sidecar);
  write_text(dir / "summary.csv", std::string(kSummaryHeader) + "\n" + summary_row(config.name, outcome.run.records.back()));
  if (outcome.selection) write_text(dir / "grid.csv", format_grid(outcome.selection->grid));
  return outcome;
}

namespace {

double metric_value(const MetricRecord& r, const std::string& metric) {
  if (metric == "ce_train") return r.ce_train;
  if (metric == "err_train") return r.err_train;
  if (metric == "err_test") return r.err_test;
  if (metric == "wall_s") return r.wall_seconds;
  throw ConfigError("unknown metric '" + metric + "'");
}

std::string run_name(const std::filesystem::path& dir) {
  auto name = dir.filename().string();
  if (name.empty() || name == ".") name = dir.parent_path().filename().string();
  return name;
}

}  // namespace

CompareReport compare_report(const std::vector<std::filesystem::path>& run_dirs, const std::string& metric) {
  if (run_dirs.empty()) throw ConfigError("compare needs at least one run directory");
  metric_value(MetricRecord{}, metric);
  CompareReport report;
  report.metric = metric;

  std::vector<std::map<std::size_t, MetricRecord>> by_epoch;
  for (const auto& dir : run_dirs) {
    const auto records = read_metrics(dir / "metrics.csv");
    std::map<std::size_t, MetricRecord> m;
    for (const auto& r : records) m[r.epoch] = r;
    report.runs.push_back(run_name(dir));
    report.optimizers.push_back(records.empty() ? "" : records.front().optimizer);
    by_epoch.push_back(std::move(m));
  }

  std::set<std::size_t> common;
  for (const auto& [e, _] : by_epoch.front()) common.insert(e);
  for (std::size_t i = 1; i < by_epoch.size(); ++i) {
    std::set<std::size_t> next;
    for (std::size_t e : common)
      if (by_epoch[i].count(e)) next.insert(e);
    common = std::move(next);
  }
  for (std::size_t i = 0; i < by_epoch.size(); ++i) {
    if (by_epoch[i].size() != common.size()) {
      report.warnings.push_back("run '" + report.runs[i] + "' has " + std::to_string(by_epoch[i].size()) +
                                " epochs; aligned on the " + std::to_string(common.size()) + " shared epochs");
    }
  }

  report.epochs.assign(common.begin(), common.end());
  for (std::size_t e : report.epochs) {
    std::vector<double> row;
    for (const auto& m : by_epoch) row.push_back(metric_value(m.at(e), metric));
    report.values.push_back(std::move(row));
  }
  if (!report.epochs.empty())
    for (const auto& m : by_epoch) report.finals.push_back(m.at(report.epochs.back()));
  return report;
}

std::string format_comparison(const CompareReport& report) {
  std::string out = "epoch";
  for (const auto& r : report.runs) out += "," + r;
  out += "\n";
  for (std::size_t i = 0; i < report.epochs.size(); ++i) {
    out += std::to_string(report.epochs[i]);
    for (double v : report.values[i]) out += "," + format_double(v);
    out += "\n";
  }
  return out;
}

std::string format_summary(const CompareReport& report) {
  std::string out = std::string(kSummaryHeader) + "\n";
  for (std::size_t i = 0; i < report.finals.size(); ++i) out += summary_row(report.runs[i], report.finals[i]);
  return out;
}

void write_compare_report(const CompareReport& report, const std::filesystem::path& out_dir) {
  std::filesystem::create_directories(out_dir);
  write_text(out_dir / "comparison.csv", format_comparison(report));
  write_text(out_dir / "summary.csv", format_summary(report));
}

}  // namespace pathnorm
