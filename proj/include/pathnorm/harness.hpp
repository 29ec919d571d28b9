#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "pathnorm/data.hpp"
#include "pathnorm/optim.hpp"
#include "pathnorm/rescale.hpp"

namespace pathnorm {

struct DataSpec {
  std::string kind = "mnist";  // "mnist" or "synthetic"
  std::string mnist_dir = "data/mnist";
  std::size_t train_limit = 10000;  // 0 keeps every row
  std::size_t test_limit = 0;
  SyntheticSpec synthetic;          // synthetic.n is the training size
  std::size_t synthetic_test = 1000;
};

struct InitSpec {
  std::string scheme = "balanced";         // "balanced" or "unbalanced"
  std::optional<std::size_t> unbalance_k;  // unset: half the hidden units
  std::uint64_t unbalance_seed = 7;
  UnbalanceParams unbalance;
};

struct ExperimentConfig {
  std::string name = "run";
  std::vector<std::size_t> architecture{784, 128, 128, 10};
  DataSpec data;
  OptimizerKind optimizer = OptimizerKind::kPathSgd;
  int alpha = 3;                // step size 10^-alpha
  std::vector<int> alpha_grid;  // non-empty: tune alpha before the final run
  double p = 2.0;
  double epsilon = 1e-8;
  InitSpec init;
  double dropout = 1.0;  // retain probability; 1 disables dropout
  std::size_t epochs = 30;
  std::size_t batch_size = 100;
  std::uint64_t seed = 1;          // weight initialization
  std::uint64_t shuffle_seed = 2;  // epoch permutations
  std::uint64_t dropout_seed = 3;  // dropout masks
  std::uint64_t split_seed = 4;    // validation holdout
  std::size_t validation_holdout = 2000;
  std::size_t tuning_epochs = 5;
  std::string output_dir = "runs/run";
  bool record_wall_time = true;  // false writes 0 in wall_s for byte-stable CSVs

  double step_size() const;
  /// Throws ConfigError on inconsistent values.
  void validate() const;
};

void to_json(nlohmann::json& j, const ExperimentConfig& c);
/// Missing keys keep their defaults; unknown keys are rejected.
void from_json(const nlohmann::json& j, ExperimentConfig& c);

ExperimentConfig load_config(const std::filesystem::path& path);

/// (train, test) for `spec`.
std::pair<Dataset, Dataset> load_datasets(const DataSpec& spec);

/// Initial weights for `config` on `g`.
WeightVector initial_weights(const ExperimentConfig& config, const NetworkGraph& g);

struct RunResult {
  std::vector<MetricRecord> records;   // epoch 0 is the initial state
  std::vector<double> epoch_seconds;   // training wall time per epoch, excluding evaluation
  WeightVector final_weights;
  bool diverged = false;
  std::size_t clamped_edges = 0;       // Path-SGD updates where gamma was exactly 0
};

/// Seeded epoch permutation `epoch` (1-based) over `n` rows. Every optimizer
/// sharing `shuffle_seed` sees the same batches.
std::vector<std::size_t> epoch_permutation(std::size_t n, std::uint64_t shuffle_seed, std::size_t epoch);

/// Shuffled minibatch training with per-epoch metrics. A non-finite loss,
/// gradient or weight marks the run diverged: the record for that epoch has
/// `inf` values and training stops.
RunResult run_training(const ExperimentConfig& config, const Dataset& train, const Dataset& test);

/// Same, starting from explicit weights instead of config.init.
RunResult run_training(const ExperimentConfig& config, const NetworkGraph& g, WeightVector w, const Dataset& train,
                       const Dataset& test);

struct GridCell {
  int alpha = 0;
  double best_error = 0.0;  // lowest validation error over epochs 1..budget
  std::size_t best_epoch = 0;
  bool diverged = false;
};

struct StepSizeSelection {
  int best_alpha = 0;
  std::vector<GridCell> grid;
};

/// Lowest validation error first, then earliest epoch, then smaller alpha.
/// Diverged cells are never picked; throws NumericError if all diverged.
int pick_step_size(const std::vector<GridCell>& grid);

/// Trains every alpha of config.alpha_grid for config.tuning_epochs epochs on
/// `train`, scoring each epoch on `validation`.
StepSizeSelection select_step_size(const ExperimentConfig& config, const Dataset& train, const Dataset& validation);

std::string format_grid(const std::vector<GridCell>& grid);

struct ExperimentOutcome {
  ExperimentConfig config;  // alpha holds the tuned value when tuning ran
  std::optional<StepSizeSelection> selection;
  RunResult run;
};

/// Loads data, tunes alpha if a grid is set, trains, and writes metrics.csv,
/// config.json, summary.csv (and grid.csv after tuning) to config.output_dir.
ExperimentOutcome run_experiment(ExperimentConfig config);

inline constexpr const char* kSummaryHeader = "run,optimizer,epoch,ce_train,err_train,err_test,wall_s";

struct CompareReport {
  std::string metric;
  std::vector<std::string> runs;
  std::vector<std::string> optimizers;
  std::vector<std::size_t> epochs;             // intersection of all runs' epochs
  std::vector<std::vector<double>> values;     // values[epoch_row][run]
  std::vector<MetricRecord> finals;            // last common epoch of each run
  std::vector<std::string> warnings;
};

/// Joins metrics.csv from every run directory on epoch. `metric` is one of
/// ce_train, err_train, err_test, wall_s.
CompareReport compare_report(const std::vector<std::filesystem::path>& run_dirs, const std::string& metric = "ce_train");

/// comparison.csv (epoch + one column per run) and summary.csv.
void write_compare_report(const CompareReport& report, const std::filesystem::path& out_dir);
std::string format_comparison(const CompareReport& report);
std::string format_summary(const CompareReport& report);

}  // namespace pathnorm
