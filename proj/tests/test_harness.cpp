#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <limits>
#include <sstream>

#include "pathnorm/error.hpp"
#include "pathnorm/harness.hpp"

using namespace pathnorm;
namespace fs = std::filesystem;

namespace {

fs::path scratch(const std::string& name) {
  const fs::path dir = fs::temp_directory_path() / "pathnorm_test_harness" / name;
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

std::string slurp(const fs::path& p) {
  std::ifstream f(p, std::ios::binary);
  std::ostringstream s;
  s << f.rdbuf();
  return s.str();
}

ExperimentConfig small_config() {
  ExperimentConfig c;
  c.architecture = {20, 12, 12, 4};
  c.data.kind = "synthetic";
  c.data.synthetic.n = 300;
  c.data.synthetic_test = 100;
  c.epochs = 3;
  c.batch_size = 20;
  c.alpha = 1;
  c.record_wall_time = false;
  c.validation_holdout = 100;
  c.tuning_epochs = 2;
  return c;
}

void write_run(const fs::path& dir, const std::vector<MetricRecord>& records) {
  fs::create_directories(dir);
  write_metrics(records, dir / "metrics.csv", nlohmann::json::object());
}

}  // namespace

TEST_CASE("zero epochs records only the initial state") {
  ExperimentConfig c = small_config();
  c.epochs = 0;
  const auto [train, test] = load_datasets(c.data);
  const RunResult r = run_training(c, train, test);
  REQUIRE(r.records.size() == 1);
  CHECK(r.records[0].epoch == 0);
  CHECK(r.records[0].optimizer == "pathsgd");
  CHECK(r.final_weights == initial_weights(c, build_layered(c.architecture)));
}

TEST_CASE("training is deterministic") {
  ExperimentConfig c = small_config();
  c.dropout = 0.5;
  const auto [train, test] = load_datasets(c.data);
  const RunResult a = run_training(c, train, test), b = run_training(c, train, test);
  CHECK(format_metrics(a.records) == format_metrics(b.records));
  CHECK(a.final_weights == b.final_weights);
  CHECK(a.records.size() == 4);
  CHECK(a.records.back().ce_train < a.records.front().ce_train);

  c.output_dir = scratch("det1").string();
  run_experiment(c);
  const std::string first = slurp(fs::path(c.output_dir) / "metrics.csv");
  c.output_dir = scratch("det2").string();
  run_experiment(c);
  CHECK(slurp(fs::path(c.output_dir) / "metrics.csv") == first);
  CHECK(fs::exists(fs::path(c.output_dir) / "config.json"));
  CHECK(fs::exists(fs::path(c.output_dir) / "summary.csv"));
}

TEST_CASE("path-sgd curves do not depend on the init's balance") {
  ExperimentConfig c = small_config();
  const auto [train, test] = load_datasets(c.data);
  const RunResult balanced = run_training(c, train, test);
  c.init.scheme = "unbalanced";
  const RunResult unbalanced = run_training(c, train, test);
  REQUIRE(balanced.records.size() == unbalanced.records.size());
  for (std::size_t i = 0; i < balanced.records.size(); ++i) {
    const double a = balanced.records[i].ce_train, b = unbalanced.records[i].ce_train;
    CHECK(std::abs(a - b) <= 1e-6 * std::abs(a));
  }
}

TEST_CASE("divergence stops a run") {
  ExperimentConfig c = small_config();
  c.optimizer = OptimizerKind::kSgd;
  c.alpha = 0;
  c.init.scheme = "unbalanced";
  c.init.unbalance.multiplier = 1e100;
  c.epochs = 10;
  const auto [train, test] = load_datasets(c.data);
  const RunResult r = run_training(c, train, test);
  CHECK(r.diverged);
  CHECK(r.records.back().diverged());
  CHECK(r.records.size() < 11);
}

TEST_CASE("pick_step_size") {
  CHECK(pick_step_size({{10, 0.5, 3, false}}) == 10);
  CHECK(pick_step_size({{1, 0.0, 1, true}, {3, 0.2, 5, false}}) == 3);
  // equal minima: earlier epoch wins, then smaller alpha
  CHECK(pick_step_size({{2, 0.1, 9, false}, {4, 0.1, 5, false}}) == 4);
  CHECK(pick_step_size({{4, 0.1, 5, false}, {2, 0.1, 5, false}}) == 2);
  CHECK(pick_step_size({{2, 0.1, 9, false}, {4, 0.3, 1, false}}) == 2);
  CHECK_THROWS_AS(pick_step_size({{1, 0, 1, true}, {2, 0, 1, true}}), NumericError);
  CHECK_THROWS_AS(pick_step_size({}), ConfigError);
}

TEST_CASE("select_step_size runs the grid") {
  ExperimentConfig c = small_config();
  c.alpha_grid = {0, 1, 6};
  const auto [train, test] = load_datasets(c.data);
  const auto [fit, val] = split_validation(train, c.validation_holdout, c.split_seed);
  const StepSizeSelection s = select_step_size(c, fit, val);
  REQUIRE(s.grid.size() == 3);
  CHECK(s.best_alpha == pick_step_size(s.grid));
  CHECK(s.best_alpha != 6);
  for (const GridCell& cell : s.grid) CHECK((cell.best_epoch >= 1 && cell.best_epoch <= c.tuning_epochs));
  CHECK(format_grid(s.grid).rfind("alpha,", 0) == 0);
}

TEST_CASE("compare_report") {
  const double inf = std::numeric_limits<double>::infinity();
  const fs::path root = scratch("compare");
  write_run(root / "sgd", {{0, "sgd", 2.3, 0.9, 0.9, 0}, {1, "sgd", 1.0, 0.3, 0.35, 1}, {2, "sgd", 0.5, 0.1, 0.2, 2}});
  write_run(root / "adagrad", {{0, "adagrad", 2.3, 0.9, 0.9, 0}, {1, "adagrad", inf, inf, inf, 1}});
  write_run(root / "pathsgd",
            {{0, "pathsgd", 2.3, 0.9, 0.9, 0}, {1, "pathsgd", 0.8, 0.2, 0.3, 1}, {2, "pathsgd", 0.4, 0.1, 0.2, 2}});

  SUBCASE("single run passes through") {
    const auto r = compare_report({root / "sgd"});
    CHECK(r.epochs == std::vector<std::size_t>{0, 1, 2});
    CHECK(format_comparison(r) == "epoch,sgd\n0,2.3\n1,1\n2,0.5\n");
    CHECK(r.warnings.empty());
  }
  SUBCASE("three runs, divergence kept, epochs intersected") {
    const auto r = compare_report({root / "sgd", root / "adagrad", root / "pathsgd"}, "err_train");
    CHECK(r.epochs == std::vector<std::size_t>{0, 1});
    CHECK(format_comparison(r) == "epoch,sgd,adagrad,pathsgd\n0,0.9,0.9,0.9\n1,0.3,inf,0.2\n");
    CHECK(r.warnings.size() == 2);
    CHECK(r.optimizers == std::vector<std::string>{"sgd", "adagrad", "pathsgd"});
    const std::string summary = format_summary(r);
    CHECK(summary.rfind(kSummaryHeader, 0) == 0);
    CHECK(summary.find("adagrad,adagrad,1,inf,inf,inf,1") != std::string::npos);

    write_compare_report(r, root / "out");
    CHECK(slurp(root / "out" / "comparison.csv") == format_comparison(r));
  }
  CHECK_THROWS_AS(compare_report({root / "sgd"}, "accuracy"), ConfigError);
  CHECK_THROWS_AS(compare_report({}), ConfigError);
}

TEST_CASE("config JSON") {
  ExperimentConfig c = small_config();
  c.alpha_grid = {1, 2, 3};
  c.init.scheme = "unbalanced";
  c.init.unbalance_k = 5;
  c.dropout = 0.5;
  const nlohmann::json j = c;
  const ExperimentConfig back = j.get<ExperimentConfig>();
  CHECK(nlohmann::json(back) == j);

  const auto parsed = nlohmann::json::parse(R"({"architecture": "784x64x10", "optimizer": "sgd", "alpha": 2})")
                          .get<ExperimentConfig>();
  CHECK(parsed.architecture == std::vector<std::size_t>{784, 64, 10});
  CHECK(parsed.optimizer == OptimizerKind::kSgd);
  CHECK(parsed.step_size() == doctest::Approx(0.01));
  CHECK(parsed.epochs == 30);

  CHECK_THROWS_AS(nlohmann::json::parse(R"({"learning_rate": 1})").get<ExperimentConfig>(), ConfigError);
  ExperimentConfig bad = small_config();
  bad.alpha = 11;
  CHECK_THROWS_AS(bad.validate(), ConfigError);
  bad = small_config();
  bad.batch_size = 0;
  CHECK_THROWS_AS(bad.validate(), ConfigError);
}
