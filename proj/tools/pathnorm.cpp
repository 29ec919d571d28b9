#include <CLI11.hpp>
#include <json.hpp>

#include <cstdio>
#include <iostream>
#include <optional>

#include "pathnorm/error.hpp"
#include "pathnorm/harness.hpp"
#include "pathnorm/init.hpp"
#include "pathnorm/pathnorms.hpp"

using namespace pathnorm;
using nlohmann::json;

namespace {

struct TrainArgs {
  std::string config_path;
  std::optional<std::string> arch, opt, init, data, mnist_dir, out, name;
  std::optional<int> lr_exp;
  std::vector<int> alpha_grid;
  std::optional<double> p, dropout;
  std::optional<std::size_t> unbalance_k, epochs, batch_size, train_limit;
  std::optional<std::uint64_t> seed, unbalance_seed, shuffle_seed;
  bool no_wall_time = false;
};

ExperimentConfig resolve(const TrainArgs& a) {
  ExperimentConfig c = a.config_path.empty() ? ExperimentConfig{} : load_config(a.config_path);
  if (a.name) c.name = *a.name;
  if (a.arch) c.architecture = parse_arch(*a.arch);
  if (a.opt) c.optimizer = parse_optimizer_kind(*a.opt);
  if (a.lr_exp) c.alpha = *a.lr_exp;
  if (!a.alpha_grid.empty()) c.alpha_grid = a.alpha_grid;
  if (a.p) c.p = *a.p;
  if (a.init) c.init.scheme = *a.init;
  if (a.unbalance_k) {
    c.init.scheme = "unbalanced";
    c.init.unbalance_k = *a.unbalance_k;
  }
  if (a.unbalance_seed) c.init.unbalance_seed = *a.unbalance_seed;
  if (a.dropout) c.dropout = *a.dropout;
  if (a.seed) c.seed = *a.seed;
  if (a.shuffle_seed) c.shuffle_seed = *a.shuffle_seed;
  if (a.data) c.data.kind = *a.data;
  if (a.mnist_dir) c.data.mnist_dir = *a.mnist_dir;
  if (a.train_limit) c.data.train_limit = *a.train_limit;
  if (a.epochs) c.epochs = *a.epochs;
  if (a.batch_size) c.batch_size = *a.batch_size;
  if (a.out) c.output_dir = *a.out;
  if (a.no_wall_time) c.record_wall_time = false;
  c.validate();
  return c;
}

int run_train(const TrainArgs& args) {
  const ExperimentOutcome outcome = run_experiment(resolve(args));
  if (outcome.selection) {
    std::cerr << format_grid(outcome.selection->grid);
    std::cerr << "selected alpha=" << outcome.selection->best_alpha << "\n";
  }
  std::cout << format_metrics(outcome.run.records);
  if (outcome.run.diverged) std::cerr << "run diverged; metrics end with an inf row\n";
  if (outcome.run.clamped_edges > 0)
    std::cerr << outcome.run.clamped_edges << " edge updates had gamma == 0\n";
  return 0;
}

struct NormsArgs {
  std::string graph, arch, weights;
  std::optional<std::uint64_t> init_seed;
  double p = 2.0;
};

int run_norms(const NormsArgs& a) {
  if (a.graph.empty() == a.arch.empty()) throw ConfigError("give exactly one of --graph or --arch");
  const NetworkGraph g = a.graph.empty() ? build_layered(parse_arch(a.arch)) : read_graph_file(a.graph);
  WeightVector w;
  if (!a.weights.empty()) {
    w = read_weights_file(a.weights, g);
  } else if (a.init_seed) {
    w = init_balanced(g, *a.init_seed);
  } else {
    throw ConfigError("give --weights or --init-seed");
  }
  const json out = {{"p", a.p},
                    {"edges", g.num_edges()},
                    {"depth", g.depth()},
                    {"mu_p_p", group_norm(g, w, {a.p, a.p})},
                    {"mu_p_inf", max_norm(g, w, a.p)},
                    {"phi_p", path_norm_dp(g, w, a.p)}};
  std::cout << out.dump(2) << "\n";
  return 0;
}

struct CompareArgs {
  std::vector<std::string> dirs;
  std::string out, metric = "ce_train";
};

int run_compare(const CompareArgs& a) {
  std::vector<std::filesystem::path> dirs(a.dirs.begin(), a.dirs.end());
  const CompareReport report = compare_report(dirs, a.metric);
  for (const auto& w : report.warnings) std::cerr << "warning: " << w << "\n";
  if (!a.out.empty()) write_compare_report(report, a.out);
  std::cout << format_comparison(report) << "\n" << format_summary(report);
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Path-SGD experiments on RELU networks"};
  app.require_subcommand(1);

  TrainArgs train;
  auto* t = app.add_subcommand("train", "train one configuration and write metrics.csv, config.json, summary.csv");
  t->add_option("--config", train.config_path, "JSON config; flags below override it")->check(CLI::ExistingFile);
  t->add_option("--name", train.name, "run name used in summary.csv");
  t->add_option("--arch", train.arch, "layer sizes, e.g. 784x128x128x10");
  t->add_option("--opt", train.opt, "sgd | adagrad | pathsgd");
  t->add_option("--lr-exp", train.lr_exp, "alpha in step size 10^-alpha");
  t->add_option("--alpha-grid", train.alpha_grid, "tune alpha over these values first")->delimiter(',');
  t->add_option("--p", train.p, "path-norm exponent for Path-SGD");
  t->add_option("--init", train.init, "balanced | unbalanced");
  t->add_option("--init-unbalance", train.unbalance_k, "unbalanced init with this many rescaled units");
  t->add_option("--unbalance-seed", train.unbalance_seed);
  t->add_option("--dropout", train.dropout, "retain probability, 1 disables dropout");
  t->add_option("--seed", train.seed, "weight init seed");
  t->add_option("--shuffle-seed", train.shuffle_seed);
  t->add_option("--data", train.data, "mnist | synthetic");
  t->add_option("--mnist-dir", train.mnist_dir);
  t->add_option("--train-limit", train.train_limit, "keep the first N training rows, 0 keeps all");
  t->add_option("--epochs", train.epochs);
  t->add_option("--batch-size", train.batch_size);
  t->add_option("--out", train.out, "output directory");
  t->add_flag("--no-wall-time", train.no_wall_time, "write 0 in wall_s so reruns are byte-identical");

  NormsArgs norms;
  auto* n = app.add_subcommand("norms", "group norms and path norm of a weight vector, as JSON");
  n->add_option("--graph", norms.graph, "graph file")->check(CLI::ExistingFile);
  n->add_option("--arch", norms.arch, "layered architecture instead of a graph file");
  n->add_option("--weights", norms.weights, "one weight per line in edge-id order")->check(CLI::ExistingFile);
  n->add_option("--init-seed", norms.init_seed, "use a balanced init instead of --weights");
  n->add_option("--p", norms.p, "exponent, >= 1");

  CompareArgs cmp;
  auto* c = app.add_subcommand("compare", "join metrics.csv of several runs on epoch");
  c->add_option("dirs", cmp.dirs, "run directories")->required()->check(CLI::ExistingDirectory);
  c->add_option("--out", cmp.out, "write comparison.csv and summary.csv here");
  c->add_option("--metric", cmp.metric, "ce_train | err_train | err_test | wall_s");

  CLI11_PARSE(app, argc, argv);

  try {
    if (t->parsed()) return run_train(train);
    if (n->parsed()) return run_norms(norms);
    return run_compare(cmp);
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return 2;
  } catch (const InputError& e) {
    std::cerr << "input error: " << e.what() << "\n";
    return 2;
  } catch (const ParseError& e) {
    std::cerr << "parse error: " << e.what() << " (byte " << e.offset() << ")\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
}
