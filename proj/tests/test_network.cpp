#include <doctest.h>

#include <cmath>
#include <random>

#include "oracles.hpp"
#include "pathnorm/error.hpp"
#include "pathnorm/init.hpp"
#include "pathnorm/network.hpp"
#include "pathnorm/rescale.hpp"

using namespace pathnorm;

namespace {

struct OwnedBatch {
  std::vector<double> inputs;
  std::vector<std::size_t> labels;
  std::size_t dim;
  BatchView view() const { return {inputs, labels, dim}; }
  std::vector<std::vector<double>> rows() const {
    std::vector<std::vector<double>> r;
    for (std::size_t i = 0; i < labels.size(); ++i)
      r.emplace_back(inputs.begin() + static_cast<std::ptrdiff_t>(i * dim),
                     inputs.begin() + static_cast<std::ptrdiff_t>((i + 1) * dim));
    return r;
  }
};

OwnedBatch random_batch(const NetworkGraph& g, std::size_t n, std::mt19937_64& rng) {
  OwnedBatch b{oracle::uniform_weights(n * g.inputs().size(), -1.0, 1.0, rng), {}, g.inputs().size()};
  std::uniform_int_distribution<std::size_t> cls(0, g.outputs().size() - 1);
  for (std::size_t i = 0; i < n; ++i) b.labels.push_back(cls(rng));
  return b;
}

}  // namespace

TEST_CASE("relu is non-negatively homogeneous") {
  std::mt19937_64 rng(1);
  std::uniform_real_distribution<double> x(-10, 10), c(0, 10);
  for (int i = 0; i < 1000; ++i) {
    const double xi = x(rng), ci = c(rng);
    CHECK(relu(ci * xi) == doctest::Approx(ci * relu(xi)).epsilon(1e-15));
  }
  CHECK(relu(0.0) == 0.0);
}

TEST_CASE("forward hand-evaluated examples") {
  const auto chain = build_layered(std::vector<std::size_t>{1, 1});
  CHECK(forward(chain, WeightVector{3}, std::vector<double>{5})[0] == 15.0);

  const auto diamond = build_layered(std::vector<std::size_t>{1, 2, 1});
  const WeightVector w{1, 2, 3, 4};
  CHECK(forward(diamond, w, std::vector<double>{1})[0] == 11.0);
  CHECK(forward(diamond, w, std::vector<double>{-1})[0] == 0.0);

  // output units stay linear: negative scores pass through
  CHECK(forward(diamond, WeightVector{1, 2, -3, -4}, std::vector<double>{1})[0] == -11.0);

  CHECK_THROWS_AS(forward(diamond, w, std::vector<double>{1, 2}), InputError);
  CHECK_THROWS_AS(forward(diamond, WeightVector{1, 2, 3}, std::vector<double>{1}), InputError);
}

TEST_CASE("forward_batch agrees with row-by-row forward") {
  std::mt19937_64 rng(2);
  const auto g = build_layered(std::vector<std::size_t>{3, 5, 4, 2});
  const auto w = init_balanced(g, 9);
  const auto b = random_batch(g, 7, rng);
  const auto all = forward_batch(g, w, b.inputs, 7);
  for (std::size_t i = 0; i < 7; ++i) {
    const auto one = forward(g, w, b.view().row(i));
    CHECK(one[0] == all[i * 2]);
    CHECK(one[1] == all[i * 2 + 1]);
  }
}

TEST_CASE("loss with uniform scores is ln C") {
  const auto g = build_layered(std::vector<std::size_t>{4, 3, 5});
  const WeightVector zero(g.num_edges(), 0.0);
  std::mt19937_64 rng(3);
  const auto b = random_batch(g, 6, rng);
  CHECK(batch_loss(g, zero, b.view()).loss == doctest::Approx(std::log(5.0)).epsilon(1e-15));
  CHECK(loss_and_grad(g, zero, b.view()).report.loss == doctest::Approx(std::log(5.0)).epsilon(1e-15));
}

TEST_CASE("loss_and_grad input validation") {
  const auto single = build_layered(std::vector<std::size_t>{1, 1});
  const std::vector<double> x{1};
  const std::vector<std::size_t> y{0};
  CHECK_THROWS_AS(loss_and_grad(single, WeightVector{0}, BatchView{x, y, 1}), InputError);

  const auto g = build_layered(std::vector<std::size_t>{1, 2});
  const std::vector<std::size_t> bad_label{2};
  CHECK_THROWS_AS(loss_and_grad(g, WeightVector{1, 1}, BatchView{x, bad_label, 1}), InputError);
  CHECK_THROWS_AS(loss_and_grad(g, WeightVector{1, 1}, BatchView{{}, {}, 1}), InputError);
  const std::vector<double> nan_x{NAN};
  CHECK_THROWS_AS(loss_and_grad(g, WeightVector{1, 1}, BatchView{nan_x, y, 1}), InputError);

  const std::vector<double> big{1e300};
  CHECK_THROWS_AS(loss_and_grad(g, WeightVector{1e300, 1}, BatchView{big, y, 1}), NumericError);
}

TEST_CASE("gradient matches central finite differences at safe points") {
  std::mt19937_64 rng(4);
  int checked = 0;
  while (checked < 20) {
    NetworkGraph g = oracle::random_dag(rng);
    if (g.outputs().size() < 2) continue;
    const auto w = oracle::uniform_weights(g.num_edges(), -2.0, 2.0, rng);
    const auto b = random_batch(g, 4, rng);
    const auto rows = b.rows();
    if (oracle::min_hidden_margin(g, w, rows) < 1e-3) continue;

    const auto lg = loss_and_grad(g, w, b.view());
    const auto fd = oracle::central_differences(g, w, rows, b.labels, 1e-5);
    CHECK(lg.report.loss == doctest::Approx(oracle::mean_cross_entropy(g, w, rows, b.labels)).epsilon(1e-12));
    for (std::size_t e = 0; e < w.size(); ++e) {
      const double denom = std::max({std::abs(lg.gradient[e]), std::abs(fd[e]), 1e-6});
      CHECK(std::abs(lg.gradient[e] - fd[e]) / denom < 1e-5);
    }
    ++checked;
  }
}

TEST_CASE("rescaled networks compute the same function") {
  std::mt19937_64 rng(5);
  const auto g = build_layered(std::vector<std::size_t>{4, 6, 5, 3});
  for (int trial = 0; trial < 10; ++trial) {
    const auto w = oracle::uniform_weights(g.num_edges(), -1.0, 1.0, rng);
    const auto plan = random_plan(g, 10, 0.01, 100.0, rng());
    const auto w2 = apply_plan(g, w, plan);
    for (int probe = 0; probe < 100; ++probe) {
      const auto x = oracle::uniform_weights(4, -2.0, 2.0, rng);
      const auto a = forward(g, w, x), b = forward(g, w2, x);
      for (std::size_t c = 0; c < a.size(); ++c) {
        CHECK(std::abs(a[c] - b[c]) <= 1e-10 * std::max(1.0, std::abs(a[c])));
      }
    }
  }
}

TEST_CASE("scaling one layer scales the output") {
  std::mt19937_64 rng(6);
  const auto g = build_layered(std::vector<std::size_t>{3, 4, 4, 2});
  const LevelSets levels = compute_levels(g);
  const auto w = oracle::uniform_weights(g.num_edges(), -1.0, 1.0, rng);
  const auto x = oracle::uniform_weights(3, -1.0, 1.0, rng);
  const auto base = forward(g, w, x);
  for (std::size_t level = 1; level <= g.depth(); ++level) {
    for (double c : {0.0, 0.5, 3.0}) {
      WeightVector scaled = w;
      for (EdgeId e = 0; e < g.num_edges(); ++e)
        if (levels.in_level_of[g.edge(e).target] == level) scaled[e] *= c;
      const auto out = forward(g, scaled, x);
      for (std::size_t k = 0; k < out.size(); ++k) CHECK(out[k] == doctest::Approx(c * base[k]).epsilon(1e-12));
    }
  }
}

TEST_CASE("evaluate") {
  const auto g = build_layered(std::vector<std::size_t>{2, 2});
  const WeightVector w{1, 0, 0, 1};  // identity scores
  const std::vector<double> x{0.9, 0.1};
  const std::vector<std::size_t> y{0};
  const LossReport one = evaluate(g, w, BatchView{x, y, 2});
  CHECK(one.zero_one_error == 0.0);

  std::mt19937_64 rng(7);
  const auto h = build_layered(std::vector<std::size_t>{3, 4, 3});
  const auto wh = init_balanced(h, 1);
  const auto b = random_batch(h, 13, rng);
  OwnedBatch dup = b;
  for (int k = 0; k < 4; ++k) {
    dup.inputs.insert(dup.inputs.end(), b.inputs.begin(), b.inputs.end());
    dup.labels.insert(dup.labels.end(), b.labels.begin(), b.labels.end());
  }
  const LossReport single = evaluate(h, wh, b.view());
  const LossReport many = evaluate(h, wh, dup.view(), {}, 7);
  CHECK(many.loss == doctest::Approx(single.loss).epsilon(1e-13));
  CHECK(many.zero_one_error == doctest::Approx(single.zero_one_error).epsilon(1e-15));

  CHECK_THROWS_AS(evaluate(h, wh, BatchView{{}, {}, 3}), InputError);
}

TEST_CASE("dropout options") {
  std::mt19937_64 rng(8);
  const auto g = build_layered(std::vector<std::size_t>{3, 5, 2});
  const auto w = init_balanced(g, 2);
  const auto b = random_batch(g, 5, rng);

  const DropoutMask keep_all = draw_dropout_mask(g, 1.0, 1, 0);
  const auto plain = loss_and_grad(g, w, b.view());
  const auto masked = apply_dropout(keep_all, g, w, b.view());
  CHECK(plain.report.loss == masked.report.loss);
  CHECK(plain.gradient == masked.gradient);

  DropoutMask none = keep_all;
  none.retain_prob = 0.5;
  for (NodeId v : g.hidden()) none.retained[v] = 0;
  const auto dropped = apply_dropout(none, g, w, b.view());
  CHECK(dropped.report.loss == doctest::Approx(std::log(2.0)).epsilon(1e-15));
  for (double gr : dropped.gradient) CHECK(gr == 0.0);
  const auto out = forward(g, w, b.view().row(0), training_options(none));
  CHECK(out[0] == 0.0);
  CHECK(out[1] == 0.0);

  // inference scaling multiplies every hidden activation
  const auto full = forward(g, w, b.view().row(0));
  const auto half = forward(g, w, b.view().row(0), inference_options(0.5));
  CHECK(half[0] == doctest::Approx(0.5 * full[0]).epsilon(1e-15));

  CHECK_THROWS_AS(draw_dropout_mask(g, 0.0, 1, 0), ConfigError);
  CHECK_THROWS_AS(inference_options(1.5), ConfigError);
}
