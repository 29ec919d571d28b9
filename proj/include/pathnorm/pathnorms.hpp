#pragma once

#include <cmath>
#include <cstdint>
#include <limits>
#include <span>
#include <string>
#include <vector>

#include "pathnorm/graph.hpp"

namespace pathnorm {

inline constexpr double kInfinity = std::numeric_limits<double>::infinity();

/// Exponents of the group norm: per-unit l_p over incoming edges, then l_q
/// across units. q may be kInfinity (per-unit max-norm).
struct GroupNormParams {
  double p = 2.0;
  double q = 2.0;
};

/// One entry per input-to-output path, the product of the weights on it.
using PathVector = std::vector<double>;

/// |x|^p with exact fast paths for p = 1 and p = 2.
inline double abs_pow(double x, double p) {
  if (p == 2.0) return x * x;
  if (p == 1.0) return x < 0 ? -x : x;
  return std::pow(x < 0 ? -x : x, p);
}

double group_norm(const NetworkGraph& g, std::span<const double> w, const GroupNormParams& params);

/// group_norm with q = infinity.
double max_norm(const NetworkGraph& g, std::span<const double> w, double p);

/// Explicit DFS over all paths, inputs in declared order and out-edges in
/// edge-id order. Throws ConfigError when the graph has more than
/// `max_paths` paths.
PathVector path_vector_bruteforce(const NetworkGraph& g, std::span<const double> w,
                                  std::uint64_t max_paths = 1'000'000);

/// l_p norm of a vector (p may be kInfinity).
double lp_norm(std::span<const double> v, double p);

/// The l_p path regularizer, one forward sweep over the DAG:
/// s(input) = 1, s(v) = sum over (u->v) of s(u) |w_uv|^p, result (sum_out s)^(1/p).
double path_norm_dp(const NetworkGraph& g, std::span<const double> w, double p);

struct Lemma1Tolerances {
  double invariance_rel = 1e-12;
  double bound_abs = 1e-9;
  double oracle_rel = 1e-6;
};

struct Lemma1Failure {
  std::string leg;
  double deviation = 0.0;
};

/// Outcome of the three-way check relating the path regularizer to the
/// per-unit max-norm over rescaled copies of a network.
struct Lemma1Report {
  double phi = 0.0;
  std::size_t samples = 0;
  // (i) max relative change of phi across random rescalings
  double max_invariance_deviation = 0.0;
  // (ii) min over samples of mu_{p,inf}(w~)^d - phi; only on graded single-output graphs
  bool bound_checked = false;
  double min_bound_slack = kInfinity;
  // (iii) balancing oracle value and its relative gap to phi
  bool oracle_checked = false;
  double oracle_value = 0.0;
  double oracle_deviation = 0.0;

  std::vector<Lemma1Failure> failures;
  bool passed() const noexcept { return failures.empty(); }
};

/// The max-norm legs need a graded graph (all paths of length depth()) with a
/// single output unit; on other graphs only leg (i) runs. The oracle leg also
/// needs every weight nonzero and is skipped when `run_oracle` is false.
Lemma1Report lemma1_check(const NetworkGraph& g, std::span<const double> w, double p,
                          std::size_t n_samples, std::uint64_t seed, bool run_oracle = true,
                          const Lemma1Tolerances& tol = {});

}  // namespace pathnorm
