#pragma once

#include <cstdint>
#include <vector>

#include "pvlab/report.hpp"
#include "pvlab/rng.hpp"

namespace pvlab::discrete {

// Conditional table for one corruption step. order = m means the step
// depends on the m most recent frames. Row r holds the distribution of the
// new symbol given the context encoded in mixed radix with the most recent
// frame as the most significant digit; the table is row-major with K
// columns per row.
struct StepKernel {
  int order = 1;
  std::vector<double> table;
};

// Small finite-alphabet chain: x_T ~ source_pmf, then kernels[t-1]
// generates x_{T-t} for t = 1..T-1.
struct DiscreteChainSpec {
  int alphabet = 2;
  int n_frames = 2;
  std::vector<double> source_pmf;
  std::vector<StepKernel> kernels;

  void validate() const;
  std::string kind_name() const;  // e.g. "discrete(1,2)"
};

// Exact joint table over all K^T frame tuples, indexed in mixed radix with
// x_T as the most significant digit.
struct JointPMF {
  int alphabet = 0;
  int n_frames = 0;
  std::vector<double> table;
};

// Enumeration bound: K^T tables above this size are refused.
inline constexpr std::uint64_t kMaxJointSize = 10'000'000;

JointPMF enumerate_joint(const DiscreteChainSpec& spec);

// Minimum reconstruction error of value_map[x_T] given the context frames:
// sum over context assignments of p(ctx) * Var(v(x_T) | ctx), by exact
// marginalization. Context lags as in the Gaussian oracle (lag j = x_{T-j}).
double conditional_error_discrete(const JointPMF& pmf, const std::vector<double>& value_map,
                                  const std::vector<int>& context_lags);

// Nested-context report over exact tables; the cross-check route computes
// each gap as the difference of second moments of the conditional means.
OracleReport theorem_check_discrete(const DiscreteChainSpec& spec,
                                    const std::vector<double>& value_map,
                                    const std::vector<std::vector<int>>& nested_contexts,
                                    double equality_tolerance = 1e-12);

// Ancestral-samples n chains, fits the tabular conditional-mean predictor
// on them, and compares its in-sample MSE with the exact L*.
struct CrossValReport {
  long long n = 0;
  double empirical_mse = 0.0;
  double exact_l_star = 0.0;
  double bound = 0.0;  // 3/sqrt(n) * value_range^2
  bool within_bound = false;
};

CrossValReport cross_validate(const DiscreteChainSpec& spec,
                              const std::vector<double>& value_map,
                              const std::vector<int>& context_lags, long long n, RngSpec rng);

// Uniform binary source with order-1 kernels that flip the previous symbol
// with probability flip_prob at every step.
DiscreteChainSpec binary_flip_chain(int n_frames, double flip_prob);

// Random spec with the given per-step kernel orders; rows are normalized
// positive uniforms, so generic (non-degenerate) tables.
DiscreteChainSpec random_spec(int alphabet, int n_frames, const std::vector<int>& orders,
                              RngSpec rng);

}  // namespace pvlab::discrete
