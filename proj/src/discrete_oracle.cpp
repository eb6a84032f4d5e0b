#include "pvlab/discrete_oracle.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>
#include <string>
#include <unordered_map>

#include "pvlab/errors.hpp"

namespace pvlab::discrete {

namespace {

std::uint64_t pow_u64(std::uint64_t base, int exponent) {
  std::uint64_t value = 1;
  for (int i = 0; i < exponent; ++i) {
    if (value > kMaxJointSize * 16) return std::uint64_t(-1);
    value *= base;
  }
  return value;
}

// Odometer over frame tuples (x_T, x_{T-1}, ..., x_1); digits[0] = x_T is
// the most significant, so the linear index advances by one per step.
struct TupleIterator {
  int alphabet;
  std::vector<int> digits;

  explicit TupleIterator(int k, int t) : alphabet(k), digits(t, 0) {}
  bool advance() {
    for (int i = int(digits.size()) - 1; i >= 0; --i) {
      if (++digits[i] < alphabet) return true;
      digits[i] = 0;
    }
    return false;
  }
};

// Kernel row index for step t: the m most recent frames are digits
// t-1, t-2, ..., t-m with the most recent one most significant.
std::size_t kernel_row(const std::vector<int>& digits, int step, int order, int alphabet) {
  std::size_t row = 0;
  for (int s = 1; s <= order; ++s) row = row * alphabet + digits[step - s];
  return row;
}

std::size_t context_key(const std::vector<int>& digits, const std::vector<int>& lags,
                        int alphabet) {
  std::size_t key = 0;
  for (int lag : lags) key = key * alphabet + digits[lag];
  return key;
}

void check_context(const JointPMF& pmf, const std::vector<int>& lags) {
  if (lags.empty()) throw ArgumentError("context set must be nonempty");
  int prev = 0;
  for (int lag : lags) {
    if (lag < 1 || lag > pmf.n_frames - 1)
      throw ArgumentError("context lag " + std::to_string(lag) + " outside 1..T-1");
    if (lag <= prev) throw ArgumentError("context lags must be strictly increasing");
    prev = lag;
  }
}

void check_values(const JointPMF& pmf, const std::vector<double>& value_map) {
  if (int(value_map.size()) != pmf.alphabet)
    throw ArgumentError("value map length must equal the alphabet size");
}

// Accumulates, per context cell, total probability and the first two
// moments of v(x_T).
struct CellMoments {
  std::vector<double> weight, first, second;

  explicit CellMoments(std::size_t cells)
      : weight(cells, 0.0), first(cells, 0.0), second(cells, 0.0) {}
};

CellMoments marginalize(const JointPMF& pmf, const std::vector<double>& value_map,
                        const std::vector<int>& lags) {
  const std::size_t cells = pow_u64(pmf.alphabet, int(lags.size()));
  CellMoments cells_out(cells);
  TupleIterator it(pmf.alphabet, pmf.n_frames);
  std::size_t index = 0;
  do {
    const double p = pmf.table[index++];
    if (p == 0.0) continue;
    const std::size_t key = context_key(it.digits, lags, pmf.alphabet);
    const double v = value_map[it.digits[0]];
    cells_out.weight[key] += p;
    cells_out.first[key] += p * v;
    cells_out.second[key] += p * v * v;
  } while (it.advance());
  return cells_out;
}

bool is_subset(const std::vector<int>& small, const std::vector<int>& big) {
  for (int lag : small)
    if (std::find(big.begin(), big.end(), lag) == big.end()) return false;
  return true;
}

}  // namespace

void DiscreteChainSpec::validate() const {
  if (alphabet < 2) throw ArgumentError("alphabet size must be at least 2");
  if (n_frames < 2) throw ArgumentError("a chain needs at least 2 frames");
  if (int(source_pmf.size()) != alphabet)
    throw ArgumentError("source pmf length must equal the alphabet size");
  double total = 0.0;
  for (double p : source_pmf) {
    if (p < 0.0) throw ArgumentError("source pmf entries must be nonnegative");
    total += p;
  }
  if (std::abs(total - 1.0) > 1e-12) throw ArgumentError("source pmf must sum to 1");
  if (int(kernels.size()) != n_frames - 1)
    throw ArgumentError("need exactly T-1 step kernels");
  for (int t = 1; t <= n_frames - 1; ++t) {
    const StepKernel& kernel = kernels[t - 1];
    if (kernel.order < 1 || kernel.order > t)
      throw ArgumentError("step " + std::to_string(t) + " kernel order must lie in 1..t");
    const std::uint64_t rows = pow_u64(alphabet, kernel.order);
    if (kernel.table.size() != rows * alphabet)
      throw ArgumentError("step " + std::to_string(t) + " kernel table has wrong size");
    for (std::uint64_t r = 0; r < rows; ++r) {
      double row_sum = 0.0;
      for (int k = 0; k < alphabet; ++k) {
        const double p = kernel.table[r * alphabet + k];
        if (p < 0.0) throw ArgumentError("kernel probabilities must be nonnegative");
        row_sum += p;
      }
      if (std::abs(row_sum - 1.0) > 1e-12)
        throw ArgumentError("kernel row " + std::to_string(r) + " of step " +
                            std::to_string(t) + " must sum to 1");
    }
  }
}

std::string DiscreteChainSpec::kind_name() const {
  std::ostringstream out;
  out << "discrete(";
  for (std::size_t i = 0; i < kernels.size(); ++i) {
    if (i) out << ',';
    out << kernels[i].order;
  }
  out << ')';
  return out.str();
}

JointPMF enumerate_joint(const DiscreteChainSpec& spec) {
  spec.validate();
  const std::uint64_t size = pow_u64(spec.alphabet, spec.n_frames);
  if (size > kMaxJointSize)
    throw ResourceError("joint table of " + std::to_string(size) +
                        " entries exceeds the enumeration bound");

  JointPMF pmf;
  pmf.alphabet = spec.alphabet;
  pmf.n_frames = spec.n_frames;
  pmf.table.resize(size);

  TupleIterator it(spec.alphabet, spec.n_frames);
  std::size_t index = 0;
  do {
    double p = spec.source_pmf[it.digits[0]];
    for (int t = 1; t <= spec.n_frames - 1 && p > 0.0; ++t) {
      const StepKernel& kernel = spec.kernels[t - 1];
      const std::size_t row = kernel_row(it.digits, t, kernel.order, spec.alphabet);
      p *= kernel.table[row * spec.alphabet + it.digits[t]];
    }
    pmf.table[index++] = p;
  } while (it.advance());
  return pmf;
}

double conditional_error_discrete(const JointPMF& pmf, const std::vector<double>& value_map,
                                  const std::vector<int>& context_lags) {
  check_context(pmf, context_lags);
  check_values(pmf, value_map);

  const CellMoments cells = marginalize(pmf, value_map, context_lags);
  double error = 0.0;
  for (std::size_t i = 0; i < cells.weight.size(); ++i) {
    if (cells.weight[i] == 0.0) continue;
    const double var = cells.second[i] - cells.first[i] * cells.first[i] / cells.weight[i];
    error += std::max(var, 0.0);
  }
  return error;
}

OracleReport theorem_check_discrete(const DiscreteChainSpec& spec,
                                    const std::vector<double>& value_map,
                                    const std::vector<std::vector<int>>& nested_contexts,
                                    double equality_tolerance) {
  if (nested_contexts.empty()) throw ArgumentError("need at least one context set");
  for (std::size_t i = 1; i < nested_contexts.size(); ++i)
    if (!is_subset(nested_contexts[i - 1], nested_contexts[i]))
      throw ArgumentError("context sets must be nested");

  const JointPMF pmf = enumerate_joint(spec);

  OracleReport report;
  report.chain_kind = spec.kind_name();
  report.n_frames = spec.n_frames;
  report.dim = 1;
  report.equality_tolerance = equality_tolerance;

  // Second moment of the conditional mean per context, for the
  // law-of-total-variance route.
  std::vector<double> mean_second_moments;
  for (std::size_t i = 0; i < nested_contexts.size(); ++i) {
    check_context(pmf, nested_contexts[i]);
    check_values(pmf, value_map);
    const CellMoments cells = marginalize(pmf, value_map, nested_contexts[i]);
    double error = 0.0, mean_sq = 0.0;
    for (std::size_t c = 0; c < cells.weight.size(); ++c) {
      if (cells.weight[c] == 0.0) continue;
      const double mean = cells.first[c] / cells.weight[c];
      error += std::max(cells.second[c] - cells.weight[c] * mean * mean, 0.0);
      mean_sq += cells.weight[c] * mean * mean;
    }
    mean_second_moments.push_back(mean_sq);

    OracleRow row;
    row.context_lags = nested_contexts[i];
    row.l_star = error;
    if (i > 0) {
      row.has_gap = true;
      row.gap_to_prev = report.rows[i - 1].l_star - row.l_star;
      row.equality_flag = row.gap_to_prev < equality_tolerance;
      row.lotv_gap = mean_sq - mean_second_moments[i - 1];
    }
    report.rows.push_back(std::move(row));
  }
  return report;
}

CrossValReport cross_validate(const DiscreteChainSpec& spec,
                              const std::vector<double>& value_map,
                              const std::vector<int>& context_lags, long long n, RngSpec rng) {
  spec.validate();
  if (n < 10'000) throw ArgumentError("cross validation needs at least 10^4 samples");
  const JointPMF pmf = enumerate_joint(spec);
  check_context(pmf, context_lags);
  check_values(pmf, value_map);

  PhiloxStream stream(rng);
  auto draw = [&](const double* probs, int count) {
    const double u = stream.next_double();
    double cum = 0.0;
    for (int k = 0; k < count; ++k) {
      cum += probs[k];
      if (u < cum) return k;
    }
    return count - 1;
  };

  // Ancestral sampling; per sample keep the context key and target value.
  std::vector<std::size_t> keys(n);
  std::vector<double> targets(n);
  std::vector<int> digits(spec.n_frames);
  for (long long row = 0; row < n; ++row) {
    digits[0] = draw(spec.source_pmf.data(), spec.alphabet);
    for (int t = 1; t <= spec.n_frames - 1; ++t) {
      const StepKernel& kernel = spec.kernels[t - 1];
      const std::size_t r = kernel_row(digits, t, kernel.order, spec.alphabet);
      digits[t] = draw(&kernel.table[r * spec.alphabet], spec.alphabet);
    }
    keys[row] = context_key(digits, context_lags, spec.alphabet);
    targets[row] = value_map[digits[0]];
  }

  // Tabular conditional-mean predictor fit on the samples.
  std::unordered_map<std::size_t, std::pair<double, long long>> cells;
  for (long long row = 0; row < n; ++row) {
    auto& cell = cells[keys[row]];
    cell.first += targets[row];
    cell.second += 1;
  }
  double mse = 0.0;
  for (long long row = 0; row < n; ++row) {
    const auto& cell = cells[keys[row]];
    const double residual = targets[row] - cell.first / double(cell.second);
    mse += residual * residual;
  }
  mse /= double(n);

  CrossValReport report;
  report.n = n;
  report.empirical_mse = mse;
  report.exact_l_star = conditional_error_discrete(pmf, value_map, context_lags);
  const auto [lo, hi] = std::minmax_element(value_map.begin(), value_map.end());
  const double range = *hi - *lo;
  report.bound = 3.0 / std::sqrt(double(n)) * range * range;
  report.within_bound = std::abs(mse - report.exact_l_star) <= report.bound;
  return report;
}

DiscreteChainSpec binary_flip_chain(int n_frames, double flip_prob) {
  if (!(flip_prob >= 0.0 && flip_prob <= 1.0))
    throw ArgumentError("flip probability must lie in [0, 1]");
  DiscreteChainSpec spec;
  spec.alphabet = 2;
  spec.n_frames = n_frames;
  spec.source_pmf = {0.5, 0.5};
  StepKernel kernel;
  kernel.order = 1;
  kernel.table = {1.0 - flip_prob, flip_prob, flip_prob, 1.0 - flip_prob};
  spec.kernels.assign(n_frames - 1, kernel);
  return spec;
}

DiscreteChainSpec random_spec(int alphabet, int n_frames, const std::vector<int>& orders,
                              RngSpec rng) {
  if (int(orders.size()) != n_frames - 1)
    throw ArgumentError("need one kernel order per step");
  PhiloxStream stream(rng);
  auto random_row = [&](double* row, int count) {
    double total = 0.0;
    for (int k = 0; k < count; ++k) {
      // Offset away from zero keeps every transition possible.
      row[k] = 0.05 + stream.next_double();
      total += row[k];
    }
    for (int k = 0; k < count; ++k) row[k] /= total;
    // Renormalize the largest entry so the row sums to 1 exactly.
    double sum = 0.0;
    for (int k = 0; k < count - 1; ++k) sum += row[k];
    row[count - 1] = 1.0 - sum;
  };

  DiscreteChainSpec spec;
  spec.alphabet = alphabet;
  spec.n_frames = n_frames;
  spec.source_pmf.resize(alphabet);
  random_row(spec.source_pmf.data(), alphabet);
  for (int t = 1; t <= n_frames - 1; ++t) {
    StepKernel kernel;
    kernel.order = orders[t - 1];
    const std::uint64_t rows = pow_u64(alphabet, kernel.order);
    kernel.table.resize(rows * alphabet);
    for (std::uint64_t r = 0; r < rows; ++r)
      random_row(&kernel.table[r * alphabet], alphabet);
    spec.kernels.push_back(std::move(kernel));
  }
  return spec;
}

}  // namespace pvlab::discrete
