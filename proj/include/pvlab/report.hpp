#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace pvlab {

// Formats a double with 12 significant digits so report diffs stay stable.
std::string format_number(double value);

// Renders one CSV line; fields containing commas or quotes are quoted.
std::string csv_line(const std::vector<std::string>& fields);

// Context sets are lists of lags: lag j names frame x_{T-j}. Rendered as
// e.g. "{T-1,T-2}".
std::string format_context_set(const std::vector<int>& lags);

// One minimum-reconstruction-error evaluation for a context set.
struct OracleRow {
  std::vector<int> context_lags;
  double l_star = 0.0;
  bool has_gap = false;      // false for the first context of a chain
  double gap_to_prev = 0.0;  // L*(previous) - L*(this)
  bool equality_flag = false;
  double lotv_gap = 0.0;     // the same gap via the law-of-total-variance route
  bool degenerate = false;   // a ridge/pseudo-inverse fallback was needed
};

// Nested-context error report for one chain.
struct OracleReport {
  std::string chain_kind;
  int n_frames = 0;
  int dim = 0;
  double equality_tolerance = 1e-10;
  std::vector<OracleRow> rows;

  // True when L* never increases along the nested contexts (within slack).
  bool monotone(double slack = 1e-9) const;
  // True when both gap routes agree on every row.
  bool identity_ok(double tolerance = 1e-9) const;
  // Index of the first row that breaks monotonicity, or -1.
  int first_violation(double slack = 1e-9) const;

  // columns: chain_kind, T, d, context_set, L_star, gap_to_prev, equality_flag
  static std::string csv_header();
  std::string to_csv() const;
};

// One predictor evaluation; serializes to the experiment CSV schema.
struct EvalRow {
  std::string chain_kind;
  int n_frames = 0;
  int dim = 0;
  int context_size = 0;
  long long n_train = 0;
  long long n_test = 0;
  double mse = 0.0;
  double oracle_lstar = 0.0;  // NaN when the chain has no oracle
  double psnr_db = 0.0;
  double mean_gap = 0.0;
  double cov_frobenius_gap = 0.0;
  bool teacher_forced = false;
  std::uint64_t seed = 0;
};

struct EvalReport {
  std::vector<EvalRow> rows;

  static std::string csv_header();
  std::string to_csv() const;
};

}  // namespace pvlab
