#pragma once

#include <Eigen/Core>
#include <vector>

#include "pvlab/report.hpp"
#include "pvlab/rng.hpp"
#include "pvlab/schedules.hpp"

namespace pvlab::gauss {

// Distribution of the clean target frame x_T.
struct GaussianSource {
  Eigen::VectorXd mean;
  Eigen::MatrixXd cov;

  int dim() const { return int(mean.size()); }
  // Requires symmetry within 1e-12 and eigenvalues >= -1e-10.
  void validate() const;
};

enum class MarkovOrder { kFirstOrder, kHighOrder };

// Corruption family: first-order noising or running-mean (high-order)
// noising, with its beta schedule.
struct ChainKind {
  MarkovOrder order = MarkovOrder::kFirstOrder;
  NoiseSchedule schedule;
};

std::string chain_kind_name(MarkovOrder order);

// Joint distribution of all frames stacked as (x_T, x_{T-1}, ..., x_1):
// block j of the mean/covariance corresponds to lag j, i.e. frame x_{T-j}.
struct JointGaussian {
  int n_frames = 0;
  int dim = 0;
  Eigen::VectorXd mean;
  Eigen::MatrixXd cov;

  Eigen::Block<const Eigen::MatrixXd> block(int lag_row, int lag_col) const {
    return cov.block(lag_row * dim, lag_col * dim, dim, dim);
  }
};

// Exact mean/covariance of the chain by linear propagation of the
// per-step recursions.
JointGaussian build_joint(const GaussianSource& source, const ChainKind& kind, int n_frames);

// E[x_{T-target_lag} | context] = coeff * x_context + offset, with the
// context stacked in the given lag order. cond_cov is the (context-value
// independent) conditional covariance.
struct AffinePredictor {
  Eigen::MatrixXd coeff;
  Eigen::VectorXd offset;
  Eigen::MatrixXd cond_cov;
  bool degenerate = false;  // ridge/pseudo-inverse fallback was needed
};

// Context lags must be distinct values in {1, ..., T-1}, strictly
// increasing (newest frame first).
AffinePredictor conditional_of(const JointGaussian& joint, int target_lag,
                               const std::vector<int>& context_lags);

// Minimum reconstruction error of x_T from the context frames:
// trace of the Schur complement cov(x_T) - cov(T,S) cov(S,S)^-1 cov(S,T).
double conditional_error(const JointGaussian& joint, const std::vector<int>& context_lags);

// Optimal affine predictor of x_T from the context.
AffinePredictor optimal_predictor(const JointGaussian& joint,
                                  const std::vector<int>& context_lags);

// Evaluates L* along nested contexts (each set must contain the previous
// one), records gaps, and cross-checks every gap against the
// law-of-total-variance route: trace(A Cov(added | previous) A^T) for the
// larger context's optimal coefficients A.
OracleReport theorem_check(const JointGaussian& joint,
                           const std::vector<std::vector<int>>& nested_contexts,
                           double equality_tolerance = 1e-10);

// n ancestral-sampling draws of the stacked frame vector, one row per
// chain, using the same forward recursions that define the joint.
Eigen::MatrixXd sample_chain(const GaussianSource& source, const ChainKind& kind,
                             int n_frames, long long n, RngSpec rng);

}  // namespace pvlab::gauss
