#include "pvlab/gauss_oracle.hpp"

#include <Eigen/Cholesky>
#include <Eigen/Eigenvalues>
#include <algorithm>
#include <cmath>
#include <string>

#include "pvlab/errors.hpp"

namespace pvlab::gauss {

namespace {

// Solves S X = B for symmetric PSD S. Falls back to a ridge
// (1e-12 * trace/dim) and then to an eigendecomposition pseudo-inverse when
// the factorization reports near-singular pivots; fallbacks are flagged.
struct PsdSolve {
  Eigen::MatrixXd solution;
  bool degenerate = false;
};

bool ldlt_healthy(const Eigen::LDLT<Eigen::MatrixXd>& ldlt) {
  if (ldlt.info() != Eigen::Success) return false;
  const Eigen::VectorXd d = ldlt.vectorD();
  const double max_pivot = d.cwiseAbs().maxCoeff();
  if (!(max_pivot > 0.0)) return false;
  return d.minCoeff() > max_pivot * 1e-13;
}

PsdSolve psd_solve(const Eigen::MatrixXd& s, const Eigen::MatrixXd& b) {
  Eigen::LDLT<Eigen::MatrixXd> ldlt(s);
  if (ldlt_healthy(ldlt)) return {ldlt.solve(b), false};

  const double ridge = 1e-12 * s.trace() / double(s.rows());
  Eigen::MatrixXd ridged = s;
  ridged.diagonal().array() += ridge;
  ldlt.compute(ridged);
  if (ldlt_healthy(ldlt)) return {ldlt.solve(b), true};

  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(s);
  const Eigen::VectorXd values = eig.eigenvalues();
  const double cutoff = values.cwiseAbs().maxCoeff() * 1e-12;
  Eigen::VectorXd inv = Eigen::VectorXd::Zero(values.size());
  for (int i = 0; i < values.size(); ++i)
    if (values[i] > cutoff) inv[i] = 1.0 / values[i];
  const Eigen::MatrixXd pinv =
      eig.eigenvectors() * inv.asDiagonal() * eig.eigenvectors().transpose();
  return {pinv * b, true};
}

void check_context(const JointGaussian& joint, const std::vector<int>& lags) {
  if (lags.empty()) throw ArgumentError("context set must be nonempty");
  int prev = 0;
  for (int lag : lags) {
    if (lag < 1 || lag > joint.n_frames - 1)
      throw ArgumentError("context lag " + std::to_string(lag) + " outside 1..T-1");
    if (lag <= prev) throw ArgumentError("context lags must be strictly increasing");
    prev = lag;
  }
}

Eigen::MatrixXd gather_cov(const JointGaussian& joint, const std::vector<int>& row_lags,
                           const std::vector<int>& col_lags) {
  const int d = joint.dim;
  Eigen::MatrixXd out(row_lags.size() * d, col_lags.size() * d);
  for (std::size_t i = 0; i < row_lags.size(); ++i)
    for (std::size_t j = 0; j < col_lags.size(); ++j)
      out.block(i * d, j * d, d, d) = joint.block(row_lags[i], col_lags[j]);
  return out;
}

Eigen::VectorXd gather_mean(const JointGaussian& joint, const std::vector<int>& lags) {
  const int d = joint.dim;
  Eigen::VectorXd out(lags.size() * d);
  for (std::size_t i = 0; i < lags.size(); ++i)
    out.segment(i * d, d) = joint.mean.segment(lags[i] * d, d);
  return out;
}

bool is_subset(const std::vector<int>& small, const std::vector<int>& big) {
  for (int lag : small)
    if (std::find(big.begin(), big.end(), lag) == big.end()) return false;
  return true;
}

// Per-step mixing coefficients over the already generated blocks 0..step-1.
std::vector<double> step_coefficients(const ChainKind& kind, int step) {
  const double keep = std::sqrt(1.0 - kind.schedule.betas[step - 1]);
  if (kind.order == MarkovOrder::kFirstOrder) {
    std::vector<double> coeffs(step, 0.0);
    coeffs[step - 1] = keep;
    return coeffs;
  }
  return std::vector<double>(step, keep / double(step));
}

}  // namespace

void GaussianSource::validate() const {
  if (mean.size() == 0) throw ArgumentError("source dimension must be positive");
  if (cov.rows() != mean.size() || cov.cols() != mean.size())
    throw ArgumentError("source covariance shape does not match the mean");
  if ((cov - cov.transpose()).cwiseAbs().maxCoeff() > 1e-12)
    throw ArgumentError("source covariance must be symmetric");
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(cov);
  if (eig.eigenvalues().minCoeff() < -1e-10)
    throw ArgumentError("source covariance must be positive semidefinite");
}

std::string chain_kind_name(MarkovOrder order) {
  return order == MarkovOrder::kFirstOrder ? "first-order" : "high-order";
}

JointGaussian build_joint(const GaussianSource& source, const ChainKind& kind, int n_frames) {
  source.validate();
  kind.schedule.validate();
  if (n_frames < 2) throw ArgumentError("a chain needs at least 2 frames");
  if (kind.schedule.n_frames() != n_frames)
    throw ArgumentError("schedule length does not match the frame count");

  const int d = source.dim();
  JointGaussian joint;
  joint.n_frames = n_frames;
  joint.dim = d;
  joint.mean = Eigen::VectorXd::Zero(n_frames * d);
  joint.cov = Eigen::MatrixXd::Zero(n_frames * d, n_frames * d);
  joint.mean.head(d) = source.mean;
  joint.cov.topLeftCorner(d, d) = source.cov;

  for (int step = 1; step <= n_frames - 1; ++step) {
    const std::vector<double> coeffs = step_coefficients(kind, step);
    const double beta = kind.schedule.betas[step - 1];

    Eigen::VectorXd mean_new = Eigen::VectorXd::Zero(d);
    for (int j = 0; j < step; ++j) mean_new += coeffs[j] * joint.mean.segment(j * d, d);
    joint.mean.segment(step * d, d) = mean_new;

    // Cross blocks against everything already generated.
    for (int k = 0; k < step; ++k) {
      Eigen::MatrixXd cross = Eigen::MatrixXd::Zero(d, d);
      for (int j = 0; j < step; ++j)
        cross += coeffs[j] * joint.cov.block(j * d, k * d, d, d);
      joint.cov.block(step * d, k * d, d, d) = cross;
      joint.cov.block(k * d, step * d, d, d) = cross.transpose();
    }

    Eigen::MatrixXd var = Eigen::MatrixXd::Zero(d, d);
    for (int j = 0; j < step; ++j)
      for (int k = 0; k < step; ++k)
        var += coeffs[j] * coeffs[k] * joint.cov.block(j * d, k * d, d, d);
    var.diagonal().array() += beta;
    joint.cov.block(step * d, step * d, d, d) = var;
  }
  return joint;
}

AffinePredictor conditional_of(const JointGaussian& joint, int target_lag,
                               const std::vector<int>& context_lags) {
  if (target_lag < 0 || target_lag > joint.n_frames - 1)
    throw ArgumentError("target lag outside 0..T-1");
  if (context_lags.empty()) throw ArgumentError("context set must be nonempty");
  for (int lag : context_lags) {
    if (lag < 0 || lag > joint.n_frames - 1)
      throw ArgumentError("context lag " + std::to_string(lag) + " outside 0..T-1");
    if (lag == target_lag) throw ArgumentError("context must not contain the target frame");
  }

  const std::vector<int> target{target_lag};
  const Eigen::MatrixXd cov_ss = gather_cov(joint, context_lags, context_lags);
  const Eigen::MatrixXd cov_st = gather_cov(joint, context_lags, target);

  PsdSolve solved = psd_solve(cov_ss, cov_st);

  AffinePredictor predictor;
  predictor.coeff = solved.solution.transpose();  // d x (|S| d)
  predictor.offset = joint.mean.segment(target_lag * joint.dim, joint.dim) -
                     predictor.coeff * gather_mean(joint, context_lags);
  predictor.cond_cov =
      gather_cov(joint, target, target) - predictor.coeff * cov_st;
  predictor.degenerate = solved.degenerate;
  return predictor;
}

double conditional_error(const JointGaussian& joint, const std::vector<int>& context_lags) {
  check_context(joint, context_lags);
  const double value = conditional_of(joint, 0, context_lags).cond_cov.trace();
  // Round-off can leave a tiny negative residue on an exactly determined target.
  return value < 0.0 && value > -1e-8 ? 0.0 : value;
}

AffinePredictor optimal_predictor(const JointGaussian& joint,
                                  const std::vector<int>& context_lags) {
  check_context(joint, context_lags);
  return conditional_of(joint, 0, context_lags);
}

OracleReport theorem_check(const JointGaussian& joint,
                           const std::vector<std::vector<int>>& nested_contexts,
                           double equality_tolerance) {
  if (nested_contexts.empty()) throw ArgumentError("need at least one context set");
  for (std::size_t i = 1; i < nested_contexts.size(); ++i)
    if (!is_subset(nested_contexts[i - 1], nested_contexts[i]))
      throw ArgumentError("context sets must be nested");

  OracleReport report;
  report.chain_kind = "gaussian";
  report.n_frames = joint.n_frames;
  report.dim = joint.dim;
  report.equality_tolerance = equality_tolerance;

  for (std::size_t i = 0; i < nested_contexts.size(); ++i) {
    check_context(joint, nested_contexts[i]);
    const AffinePredictor predictor = conditional_of(joint, 0, nested_contexts[i]);
    OracleRow row;
    row.context_lags = nested_contexts[i];
    row.l_star = std::max(predictor.cond_cov.trace(), 0.0);
    row.degenerate = predictor.degenerate;
    if (i > 0) {
      row.has_gap = true;
      row.gap_to_prev = report.rows[i - 1].l_star - row.l_star;
      row.equality_flag = row.gap_to_prev < equality_tolerance;
      // Law-of-total-variance route: the gap equals the variance of the
      // larger context's conditional mean given the smaller context,
      // trace(A Cov(S_i | S_{i-1}) A^T).
      const Eigen::MatrixXd cov_big =
          gather_cov(joint, nested_contexts[i], nested_contexts[i]);
      const Eigen::MatrixXd cov_big_small =
          gather_cov(joint, nested_contexts[i], nested_contexts[i - 1]);
      const Eigen::MatrixXd cov_small =
          gather_cov(joint, nested_contexts[i - 1], nested_contexts[i - 1]);
      const Eigen::MatrixXd cond_big =
          cov_big - cov_big_small * psd_solve(cov_small, cov_big_small.transpose()).solution;
      row.lotv_gap = (predictor.coeff * cond_big * predictor.coeff.transpose()).trace();
    }
    report.rows.push_back(std::move(row));
  }
  return report;
}

Eigen::MatrixXd sample_chain(const GaussianSource& source, const ChainKind& kind,
                             int n_frames, long long n, RngSpec rng) {
  source.validate();
  kind.schedule.validate();
  if (n < 1) throw ArgumentError("sample count must be positive");
  if (kind.schedule.n_frames() != n_frames)
    throw ArgumentError("schedule length does not match the frame count");

  const int d = source.dim();
  // Square root of the source covariance for the x_T draw.
  Eigen::MatrixXd root;
  Eigen::LLT<Eigen::MatrixXd> llt(source.cov);
  if (llt.info() == Eigen::Success) {
    root = llt.matrixL();
  } else {
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(source.cov);
    root = eig.eigenvectors() *
           eig.eigenvalues().cwiseMax(0.0).cwiseSqrt().asDiagonal();
  }

  PhiloxStream stream(rng);
  Eigen::MatrixXd samples(n, n_frames * d);
  Eigen::VectorXd noise(d);
  for (long long row = 0; row < n; ++row) {
    for (int i = 0; i < d; ++i) noise[i] = stream.next_normal();
    samples.row(row).head(d) = (source.mean + root * noise).transpose();

    for (int step = 1; step <= n_frames - 1; ++step) {
      const std::vector<double> coeffs = step_coefficients(kind, step);
      const double inject = std::sqrt(kind.schedule.betas[step - 1]);
      Eigen::VectorXd value = Eigen::VectorXd::Zero(d);
      for (int j = 0; j < step; ++j)
        value += coeffs[j] * samples.row(row).segment(j * d, d).transpose();
      for (int i = 0; i < d; ++i) value[i] += inject * stream.next_normal();
      samples.row(row).segment(step * d, d) = value.transpose();
    }
  }
  return samples;
}

}  // namespace pvlab::gauss
