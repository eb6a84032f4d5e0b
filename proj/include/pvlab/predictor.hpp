#pragma once

#include <Eigen/Core>
#include <functional>
#include <vector>

#include "pvlab/gauss_oracle.hpp"
#include "pvlab/rng.hpp"

namespace pvlab::predictor {

// Supervised view of sampled chains: one row per chain, contexts hold the
// k context frames with the most recent first, targets hold x_T.
struct Dataset {
  int dim = 1;
  Eigen::MatrixXd contexts;  // n x (k*d)
  Eigen::MatrixXd targets;   // n x d

  long long size() const { return contexts.rows(); }
  int context_size() const { return int(contexts.cols()) / dim; }
};

// Extracts the (context_size, target) pairs from stacked chain samples as
// produced by gauss::sample_chain.
Dataset make_dataset(const Eigen::MatrixXd& samples, int dim, int context_size);

struct LinearPredictor {
  int context_size = 1;
  int dim = 1;
  double ridge = 0.0;
  Eigen::MatrixXd coeff;   // d x (k*d)
  Eigen::VectorXd offset;  // d

  Eigen::VectorXd predict(const Eigen::VectorXd& context) const {
    return coeff * context + offset;
  }
  Eigen::MatrixXd predict_all(const Eigen::MatrixXd& contexts) const;
};

// Ridge-regularized least squares via the normal equations (LDLT). With
// ridge = 0 a rank-deficient Gram matrix raises ConditioningError naming the
// offending eigenvalue.
LinearPredictor fit_linear(const Dataset& data, double ridge);

// One hidden tanh layer.
struct MLPPredictor {
  int context_size = 1;
  int dim = 1;
  Eigen::MatrixXd hidden_weight;  // m x (k*d)
  Eigen::VectorXd hidden_bias;    // m
  Eigen::MatrixXd output_weight;  // d x m
  Eigen::VectorXd output_bias;    // d

  Eigen::VectorXd predict(const Eigen::VectorXd& context) const;
  Eigen::MatrixXd predict_all(const Eigen::MatrixXd& contexts) const;

  int parameter_count() const;
  double get_parameter(int index) const;
  void set_parameter(int index, double value);
};

struct MLPTrainConfig {
  int width = 64;
  double learning_rate = 0.01;
  int epochs = 50;
  int batch_size = 32;
  RngSpec rng;
  bool check_gradients = true;
};

// Mean-squared-error loss (averaged over samples, summed over output
// coordinates) of the network on the given data.
double mlp_loss(const MLPPredictor& mlp, const Dataset& data);

// Maximum relative error between analytic and central finite-difference
// gradients at n_coords random parameter coordinates.
double mlp_gradient_check(const MLPPredictor& mlp, const Dataset& data, int n_coords,
                          RngSpec rng);

// Seeded mini-batch SGD. The analytic gradient is finite-difference checked
// at initialization before any update; training aborts with TrainingError
// when the epoch loss exceeds 10x the initial loss three epochs in a row.
MLPPredictor fit_mlp(const Dataset& data, const MLPTrainConfig& config);

// MSE follows the trace convention (squared Euclidean distance summed over
// the d coordinates, averaged over samples) so it is directly comparable to
// oracle L* values. PSNR uses max_val = 1 and the per-pixel MSE, with +inf
// when the error vanishes.
struct Evaluation {
  long long n = 0;
  double mse = 0.0;
  double per_pixel_mse = 0.0;
  double psnr_db = 0.0;
};

Evaluation evaluate_predictions(const Eigen::MatrixXd& predictions,
                                const Eigen::MatrixXd& targets);
Evaluation evaluate(const LinearPredictor& model, const Dataset& data);
Evaluation evaluate(const MLPPredictor& model, const Dataset& data);

// Fits linear predictors at two context sizes on identical training draws
// and scores them on identical test draws, next to the closed-form optimum.
struct ContextComparison {
  int k_small = 1, k_large = 2;
  Evaluation eval_small, eval_large;
  double mse_diff = 0.0;      // mse(k_large) - mse(k_small)
  double se_diff = 0.0;       // standard error of the paired residual difference
  double oracle_small = 0.0;  // L* at k_small
  double oracle_large = 0.0;  // L* at k_large
  double oracle_gap = 0.0;
};

ContextComparison compare_context_sizes(const gauss::GaussianSource& source,
                                        const gauss::ChainKind& kind, int n_frames,
                                        int k_small, int k_large, long long n_train,
                                        long long n_test, double ridge, RngSpec rng);

// One per-step map from the stacked context (most recent frame first) to
// the next frame.
using StepPredictor = std::function<Eigen::VectorXd(const Eigen::VectorXd&)>;

StepPredictor as_step(const LinearPredictor& model);
StepPredictor as_step(const gauss::AffinePredictor& model);

struct GenConfig {
  int context_window = 1;
  long long n_videos = 1;
  std::vector<double> residual_std;  // one entry (shared) or one per generated step
  bool teacher_forced = false;
};

// Autoregressive context-window generation from the corrupted end toward
// the clean end. heldout provides both the initial contexts (its most
// corrupted frames) and the ground-truth frames for teacher forcing and for
// the last-frame moment gaps. steps[i] generates stacked block T-1-C-i
// from the C previous frames; it must cover every frame up to x_T.
struct GenerationResult {
  Eigen::MatrixXd videos;  // n_videos x (T*d), stacked like sample_chain
  double last_frame_mse = 0.0;  // paired against the seeding held-out chains
  double mean_gap = 0.0;
  double cov_frobenius_gap = 0.0;
};

GenerationResult autoregressive_generate(const std::vector<StepPredictor>& steps,
                                         const Eigen::MatrixXd& heldout, int n_frames,
                                         int dim, const GenConfig& config, RngSpec rng);

}  // namespace pvlab::predictor
