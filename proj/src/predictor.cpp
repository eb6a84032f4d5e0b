#include "pvlab/predictor.hpp"

#include <Eigen/Cholesky>
#include <Eigen/Eigenvalues>
#include <cmath>
#include <limits>
#include <numeric>
#include <sstream>

#include "pvlab/errors.hpp"

namespace pvlab::predictor {

namespace {

void shuffle_indices(std::vector<long long>& indices, PhiloxStream& stream) {
  for (std::size_t i = indices.size() - 1; i > 0; --i) {
    const std::size_t j = std::size_t(stream.next_u64() % (i + 1));
    std::swap(indices[i], indices[j]);
  }
}

MLPPredictor init_mlp(int context_size, int dim, int width, PhiloxStream& stream) {
  MLPPredictor mlp;
  mlp.context_size = context_size;
  mlp.dim = dim;
  const int in = context_size * dim;
  mlp.hidden_weight.resize(width, in);
  mlp.hidden_bias.resize(width);
  mlp.output_weight.resize(dim, width);
  mlp.output_bias.resize(dim);

  auto uniform = [&](double bound) { return (2.0 * stream.next_double() - 1.0) * bound; };
  const double hidden_bound = 1.0 / std::sqrt(double(in));
  for (int r = 0; r < width; ++r)
    for (int c = 0; c < in; ++c) mlp.hidden_weight(r, c) = uniform(hidden_bound);
  for (int r = 0; r < width; ++r) mlp.hidden_bias[r] = uniform(hidden_bound);
  const double output_bound = 1.0 / std::sqrt(double(width));
  for (int r = 0; r < dim; ++r)
    for (int c = 0; c < width; ++c) mlp.output_weight(r, c) = uniform(output_bound);
  for (int r = 0; r < dim; ++r) mlp.output_bias[r] = uniform(output_bound);
  return mlp;
}

struct Gradients {
  Eigen::MatrixXd hidden_weight;
  Eigen::VectorXd hidden_bias;
  Eigen::MatrixXd output_weight;
  Eigen::VectorXd output_bias;
  double loss = 0.0;
};

Gradients backprop(const MLPPredictor& mlp, const Eigen::MatrixXd& contexts,
                   const Eigen::MatrixXd& targets) {
  const double batch = double(contexts.rows());
  const Eigen::MatrixXd hidden =
      ((contexts * mlp.hidden_weight.transpose()).rowwise() + mlp.hidden_bias.transpose())
          .array()
          .tanh()
          .matrix();
  const Eigen::MatrixXd residual =
      (hidden * mlp.output_weight.transpose()).rowwise() + mlp.output_bias.transpose() -
      targets;

  Gradients grads;
  grads.loss = residual.squaredNorm() / batch;
  const Eigen::MatrixXd d_out = (2.0 / batch) * residual;
  grads.output_weight = d_out.transpose() * hidden;
  grads.output_bias = d_out.colwise().sum().transpose();
  const Eigen::MatrixXd d_hidden =
      ((d_out * mlp.output_weight).array() * (1.0 - hidden.array().square())).matrix();
  grads.hidden_weight = d_hidden.transpose() * contexts;
  grads.hidden_bias = d_hidden.colwise().sum().transpose();
  return grads;
}

double gradient_coordinate(const Gradients& grads, const MLPPredictor& mlp, int index) {
  const int n_w1 = int(mlp.hidden_weight.size());
  const int n_b1 = int(mlp.hidden_bias.size());
  const int n_w2 = int(mlp.output_weight.size());
  const int in = int(mlp.hidden_weight.cols());
  const int width = int(mlp.output_weight.cols());
  if (index < n_w1) return grads.hidden_weight(index / in, index % in);
  index -= n_w1;
  if (index < n_b1) return grads.hidden_bias[index];
  index -= n_b1;
  if (index < n_w2) return grads.output_weight(index / width, index % width);
  return grads.output_bias[index - n_w2];
}

double check_gradients_impl(MLPPredictor mlp, const Eigen::MatrixXd& contexts,
                            const Eigen::MatrixXd& targets, int n_coords,
                            PhiloxStream& stream) {
  const Gradients grads = backprop(mlp, contexts, targets);
  auto loss_at = [&]() { return backprop(mlp, contexts, targets).loss; };

  double worst = 0.0;
  for (int c = 0; c < n_coords; ++c) {
    const int index = int(stream.next_u64() % std::uint64_t(mlp.parameter_count()));
    const double saved = mlp.get_parameter(index);
    const double step = 1e-5 * std::max(1.0, std::abs(saved));
    mlp.set_parameter(index, saved + step);
    const double loss_plus = loss_at();
    mlp.set_parameter(index, saved - step);
    const double loss_minus = loss_at();
    mlp.set_parameter(index, saved);

    const double numeric = (loss_plus - loss_minus) / (2.0 * step);
    const double analytic = gradient_coordinate(grads, mlp, index);
    const double rel = std::abs(analytic - numeric) /
                       std::max({std::abs(analytic), std::abs(numeric), 1e-8});
    worst = std::max(worst, rel);
  }
  return worst;
}

}  // namespace

Dataset make_dataset(const Eigen::MatrixXd& samples, int dim, int context_size) {
  if (dim < 1 || context_size < 1) throw ArgumentError("dim and context size must be positive");
  if (samples.cols() < (context_size + 1) * dim)
    throw ArgumentError("samples have fewer frames than the requested context size");
  Dataset data;
  data.dim = dim;
  data.targets = samples.leftCols(dim);
  data.contexts = samples.middleCols(dim, context_size * dim);
  return data;
}

Eigen::MatrixXd LinearPredictor::predict_all(const Eigen::MatrixXd& contexts) const {
  return (contexts * coeff.transpose()).rowwise() + offset.transpose();
}

LinearPredictor fit_linear(const Dataset& data, double ridge) {
  if (data.size() < 1) throw ArgumentError("empty training set");
  if (ridge < 0.0) throw ArgumentError("ridge must be nonnegative");
  const long long n = data.size();
  const int p = int(data.contexts.cols());

  const Eigen::RowVectorXd context_mean = data.contexts.colwise().mean();
  const Eigen::RowVectorXd target_mean = data.targets.colwise().mean();
  const Eigen::MatrixXd centered_x = data.contexts.rowwise() - context_mean;
  const Eigen::MatrixXd centered_y = data.targets.rowwise() - target_mean;

  Eigen::MatrixXd gram = centered_x.transpose() * centered_x;
  if (ridge == 0.0) {
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(gram);
    const double min_eig = eig.eigenvalues().minCoeff();
    const double max_eig = eig.eigenvalues().maxCoeff();
    if (min_eig <= std::max(1.0, max_eig) * 1e-10) {
      std::ostringstream msg;
      msg << "Gram matrix is rank deficient with ridge 0: smallest eigenvalue " << min_eig
          << " (n=" << n << ", p=" << p << ")";
      throw ConditioningError(msg.str());
    }
  } else {
    gram.diagonal().array() += ridge;
  }

  const Eigen::MatrixXd weights =
      Eigen::LDLT<Eigen::MatrixXd>(gram).solve(centered_x.transpose() * centered_y);

  LinearPredictor model;
  model.dim = data.dim;
  model.context_size = data.context_size();
  model.ridge = ridge;
  model.coeff = weights.transpose();
  model.offset = target_mean.transpose() - model.coeff * context_mean.transpose();
  return model;
}

Eigen::VectorXd MLPPredictor::predict(const Eigen::VectorXd& context) const {
  const Eigen::VectorXd hidden =
      (hidden_weight * context + hidden_bias).array().tanh().matrix();
  return output_weight * hidden + output_bias;
}

Eigen::MatrixXd MLPPredictor::predict_all(const Eigen::MatrixXd& contexts) const {
  const Eigen::MatrixXd hidden =
      ((contexts * hidden_weight.transpose()).rowwise() + hidden_bias.transpose())
          .array()
          .tanh()
          .matrix();
  return (hidden * output_weight.transpose()).rowwise() + output_bias.transpose();
}

int MLPPredictor::parameter_count() const {
  return int(hidden_weight.size() + hidden_bias.size() + output_weight.size() +
             output_bias.size());
}

double MLPPredictor::get_parameter(int index) const {
  const int n_w1 = int(hidden_weight.size());
  const int n_b1 = int(hidden_bias.size());
  const int n_w2 = int(output_weight.size());
  const int in = int(hidden_weight.cols());
  const int width = int(output_weight.cols());
  if (index < n_w1) return hidden_weight(index / in, index % in);
  index -= n_w1;
  if (index < n_b1) return hidden_bias[index];
  index -= n_b1;
  if (index < n_w2) return output_weight(index / width, index % width);
  return output_bias[index - n_w2];
}

void MLPPredictor::set_parameter(int index, double value) {
  const int n_w1 = int(hidden_weight.size());
  const int n_b1 = int(hidden_bias.size());
  const int n_w2 = int(output_weight.size());
  const int in = int(hidden_weight.cols());
  const int width = int(output_weight.cols());
  if (index < n_w1) {
    hidden_weight(index / in, index % in) = value;
    return;
  }
  index -= n_w1;
  if (index < n_b1) {
    hidden_bias[index] = value;
    return;
  }
  index -= n_b1;
  if (index < n_w2) {
    output_weight(index / width, index % width) = value;
    return;
  }
  output_bias[index - n_w2] = value;
}

double mlp_loss(const MLPPredictor& mlp, const Dataset& data) {
  return backprop(mlp, data.contexts, data.targets).loss;
}

double mlp_gradient_check(const MLPPredictor& mlp, const Dataset& data, int n_coords,
                          RngSpec rng) {
  PhiloxStream stream(rng);
  return check_gradients_impl(mlp, data.contexts, data.targets, n_coords, stream);
}

MLPPredictor fit_mlp(const Dataset& data, const MLPTrainConfig& config) {
  if (data.size() < 1) throw ArgumentError("empty training set");
  if (config.width < 1) throw ArgumentError("hidden width must be positive");
  if (config.epochs < 0 || config.batch_size < 1 || !(config.learning_rate > 0.0))
    throw ArgumentError("invalid training configuration");

  PhiloxStream stream(config.rng);
  MLPPredictor mlp = init_mlp(data.context_size(), data.dim, config.width, stream);

  if (config.check_gradients) {
    const long long check_rows = std::min<long long>(data.size(), 64);
    const double worst = check_gradients_impl(mlp, data.contexts.topRows(check_rows),
                                              data.targets.topRows(check_rows), 10, stream);
    if (!(worst < 1e-4))
      throw TrainingError("analytic gradient failed the finite-difference check: max "
                          "relative error " +
                          std::to_string(worst));
  }

  const double initial_loss = mlp_loss(mlp, data);
  std::vector<double> trace{initial_loss};
  std::vector<long long> order(data.size());
  std::iota(order.begin(), order.end(), 0);

  int diverged_epochs = 0;
  for (int epoch = 0; epoch < config.epochs; ++epoch) {
    shuffle_indices(order, stream);
    for (long long start = 0; start < data.size(); start += config.batch_size) {
      const long long count = std::min<long long>(config.batch_size, data.size() - start);
      Eigen::MatrixXd batch_x(count, data.contexts.cols());
      Eigen::MatrixXd batch_y(count, data.targets.cols());
      for (long long i = 0; i < count; ++i) {
        batch_x.row(i) = data.contexts.row(order[start + i]);
        batch_y.row(i) = data.targets.row(order[start + i]);
      }
      const Gradients grads = backprop(mlp, batch_x, batch_y);
      mlp.hidden_weight -= config.learning_rate * grads.hidden_weight;
      mlp.hidden_bias -= config.learning_rate * grads.hidden_bias;
      mlp.output_weight -= config.learning_rate * grads.output_weight;
      mlp.output_bias -= config.learning_rate * grads.output_bias;
    }

    const double loss = mlp_loss(mlp, data);
    trace.push_back(loss);
    if (!std::isfinite(loss) || loss > 10.0 * initial_loss) {
      if (++diverged_epochs >= 3) {
        std::ostringstream msg;
        msg << "training diverged; loss trace:";
        for (double l : trace) msg << ' ' << l;
        throw TrainingError(msg.str());
      }
    } else {
      diverged_epochs = 0;
    }
  }
  return mlp;
}

Evaluation evaluate_predictions(const Eigen::MatrixXd& predictions,
                                const Eigen::MatrixXd& targets) {
  if (predictions.rows() != targets.rows() || predictions.cols() != targets.cols())
    throw ArgumentError("prediction and target shapes do not match");
  if (predictions.rows() == 0) throw ArgumentError("empty evaluation set");

  // Fixed-order accumulation keeps the reduction deterministic.
  double total = 0.0;
  for (long long i = 0; i < predictions.rows(); ++i)
    total += (predictions.row(i) - targets.row(i)).squaredNorm();

  Evaluation eval;
  eval.n = predictions.rows();
  eval.mse = total / double(predictions.rows());
  eval.per_pixel_mse = eval.mse / double(predictions.cols());
  eval.psnr_db = eval.per_pixel_mse == 0.0
                     ? std::numeric_limits<double>::infinity()
                     : 10.0 * std::log10(1.0 / eval.per_pixel_mse);
  return eval;
}

Evaluation evaluate(const LinearPredictor& model, const Dataset& data) {
  return evaluate_predictions(model.predict_all(data.contexts), data.targets);
}

Evaluation evaluate(const MLPPredictor& model, const Dataset& data) {
  return evaluate_predictions(model.predict_all(data.contexts), data.targets);
}

ContextComparison compare_context_sizes(const gauss::GaussianSource& source,
                                        const gauss::ChainKind& kind, int n_frames,
                                        int k_small, int k_large, long long n_train,
                                        long long n_test, double ridge, RngSpec rng) {
  if (k_small < 1 || k_small > k_large) throw ArgumentError("need 1 <= k_small <= k_large");
  if (k_large > n_frames - 1) throw ArgumentError("context size exceeds available frames");
  if (n_train < 2 || n_test < 2) throw ArgumentError("need at least 2 train and test samples");

  const Eigen::MatrixXd samples =
      gauss::sample_chain(source, kind, n_frames, n_train + n_test, rng);
  const Eigen::MatrixXd train = samples.topRows(n_train);
  const Eigen::MatrixXd test = samples.bottomRows(n_test);

  ContextComparison cmp;
  cmp.k_small = k_small;
  cmp.k_large = k_large;

  const Dataset train_small = make_dataset(train, source.dim(), k_small);
  const Dataset test_small = make_dataset(test, source.dim(), k_small);
  const LinearPredictor model_small = fit_linear(train_small, ridge);
  const Eigen::MatrixXd pred_small = model_small.predict_all(test_small.contexts);
  cmp.eval_small = evaluate_predictions(pred_small, test_small.targets);

  Eigen::MatrixXd pred_large;
  const Dataset test_large = make_dataset(test, source.dim(), k_large);
  if (k_large == k_small) {
    pred_large = pred_small;
    cmp.eval_large = cmp.eval_small;
  } else {
    const Dataset train_large = make_dataset(train, source.dim(), k_large);
    const LinearPredictor model_large = fit_linear(train_large, ridge);
    pred_large = model_large.predict_all(test_large.contexts);
    cmp.eval_large = evaluate_predictions(pred_large, test_large.targets);
  }

  cmp.mse_diff = cmp.eval_large.mse - cmp.eval_small.mse;
  // Paired residual differences give the standard error of the MSE gap.
  double mean_diff = 0.0, sq_diff = 0.0;
  for (long long i = 0; i < n_test; ++i) {
    const double diff = (pred_large.row(i) - test_large.targets.row(i)).squaredNorm() -
                        (pred_small.row(i) - test_small.targets.row(i)).squaredNorm();
    mean_diff += diff;
    sq_diff += diff * diff;
  }
  mean_diff /= double(n_test);
  const double var_diff =
      std::max(0.0, sq_diff / double(n_test) - mean_diff * mean_diff);
  cmp.se_diff = std::sqrt(var_diff / double(n_test));

  const gauss::JointGaussian joint = gauss::build_joint(source, kind, n_frames);
  std::vector<int> lags_small(k_small), lags_large(k_large);
  std::iota(lags_small.begin(), lags_small.end(), 1);
  std::iota(lags_large.begin(), lags_large.end(), 1);
  cmp.oracle_small = gauss::conditional_error(joint, lags_small);
  cmp.oracle_large = gauss::conditional_error(joint, lags_large);
  cmp.oracle_gap = cmp.oracle_small - cmp.oracle_large;
  return cmp;
}

StepPredictor as_step(const LinearPredictor& model) {
  return [model](const Eigen::VectorXd& context) { return model.predict(context); };
}

StepPredictor as_step(const gauss::AffinePredictor& model) {
  return [model](const Eigen::VectorXd& context) {
    return Eigen::VectorXd(model.coeff * context + model.offset);
  };
}

GenerationResult autoregressive_generate(const std::vector<StepPredictor>& steps,
                                         const Eigen::MatrixXd& heldout, int n_frames,
                                         int dim, const GenConfig& config, RngSpec rng) {
  const int window = config.context_window;
  if (window < 1 || window >= n_frames) throw ArgumentError("context window outside 1..T-1");
  if (int(steps.size()) != n_frames - window)
    throw ArgumentError("need one predictor per generated frame (" +
                        std::to_string(n_frames - window) + ")");
  if (config.n_videos < 1) throw ArgumentError("n_videos must be positive");
  if (heldout.rows() < config.n_videos)
    throw ArgumentError("held-out set smaller than the number of videos to generate");
  if (heldout.cols() != Eigen::Index(n_frames) * dim)
    throw ArgumentError("held-out sample width does not match T*d");
  if (config.residual_std.size() != 1 &&
      int(config.residual_std.size()) != n_frames - window)
    throw ArgumentError("residual_std must have one entry or one per generated frame");
  for (double sd : config.residual_std)
    if (!(sd >= 0.0)) throw ArgumentError("residual_std entries must be nonnegative");

  PhiloxStream stream(rng);
  Eigen::MatrixXd videos(config.n_videos, heldout.cols());
  Eigen::VectorXd context(window * dim);

  for (long long j = 0; j < config.n_videos; ++j) {
    // Initial window: the most corrupted frames of the held-out chain.
    for (int frame = 0; frame < window; ++frame) {
      const int block = n_frames - 1 - frame;
      videos.row(j).segment(block * dim, dim) = heldout.row(j).segment(block * dim, dim);
    }
    for (int frame = window; frame < n_frames; ++frame) {
      const int block = n_frames - 1 - frame;
      const Eigen::RowVectorXd source_row =
          config.teacher_forced ? Eigen::RowVectorXd(heldout.row(j))
                                : Eigen::RowVectorXd(videos.row(j));
      for (int c = 0; c < window; ++c)
        context.segment(c * dim, dim) = source_row.segment((block + 1 + c) * dim, dim);

      Eigen::VectorXd value = steps[frame - window](context);
      const double sd = config.residual_std.size() == 1
                            ? config.residual_std[0]
                            : config.residual_std[frame - window];
      if (sd > 0.0)
        for (int i = 0; i < dim; ++i) value[i] += sd * stream.next_normal();
      videos.row(j).segment(block * dim, dim) = value.transpose();
    }
  }

  GenerationResult result;
  result.videos = std::move(videos);

  // Paired error against the held-out chain each video started from. In
  // teacher-forced mode this is the per-step optimum's error; in free
  // running it includes the drift of the generated context.
  double total = 0.0;
  for (long long j = 0; j < config.n_videos; ++j)
    total += (result.videos.row(j).head(dim) - heldout.row(j).head(dim)).squaredNorm();
  result.last_frame_mse = total / double(config.n_videos);

  // Last-frame moment gaps against the full held-out set.
  const Eigen::MatrixXd generated_last = result.videos.leftCols(dim);
  const Eigen::MatrixXd truth_last = heldout.leftCols(dim);
  const Eigen::RowVectorXd mean_gen = generated_last.colwise().mean();
  const Eigen::RowVectorXd mean_truth = truth_last.colwise().mean();
  result.mean_gap = (mean_gen - mean_truth).norm();

  auto sample_cov = [](const Eigen::MatrixXd& rows, const Eigen::RowVectorXd& mean) {
    const Eigen::MatrixXd centered = rows.rowwise() - mean;
    return Eigen::MatrixXd(centered.transpose() * centered /
                           double(std::max<Eigen::Index>(rows.rows() - 1, 1)));
  };
  result.cov_frobenius_gap =
      (sample_cov(generated_last, mean_gen) - sample_cov(truth_last, mean_truth)).norm();
  return result;
}

}  // namespace pvlab::predictor
