#include "pvlab/augment.hpp"

#include <cmath>
#include <numbers>
#include <string>

#include "pvlab/errors.hpp"

namespace pvlab::augment {

namespace {

// Orthonormal DCT-II matrix: row k is s_k * cos(pi*(n+0.5)*k/N), the Neumann
// Laplacian eigenbasis on a regular grid. Its transpose is the inverse.
Eigen::MatrixXd dct2_matrix(int n) {
  Eigen::MatrixXd m(n, n);
  const double scale0 = std::sqrt(1.0 / double(n));
  const double scale = std::sqrt(2.0 / double(n));
  for (int k = 0; k < n; ++k)
    for (int i = 0; i < n; ++i)
      m(k, i) = (k == 0 ? scale0 : scale) *
                std::cos(std::numbers::pi * (double(i) + 0.5) * double(k) / double(n));
  return m;
}

Eigen::MatrixXd channel_as_matrix(const Frame& frame, int c) {
  Eigen::MatrixXd m(frame.height, frame.width);
  for (int y = 0; y < frame.height; ++y)
    for (int x = 0; x < frame.width; ++x) m(y, x) = frame.at(y, x, c);
  return m;
}

void matrix_to_channel(const Eigen::MatrixXd& m, Frame& frame, int c) {
  for (int y = 0; y < frame.height; ++y)
    for (int x = 0; x < frame.width; ++x) frame.at(y, x, c) = float(m(y, x));
}

void check_kernel(const Eigen::MatrixXd& kernel) {
  if (kernel.rows() != kernel.cols() || kernel.rows() < 3 || kernel.rows() % 2 == 0)
    throw ArgumentError("blur kernel must be square with odd size >= 3");
  if (std::abs(kernel.sum() - 1.0) > 1e-9)
    throw ArgumentError("blur kernel must be normalized to sum 1");
}

}  // namespace

Eigen::MatrixXd gaussian_kernel(int size, double sigma) {
  if (size < 3 || size % 2 == 0) throw ArgumentError("gaussian kernel size must be odd and >= 3");
  if (!(sigma > 0.0)) throw ArgumentError("gaussian kernel sigma must be positive");

  Eigen::MatrixXd kernel(size, size);
  const int radius = size / 2;
  const double inv_two_sigma_sq = 1.0 / (2.0 * sigma * sigma);
  for (int i = -radius; i <= radius; ++i)
    for (int j = -radius; j <= radius; ++j)
      kernel(i + radius, j + radius) = std::exp(-(double(i) * i + double(j) * j) * inv_two_sigma_sq);
  kernel /= kernel.sum();
  return kernel;
}

Frame blur_frame(const Frame& frame, const Eigen::MatrixXd& kernel) {
  frame.validate();
  check_kernel(kernel);
  const int radius = int(kernel.rows()) / 2;
  const int h = frame.height, w = frame.width;

  Frame out(h, w, frame.channels);
  for (int c = 0; c < frame.channels; ++c) {
    for (int y = 0; y < h; ++y) {
      for (int x = 0; x < w; ++x) {
        double acc = 0.0;
        for (int dy = -radius; dy <= radius; ++dy) {
          // Double mod keeps indices valid even when the kernel is wider
          // than the image.
          const int yy = ((y + dy) % h + h) % h;
          for (int dx = -radius; dx <= radius; ++dx) {
            const int xx = ((x + dx) % w + w) % w;
            acc += kernel(dy + radius, dx + radius) * double(frame.at(yy, xx, c));
          }
        }
        out.at(y, x, c) = float(acc);
      }
    }
  }
  return out;
}

PseudoVideo make_blur_video(const Frame& image, const BlurSchedule& schedule) {
  image.validate();
  schedule.validate();

  PseudoVideo video;
  video.frames.resize(schedule.n_frames);
  video.frames[schedule.n_frames - 1] = image;
  for (int t = 1; t <= schedule.n_frames - 1; ++t) {
    const Eigen::MatrixXd kernel =
        gaussian_kernel(schedule.kernel_size, schedule.sigma_at(t));
    video.frames[schedule.n_frames - 1 - t] =
        blur_frame(video.frames[schedule.n_frames - t], kernel);
  }
  return video;
}

Frame heat_operator_apply(const Frame& frame, double time) {
  frame.validate();
  if (!(time >= 0.0)) throw ArgumentError("heat evolution time must be nonnegative");

  const int h = frame.height, w = frame.width;
  const Eigen::MatrixXd dct_h = dct2_matrix(h);
  const Eigen::MatrixXd dct_w = dct2_matrix(w);

  Eigen::MatrixXd damping(h, w);
  const double pi_sq = std::numbers::pi * std::numbers::pi;
  for (int ky = 0; ky < h; ++ky)
    for (int kx = 0; kx < w; ++kx) {
      const double eigenvalue =
          pi_sq * (double(ky) * ky / (double(h) * h) + double(kx) * kx / (double(w) * w));
      damping(ky, kx) = std::exp(-time * eigenvalue);
    }

  Frame out(h, w, frame.channels);
  for (int c = 0; c < frame.channels; ++c) {
    Eigen::MatrixXd coeffs = dct_h * channel_as_matrix(frame, c) * dct_w.transpose();
    coeffs.array() *= damping.array();
    matrix_to_channel(dct_h.transpose() * coeffs * dct_w, out, c);
  }
  return out;
}

PseudoVideo make_heat_video(const Frame& image, const HeatSchedule& schedule, RngSpec rng) {
  image.validate();
  schedule.validate();
  PhiloxStream stream(rng);

  const int n_frames = schedule.n_frames();
  PseudoVideo video;
  video.frames.resize(n_frames);
  video.frames[n_frames - 1] = image;
  for (int t = 1; t <= n_frames - 1; ++t) {
    Frame frame = heat_operator_apply(image, schedule.times[t - 1]);
    if (schedule.sigma_h > 0.0)
      for (float& v : frame.data) v = float(double(v) + schedule.sigma_h * stream.next_normal());
    video.frames[n_frames - 1 - t] = std::move(frame);
  }
  return video;
}

PseudoVideo first_order_markov_noise(const Frame& image, const NoiseSchedule& schedule,
                                     RngSpec rng) {
  image.validate();
  schedule.validate();
  PhiloxStream stream(rng);

  const int n_frames = schedule.n_frames();
  PseudoVideo video;
  video.frames.resize(n_frames);
  video.frames[n_frames - 1] = image;
  for (int t = 1; t <= n_frames - 1; ++t) {
    const double beta = schedule.betas[t - 1];
    const double keep = std::sqrt(1.0 - beta);
    const double inject = std::sqrt(beta);
    const Frame& prev = video.frames[n_frames - t];
    Frame frame(image.height, image.width, image.channels);
    for (std::size_t i = 0; i < frame.size(); ++i)
      frame.data[i] = float(keep * double(prev.data[i]) + inject * stream.next_normal());
    video.frames[n_frames - 1 - t] = std::move(frame);
  }
  return video;
}

PseudoVideo high_order_markov_noise(const Frame& image, const NoiseSchedule& schedule,
                                    RngSpec rng) {
  image.validate();
  schedule.validate();
  PhiloxStream stream(rng);

  const int n_frames = schedule.n_frames();
  PseudoVideo video;
  video.frames.resize(n_frames);
  video.frames[n_frames - 1] = image;

  // Running per-pixel sum of the frames generated so far, so the step-t mean
  // over frames[T-t..T-1] is sum/t.
  std::vector<double> sums(image.size());
  for (std::size_t i = 0; i < image.size(); ++i) sums[i] = double(image.data[i]);

  for (int t = 1; t <= n_frames - 1; ++t) {
    const double beta = schedule.betas[t - 1];
    const double keep = std::sqrt(1.0 - beta);
    const double inject = std::sqrt(beta);
    Frame frame(image.height, image.width, image.channels);
    for (std::size_t i = 0; i < frame.size(); ++i)
      frame.data[i] = float(keep * (sums[i] / double(t)) + inject * stream.next_normal());
    video.frames[n_frames - 1 - t] = frame;
    for (std::size_t i = 0; i < frame.size(); ++i) sums[i] += double(frame.data[i]);
  }
  return video;
}

}  // namespace pvlab::augment
