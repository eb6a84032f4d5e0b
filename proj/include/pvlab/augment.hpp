#pragma once

#include <Eigen/Core>

#include "pvlab/frame.hpp"
#include "pvlab/rng.hpp"
#include "pvlab/schedules.hpp"

namespace pvlab::augment {

// Normalized 2-D Gaussian kernel: entries proportional to
// exp(-(i^2+j^2)/(2 sigma^2)) over the centered size x size grid, divided by
// their sum. Symmetric under i<->-i, j<->-j and i<->j.
Eigen::MatrixXd gaussian_kernel(int size, double sigma);

// Per-channel 2-D convolution with periodic (wrap-around) boundary. The
// kernel must be normalized (sum 1); output shape equals input shape and the
// per-channel mean is preserved.
Frame blur_frame(const Frame& frame, const Eigen::MatrixXd& kernel);

// Recursive blur chain: frames[T-1] is the input image bitwise and
// frames[T-1-t] = blur(frames[T-t], kernel(sigma_t)), so the first frame is
// the blurriest.
PseudoVideo make_blur_video(const Frame& image, const BlurSchedule& schedule);

// Evolves each channel under the heat equation for time t with insulated
// (Neumann) boundaries: DCT-II coefficient (ky, kx) is damped by
// exp(-t * pi^2 (ky^2/H^2 + kx^2/W^2)). t = 0 is the identity; the DC
// coefficient is always preserved.
Frame heat_operator_apply(const Frame& frame, double time);

// Heat chain conditioned on the original image (not recursive):
// frames[T-1-t] = heat(image, times[t-1]) + sigma_h * noise.
PseudoVideo make_heat_video(const Frame& image, const HeatSchedule& schedule, RngSpec rng);

// First-order Markov noising:
// frames[T-1-t] = sqrt(1-beta_t) * frames[T-t] + sqrt(beta_t) * noise.
PseudoVideo first_order_markov_noise(const Frame& image, const NoiseSchedule& schedule,
                                     RngSpec rng);

// High-order Markov noising: the new frame corrupts the arithmetic mean of
// all frames generated so far,
// frames[T-1-t] = sqrt(1-beta_t) * mean(frames[T-t..T-1]) + sqrt(beta_t) * noise.
PseudoVideo high_order_markov_noise(const Frame& image, const NoiseSchedule& schedule,
                                    RngSpec rng);

}  // namespace pvlab::augment
