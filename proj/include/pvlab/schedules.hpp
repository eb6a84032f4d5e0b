#pragma once

#include <vector>

namespace pvlab {

// Per-step noise weights beta_1..beta_{T-1}, each in (0, 1). Step 1 is the
// first corruption applied to the clean image.
struct NoiseSchedule {
  std::vector<double> betas;

  int n_frames() const { return int(betas.size()) + 1; }
  void validate() const;
};

// beta_t = beta_start + (t-1) * (beta_end - beta_start) / (T-2) for
// t = 1..T-1; for T=2 the single beta equals beta_start.
NoiseSchedule linear_beta_schedule(int n_frames, double beta_start, double beta_end);

// Recursive-blur parameters; the step-t kernel width is
// sigma_t = sigma0 * exp(rate * t), strictly increasing in t.
struct BlurSchedule {
  int n_frames = 8;
  int kernel_size = 11;
  double sigma0 = 1.0;
  double rate = 0.05;

  double sigma_at(int step) const;  // step in 1..n_frames-1
  void validate() const;
};

// Heat-equation corruption: frame T-1-t observes the image evolved to
// times[t-1] plus N(0, sigma_h^2) pixel noise.
struct HeatSchedule {
  std::vector<double> times;  // strictly increasing, nonnegative
  double sigma_h = 0.0;

  int n_frames() const { return int(times.size()) + 1; }
  void validate() const;
};

}  // namespace pvlab
