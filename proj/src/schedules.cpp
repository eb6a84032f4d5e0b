#include "pvlab/schedules.hpp"

#include <cmath>
#include <string>

#include "pvlab/errors.hpp"

namespace pvlab {

void NoiseSchedule::validate() const {
  if (betas.empty()) throw ArgumentError("noise schedule needs at least one beta");
  for (double b : betas)
    if (!(b > 0.0 && b < 1.0))
      throw ArgumentError("beta values must lie in (0, 1), got " + std::to_string(b));
}

NoiseSchedule linear_beta_schedule(int n_frames, double beta_start, double beta_end) {
  if (n_frames < 2) throw ArgumentError("linear_beta_schedule needs at least 2 frames");
  if (!(beta_start > 0.0 && beta_start <= beta_end && beta_end < 1.0))
    throw ArgumentError("linear_beta_schedule requires 0 < beta_start <= beta_end < 1");

  NoiseSchedule schedule;
  schedule.betas.resize(n_frames - 1);
  if (n_frames == 2) {
    schedule.betas[0] = beta_start;
  } else {
    const double step = (beta_end - beta_start) / double(n_frames - 2);
    for (int t = 1; t <= n_frames - 1; ++t)
      schedule.betas[t - 1] = beta_start + double(t - 1) * step;
  }
  return schedule;
}

double BlurSchedule::sigma_at(int step) const {
  return sigma0 * std::exp(rate * double(step));
}

void BlurSchedule::validate() const {
  if (n_frames < 2) throw ArgumentError("blur schedule needs at least 2 frames");
  if (kernel_size < 3 || kernel_size % 2 == 0)
    throw ArgumentError("blur kernel size must be odd and >= 3");
  if (!(sigma0 > 0.0)) throw ArgumentError("blur sigma0 must be positive");
  if (!(rate > 0.0)) throw ArgumentError("blur rate must be positive for increasing sigma");
}

void HeatSchedule::validate() const {
  if (times.empty()) throw ArgumentError("heat schedule needs at least one time");
  if (!(times.front() >= 0.0)) throw ArgumentError("heat times must be nonnegative");
  for (std::size_t i = 1; i < times.size(); ++i)
    if (!(times[i] > times[i - 1]))
      throw ArgumentError("heat times must be strictly increasing");
  if (!(sigma_h >= 0.0)) throw ArgumentError("heat sigma_h must be nonnegative");
}

}  // namespace pvlab
