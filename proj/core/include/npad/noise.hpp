#pragma once

#include <optional>
#include <string>

#include "npad/numeric.hpp"

namespace npad {

enum class ScheduleRule { inverse_t };

// sigma_t = sigma0 / t for t >= 1.
struct NoiseSchedule {
  double sigma0 = 0.0;
  ScheduleRule rule = ScheduleRule::inverse_t;
};

double noise_sigma(const NoiseSchedule& schedule, int t);

// Per-step perturbation of the decoder state. Silent yields exact zeros and
// never touches an RNG; Scheduled draws N(0, sigma_t^2 I) at step t.
class NoiseSource {
 public:
  static NoiseSource silent() { return NoiseSource(); }
  static NoiseSource scheduled(RngStream rng, NoiseSchedule schedule) {
    return NoiseSource(std::move(rng), schedule);
  }

  bool is_silent() const { return !rng_.has_value(); }
  double sigma0() const { return rng_ ? schedule_.sigma0 : 0.0; }

  Vec next(int t, std::size_t dim);

 private:
  NoiseSource() = default;
  NoiseSource(RngStream rng, NoiseSchedule schedule) : rng_(std::move(rng)), schedule_(schedule) {}

  std::optional<RngStream> rng_;
  NoiseSchedule schedule_;
};

}  // namespace npad
