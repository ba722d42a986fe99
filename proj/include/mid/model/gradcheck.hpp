#pragma once

#include <cstdint>
#include <string>

#include "mid/model/network.hpp"

namespace mid {

struct GradCheckResult {
  std::size_t checked = 0;
  double max_rel_error = 0.0;
  std::string worst_param;
};

/// Backprop vs central differences of the MSE loss for a double-precision
/// network on a random batch. Checks every parameter when `max_params` is 0,
/// otherwise an evenly strided subset. Relative error is
/// |analytic - numeric| / max(|analytic|, |numeric|, floor).
GradCheckResult gradient_check(const nn::ArchitectureSpec& arch, std::uint64_t seed, int batch, int size,
                               std::size_t max_params = 0, double step = 1e-6, double floor = 1e-6);

}  // namespace mid
