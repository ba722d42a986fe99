#include "mid/model/gradcheck.hpp"

#include <algorithm>
#include <cmath>

#include "mid/model/train.hpp"

namespace mid {

GradCheckResult gradient_check(const nn::ArchitectureSpec& arch, std::uint64_t seed, int batch, int size,
                               std::size_t max_params, double step, double floor) {
  RngStream root(seed, "gradcheck");
  auto net = nn::make_network<double>(arch);
  RngStream init = root.derive("init");
  nn::initialize_parameters(*net, init);
  // non-zero biases so their gradients are exercised away from the init point
  RngStream bias_rng = root.derive("bias");
  for (auto& p : net->parameters()) {
    if (!p.is_bias) continue;
    for (double& v : p.value) v = 0.1 * bias_rng.normal();
  }
  nn::Tensor4<double> input(batch, arch.channels, size, size);
  nn::Tensor4<double> target(batch, arch.channels, size, size);
  RngStream data_rng = root.derive("data");
  for (double& v : input.data) v = data_rng.uniform();
  for (double& v : target.data) v = data_rng.uniform();

  net->zero_grad();
  mse_loss<double>(*net, input, target, true);

  GradCheckResult result;
  auto params = net->parameters();
  std::size_t total = 0;
  for (const auto& p : params) total += p.value.size();
  const std::size_t stride = (max_params == 0 || max_params >= total) ? 1 : total / max_params;
  std::size_t flat = 0;
  for (auto& p : params) {
    for (std::size_t j = 0; j < p.value.size(); ++j, ++flat) {
      if (flat % stride != 0) continue;
      const double saved = p.value[j];
      p.value[j] = saved + step;
      const double up = mse_loss<double>(*net, input, target, false);
      p.value[j] = saved - step;
      const double down = mse_loss<double>(*net, input, target, false);
      p.value[j] = saved;
      const double numeric = (up - down) / (2.0 * step);
      const double analytic = p.grad[j];
      const double denom = std::max({std::abs(analytic), std::abs(numeric), floor});
      const double rel = std::abs(analytic - numeric) / denom;
      ++result.checked;
      if (rel > result.max_rel_error) {
        result.max_rel_error = rel;
        result.worst_param = p.name + "[" + std::to_string(j) + "]";
      }
    }
  }
  return result;
}

}  // namespace mid
