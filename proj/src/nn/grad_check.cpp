#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "terrasense/nn.hpp"

namespace terrasense::nn {

GradCheckResult check_gradient(const std::function<double()>& loss, std::span<double* const> params,
                               std::span<const double> analytic, double eps) {
  if (params.size() != analytic.size()) throw InputError("gradient check: size mismatch");
  if (!(eps > 0.0)) throw InputError("gradient check: eps must be positive");
  GradCheckResult r;
  r.coordinates = params.size();
  for (std::size_t i = 0; i < params.size(); ++i) {
    double& p = *params[i];
    const double saved = p;
    p = saved + eps;
    const double up = loss();
    p = saved - eps;
    const double down = loss();
    p = saved;
    const double fd = (up - down) / (2.0 * eps);
    double err = std::abs(analytic[i] - fd) / std::max(1.0, std::abs(analytic[i]));
    if (std::isnan(err)) err = std::numeric_limits<double>::infinity();
    if (err > r.max_relative_error) {
      r.max_relative_error = err;
      r.worst = i;
    }
  }
  return r;
}

std::vector<std::size_t> sample_coordinates(std::size_t total, std::size_t count, std::uint64_t seed) {
  std::vector<std::size_t> all(total);
  std::iota(all.begin(), all.end(), std::size_t{0});
  if (count >= total) return all;
  Rng rng(seed);
  // Partial Fisher-Yates.
  for (std::size_t i = 0; i < count; ++i) std::swap(all[i], all[i + uniform_index(rng, total - i)]);
  all.resize(count);
  std::sort(all.begin(), all.end());
  return all;
}

}  // namespace terrasense::nn
