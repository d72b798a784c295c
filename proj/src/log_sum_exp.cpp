// Compiled with relaxed floating-point flags (see CMakeLists.txt) so the
// exp reductions use the vector math library. Inputs here are always finite.
#include "pmadapt/log_sum_exp.hpp"

#include <cmath>
#include <limits>

namespace pmadapt {

__attribute__((target_clones("avx2", "default")))
double log_mean_exp(std::span<const double> terms) {
  const std::size_t n = terms.size();
  if (n == 0) return -std::numeric_limits<double>::infinity();
  double mx = terms[0];
  for (std::size_t i = 1; i < n; ++i) mx = terms[i] > mx ? terms[i] : mx;
  double sum = 0.0;
  for (std::size_t i = 0; i < n; ++i) sum += std::exp(terms[i] - mx);
  return mx + std::log(sum / static_cast<double>(n));
}

__attribute__((target_clones("avx2", "default")))
double log_mean_gauss_kernel(double y, double shift, double scale,
                             std::span<const double> z, std::span<double> scratch) {
  const std::size_t n = z.size();
  const double centre = y - shift;
  for (std::size_t i = 0; i < n; ++i) {
    const double e = centre - scale * z[i];
    scratch[i] = -0.5 * e * e;
  }
  return log_mean_exp(scratch.first(n));
}

}  // namespace pmadapt
