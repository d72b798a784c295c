#pragma once

#include <span>

namespace pmadapt {

/// log((1/n) * sum_i exp(terms[i])) for finite terms, computed with the
/// max-shift so that no partial sum underflows. Returns -inf for an empty span.
double log_mean_exp(std::span<const double> terms);

/// log((1/n) * sum_i exp(-0.5 * (y - (shift + scale * z[i]))^2)).
/// This is the per-observation Gaussian-kernel reduction of the latent
/// Gaussian model, fused so the hot loop vectorizes.
double log_mean_gauss_kernel(double y, double shift, double scale,
                             std::span<const double> z, std::span<double> scratch);

}  // namespace pmadapt
