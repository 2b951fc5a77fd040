#pragma once

// Sample placement along a ray: stratified coarse samples, inverse-CDF
// importance samples from the coarse weights, and the spacing (delta) of
// an ordered sample list.

#include <span>
#include <vector>

#include "icarus/random.hpp"

namespace icarus {

/// One sample per stratum [near + i h, near + (i + 1) h), h = (far - near) / n,
/// at near + (i + u) h. u is uniform from `rng`, or 0.5 when rng is null.
std::vector<double> stratified_samples(double near, double far, int n, Rng* rng);

/// Stratum boundaries near + i h, i = 0..n.
std::vector<double> stratum_edges(double near, double far, int n);

/// m samples from the piecewise-constant density proportional to `weights`
/// over the bins delimited by `edges` (weights.size() + 1 of them). All-zero
/// weights fall back to a uniform density. Uniforms come from `rng`, or are
/// (i + 0.5) / m when rng is null. Output is sorted ascending.
/// Throws std::invalid_argument on negative weights or a size mismatch.
std::vector<double> importance_samples(std::span<const double> edges, std::span<const double> weights, int m, Rng* rng);

/// Sorted union of two sorted lists.
std::vector<double> merge_samples(std::span<const double> a, std::span<const double> b);

/// delta_i = t_{i+1} - t_i; the last sample extends to `far`.
std::vector<double> sample_deltas(std::span<const double> t, double far);

}  // namespace icarus
