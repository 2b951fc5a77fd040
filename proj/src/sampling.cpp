#include "icarus/sampling.hpp"

#include <algorithm>
#include <stdexcept>

namespace icarus {

std::vector<double> stratified_samples(double near, double far, int n, Rng* rng) {
    if (!(near < far)) throw std::invalid_argument("stratified_samples: need near < far");
    if (n <= 0) throw std::invalid_argument("stratified_samples: n must be positive");
    const double h = (far - near) / n;
    std::vector<double> t(static_cast<size_t>(n));
    for (int i = 0; i < n; ++i) t[i] = near + (i + (rng ? rng->uniform() : 0.5)) * h;
    return t;
}

std::vector<double> stratum_edges(double near, double far, int n) {
    std::vector<double> e(static_cast<size_t>(n) + 1);
    const double h = (far - near) / n;
    for (int i = 0; i <= n; ++i) e[i] = near + i * h;
    e[n] = far;
    return e;
}

std::vector<double> importance_samples(std::span<const double> edges, std::span<const double> weights, int m, Rng* rng) {
    const size_t bins = weights.size();
    if (bins == 0 || edges.size() != bins + 1) throw std::invalid_argument("importance_samples: need weights.size() + 1 edges");
    if (m < 0) throw std::invalid_argument("importance_samples: negative sample count");

    double total = 0.0;
    for (double w : weights) {
        if (w < 0.0) throw std::invalid_argument("importance_samples: negative weight");
        total += w;
    }
    std::vector<double> cdf(bins + 1, 0.0);
    for (size_t i = 0; i < bins; ++i) cdf[i + 1] = cdf[i] + (total > 0.0 ? weights[i] : 1.0);
    const double norm = cdf[bins];
    for (double& c : cdf) c /= norm;
    cdf[bins] = 1.0;

    std::vector<double> out(static_cast<size_t>(m));
    for (int k = 0; k < m; ++k) {
        const double u = rng ? rng->uniform() : (k + 0.5) / m;
        size_t i = static_cast<size_t>(std::upper_bound(cdf.begin(), cdf.end(), u) - cdf.begin());
        i = std::clamp<size_t>(i, 1, bins) - 1;
        const double span = cdf[i + 1] - cdf[i];
        const double frac = span > 0.0 ? std::clamp((u - cdf[i]) / span, 0.0, 1.0) : 0.0;
        out[k] = edges[i] + frac * (edges[i + 1] - edges[i]);
    }
    std::sort(out.begin(), out.end());
    return out;
}

std::vector<double> merge_samples(std::span<const double> a, std::span<const double> b) {
    std::vector<double> out(a.size() + b.size());
    std::merge(a.begin(), a.end(), b.begin(), b.end(), out.begin());
    return out;
}

std::vector<double> sample_deltas(std::span<const double> t, double far) {
    std::vector<double> d(t.size());
    for (size_t i = 0; i + 1 < t.size(); ++i) d[i] = t[i + 1] - t[i];
    if (!t.empty()) d.back() = std::max(0.0, far - t.back());
    return d;
}

}  // namespace icarus
