#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <vector>

namespace slfv {

// Pairwise (cascade) summation. Error grows like eps*log2(n) instead of
// eps*n, and the reduction tree is fixed, so results are reproducible
// independent of threading or chunk boundaries elsewhere.
double pairwise_sum(std::span<const double> xs);

// Dot product with the same fixed reduction tree.
double pairwise_dot(std::span<const double> a, std::span<const double> b);

struct MeanVar {
    std::size_t count = 0;
    double mean = 0.0;
    double var = 0.0;  // unbiased sample variance
    double se_mean() const;
    double se_var() const;  // SE of the sample variance, Gaussian approx
};

MeanVar mean_var(std::span<const double> xs);

// Ordinary least squares slope of y against x.
double ols_slope(std::span<const double> x, std::span<const double> y);

// Floating point rendered with 17 significant digits (round-trip exact).
std::string format17(double x);

// Runs fn(i) for i in [0, n) on up to `threads` workers. Work is split into
// contiguous index blocks, so writes to per-index slots are race-free and
// results do not depend on the thread count.
void parallel_for_indexed(std::size_t n, int threads, const std::function<void(std::size_t)>& fn);

// FNV-1a, used for config/content hashes in manifests and logs.
std::uint64_t fnv1a64(std::span<const char> bytes);
std::uint64_t fnv1a64(const std::string& s);

}  // namespace slfv
