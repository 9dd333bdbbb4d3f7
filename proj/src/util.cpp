#include "slfv/util.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <stdexcept>
#include <thread>
#include <vector>

namespace slfv {

namespace {

double pairwise_sum_impl(const double* xs, std::size_t n) {
    if (n <= 8) {
        double s = 0.0;
        for (std::size_t i = 0; i < n; ++i) s += xs[i];
        return s;
    }
    std::size_t half = n / 2;
    return pairwise_sum_impl(xs, half) + pairwise_sum_impl(xs + half, n - half);
}

double pairwise_dot_impl(const double* a, const double* b, std::size_t n) {
    if (n <= 8) {
        double s = 0.0;
        for (std::size_t i = 0; i < n; ++i) s += a[i] * b[i];
        return s;
    }
    std::size_t half = n / 2;
    return pairwise_dot_impl(a, b, half) + pairwise_dot_impl(a + half, b + half, n - half);
}

}  // namespace

double pairwise_sum(std::span<const double> xs) { return pairwise_sum_impl(xs.data(), xs.size()); }

double pairwise_dot(std::span<const double> a, std::span<const double> b) {
    if (a.size() != b.size()) throw std::invalid_argument("pairwise_dot: length mismatch");
    return pairwise_dot_impl(a.data(), b.data(), a.size());
}

MeanVar mean_var(std::span<const double> xs) {
    MeanVar mv;
    mv.count = xs.size();
    if (mv.count == 0) return mv;
    mv.mean = pairwise_sum(xs) / static_cast<double>(mv.count);
    if (mv.count < 2) return mv;
    std::vector<double> sq(xs.size());
    for (std::size_t i = 0; i < xs.size(); ++i) {
        double diff = xs[i] - mv.mean;
        sq[i] = diff * diff;
    }
    mv.var = pairwise_sum(sq) / static_cast<double>(mv.count - 1);
    return mv;
}

double MeanVar::se_mean() const {
    return count > 1 ? std::sqrt(var / static_cast<double>(count)) : 0.0;
}

double MeanVar::se_var() const {
    return count > 1 ? var * std::sqrt(2.0 / static_cast<double>(count - 1)) : 0.0;
}

double ols_slope(std::span<const double> x, std::span<const double> y) {
    if (x.size() != y.size() || x.size() < 2) throw std::invalid_argument("ols_slope: bad input");
    double n = static_cast<double>(x.size());
    double xbar = pairwise_sum(x) / n;
    double ybar = pairwise_sum(y) / n;
    double num = 0.0, den = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        num += (x[i] - xbar) * (y[i] - ybar);
        den += (x[i] - xbar) * (x[i] - xbar);
    }
    if (den == 0.0) throw std::invalid_argument("ols_slope: degenerate abscissae");
    return num / den;
}

std::string format17(double x) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.17g", x);
    return buf;
}

std::uint64_t fnv1a64(std::span<const char> bytes) {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (char c : bytes) {
        h ^= static_cast<unsigned char>(c);
        h *= 0x100000001b3ULL;
    }
    return h;
}

std::uint64_t fnv1a64(const std::string& s) { return fnv1a64(std::span<const char>(s.data(), s.size())); }

void parallel_for_indexed(std::size_t n, int threads, const std::function<void(std::size_t)>& fn) {
    threads = std::max(1, threads);
    if (threads == 1 || n <= 1) {
        for (std::size_t i = 0; i < n; ++i) fn(i);
        return;
    }
    std::size_t chunk = (n + threads - 1) / static_cast<std::size_t>(threads);
    std::vector<std::thread> pool;
    for (int t = 0; t < threads; ++t) {
        std::size_t lo = t * chunk, hi = std::min(n, lo + chunk);
        if (lo >= hi) break;
        pool.emplace_back([&fn, lo, hi]() {
            for (std::size_t i = lo; i < hi; ++i) fn(i);
        });
    }
    for (auto& th : pool) th.join();
}

}  // namespace slfv
