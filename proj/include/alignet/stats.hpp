#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <vector>

#include "alignet/errors.hpp"

namespace alignet {

inline double mean(const std::vector<double>& xs) {
    if (xs.empty()) throw ArgumentError("mean of empty sample");
    double s = 0.0;
    for (double x : xs) s += x;
    return s / static_cast<double>(xs.size());
}

// Pearson correlation. Throws if either sample has zero variance or the
// vectors are shorter than 2 or of different lengths.
inline double pearson(const std::vector<double>& x, const std::vector<double>& y) {
    if (x.size() != y.size()) throw ArgumentError("pearson: length mismatch");
    if (x.size() < 2) throw ArgumentError("pearson: need at least 2 observations");
    const double n = static_cast<double>(x.size());
    double mx = 0.0, my = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        mx += x[i];
        my += y[i];
    }
    mx /= n;
    my /= n;
    double sxx = 0.0, syy = 0.0, sxy = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        const double dx = x[i] - mx;
        const double dy = y[i] - my;
        sxx += dx * dx;
        syy += dy * dy;
        sxy += dx * dy;
    }
    if (sxx == 0.0 || syy == 0.0) throw ArgumentError("pearson: zero variance");
    return sxy / std::sqrt(sxx * syy);
}

// Inclusive linear-interpolation quantile on a pre-sorted sample:
// h = (n - 1) p, result = x[floor(h)] + frac(h) * (x[floor(h)+1] - x[floor(h)]).
inline double quantile_sorted(const std::vector<double>& sorted, double p) {
    if (sorted.empty()) throw ArgumentError("quantile of empty sample");
    if (p < 0.0 || p > 1.0) throw ArgumentError("quantile probability outside [0,1]");
    const double h = (static_cast<double>(sorted.size()) - 1.0) * p;
    const std::size_t lo = static_cast<std::size_t>(h);
    if (lo + 1 >= sorted.size()) return sorted.back();
    const double frac = h - static_cast<double>(lo);
    return sorted[lo] + frac * (sorted[lo + 1] - sorted[lo]);
}

inline double quantile(std::vector<double> xs, double p) {
    std::sort(xs.begin(), xs.end());
    return quantile_sorted(xs, p);
}

struct FiveNumberSummary {
    double min = 0.0;
    double q1 = 0.0;
    double median = 0.0;
    double q3 = 0.0;
    double max = 0.0;
    double mean = 0.0;
};

inline FiveNumberSummary five_number_summary(std::vector<double> xs) {
    if (xs.empty()) throw ArgumentError("five_number_summary of empty sample");
    std::sort(xs.begin(), xs.end());
    FiveNumberSummary s;
    s.min = xs.front();
    s.q1 = quantile_sorted(xs, 0.25);
    s.median = quantile_sorted(xs, 0.5);
    s.q3 = quantile_sorted(xs, 0.75);
    s.max = xs.back();
    double t = 0.0;
    for (double x : xs) t += x;
    s.mean = t / static_cast<double>(xs.size());
    return s;
}

}  // namespace alignet
