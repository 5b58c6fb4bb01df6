#pragma once

#include <cmath>
#include <cstddef>
#include <string>
#include <vector>

#include "libracool/error.hpp"

namespace libracool {

/// Uniformly sampled real channel.
struct Timetrace {
    double sample_rate = 1.0;  // Hz
    double start_time = 0.0;   // s
    std::vector<double> samples;
    std::string unit;

    std::size_t size() const noexcept { return samples.size(); }
    double dt() const noexcept { return 1.0 / sample_rate; }
    double time(std::size_t i) const noexcept { return start_time + static_cast<double>(i) / sample_rate; }
    double duration() const noexcept { return static_cast<double>(samples.size()) / sample_rate; }

    bool operator==(const Timetrace&) const = default;
};

inline void validate(const Timetrace& trace) {
    detail::require(trace.sample_rate > 0.0 && std::isfinite(trace.sample_rate), "timetrace: sample_rate must be > 0");
    detail::require(trace.samples.size() >= 2, "timetrace: at least two samples required");
}

inline double mean(const std::vector<double>& xs) {
    double acc = 0.0;
    for (double x : xs) {
        acc += x;
    }
    return xs.empty() ? 0.0 : acc / static_cast<double>(xs.size());
}

inline double mean_square(const std::vector<double>& xs) {
    double acc = 0.0;
    for (double x : xs) {
        acc += x * x;
    }
    return xs.empty() ? 0.0 : acc / static_cast<double>(xs.size());
}

inline double variance(const std::vector<double>& xs) {
    const double m = mean(xs);
    double acc = 0.0;
    for (double x : xs) {
        acc += (x - m) * (x - m);
    }
    return xs.empty() ? 0.0 : acc / static_cast<double>(xs.size());
}

}  // namespace libracool
