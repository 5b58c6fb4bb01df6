#pragma once

// Named random streams. Every (mode, noise kind) pair owns its own engine,
// derived from the master seed, so results do not depend on how work is
// scheduled across threads. Only bit-specified pieces are used
// (std::seed_seq, std::mt19937_64, explicit bit-to-double conversion and the
// polar method) so streams are identical on every conforming platform.

#include <cmath>
#include <cstdint>
#include <random>

namespace libracool::rng {

enum class StreamKind : std::uint32_t {
    thermal = 1,
    backaction = 2,
    imprecision = 3,
    initial_state = 4,
    lo_phase = 5,
};

/// splitmix64 finaliser, used to derive child seeds for independent jobs.
constexpr std::uint64_t mix(std::uint64_t x) noexcept {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30U)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27U)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31U);
}

constexpr std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t index) noexcept {
    return mix(seed ^ mix(index + 0x632be59bd9b4e019ULL));
}

class NormalStream {
public:
    NormalStream(std::uint64_t seed, std::uint32_t mode_index, StreamKind kind) {
        std::seed_seq seq{static_cast<std::uint32_t>(seed & 0xffffffffULL),
                          static_cast<std::uint32_t>(seed >> 32U), mode_index,
                          static_cast<std::uint32_t>(kind)};
        engine_.seed(seq);
    }

    /// Uniform on (-1, 1) with 53 random bits.
    double uniform_symmetric() {
        const auto bits = engine_() >> 11U;
        return (static_cast<double>(bits) + 0.5) * 0x1.0p-52 - 1.0;
    }

    double uniform01() {
        const auto bits = engine_() >> 11U;
        return (static_cast<double>(bits) + 0.5) * 0x1.0p-53;
    }

    /// Standard normal (Marsaglia polar method, pairs cached).
    double normal() {
        if (has_spare_) {
            has_spare_ = false;
            return spare_;
        }
        double u = 0.0;
        double v = 0.0;
        double s = 0.0;
        do {
            u = uniform_symmetric();
            v = uniform_symmetric();
            s = u * u + v * v;
        } while (s >= 1.0 || s == 0.0);
        const double scale = std::sqrt(-2.0 * std::log(s) / s);
        spare_ = v * scale;
        has_spare_ = true;
        return u * scale;
    }

private:
    std::mt19937_64 engine_;
    double spare_ = 0.0;
    bool has_spare_ = false;
};

}  // namespace libracool::rng
