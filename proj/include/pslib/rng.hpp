#ifndef PSLIB_RNG_HPP
#define PSLIB_RNG_HPP

#include <cmath>
#include <cstdint>
#include <limits>
#include <numbers>

namespace pslib {

// Tags that separate the independent random substreams of one run.
enum class Phase : std::uint64_t {
    Forward = 2,
    Backward = 3,
    Smoothing = 4,
    SimPath = 16,
    SimSubject = 17,
    Split = 32,
    Oracle = 64,
};

inline constexpr std::uint64_t splitmix64(std::uint64_t x) noexcept {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

/// Counter-based random stream keyed by (seed, phase, interval, index).
///
/// Every particle of every phase owns its own stream, so the draws a particle
/// sees never depend on how work is scheduled across threads. The generator is
/// SplitMix64 advanced from a hashed key; normals use Box-Muller so results are
/// reproducible across standard libraries.
class Stream {
public:
    using result_type = std::uint64_t;

    Stream(std::uint64_t seed, Phase phase, std::uint64_t interval, std::uint64_t index) noexcept {
        std::uint64_t h = splitmix64(seed);
        h = splitmix64(h ^ static_cast<std::uint64_t>(phase));
        h = splitmix64(h ^ (interval * 0xd1342543de82ef95ULL));
        h = splitmix64(h ^ (index * 0xff51afd7ed558ccdULL));
        state_ = h;
    }

    static constexpr result_type min() noexcept { return 0; }
    static constexpr result_type max() noexcept { return std::numeric_limits<result_type>::max(); }

    result_type operator()() noexcept {
        state_ += 0x9e3779b97f4a7c15ULL;
        std::uint64_t z = state_;
        z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
        z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
        return z ^ (z >> 31);
    }

    // Uniform on the open interval (0, 1).
    double uniform() noexcept {
        return (static_cast<double>((*this)() >> 11) + 0.5) * 0x1.0p-53;
    }

    double normal() noexcept {
        if (has_spare_) {
            has_spare_ = false;
            return spare_;
        }
        const double u1 = uniform();
        const double u2 = uniform();
        const double r = std::sqrt(-2.0 * std::log(u1));
        const double theta = 2.0 * std::numbers::pi * u2;
        spare_ = r * std::sin(theta);
        has_spare_ = true;
        return r * std::cos(theta);
    }

private:
    std::uint64_t state_;
    double spare_ = 0.0;
    bool has_spare_ = false;
};

}  // namespace pslib

#endif
