#pragma once

#include <cmath>
#include <cstdint>
#include <string>
#include <string_view>

#include "acar/hash.hpp"

namespace acar {

/// Counter-based deterministic random stream.
///
/// Output i is a pure function of (key, i): the splitmix64 finalizer applied
/// to key + i * golden-ratio increment. Streams keyed by distinct context
/// strings are independent, so concurrent callers never share mutable state
/// and replay does not depend on scheduling order.
class CounterRng {
public:
    explicit CounterRng(std::uint64_t key) : key_(key) {}

    /// Derives a stream key from a batch seed plus context labels
    /// (task id, model id, sample index, ...). Same labels, same stream.
    static CounterRng keyed(std::uint64_t seed, std::initializer_list<std::string_view> context) {
        std::uint64_t h = fnv1a64("acar-stream");
        for (int shift = 0; shift < 64; shift += 8) {
            char byte = static_cast<char>((seed >> shift) & 0xFF);
            h = fnv1a64(std::string_view(&byte, 1), h);
        }
        for (std::string_view part : context) {
            h = fnv1a64(part, h);
            h = fnv1a64("|", h);
        }
        return CounterRng(h);
    }

    std::uint64_t next_u64() {
        std::uint64_t z = key_ + (++counter_) * 0x9E3779B97F4A7C15ULL;
        z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
        z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
        return z ^ (z >> 31);
    }

    /// Uniform in [0, 1) with 53 random bits.
    double uniform() {
        return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
    }

    /// Uniform in (0, 1]; safe as a log argument.
    double uniform_positive() {
        return static_cast<double>((next_u64() >> 11) + 1) * 0x1.0p-53;
    }

    /// Standard normal via Box-Muller. Consumes two stream values.
    double normal() {
        double u1 = uniform_positive();
        double u2 = uniform();
        return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * 3.14159265358979323846 * u2);
    }

    /// Log-normal with the given parameters of the underlying normal.
    double lognormal(double mu, double sigma) {
        return std::exp(mu + sigma * normal());
    }

private:
    std::uint64_t key_;
    std::uint64_t counter_ = 0;
};

} // namespace acar
