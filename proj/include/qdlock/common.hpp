// Shared error types, seed derivation and small numeric helpers.
#ifndef QDLOCK_COMMON_HPP
#define QDLOCK_COMMON_HPP

#include <cstdint>
#include <random>
#include <stdexcept>
#include <string>

namespace qdlock {

/// Invalid configuration or arguments; maps to CLI exit code 2.
struct ConfigError : std::invalid_argument {
    using std::invalid_argument::invalid_argument;
};

/// Runtime / physics failure (domain violations, non-convergence); exit code 3.
struct PhysicsError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

using Rng = std::mt19937_64;

inline constexpr double pi = 3.14159265358979323846;

// splitmix64 finalizer; decouples derived streams from the master seed.
inline std::uint64_t mix64(std::uint64_t x) {
    x += 0x9E3779B97F4A7C15ull;
    x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ull;
    x = (x ^ (x >> 27)) * 0x94D049BB133111EBull;
    return x ^ (x >> 31);
}

/// Per-subsystem seed from one master seed. Streams are indexed by a stable
/// (arm, subsystem, branch) triple so adding a subsystem never shifts the
/// seeds of existing ones.
inline std::uint64_t derive_seed(std::uint64_t master, unsigned arm,
                                 unsigned subsystem, unsigned branch = 0) {
    std::uint64_t id = (std::uint64_t(arm) << 32) |
                       (std::uint64_t(branch) << 16) | subsystem;
    return mix64(master ^ mix64(id));
}

// Stable subsystem indices for derive_seed.
namespace stream {
inline constexpr unsigned signal_events = 1;
inline constexpr unsigned drift_noise = 2;
inline constexpr unsigned ool_counts = 3;
inline constexpr unsigned hom = 4;
}  // namespace stream

inline double clamp(double v, double lo, double hi) {
    return v < lo ? lo : (v > hi ? hi : v);
}

}  // namespace qdlock

#endif
