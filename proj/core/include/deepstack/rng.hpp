#pragma once

#include <cstddef>
#include <cstdint>
#include <random>

#include "deepstack/matrix.hpp"

namespace deepstack {

/// Deterministic random stream. Identical seed plus identical call sequence
/// gives an identical output stream on every platform.
///
/// Child streams are derived from the *seed* (not the current position), so
/// `Rng(s).split(k)` names the same stream no matter how much the parent has
/// been consumed.
class Rng {
public:
    explicit Rng(std::uint64_t seed = 0);

    std::uint64_t seed() const noexcept { return seed_; }
    Rng split(std::uint64_t stream) const;

    std::uint64_t next_u64();
    /// Uniform on [0, 1) with 53 random bits.
    double uniform();
    /// Uniform integer on [0, n). n must be positive.
    std::size_t below(std::size_t n);
    double normal();

private:
    std::uint64_t seed_;
    std::mt19937_64 engine_;
    double spare_ = 0.0;
    bool has_spare_ = false;
};

std::uint64_t splitmix64(std::uint64_t x);

/// i.i.d. N(mean, stddev²) entries. Throws ContractViolation on negative stddev.
Matrix gaussian_sample(Rng& rng, std::size_t rows, std::size_t cols, double mean, double stddev);

/// Fisher-Yates shuffle of 0..n-1.
std::vector<std::size_t> shuffled_indices(std::size_t n, Rng& rng);

} // namespace deepstack
