#pragma once

#include <string_view>

#include "deepstack/matrix.hpp"
#include "deepstack/rng.hpp"

namespace deepstack {

enum class CorruptionKind { none, additive_gaussian, masking };

/// Conditional corruption process applied to a layer's input.
/// `level` is the noise stddev (gaussian) or the drop probability (masking).
struct CorruptionSpec {
    CorruptionKind kind = CorruptionKind::none;
    double level = 0.0;

    static CorruptionSpec none() { return {}; }
    static CorruptionSpec gaussian(double stddev) { return {CorruptionKind::additive_gaussian, stddev}; }
    static CorruptionSpec masking(double p) { return {CorruptionKind::masking, p}; }

    friend bool operator==(const CorruptionSpec&, const CorruptionSpec&) = default;
};

/// Corrupted values plus what backprop needs: for masking, a 0/1 matrix of
/// surviving entries; empty otherwise (gradient passes straight through).
struct CorruptionDraw {
    Matrix value;
    Matrix mask;
};

/// Gaussian noise is additive and unclipped. Masking zeroes each entry
/// independently with probability `level`, which must lie in [0, 1].
Matrix corrupt(const CorruptionSpec& spec, const Matrix& z, Rng& rng);
CorruptionDraw corrupt_with_mask(const CorruptionSpec& spec, const Matrix& z, Rng& rng);

void validate(const CorruptionSpec& spec);

std::string_view to_string(CorruptionKind kind);
CorruptionKind parse_corruption_kind(std::string_view text);

} // namespace deepstack
