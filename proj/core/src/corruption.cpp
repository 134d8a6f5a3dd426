#include "deepstack/corruption.hpp"

#include <string>

#include "deepstack/errors.hpp"

namespace deepstack {

void validate(const CorruptionSpec& spec) {
    if (spec.kind == CorruptionKind::none) {
        return;
    }
    if (!(spec.level >= 0.0)) {
        throw ContractViolation("corruption level must be non-negative");
    }
    if (spec.kind == CorruptionKind::masking && spec.level > 1.0) {
        throw ContractViolation("masking probability must lie in [0, 1]");
    }
}

CorruptionDraw corrupt_with_mask(const CorruptionSpec& spec, const Matrix& z, Rng& rng) {
    validate(spec);
    CorruptionDraw draw{z, {}};
    switch (spec.kind) {
    case CorruptionKind::none:
        break;
    case CorruptionKind::additive_gaussian:
        for (double& v : draw.value.data()) {
            v += spec.level * rng.normal();
        }
        break;
    case CorruptionKind::masking: {
        draw.mask = Matrix(z.rows(), z.cols(), 1.0);
        auto values = draw.value.data();
        auto mask = draw.mask.data();
        for (std::size_t i = 0; i < values.size(); ++i) {
            if (rng.uniform() < spec.level) {
                values[i] = 0.0;
                mask[i] = 0.0;
            }
        }
        break;
    }
    }
    return draw;
}

Matrix corrupt(const CorruptionSpec& spec, const Matrix& z, Rng& rng) {
    return corrupt_with_mask(spec, z, rng).value;
}

std::string_view to_string(CorruptionKind kind) {
    switch (kind) {
    case CorruptionKind::none:
        return "none";
    case CorruptionKind::additive_gaussian:
        return "gaussian";
    case CorruptionKind::masking:
        return "masking";
    }
    return "none";
}

CorruptionKind parse_corruption_kind(std::string_view text) {
    if (text == "none") return CorruptionKind::none;
    if (text == "gaussian") return CorruptionKind::additive_gaussian;
    if (text == "masking") return CorruptionKind::masking;
    throw ConfigError("unknown corruption kind '" + std::string(text) + "'");
}

} // namespace deepstack
