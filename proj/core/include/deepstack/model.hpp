#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string_view>
#include <utility>
#include <vector>

#include "deepstack/corruption.hpp"
#include "deepstack/matrix.hpp"
#include "deepstack/rng.hpp"

namespace deepstack {

enum class Activation : std::uint8_t { logistic = 0, linear = 1 };

std::string_view to_string(Activation act);

/// One encoder/decoder pair of a deep autoencoder.
///
/// Shapes: w_enc is hidden×input, b_enc is 1×hidden, b_dec is 1×input. An
/// untied layer also owns w_dec (input×hidden); a tied layer leaves it empty
/// and decodes with the current transpose of w_enc, so there is never a stale
/// copy to fall out of sync.
struct LayerParams {
    Matrix w_enc;
    Matrix b_enc;
    Matrix w_dec;
    Matrix b_dec;
    bool tied = true;
    Activation act_enc = Activation::logistic;
    Activation act_dec = Activation::logistic;

    /// Uniform init on ±sqrt(6 / (fan_in + fan_out)), zero biases.
    static LayerParams random(std::size_t input_width, std::size_t hidden_width, bool tied, Rng& rng);
    static LayerParams zeros(std::size_t input_width, std::size_t hidden_width, bool tied);

    std::size_t input_width() const noexcept { return w_enc.cols(); }
    std::size_t hidden_width() const noexcept { return w_enc.rows(); }

    /// The input×hidden decoder matrix (a fresh transpose when tied).
    Matrix decoder_weights() const;

    /// Trainable tensors in canonical order: w_enc, b_enc, [w_dec], b_dec.
    std::vector<Matrix*> tensors();
    std::vector<const Matrix*> tensors() const;

    void check_shapes() const;

    friend bool operator==(const LayerParams&, const LayerParams&) = default;
};

/// Gradient buffers laid out like LayerParams (w_dec empty for tied layers).
struct LayerGrads {
    Matrix w_enc;
    Matrix b_enc;
    Matrix w_dec;
    Matrix b_dec;

    static LayerGrads zeros_like(const LayerParams& layer);
    std::vector<Matrix*> tensors();
    std::vector<const Matrix*> tensors() const;
};

/// The full N-layer stack. Layer i's input width equals layer i-1's hidden
/// width; depth is fixed at construction.
class StackParams {
public:
    StackParams() = default;
    explicit StackParams(std::vector<LayerParams> layers);

    static StackParams random(std::size_t input_width, std::span<const std::size_t> hidden_widths, bool tied,
                              Rng& rng);

    std::size_t depth() const noexcept { return layers_.size(); }
    std::size_t input_width() const;
    std::size_t top_width() const;

    std::span<LayerParams> layers() noexcept { return layers_; }
    std::span<const LayerParams> layers() const noexcept { return layers_; }
    LayerParams& layer(std::size_t i) { return layers_.at(i); }
    const LayerParams& layer(std::size_t i) const { return layers_.at(i); }

    std::size_t parameter_count() const;

    friend bool operator==(const StackParams&, const StackParams&) = default;

private:
    std::vector<LayerParams> layers_;
};

/// Everything the backward pass needs from one forward pass.
///
/// For encoder layer i (0-based): `inputs[i]` is the clean input h^i
/// (inputs[0] = x), `fed[i]` is what the layer actually consumed after
/// corruption, `masks[i]` is the surviving-entry mask for masking corruption
/// (empty otherwise) and `hidden[i]` is the layer's activation. `decoded[i]`
/// is the output of layer i's decoder, so decoded[0] is the reconstruction.
struct ForwardTrace {
    std::vector<Matrix> inputs;
    std::vector<Matrix> fed;
    std::vector<Matrix> masks;
    std::vector<Matrix> hidden;
    std::vector<Matrix> decoded;

    const Matrix& top() const { return hidden.back(); }
};

Matrix activate(Activation act, Matrix pre);

/// Single-layer encoder forward pass without corruption.
Matrix encode_layer(const LayerParams& layer, const Matrix& input);
/// Single-layer decoder forward pass.
Matrix decode_layer(const LayerParams& layer, const Matrix& hidden);

/// Encodes x through every layer. `corruption` is either empty (no
/// corruption anywhere) or holds one spec per layer, applied to that layer's
/// input before it is consumed.
ForwardTrace encode(std::span<const LayerParams> layers, const Matrix& x,
                    std::span<const CorruptionSpec> corruption, Rng& rng);
ForwardTrace encode(const StackParams& stack, const Matrix& x, std::span<const CorruptionSpec> corruption,
                    Rng& rng);

Matrix decode(std::span<const LayerParams> layers, const Matrix& h_top);
Matrix decode(const StackParams& stack, const Matrix& h_top);

/// Full encode + decode. The returned trace has `decoded` filled in.
std::pair<Matrix, ForwardTrace> reconstruct(std::span<const LayerParams> layers, const Matrix& x,
                                            std::span<const CorruptionSpec> corruption, Rng& rng);
std::pair<Matrix, ForwardTrace> reconstruct(const StackParams& stack, const Matrix& x,
                                            std::span<const CorruptionSpec> corruption, Rng& rng);

/// Clean (uncorrupted) top-layer features.
Matrix encode_clean(std::span<const LayerParams> layers, const Matrix& x);
Matrix reconstruct_clean(std::span<const LayerParams> layers, const Matrix& x);

// Parameter flattening in canonical tensor order, layer by layer.
std::vector<double> flatten(const StackParams& stack);
void unflatten(StackParams& stack, std::span<const double> values);

// Model files: "DAEJ" magic, u32 version, u32 layer count, per-layer headers,
// then per-layer f64 payloads, then CRC32 of all preceding bytes. All
// integers and floats little-endian regardless of host.
inline constexpr std::uint32_t kModelFormatVersion = 1;

std::vector<std::uint8_t> serialize(const StackParams& stack);
/// Throws ParseError (with byte offset) on malformed input and VersionError
/// on a format version this build cannot read.
StackParams deserialize(std::span<const std::uint8_t> bytes);

void save(const StackParams& stack, const std::filesystem::path& path);
StackParams load(const std::filesystem::path& path);

} // namespace deepstack
