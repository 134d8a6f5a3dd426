#pragma once

#include <span>
#include <string_view>
#include <vector>

#include "deepstack/corruption.hpp"
#include "deepstack/matrix.hpp"
#include "deepstack/model.hpp"
#include "deepstack/rng.hpp"

namespace deepstack {

enum class LossKind { cross_entropy, squared_error };

struct LossSpec {
    LossKind kind = LossKind::cross_entropy;
    friend bool operator==(const LossSpec&, const LossSpec&) = default;
};

/// Predictions are clamped to [kCrossEntropyClamp, 1 - kCrossEntropyClamp] before taking logs.
inline constexpr double kCrossEntropyClamp = 1e-12;

struct LossResult {
    double value = 0.0;
    Matrix grad;  ///< d value / d x_r
};

/// Loss summed over examples (rows). Squared error is Σ (x_r - x)².
LossResult loss_value_grad(const LossSpec& spec, const Matrix& x, const Matrix& x_r);
/// Per-example loss values, no gradient.
std::vector<double> loss_per_example(const LossSpec& spec, const Matrix& x, const Matrix& x_r);
double mean_loss(const LossSpec& spec, const Matrix& x, const Matrix& x_r);

/// Gradient of the loss with respect to the *pre-activation* of the output
/// layer. Logistic output with cross-entropy collapses to x_r - x, which stays
/// exact when the sigmoid saturates.
Matrix output_delta(const LossSpec& spec, Activation output_act, const Matrix& x, const Matrix& x_r);

enum class RegularizerKind { none, l2, contractive };

struct RegularizerSpec {
    RegularizerKind kind = RegularizerKind::none;
    double lambda = 0.0;

    static RegularizerSpec none() { return {}; }
    static RegularizerSpec l2(double lambda) { return {RegularizerKind::l2, lambda}; }
    static RegularizerSpec contractive(double lambda) { return {RegularizerKind::contractive, lambda}; }

    friend bool operator==(const RegularizerSpec&, const RegularizerSpec&) = default;
};

std::string_view to_string(RegularizerKind kind);
RegularizerKind parse_regularizer_kind(std::string_view text);
std::string_view to_string(LossKind kind);
LossKind parse_loss_kind(std::string_view text);

struct ContractiveResult {
    double value = 0.0;
    Matrix grad_w_enc;
    Matrix grad_b_enc;
    Matrix grad_input;  ///< d value / d h_in, used when the input itself depends on parameters
};

/// Layer-local contractive penalty ‖∂h/∂h_in‖²_F summed over examples:
/// Σ_n Σ_j (h_j(1-h_j))² Σ_i W[j,i]². Logistic encoders only; anything else
/// throws UnsupportedConfiguration.
ContractiveResult contractive_penalty_value_grad(const LayerParams& layer, const Matrix& h_in);

struct L2Result {
    double value = 0.0;
    Matrix grad_w_enc;
    Matrix grad_w_dec;  ///< empty for tied layers
};

/// Σ W² over weight matrices (biases excluded); gradient 2W.
L2Result l2_penalty_value_grad(const LayerParams& layer);
double l2_penalty_value(std::span<const LayerParams> layers);

/// Configuration of the joint objective: one global reconstruction loss plus
/// one corruption process and one regularizer per layer.
struct ObjectiveSpec {
    LossSpec loss;
    std::vector<CorruptionSpec> corruption;   ///< empty or one per layer
    std::vector<RegularizerSpec> regularizer; ///< empty or one per layer
};

struct ObjectiveResult {
    double value = 0.0;      ///< loss + Σ λ^i R^i
    double loss = 0.0;
    std::vector<double> penalties;  ///< unscaled R^i per layer
    std::vector<LayerGrads> grads;
    Matrix reconstruction;
};

/// Joint objective over a deep stack for one batch, with an exact gradient
/// for every parameter. Corruption noise is drawn once from `rng` and treated
/// as constant by the backward pass; masked entries block gradient flow.
///
/// Contractive penalties are evaluated at the input each layer actually
/// consumed and are differentiated through that input as well, so the
/// returned gradient is the gradient of `value` as a function of all
/// parameters with the noise draw held fixed.
///
/// `lambda_scale`, when non-empty, multiplies each layer's λ (used by
/// schedules).
ObjectiveResult joint_objective(std::span<const LayerParams> layers, const Matrix& x, const ObjectiveSpec& spec,
                                Rng& rng, std::span<const double> lambda_scale = {});

/// Single-layer general autoencoder objective (loss + λR under one corruption
/// draw). Identical to joint_objective on a one-layer stack.
ObjectiveResult gae_objective(const LayerParams& layer, const Matrix& batch, const LossSpec& loss,
                              const CorruptionSpec& corruption, const RegularizerSpec& regularizer, Rng& rng);

} // namespace deepstack
