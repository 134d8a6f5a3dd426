#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "deepstack/model.hpp"
#include "deepstack/objectives.hpp"

namespace deepstack {

struct RmsPropConfig {
    double learning_rate = 0.01;
    double decay = 0.9;
    double epsilon = 1e-8;
};

/// Per-tensor running mean of squared gradients. Accumulators are created
/// lazily (zero-filled) on the first step.
struct RmsPropState {
    RmsPropConfig config;
    std::vector<Matrix> accum;
};

/// r ← decay·r + (1-decay)·g²;  θ ← θ - scale·η·g/√(r + ε).
/// `scale` is the per-layer schedule multiplier.
void rmsprop_step(RmsPropState& state, std::span<Matrix* const> params, std::span<const Matrix* const> grads,
                  double scale = 1.0);

/// Per-layer learning-rate and λ multipliers over consecutive windows of
/// `window_length` minibatch iterations.
struct Schedule {
    std::size_t window_length = 0;
    std::vector<std::vector<double>> alpha;        ///< [window][layer]
    std::vector<std::vector<double>> lambda_scale; ///< [window][layer]

    /// Window w trains only layer w with multiplier 1 (bottom to top), the
    /// joint analogue of greedy layerwise training.
    static Schedule layerwise_mimic(std::size_t depth, std::size_t window_length);

    std::size_t total_iterations() const { return window_length * alpha.size(); }
    /// Throws ConfigError when malformed for a stack of `depth` layers.
    void validate(std::size_t depth) const;
};

struct EarlyStopping {
    std::size_t patience = 20;
};

/// How layerwise epochs relate to `TrainPlan::epochs`: `paper` trains every
/// layer for the full count, `equal` splits it evenly across layers.
enum class Budget { paper, equal };

enum class Scheme { layerwise, joint, scheduled, pretrain_then_joint, pretrain_then_regularized_joint, naive_sum };

std::string_view to_string(Scheme scheme);
Scheme parse_scheme(std::string_view text);

struct TrainPlan {
    std::size_t epochs = 300;
    std::size_t minibatch = 100;
    RmsPropConfig optimizer;
    LossSpec loss;
    std::vector<CorruptionSpec> corruption;   ///< one per layer
    std::vector<RegularizerSpec> regularizer; ///< one per layer
    std::optional<Schedule> schedule;
    std::optional<EarlyStopping> early_stopping;
    std::uint64_t seed = 0;
    Budget budget = Budget::paper;

    /// Throws ConfigError on inconsistent settings for a `depth`-layer stack.
    void validate(std::size_t depth) const;
};

struct EpochRecord {
    std::size_t epoch = 0;
    double train_err = 0.0;
    double valid_err = 0.0;  ///< NaN without a validation set
    double seconds = 0.0;
    std::vector<double> penalties;
};

/// Reconstruction errors per epoch. `space` is "input" when errors are
/// measured against the original x and "layer<k>" when measured against
/// layer k's own input (layerwise training).
struct TrainLog {
    std::string space = "input";
    std::size_t first_layer = 0;  ///< index of the first penalty column
    std::vector<EpochRecord> records;

    std::string to_csv() const;
    void write_csv(const std::filesystem::path& path) const;
};

struct TrainResult {
    StackParams stack;
    std::vector<TrainLog> logs;
};

// Stream ids for Rng::split; per-layer streams add kLayerStreamStride * layer.
inline constexpr std::uint64_t kInitStream = 1;
inline constexpr std::uint64_t kShuffleStream = 2;
inline constexpr std::uint64_t kNoiseStream = 3;
inline constexpr std::uint64_t kLayerStreamStride = 100;

/// Random initial stack drawn from the plan seed's init stream.
StackParams initial_stack(std::size_t input_width, std::span<const std::size_t> hidden_widths, bool tied,
                          std::uint64_t seed);

/// Greedy bottom-to-top training. Layer k trains on the clean encodings of
/// the frozen layers below it; errors are logged in layer k's input space.
TrainResult train_layerwise(StackParams stack, const Matrix& train, const Matrix& valid, const TrainPlan& plan);

/// Joint training of the whole stack against the input-space loss plus
/// per-layer regularizers.
TrainResult train_joint(StackParams stack, const Matrix& train, const Matrix& valid, const TrainPlan& plan);

/// train_joint with per-layer, per-iteration multipliers from plan.schedule.
/// Runs exactly schedule.total_iterations() minibatch updates.
TrainResult train_scheduled(StackParams stack, const Matrix& train, const Matrix& valid, const TrainPlan& plan);

/// Trains every layer simultaneously on its own local objective Σ_i J(Θ^i).
TrainResult train_naive_sum(StackParams stack, const Matrix& train, const Matrix& valid, const TrainPlan& plan);

/// Copies pretrained parameters into `stack`; architectures must match exactly.
StackParams init_from(const StackParams& stack, const StackParams& pretrained);

/// Dispatches on scheme. The two pretrain-then-joint schemes run
/// train_layerwise and then train_joint from the pretrained weights, without
/// regularization and corruption (pretrain_then_joint) or with them.
TrainResult train_scheme(Scheme scheme, StackParams stack, const Matrix& train, const Matrix& valid,
                         const TrainPlan& plan);

struct GridSpec {
    std::vector<double> learning_rates;
    std::vector<double> noise_levels;  ///< empty: keep the plan's corruption
    std::vector<double> lambdas;       ///< empty: keep the plan's regularizer

    /// Learning-rate × noise grid for deep denoising autoencoders.
    static GridSpec paper_dae();
    /// Learning-rate × contraction grid for deep contractive autoencoders.
    static GridSpec paper_cae();
};

struct GridPoint {
    std::size_t id = 0;
    double learning_rate = 0.0;
    std::optional<double> noise;
    std::optional<double> lambda;
};

std::vector<GridPoint> expand_grid(const GridSpec& grid, const TrainPlan& base);
TrainPlan apply_grid_point(const TrainPlan& base, const GridPoint& point);

struct GridRow {
    GridPoint point;
    bool ok = false;
    std::string error;
    double train_err = 0.0;
    double valid_err = 0.0;
};

struct GridResult {
    std::vector<GridRow> rows;
    std::size_t best = 0;
    TrainPlan best_plan;
    TrainResult best_run;

    std::string to_csv() const;
};

/// Trains one model per grid point and keeps the one with the lowest
/// input-space validation reconstruction error (first in grid order on ties).
/// A point that throws is recorded and skipped.
GridResult grid_search(const StackParams& init, const Matrix& train, const Matrix& valid, Scheme scheme,
                       const TrainPlan& base, const GridSpec& grid, std::size_t threads = 1);

} // namespace deepstack
