#include "deepstack/training.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <fstream>
#include <limits>
#include <sstream>
#include <thread>

#include "deepstack/errors.hpp"

namespace deepstack {

namespace {

using Clock = std::chrono::steady_clock;

// Stream tag used by the joint phase of the pretrain-then-joint schemes.
constexpr std::size_t kPostPretrainTag = 50;

double seconds_since(Clock::time_point start) {
    return std::chrono::duration<double>(Clock::now() - start).count();
}

double input_space_error(std::span<const LayerParams> layers, const Matrix& data, const LossSpec& loss) {
    if (data.rows() == 0) {
        return std::numeric_limits<double>::quiet_NaN();
    }
    return mean_loss(loss, data, reconstruct_clean(layers, data));
}

std::vector<LayerParams> copy_layers(std::span<const LayerParams> layers) {
    return {layers.begin(), layers.end()};
}

template <typename T>
std::vector<T> sub_list(const std::vector<T>& all, std::size_t offset, std::size_t count) {
    if (all.empty()) {
        return {};
    }
    return {all.begin() + static_cast<std::ptrdiff_t>(offset),
            all.begin() + static_cast<std::ptrdiff_t>(offset + count)};
}

struct LoopOptions {
    std::size_t epochs = 0;
    std::size_t stream_tag = 0;   // selects the shuffle/noise streams
    std::size_t layer_offset = 0; // first plan entry (corruption/regularizer) used
    const Schedule* schedule = nullptr;
    std::string space = "input";
};

// Trains `layers` as one deep autoencoder on `train` (reconstructing `train`
// itself). Layerwise training calls this with a single layer and that layer's
// input encodings; joint training with the whole stack and x.
TrainLog train_layers(std::span<LayerParams> layers, const Matrix& train, const Matrix& valid, const TrainPlan& plan,
                      const LoopOptions& opts) {
    const std::size_t depth = layers.size();
    ObjectiveSpec spec{plan.loss, sub_list(plan.corruption, opts.layer_offset, depth),
                       sub_list(plan.regularizer, opts.layer_offset, depth)};

    const Rng master(plan.seed);
    Rng shuffle_rng = master.split(kShuffleStream + kLayerStreamStride * opts.stream_tag);
    Rng noise_rng = master.split(kNoiseStream + kLayerStreamStride * opts.stream_tag);

    std::vector<RmsPropState> optim(depth, RmsPropState{plan.optimizer, {}});

    TrainLog log;
    log.space = opts.space;
    log.first_layer = opts.layer_offset;

    const std::size_t n = train.rows();
    if (n == 0) {
        throw ContractViolation("training set is empty");
    }
    const std::size_t batch = std::max<std::size_t>(1, plan.minibatch);
    const std::size_t max_iters = opts.schedule ? opts.schedule->total_iterations() : 0;
    const bool use_early_stop = plan.early_stopping.has_value() && valid.rows() > 0;

    std::vector<LayerParams> best_layers;
    double best_valid = std::numeric_limits<double>::infinity();
    std::size_t since_best = 0;

    std::size_t iteration = 0;
    const auto start = Clock::now();
    for (std::size_t epoch = 1;; ++epoch) {
        if (opts.schedule == nullptr && epoch > opts.epochs) {
            break;
        }
        if (opts.schedule != nullptr && iteration >= max_iters) {
            break;
        }
        const auto order = shuffled_indices(n, shuffle_rng);
        std::vector<double> penalty_sum(depth, 0.0);
        std::size_t batches = 0;
        for (std::size_t begin = 0; begin < n; begin += batch) {
            if (opts.schedule != nullptr && iteration >= max_iters) {
                break;
            }
            const std::size_t end = std::min(n, begin + batch);
            const Matrix x = gather_rows(train, std::span(order).subspan(begin, end - begin));

            std::span<const double> alpha;
            std::span<const double> lambda_scale;
            if (opts.schedule != nullptr) {
                const std::size_t window = iteration / opts.schedule->window_length;
                alpha = opts.schedule->alpha[window];
                lambda_scale = opts.schedule->lambda_scale[window];
            }
            ObjectiveResult res = joint_objective(layers, x, spec, noise_rng, lambda_scale);
            for (std::size_t i = 0; i < depth; ++i) {
                const double scale = alpha.empty() ? 1.0 : alpha[i];
                penalty_sum[i] += res.penalties[i];
                if (scale == 0.0) {
                    continue;
                }
                auto params = layers[i].tensors();
                auto grads = std::as_const(res.grads[i]).tensors();
                rmsprop_step(optim[i], params, grads, scale);
            }
            ++iteration;
            ++batches;
        }

        EpochRecord rec;
        rec.epoch = epoch;
        rec.train_err = input_space_error(layers, train, plan.loss);
        rec.valid_err = input_space_error(layers, valid, plan.loss);
        rec.seconds = seconds_since(start);
        for (double& p : penalty_sum) {
            p /= static_cast<double>(std::max<std::size_t>(1, batches));
        }
        rec.penalties = std::move(penalty_sum);
        log.records.push_back(rec);

        if (use_early_stop) {
            if (rec.valid_err < best_valid) {
                best_valid = rec.valid_err;
                best_layers = copy_layers(layers);
                since_best = 0;
            } else if (++since_best >= plan.early_stopping->patience) {
                break;
            }
        }
    }
    if (use_early_stop && !best_layers.empty()) {
        std::copy(best_layers.begin(), best_layers.end(), layers.begin());
    }
    return log;
}

std::size_t layerwise_epochs(const TrainPlan& plan, std::size_t depth) {
    if (plan.budget == Budget::equal) {
        return std::max<std::size_t>(1, plan.epochs / depth);
    }
    return plan.epochs;
}

std::string format_double(double v) {
    std::ostringstream os;
    os.precision(17);
    os << v;
    return os.str();
}

} // namespace

void rmsprop_step(RmsPropState& state, std::span<Matrix* const> params, std::span<const Matrix* const> grads,
                  double scale) {
    if (params.size() != grads.size()) {
        throw ContractViolation("rmsprop_step: parameter/gradient count mismatch");
    }
    if (state.accum.empty()) {
        for (const Matrix* p : params) {
            state.accum.emplace_back(p->rows(), p->cols());
        }
    }
    if (state.accum.size() != params.size()) {
        throw ContractViolation("rmsprop_step: state was built for a different parameter set");
    }
    const RmsPropConfig& cfg = state.config;
    const double keep = cfg.decay;
    const double mix = 1.0 - cfg.decay;
    const double step = scale * cfg.learning_rate;
    for (std::size_t t = 0; t < params.size(); ++t) {
        auto p = params[t]->data();
        auto g = grads[t]->data();
        auto r = state.accum[t].data();
        if (p.size() != g.size() || p.size() != r.size()) {
            throw ContractViolation("rmsprop_step: tensor shape mismatch");
        }
        for (std::size_t i = 0; i < p.size(); ++i) {
            r[i] = keep * r[i] + mix * g[i] * g[i];
            p[i] -= step * g[i] / std::sqrt(r[i] + cfg.epsilon);
        }
    }
}

Schedule Schedule::layerwise_mimic(std::size_t depth, std::size_t window_length) {
    Schedule s;
    s.window_length = window_length;
    for (std::size_t w = 0; w < depth; ++w) {
        std::vector<double> alpha(depth, 0.0);
        alpha[w] = 1.0;
        s.alpha.push_back(alpha);
        s.lambda_scale.emplace_back(depth, 1.0);
    }
    return s;
}

void Schedule::validate(std::size_t depth) const {
    if (window_length == 0) {
        throw ConfigError("schedule window length must be positive");
    }
    if (alpha.empty()) {
        throw ConfigError("schedule needs at least one window");
    }
    if (lambda_scale.size() != alpha.size()) {
        throw ConfigError("schedule needs one lambda row per window");
    }
    for (std::size_t w = 0; w < alpha.size(); ++w) {
        if (alpha[w].size() != depth || lambda_scale[w].size() != depth) {
            throw ConfigError("schedule window " + std::to_string(w + 1) + " must list one value per layer");
        }
        for (std::size_t i = 0; i < depth; ++i) {
            if (!(alpha[w][i] >= 0.0) || !std::isfinite(alpha[w][i]) || !(lambda_scale[w][i] >= 0.0) ||
                !std::isfinite(lambda_scale[w][i])) {
                throw ConfigError("schedule multipliers must be finite and non-negative");
            }
        }
    }
}

std::string_view to_string(Scheme scheme) {
    switch (scheme) {
    case Scheme::layerwise:
        return "layerwise";
    case Scheme::joint:
        return "joint";
    case Scheme::scheduled:
        return "scheduled";
    case Scheme::pretrain_then_joint:
        return "U";
    case Scheme::pretrain_then_regularized_joint:
        return "UJ";
    case Scheme::naive_sum:
        return "naive";
    }
    return "joint";
}

Scheme parse_scheme(std::string_view text) {
    if (text == "layerwise") return Scheme::layerwise;
    if (text == "joint") return Scheme::joint;
    if (text == "scheduled") return Scheme::scheduled;
    if (text == "U") return Scheme::pretrain_then_joint;
    if (text == "UJ") return Scheme::pretrain_then_regularized_joint;
    if (text == "naive") return Scheme::naive_sum;
    throw ConfigError("unknown scheme '" + std::string(text) + "'");
}

void TrainPlan::validate(std::size_t depth) const {
    if (minibatch == 0) {
        throw ConfigError("minibatch must be at least 1");
    }
    if (!corruption.empty() && corruption.size() != depth) {
        throw ConfigError("need one corruption spec per layer (" + std::to_string(depth) + ")");
    }
    if (!regularizer.empty() && regularizer.size() != depth) {
        throw ConfigError("need one regularizer per layer (" + std::to_string(depth) + ")");
    }
    for (const auto& c : corruption) {
        try {
            deepstack::validate(c);
        } catch (const ContractViolation& e) {
            throw ConfigError(e.what());
        }
    }
    for (const auto& r : regularizer) {
        if (!(r.lambda >= 0.0)) {
            throw ConfigError("regularizer lambda must be non-negative");
        }
    }
    if (!(optimizer.decay > 0.0 && optimizer.decay < 1.0)) {
        throw ConfigError("rms-prop decay must lie in (0, 1)");
    }
    if (!(optimizer.learning_rate > 0.0) || !(optimizer.epsilon > 0.0)) {
        throw ConfigError("learning rate and epsilon must be positive");
    }
    if (schedule) {
        schedule->validate(depth);
    }
}

std::string TrainLog::to_csv() const {
    std::ostringstream os;
    os << "epoch,train_err,valid_err,seconds";
    const std::size_t columns = records.empty() ? 0 : records.front().penalties.size();
    for (std::size_t i = 0; i < columns; ++i) {
        os << ",penalty_" << (first_layer + i + 1);
    }
    os << '\n';
    for (const auto& rec : records) {
        os << rec.epoch << ',' << format_double(rec.train_err) << ',' << format_double(rec.valid_err) << ','
           << format_double(rec.seconds);
        for (double p : rec.penalties) {
            os << ',' << format_double(p);
        }
        os << '\n';
    }
    return os.str();
}

void TrainLog::write_csv(const std::filesystem::path& path) const {
    std::ofstream out(path, std::ios::trunc);
    if (!out) {
        throw std::runtime_error("cannot write " + path.string());
    }
    out << to_csv();
}

StackParams initial_stack(std::size_t input_width, std::span<const std::size_t> hidden_widths, bool tied,
                          std::uint64_t seed) {
    Rng rng = Rng(seed).split(kInitStream);
    return StackParams::random(input_width, hidden_widths, tied, rng);
}

TrainResult train_layerwise(StackParams stack, const Matrix& train, const Matrix& valid, const TrainPlan& plan) {
    plan.validate(stack.depth());
    TrainResult result;
    const std::size_t epochs = layerwise_epochs(plan, stack.depth());
    Matrix layer_train = train;
    Matrix layer_valid = valid;
    for (std::size_t k = 0; k < stack.depth(); ++k) {
        LoopOptions opts;
        opts.epochs = epochs;
        opts.stream_tag = k;
        opts.layer_offset = k;
        opts.space = k == 0 ? "input" : "layer" + std::to_string(k + 1);
        result.logs.push_back(train_layers(stack.layers().subspan(k, 1), layer_train, layer_valid, plan, opts));
        if (k + 1 < stack.depth()) {
            layer_train = encode_layer(stack.layer(k), layer_train);
            if (layer_valid.rows() > 0) {
                layer_valid = encode_layer(stack.layer(k), layer_valid);
            }
        }
    }
    result.stack = std::move(stack);
    return result;
}

TrainResult train_joint(StackParams stack, const Matrix& train, const Matrix& valid, const TrainPlan& plan) {
    plan.validate(stack.depth());
    LoopOptions opts;
    opts.epochs = plan.epochs;
    TrainResult result;
    result.logs.push_back(train_layers(stack.layers(), train, valid, plan, opts));
    result.stack = std::move(stack);
    return result;
}

TrainResult train_scheduled(StackParams stack, const Matrix& train, const Matrix& valid, const TrainPlan& plan) {
    plan.validate(stack.depth());
    if (!plan.schedule) {
        throw ConfigError("scheduled training requires a schedule");
    }
    LoopOptions opts;
    opts.schedule = &*plan.schedule;
    TrainResult result;
    result.logs.push_back(train_layers(stack.layers(), train, valid, plan, opts));
    result.stack = std::move(stack);
    return result;
}

TrainResult train_naive_sum(StackParams stack, const Matrix& train, const Matrix& valid, const TrainPlan& plan) {
    plan.validate(stack.depth());
    const std::size_t depth = stack.depth();
    const Rng master(plan.seed);
    Rng shuffle_rng = master.split(kShuffleStream);
    Rng noise_rng = master.split(kNoiseStream);
    std::vector<RmsPropState> optim(depth, RmsPropState{plan.optimizer, {}});
    const std::size_t n = train.rows();
    const std::size_t batch = std::max<std::size_t>(1, plan.minibatch);

    TrainLog log;
    const auto start = Clock::now();
    for (std::size_t epoch = 1; epoch <= plan.epochs; ++epoch) {
        const auto order = shuffled_indices(n, shuffle_rng);
        std::vector<double> penalty_sum(depth, 0.0);
        std::size_t batches = 0;
        for (std::size_t begin = 0; begin < n; begin += batch) {
            const std::size_t end = std::min(n, begin + batch);
            Matrix input = gather_rows(train, std::span(order).subspan(begin, end - begin));
            // Every layer sees the clean encoding of the *current* lower layers.
            std::vector<ObjectiveResult> results;
            for (std::size_t i = 0; i < depth; ++i) {
                const CorruptionSpec c = plan.corruption.empty() ? CorruptionSpec{} : plan.corruption[i];
                const RegularizerSpec r = plan.regularizer.empty() ? RegularizerSpec{} : plan.regularizer[i];
                results.push_back(gae_objective(stack.layer(i), input, plan.loss, c, r, noise_rng));
                if (i + 1 < depth) {
                    input = encode_layer(stack.layer(i), input);
                }
            }
            for (std::size_t i = 0; i < depth; ++i) {
                penalty_sum[i] += results[i].penalties.front();
                auto params = stack.layer(i).tensors();
                auto grads = std::as_const(results[i].grads.front()).tensors();
                rmsprop_step(optim[i], params, grads);
            }
            ++batches;
        }
        EpochRecord rec;
        rec.epoch = epoch;
        rec.train_err = input_space_error(stack.layers(), train, plan.loss);
        rec.valid_err = input_space_error(stack.layers(), valid, plan.loss);
        rec.seconds = seconds_since(start);
        for (double& p : penalty_sum) {
            p /= static_cast<double>(std::max<std::size_t>(1, batches));
        }
        rec.penalties = std::move(penalty_sum);
        log.records.push_back(std::move(rec));
    }
    return {std::move(stack), {std::move(log)}};
}

StackParams init_from(const StackParams& stack, const StackParams& pretrained) {
    if (stack.depth() != pretrained.depth()) {
        throw ContractViolation("init_from: depth mismatch");
    }
    for (std::size_t i = 0; i < stack.depth(); ++i) {
        const auto& a = stack.layer(i);
        const auto& b = pretrained.layer(i);
        if (a.input_width() != b.input_width() || a.hidden_width() != b.hidden_width() || a.tied != b.tied ||
            a.act_enc != b.act_enc || a.act_dec != b.act_dec) {
            throw ContractViolation("init_from: architecture mismatch at layer " + std::to_string(i + 1));
        }
    }
    return pretrained;
}

TrainResult train_scheme(Scheme scheme, StackParams stack, const Matrix& train, const Matrix& valid,
                         const TrainPlan& plan) {
    switch (scheme) {
    case Scheme::layerwise:
        return train_layerwise(std::move(stack), train, valid, plan);
    case Scheme::joint:
        return train_joint(std::move(stack), train, valid, plan);
    case Scheme::scheduled:
        return train_scheduled(std::move(stack), train, valid, plan);
    case Scheme::naive_sum:
        return train_naive_sum(std::move(stack), train, valid, plan);
    case Scheme::pretrain_then_joint:
    case Scheme::pretrain_then_regularized_joint: {
        TrainResult pre = train_layerwise(stack, train, valid, plan);
        TrainPlan joint_plan = plan;
        if (scheme == Scheme::pretrain_then_joint) {
            joint_plan.corruption.assign(stack.depth(), CorruptionSpec::none());
            joint_plan.regularizer.assign(stack.depth(), RegularizerSpec::none());
        }
        joint_plan.validate(stack.depth());
        StackParams joint_stack = init_from(stack, pre.stack);
        LoopOptions opts;
        opts.epochs = plan.epochs;
        opts.stream_tag = kPostPretrainTag;
        TrainLog log = train_layers(joint_stack.layers(), train, valid, joint_plan, opts);
        TrainResult out{std::move(joint_stack), std::move(pre.logs)};
        out.logs.push_back(std::move(log));
        return out;
    }
    }
    throw ConfigError("unhandled scheme");
}

GridSpec GridSpec::paper_dae() {
    return {{0.001, 0.005, 0.01, 0.02}, {0.1, 0.3, 0.5, 0.7, 0.9}, {}};
}

GridSpec GridSpec::paper_cae() {
    return {{0.001, 0.005, 0.01, 0.02}, {}, {0.01, 0.05, 0.15, 0.3, 0.6}};
}

std::vector<GridPoint> expand_grid(const GridSpec& grid, const TrainPlan& base) {
    const std::vector<double> lrs =
        grid.learning_rates.empty() ? std::vector<double>{base.optimizer.learning_rate} : grid.learning_rates;
    std::vector<std::optional<double>> noises(grid.noise_levels.begin(), grid.noise_levels.end());
    if (noises.empty()) noises.emplace_back();
    std::vector<std::optional<double>> lambdas(grid.lambdas.begin(), grid.lambdas.end());
    if (lambdas.empty()) lambdas.emplace_back();

    std::vector<GridPoint> points;
    for (double lr : lrs) {
        for (const auto& noise : noises) {
            for (const auto& lambda : lambdas) {
                points.push_back({points.size(), lr, noise, lambda});
            }
        }
    }
    return points;
}

TrainPlan apply_grid_point(const TrainPlan& base, const GridPoint& point) {
    TrainPlan plan = base;
    plan.optimizer.learning_rate = point.learning_rate;
    if (point.noise) {
        for (auto& c : plan.corruption) {
            if (c.kind == CorruptionKind::none) {
                c.kind = CorruptionKind::additive_gaussian;
            }
            c.level = *point.noise;
        }
    }
    if (point.lambda) {
        for (auto& r : plan.regularizer) {
            r.lambda = *point.lambda;
        }
    }
    plan.seed = Rng(base.seed).split(1000 + point.id).seed();
    return plan;
}

std::string GridResult::to_csv() const {
    std::ostringstream os;
    os << "id,learning_rate,noise,lambda,ok,train_err,valid_err,best,error\n";
    for (const auto& row : rows) {
        os << row.point.id << ',' << format_double(row.point.learning_rate) << ','
           << (row.point.noise ? format_double(*row.point.noise) : "") << ','
           << (row.point.lambda ? format_double(*row.point.lambda) : "") << ',' << (row.ok ? 1 : 0) << ','
           << format_double(row.train_err) << ',' << format_double(row.valid_err) << ','
           << (row.point.id == best ? 1 : 0) << ',' << '"' << row.error << '"' << '\n';
    }
    return os.str();
}

GridResult grid_search(const StackParams& init, const Matrix& train, const Matrix& valid, Scheme scheme,
                       const TrainPlan& base, const GridSpec& grid, std::size_t threads) {
    const auto points = expand_grid(grid, base);
    if (points.empty()) {
        throw ConfigError("grid is empty");
    }
    const Matrix& select_on = valid.rows() > 0 ? valid : train;

    GridResult result;
    result.rows.resize(points.size());
    std::vector<std::optional<TrainResult>> runs(points.size());
    std::atomic<std::size_t> next{0};
    auto worker = [&] {
        for (std::size_t i = next++; i < points.size(); i = next++) {
            GridRow& row = result.rows[i];
            row.point = points[i];
            try {
                TrainResult run = train_scheme(scheme, init, train, valid, apply_grid_point(base, points[i]));
                row.train_err = input_space_error(run.stack.layers(), train, base.loss);
                row.valid_err = input_space_error(run.stack.layers(), select_on, base.loss);
                row.ok = std::isfinite(row.valid_err);
                if (!row.ok) {
                    row.error = "non-finite validation error";
                }
                runs[i] = std::move(run);
            } catch (const std::exception& e) {
                row.ok = false;
                row.error = e.what();
            }
        }
    };
    {
        std::vector<std::jthread> pool;
        for (std::size_t t = 1; t < std::max<std::size_t>(1, threads); ++t) {
            pool.emplace_back(worker);
        }
        worker();
    }

    std::optional<std::size_t> best;
    for (std::size_t i = 0; i < result.rows.size(); ++i) {
        if (result.rows[i].ok && (!best || result.rows[i].valid_err < result.rows[*best].valid_err)) {
            best = i;
        }
    }
    if (!best) {
        throw std::runtime_error("every grid point failed");
    }
    result.best = *best;
    result.best_plan = apply_grid_point(base, points[*best]);
    result.best_run = std::move(*runs[*best]);
    return result;
}

} // namespace deepstack
