#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

#include "deepstack/classifier.hpp"
#include "deepstack/data.hpp"
#include "deepstack/generative.hpp"
#include "deepstack/training.hpp"

namespace deepstack::cli {

/// Everything a command needs, parsed from a strict `key=value` file.
/// Unknown keys, duplicates and malformed values are rejected with the
/// offending line number.
struct RunConfig {
    // data
    std::string dataset = "synth_bars";
    std::size_t synth_side = 12;
    std::size_t n_train = 0;  ///< 0: dataset default
    std::size_t n_valid = 0;
    std::size_t n_test = 0;   ///< synthetic datasets only
    double pixel_noise = 0.0;
    std::uint64_t data_seed = 1;

    // model and training
    std::string scheme = "joint";
    std::size_t depth = 2;
    std::vector<std::size_t> hidden{1000};
    bool tied = true;
    std::string corruption = "gaussian";
    std::vector<double> corruption_levels{0.3};
    std::string regularizer = "none";
    std::vector<double> regularizer_levels{0.0};
    double learning_rate = 0.01;
    double decay = 0.9;
    double epsilon = 1e-8;
    std::size_t epochs = 300;
    std::size_t minibatch = 100;
    std::string budget = "paper";
    std::size_t schedule_window = 0;
    std::size_t patience = 0;  ///< 0 disables early stopping

    // run
    std::uint64_t seed = 0;
    std::string out = "runs/default";
    std::string ledger = "ledger";
    std::size_t threads = 1;

    // generative evaluation and sampling
    std::size_t samples = 10000;
    std::size_t burn_in = 100;
    std::string chain_corruption = "gaussian";
    double chain_level = 0.3;
    std::vector<double> sigma_grid = default_sigma_grid();
    std::size_t sample_steps = 100;
    std::size_t thinning = 1;

    // classifiers
    std::vector<double> probe_c{0.01, 0.1, 1.0, 10.0, 100.0};
    std::size_t probe_epochs = 500;
    std::size_t finetune_epochs = 1000;
    std::size_t finetune_minibatch = 100;
    double finetune_learning_rate = 0.001;
    std::size_t finetune_patience = 20;

    // grid search
    std::vector<double> grid_learning_rates{0.001, 0.005, 0.01, 0.02};
    std::vector<double> grid_noise_levels{0.1, 0.3, 0.5, 0.7, 0.9};
    std::vector<double> grid_lambdas{};

    friend bool operator==(const RunConfig&, const RunConfig&) = default;

    std::vector<std::size_t> hidden_widths() const;
    Scheme parsed_scheme() const;
    TrainPlan train_plan() const;
    GridSpec grid_spec() const;
    GenerativeEvalConfig generative_config() const;
    ProbeConfig probe_config() const;
    FinetunePlan finetune_plan() const;
    std::filesystem::path out_dir() const { return out; }

    /// Cross-field checks (list lengths, enum values, ranges). Throws ConfigError.
    void validate() const;
};

/// Parses config text. `source` names the file in error messages
/// ("<source>:<line>: ...").
RunConfig parse_run_config(std::string_view text, const std::string& source = "config");
RunConfig load_run_config(const std::filesystem::path& path);

/// Applies one `key=value` assignment on top of an existing config.
void set_config_value(RunConfig& config, std::string_view key, std::string_view value);

/// Every key with its resolved value, one per line, in schema order.
std::string to_text(const RunConfig& config);

/// Names of all accepted keys, in schema order.
std::vector<std::string> config_keys();

} // namespace deepstack::cli
