#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "deepstack/data.hpp"
#include "run_config.hpp"

namespace deepstack::cli {

/// Flags shared by every subcommand; they override values from --config.
struct GlobalOptions {
    std::optional<std::filesystem::path> config;
    std::optional<std::uint64_t> seed;
    std::optional<std::string> out;
    std::optional<std::size_t> threads;
    std::vector<std::string> overrides;  ///< key=value, applied after the file
};

RunConfig resolve_config(const GlobalOptions& options);

/// The dataset a config names, split into train/valid/test. Synthetic data is
/// generated from `data_seed`; registry datasets come from the cache.
Dataset load_dataset(const RunConfig& config);

inline constexpr const char* kModelFile = "model.dsm";
inline constexpr const char* kResolvedConfigFile = "config.resolved";

struct SampleOptions {
    std::optional<std::filesystem::path> model;
    std::optional<std::size_t> steps;
    std::optional<std::size_t> thinning;
    bool nearest = false;
    std::string init = "data";  ///< data | random
};

struct ReportOptions {
    std::optional<std::filesystem::path> ledger;
    std::optional<std::filesystem::path> out;
};

void cmd_train(const RunConfig& config, std::ostream& out);
void cmd_grid(const RunConfig& config, std::ostream& out);
void cmd_sample(const RunConfig& config, const SampleOptions& options, std::ostream& out);
void cmd_eval_gen(const RunConfig& config, const std::optional<std::filesystem::path>& model, std::ostream& out);
void cmd_probe(const RunConfig& config, const std::optional<std::filesystem::path>& model, std::ostream& out);
void cmd_finetune(const RunConfig& config, const std::optional<std::filesystem::path>& model, std::ostream& out);
void cmd_report(const RunConfig& config, const ReportOptions& options, std::ostream& out);

/// Writes a binary PGM (P5) grid of square tiles, up to `per_row` tiles per row.
void write_pgm_grid(const std::filesystem::path& path, const Matrix& images, std::size_t side, std::size_t per_row = 10);

/// Full command-line entry point. Returns the process exit code:
/// 0 ok, 1 runtime failure, 2 usage or configuration error.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

} // namespace deepstack::cli
