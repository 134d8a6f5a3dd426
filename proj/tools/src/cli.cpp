#include <CLI11.hpp>

#include <ostream>

#include "commands.hpp"
#include "deepstack/errors.hpp"
#include "fetch.hpp"

namespace deepstack::cli {

namespace {

constexpr int kOk = 0;
constexpr int kRuntimeFailure = 1;
constexpr int kUsageError = 2;

} // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
    CLI::App app{"Layerwise and joint training of deep autoencoders", "deepstack"};
    app.require_subcommand(1, 1);

    GlobalOptions global;
    std::string config_path;
    std::uint64_t seed = 0;
    std::string out_dir;
    std::size_t threads = 1;
    auto* config_opt = app.add_option("--config", config_path, "key=value run configuration")->check(CLI::ExistingFile);
    auto* seed_opt = app.add_option("--seed", seed, "random seed (overrides the config)");
    auto* out_opt = app.add_option("--out", out_dir, "output directory (overrides the config)");
    auto* threads_opt = app.add_option("--threads", threads, "worker threads for grid search")->check(CLI::PositiveNumber);
    app.add_option("--set", global.overrides, "extra key=value assignment, applied after --config");

    auto* fetch = app.add_subcommand("fetch", "download a dataset into the cache and verify its checksums");
    std::string fetch_name;
    FetchOptions fetch_opts;
    std::string sums_path;
    fetch->add_option("dataset", fetch_name, "registry name, e.g. mnist or rect")->required();
    fetch->add_option("--source", fetch_opts.source, "URL prefix replacing the built-in mirror");
    auto* sums_opt = fetch->add_option("--sha256sums", sums_path, "expected checksums (sha256sum format)");
    fetch->add_flag("--force", fetch_opts.force, "download even when the files are already cached");
    fetch->add_flag("--verify", fetch_opts.verify_only, "only verify cached files against SHA256SUMS");

    auto* train = app.add_subcommand("train", "train a model; writes model, logs, config echo and a ledger row");
    auto* grid = app.add_subcommand("grid", "grid search over learning rate and noise or penalty levels");

    auto* sample = app.add_subcommand("sample", "run the denoising Markov chain and write samples");
    SampleOptions sample_opts;
    std::string sample_model;
    std::size_t steps = 0, thinning = 0;
    auto* sample_model_opt = sample->add_option("--model", sample_model, "model file (default <out>/model.dsm)");
    auto* steps_opt = sample->add_option("--steps", steps, "chain steps")->check(CLI::PositiveNumber);
    auto* thin_opt = sample->add_option("--thinning", thinning, "keep every k-th state")->check(CLI::PositiveNumber);
    sample->add_flag("--nearest", sample_opts.nearest, "append the nearest training row index");
    sample->add_option("--init", sample_opts.init, "chain start: data or random")
        ->check(CLI::IsMember({"data", "random"}));

    std::string model_arg;
    std::size_t samples = 0;
    auto* eval = app.add_subcommand("eval-gen", "Parzen log-likelihood of chain samples; appends a ledger row");
    auto* eval_model_opt = eval->add_option("--model", model_arg, "model file (default <out>/model.dsm)");
    auto* samples_opt = eval->add_option("--samples", samples, "number of chain samples S")->check(CLI::PositiveNumber);
    auto* probe = app.add_subcommand("probe", "linear probe on top-layer features; appends a ledger row");
    auto* probe_model_opt = probe->add_option("--model", model_arg, "model file (default <out>/model.dsm)");
    auto* finetune = app.add_subcommand("finetune", "supervised finetuning; appends a ledger row");
    auto* fine_model_opt = finetune->add_option("--model", model_arg, "model file (default <out>/model.dsm)");

    auto* report = app.add_subcommand("report", "comparison tables and curve files from a ledger directory");
    std::string report_ledger;
    auto* report_ledger_opt = report->add_option("ledger", report_ledger, "ledger directory (default: config ledger)");

    for (auto* sub : app.get_subcommands({})) sub->fallthrough();

    std::vector<const char*> argv{"deepstack"};
    for (const auto& a : args) argv.push_back(a.c_str());
    try {
        app.parse(static_cast<int>(argv.size()), argv.data());
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e, out, err);
    } catch (const CLI::CallForAllHelp& e) {
        return app.exit(e, out, err);
    } catch (const CLI::ParseError& e) {
        app.exit(e, out, err);
        return kUsageError;
    }

    if (*config_opt) global.config = config_path;
    if (*seed_opt) global.seed = seed;
    if (*out_opt) global.out = out_dir;
    if (*threads_opt) global.threads = threads;

    try {
        if (fetch->parsed()) {
            if (*sums_opt) fetch_opts.expected_sums = sums_path;
            fetch_opts.cache = cache_root();
            const FetchReport rep = fetch_dataset(fetch_name, fetch_opts);
            for (const auto& f : rep.files) out << (rep.downloaded ? "fetched " : "verified ") << f.string() << '\n';
            return kOk;
        }
        const RunConfig config = resolve_config(global);
        auto model = [&](CLI::Option* opt) {
            return *opt ? std::optional<std::filesystem::path>(model_arg) : std::nullopt;
        };
        if (train->parsed()) {
            cmd_train(config, out);
        } else if (grid->parsed()) {
            cmd_grid(config, out);
        } else if (sample->parsed()) {
            if (*sample_model_opt) sample_opts.model = sample_model;
            if (*steps_opt) sample_opts.steps = steps;
            if (*thin_opt) sample_opts.thinning = thinning;
            cmd_sample(config, sample_opts, out);
        } else if (eval->parsed()) {
            RunConfig c = config;
            if (*samples_opt) c.samples = samples;
            cmd_eval_gen(c, model(eval_model_opt), out);
        } else if (probe->parsed()) {
            cmd_probe(config, model(probe_model_opt), out);
        } else if (finetune->parsed()) {
            cmd_finetune(config, model(fine_model_opt), out);
        } else if (report->parsed()) {
            ReportOptions opts;
            if (*report_ledger_opt) opts.ledger = report_ledger;
            if (*out_opt) opts.out = out_dir;
            cmd_report(config, opts, out);
        }
        return kOk;
    } catch (const ConfigError& e) {
        err << "deepstack: configuration error: " << e.what() << '\n';
        return kUsageError;
    } catch (const DataUnavailable& e) {
        err << "deepstack: " << e.what() << '\n';
        return kUsageError;
    } catch (const ContractViolation& e) {
        err << "deepstack: invalid input: " << e.what() << '\n';
        return kUsageError;
    } catch (const std::exception& e) {
        err << "deepstack: " << e.what() << '\n';
        return kRuntimeFailure;
    }
}

} // namespace deepstack::cli
