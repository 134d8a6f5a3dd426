#include "commands.hpp"

#include <cmath>
#include <fstream>
#include <ostream>
#include <sstream>

#include "deepstack/classifier.hpp"
#include "deepstack/errors.hpp"
#include "deepstack/generative.hpp"
#include "deepstack/model.hpp"
#include "deepstack/objectives.hpp"
#include "deepstack/training.hpp"
#include "ledger.hpp"

namespace deepstack::cli {

namespace {

// Stream tags for the per-command random streams derived from --seed.
constexpr std::uint64_t kEvalStream = 101;
constexpr std::uint64_t kSampleStream = 102;
constexpr std::uint64_t kFinetuneStream = 103;

Dataset stack_splits(const std::string& name, const Dataset& train, const Dataset& valid, const Dataset& test) {
    Matrix x(train.rows() + valid.rows(), train.x.cols());
    std::copy(train.x.data().begin(), train.x.data().end(), x.data().begin());
    std::copy(valid.x.data().begin(), valid.x.data().end(),
              x.data().begin() + static_cast<std::ptrdiff_t>(train.x.size()));
    std::vector<int> y = train.y;
    y.insert(y.end(), valid.y.begin(), valid.y.end());
    return concat_with_test(make_dataset(name, std::move(x), std::move(y), train.classes), train.rows(), test);
}

std::filesystem::path model_path(const RunConfig& config, const std::optional<std::filesystem::path>& model) {
    return model ? *model : config.out_dir() / kModelFile;
}

StackParams load_model_for(const std::filesystem::path& path, const Dataset& ds) {
    StackParams stack = load(path);
    if (stack.input_width() != ds.x.cols()) {
        throw ConfigError("model " + path.string() + " expects " + std::to_string(stack.input_width()) +
                          " inputs but dataset has " + std::to_string(ds.x.cols()));
    }
    return stack;
}

void write_text(const std::filesystem::path& path, const std::string& text) {
    if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
    std::ofstream out(path, std::ios::trunc | std::ios::binary);
    out << text;
    if (!out) throw std::runtime_error("cannot write " + path.string());
}

std::string join_row(std::initializer_list<std::string> cells) {
    std::string row;
    for (const auto& c : cells) {
        if (!row.empty()) row += ',';
        row += c;
    }
    return row;
}

std::filesystem::path ledger_file(const RunConfig& config, const char* name) {
    return std::filesystem::path(config.ledger) / name;
}

double input_error(const StackParams& stack, const Matrix& x) {
    if (x.rows() == 0) return std::nan("");
    return mean_loss(LossSpec{}, x, reconstruct_clean(stack.layers(), x));
}

// Writes the run's logs and returns the path of the last one (the final
// input-space curve for joint-style schemes).
std::filesystem::path write_logs(const RunConfig& config, const std::vector<TrainLog>& logs, std::size_t id) {
    const std::string stem = "train_log_" + config.scheme + "_" + config.dataset + "_" + std::to_string(id);
    std::filesystem::path last;
    for (std::size_t k = 0; k < logs.size(); ++k) {
        last = config.out_dir() /
               (logs.size() == 1 ? stem + ".csv"
                                 : stem + "_part" + std::to_string(k + 1) + "_" + logs[k].space + ".csv");
        logs[k].write_csv(last);
    }
    return last;
}

void finish_training(const RunConfig& config, const Dataset& ds, const TrainResult& result, std::size_t id,
                     std::ostream& out) {
    const auto dir = config.out_dir();
    save(result.stack, dir / kModelFile);
    write_split_manifest(manifest_of(ds), dir / "split.csv");
    const auto log = write_logs(config, result.logs, id);
    const double train_err = input_error(result.stack, ds.train_x());
    const double valid_err = input_error(result.stack, ds.valid_x());
    append_row(ledger_file(config, kTrainLedger), kTrainHeader,
               join_row({config.dataset, config.scheme, std::to_string(result.stack.depth()), ledger_number(train_err),
                         ledger_number(valid_err), std::to_string(config.epochs), std::to_string(config.seed),
                         log.string()}));
    out << "model " << (dir / kModelFile).string() << "\ntrain_err " << ledger_number(train_err) << "\nvalid_err "
        << ledger_number(valid_err) << '\n';
}

void prepare_out_dir(const RunConfig& config) {
    std::filesystem::create_directories(config.out_dir());
    write_text(config.out_dir() / kResolvedConfigFile, to_text(config));
}

} // namespace

RunConfig resolve_config(const GlobalOptions& options) {
    RunConfig config = options.config ? load_run_config(*options.config) : RunConfig{};
    for (const auto& kv : options.overrides) {
        const auto eq = kv.find('=');
        if (eq == std::string::npos) throw ConfigError("--set expects key=value, got '" + kv + "'");
        try {
            set_config_value(config, kv.substr(0, eq), kv.substr(eq + 1));
        } catch (const ConfigError& e) {
            throw ConfigError("--set " + kv + ": " + e.what());
        }
    }
    if (options.seed) config.seed = *options.seed;
    if (options.out) config.out = *options.out;
    if (options.threads) config.threads = *options.threads;
    config.validate();
    return config;
}

Dataset load_dataset(const RunConfig& config) {
    Rng rng(config.data_seed);
    if (config.dataset == "synth_bars" || config.dataset == "synth_rects") {
        const auto gen = config.dataset == "synth_bars" ? synth_bars : synth_rects;
        auto part = [&](std::size_t n, std::size_t fallback) {
            Dataset d = gen(n ? n : fallback, config.synth_side, rng);
            return config.pixel_noise > 0.0 ? add_pixel_noise(std::move(d), config.pixel_noise, rng) : d;
        };
        const Dataset train = part(config.n_train, 1000);
        const Dataset valid = part(config.n_valid, 500);
        const Dataset test = part(config.n_test, 1000);
        return stack_splits(config.dataset, train, valid, test);
    }
    const auto info = find_benchmark(config.dataset);
    if (!info) throw ConfigError("unknown dataset '" + config.dataset + "'");
    Dataset ds = load_benchmark(*info, cache_root());
    if (config.n_train || config.n_valid) {
        ds = subsample(ds, config.n_train ? config.n_train : ds.n_train, config.n_valid ? config.n_valid : ds.n_valid,
                       config.data_seed);
    }
    if (config.pixel_noise > 0.0) ds = add_pixel_noise(std::move(ds), config.pixel_noise, rng);
    return ds;
}

void cmd_train(const RunConfig& config, std::ostream& out) {
    const Dataset ds = load_dataset(config);
    prepare_out_dir(config);
    const StackParams init = initial_stack(ds.x.cols(), config.hidden_widths(), config.tied, config.seed);
    const TrainResult result =
        train_scheme(config.parsed_scheme(), init, ds.train_x(), ds.valid_x(), config.train_plan());
    finish_training(config, ds, result, 0, out);
}

void cmd_grid(const RunConfig& config, std::ostream& out) {
    const Dataset ds = load_dataset(config);
    prepare_out_dir(config);
    const StackParams init = initial_stack(ds.x.cols(), config.hidden_widths(), config.tied, config.seed);
    const GridResult grid = grid_search(init, ds.train_x(), ds.valid_x(), config.parsed_scheme(), config.train_plan(),
                                        config.grid_spec(), config.threads);
    write_text(config.out_dir() / "grid.csv", grid.to_csv());
    const GridPoint& best = grid.rows.at(grid.best).point;
    out << "best grid point " << best.id << " learning_rate " << ledger_number(best.learning_rate);
    if (best.noise) out << " noise " << ledger_number(*best.noise);
    if (best.lambda) out << " lambda " << ledger_number(*best.lambda);
    out << '\n';
    finish_training(config, ds, grid.best_run, best.id, out);
}

void write_pgm_grid(const std::filesystem::path& path, const Matrix& images, std::size_t side, std::size_t per_row) {
    if (side * side != images.cols()) throw ContractViolation("write_pgm_grid: tiles must be side*side pixels");
    const std::size_t n = images.rows();
    const std::size_t cols = std::max<std::size_t>(1, std::min(per_row, n));
    const std::size_t rows = n == 0 ? 0 : (n + cols - 1) / cols;
    // One-pixel gutter between tiles.
    const std::size_t width = cols * side + (cols - 1);
    const std::size_t height = rows == 0 ? 0 : rows * side + (rows - 1);
    std::vector<unsigned char> pixels(width * height, 0);
    for (std::size_t k = 0; k < n; ++k) {
        const std::size_t r0 = (k / cols) * (side + 1), c0 = (k % cols) * (side + 1);
        for (std::size_t i = 0; i < side; ++i) {
            for (std::size_t j = 0; j < side; ++j) {
                const double v = std::clamp(images(k, i * side + j), 0.0, 1.0);
                pixels[(r0 + i) * width + c0 + j] = static_cast<unsigned char>(std::lround(v * 255.0));
            }
        }
    }
    if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
    std::ofstream f(path, std::ios::binary | std::ios::trunc);
    f << "P5\n" << width << ' ' << height << "\n255\n";
    f.write(reinterpret_cast<const char*>(pixels.data()), static_cast<std::streamsize>(pixels.size()));
    if (!f) throw std::runtime_error("cannot write " + path.string());
}

void cmd_sample(const RunConfig& config, const SampleOptions& options, std::ostream& out) {
    if (options.init != "data" && options.init != "random") {
        throw ConfigError("--init must be data or random");
    }
    const auto path = model_path(config, options.model);
    StackParams model = load(path);
    const bool need_data = options.nearest || options.init == "data";
    std::optional<Dataset> ds;
    if (need_data) ds = load_dataset(config);
    if (ds && ds->x.cols() != model.input_width()) {
        throw ConfigError("model " + path.string() + " does not match dataset width");
    }
    Rng rng = Rng(config.seed).split(kSampleStream);
    std::vector<double> init(model.input_width());
    if (ds) {
        const Matrix train = ds->train_x();
        const auto row = train.row(rng.below(train.rows()));
        init.assign(row.begin(), row.end());
    } else {
        for (double& v : init) v = rng.uniform();
    }
    const std::size_t steps = options.steps.value_or(config.sample_steps);
    const std::size_t thinning = options.thinning.value_or(config.thinning);
    const Matrix samples = gsn_chain(model, init, steps, config.generative_config().corruption, rng, thinning, 0);

    std::filesystem::create_directories(config.out_dir());
    std::ostringstream csv;
    for (std::size_t j = 0; j < samples.cols(); ++j) csv << (j ? "," : "") << 'p' << j;
    if (options.nearest) csv << ",nearest";
    csv << '\n';
    const Matrix train = ds ? ds->train_x() : Matrix{};
    for (std::size_t i = 0; i < samples.rows(); ++i) {
        for (std::size_t j = 0; j < samples.cols(); ++j) csv << (j ? "," : "") << ledger_number(samples(i, j));
        if (options.nearest) csv << ',' << nearest_training_sample(samples.row(i), train);
        csv << '\n';
    }
    write_text(config.out_dir() / "samples.csv", csv.str());
    out << samples.rows() << " samples -> " << (config.out_dir() / "samples.csv").string() << '\n';
    const auto side = static_cast<std::size_t>(std::lround(std::sqrt(static_cast<double>(samples.cols()))));
    if (side * side == samples.cols()) {
        write_pgm_grid(config.out_dir() / "samples.pgm", samples, side);
        out << "grid -> " << (config.out_dir() / "samples.pgm").string() << '\n';
    }
}

void cmd_eval_gen(const RunConfig& config, const std::optional<std::filesystem::path>& model, std::ostream& out) {
    const Dataset ds = load_dataset(config);
    const StackParams stack = load_model_for(model_path(config, model), ds);
    Rng rng = Rng(config.seed).split(kEvalStream);
    const GenerativeReport rep =
        evaluate_generative(stack, ds.valid_x(), ds.test_x(), config.generative_config(), rng);
    append_row(ledger_file(config, kGenerativeLedger), kGenerativeHeader,
               join_row({config.dataset, config.scheme, std::to_string(stack.depth()), ledger_number(rep.mean_ll),
                         ledger_number(rep.stderr_ll), ledger_number(rep.sigma), std::to_string(rep.samples),
                         std::to_string(config.seed)}));
    out << "mean_ll,stderr,sigma\n"
        << ledger_number(rep.mean_ll) << ',' << ledger_number(rep.stderr_ll) << ',' << ledger_number(rep.sigma) << '\n';
}

void cmd_probe(const RunConfig& config, const std::optional<std::filesystem::path>& model, std::ostream& out) {
    const Dataset ds = load_dataset(config);
    if (!ds.labeled()) throw ConfigError("probe needs a labeled dataset");
    const StackParams stack = load_model_for(model_path(config, model), ds);
    const LinearProbe probe = train_linear_probe(extract_features(stack, ds.train_x()), ds.train_y(), ds.classes,
                                                 extract_features(stack, ds.valid_x()), ds.valid_y(),
                                                 config.probe_config());
    const EvalReport rep = evaluate(probe, extract_features(stack, ds.test_x()), ds.test_y());
    append_row(ledger_file(config, kClassifierLedger), kClassifierHeader,
               join_row({config.dataset, config.scheme, std::to_string(stack.depth()), "probe",
                         ledger_number(rep.error_percent), ledger_number(rep.ci_halfwidth),
                         std::to_string(config.seed)}));
    out << "probe C " << ledger_number(probe.c) << " test error " << ledger_number(rep.error_percent) << "% +/- "
        << ledger_number(rep.ci_halfwidth) << '\n';
}

void cmd_finetune(const RunConfig& config, const std::optional<std::filesystem::path>& model, std::ostream& out) {
    const Dataset ds = load_dataset(config);
    if (!ds.labeled()) throw ConfigError("finetune needs a labeled dataset");
    const StackParams stack = load_model_for(model_path(config, model), ds);
    Rng rng = Rng(config.seed).split(kFinetuneStream);
    FinetuneResult result = finetune(FinetuneNet::from_stack(stack, ds.classes, rng), ds.train_x(), ds.train_y(),
                                     ds.valid_x(), ds.valid_y(), config.finetune_plan());
    const EvalReport rep = evaluate(result.net, ds.test_x(), ds.test_y());
    append_row(ledger_file(config, kClassifierLedger), kClassifierHeader,
               join_row({config.dataset, config.scheme, std::to_string(stack.depth()), "finetune",
                         ledger_number(rep.error_percent), ledger_number(rep.ci_halfwidth),
                         std::to_string(config.seed)}));
    out << "finetune best epoch " << result.best_epoch << " test error " << ledger_number(rep.error_percent)
        << "% +/- " << ledger_number(rep.ci_halfwidth) << '\n';
}

} // namespace deepstack::cli
