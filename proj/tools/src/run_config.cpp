#include "run_config.hpp"

#include <charconv>
#include <fstream>
#include <functional>
#include <set>
#include <sstream>

#include "deepstack/errors.hpp"

namespace deepstack::cli {

namespace {

std::string_view trim(std::string_view s) {
    const auto first = s.find_first_not_of(" \t\r");
    if (first == std::string_view::npos) return {};
    const auto last = s.find_last_not_of(" \t\r");
    return s.substr(first, last - first + 1);
}

std::vector<std::string_view> split_list(std::string_view s) {
    std::vector<std::string_view> out;
    s = trim(s);
    if (s.empty()) return out;
    std::size_t start = 0;
    while (true) {
        const auto comma = s.find(',', start);
        out.push_back(trim(s.substr(start, comma == std::string_view::npos ? std::string_view::npos : comma - start)));
        if (comma == std::string_view::npos) break;
        start = comma + 1;
    }
    return out;
}

template <typename T>
T parse_number(std::string_view s) {
    s = trim(s);
    T value{};
    const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), value);
    if (s.empty() || ec != std::errc() || ptr != s.data() + s.size()) {
        throw ConfigError("expected a number, got '" + std::string(s) + "'");
    }
    if constexpr (std::is_floating_point_v<T>) {
        if (!std::isfinite(value)) throw ConfigError("value must be finite");
    }
    return value;
}

bool parse_bool(std::string_view s) {
    s = trim(s);
    if (s == "true" || s == "1" || s == "yes") return true;
    if (s == "false" || s == "0" || s == "no") return false;
    throw ConfigError("expected true or false, got '" + std::string(s) + "'");
}

std::string print_double(double v) {
    char buf[32];
    const auto res = std::to_chars(buf, buf + sizeof buf, v);
    return std::string(buf, res.ptr);
}

template <typename T>
std::string print_value(const T& v) {
    if constexpr (std::is_same_v<T, std::string>) {
        return v;
    } else if constexpr (std::is_same_v<T, bool>) {
        return v ? "true" : "false";
    } else if constexpr (std::is_same_v<T, double>) {
        return print_double(v);
    } else if constexpr (std::is_integral_v<T>) {
        return std::to_string(v);
    } else {
        std::string out;
        for (std::size_t i = 0; i < v.size(); ++i) {
            if (i) out += ',';
            out += print_value(v[i]);
        }
        return out;
    }
}

template <typename T>
T parse_value(std::string_view s) {
    if constexpr (std::is_same_v<T, std::string>) {
        return std::string(trim(s));
    } else if constexpr (std::is_same_v<T, bool>) {
        return parse_bool(s);
    } else if constexpr (std::is_arithmetic_v<T>) {
        return parse_number<T>(s);
    } else {
        T out;
        for (auto item : split_list(s)) out.push_back(parse_value<typename T::value_type>(item));
        return out;
    }
}

struct Field {
    std::string key;
    std::function<void(RunConfig&, std::string_view)> set;
    std::function<std::string(const RunConfig&)> get;
};

template <typename T>
Field field(std::string key, T RunConfig::*member) {
    return {std::move(key), [member](RunConfig& c, std::string_view v) { c.*member = parse_value<T>(v); },
            [member](const RunConfig& c) { return print_value(c.*member); }};
}

const std::vector<Field>& schema() {
    static const std::vector<Field> fields = {
        field("dataset", &RunConfig::dataset),
        field("synth_side", &RunConfig::synth_side),
        field("n_train", &RunConfig::n_train),
        field("n_valid", &RunConfig::n_valid),
        field("n_test", &RunConfig::n_test),
        field("pixel_noise", &RunConfig::pixel_noise),
        field("data_seed", &RunConfig::data_seed),
        field("scheme", &RunConfig::scheme),
        field("depth", &RunConfig::depth),
        field("hidden", &RunConfig::hidden),
        field("tied", &RunConfig::tied),
        field("corruption", &RunConfig::corruption),
        field("corruption_levels", &RunConfig::corruption_levels),
        field("regularizer", &RunConfig::regularizer),
        field("regularizer_levels", &RunConfig::regularizer_levels),
        field("learning_rate", &RunConfig::learning_rate),
        field("decay", &RunConfig::decay),
        field("epsilon", &RunConfig::epsilon),
        field("epochs", &RunConfig::epochs),
        field("minibatch", &RunConfig::minibatch),
        field("budget", &RunConfig::budget),
        field("schedule_window", &RunConfig::schedule_window),
        field("patience", &RunConfig::patience),
        field("seed", &RunConfig::seed),
        field("out", &RunConfig::out),
        field("ledger", &RunConfig::ledger),
        field("threads", &RunConfig::threads),
        field("samples", &RunConfig::samples),
        field("burn_in", &RunConfig::burn_in),
        field("chain_corruption", &RunConfig::chain_corruption),
        field("chain_level", &RunConfig::chain_level),
        field("sigma_grid", &RunConfig::sigma_grid),
        field("sample_steps", &RunConfig::sample_steps),
        field("thinning", &RunConfig::thinning),
        field("probe_c", &RunConfig::probe_c),
        field("probe_epochs", &RunConfig::probe_epochs),
        field("finetune_epochs", &RunConfig::finetune_epochs),
        field("finetune_minibatch", &RunConfig::finetune_minibatch),
        field("finetune_learning_rate", &RunConfig::finetune_learning_rate),
        field("finetune_patience", &RunConfig::finetune_patience),
        field("grid_learning_rates", &RunConfig::grid_learning_rates),
        field("grid_noise_levels", &RunConfig::grid_noise_levels),
        field("grid_lambdas", &RunConfig::grid_lambdas),
    };
    return fields;
}

const Field* find_field(std::string_view key) {
    for (const auto& f : schema()) {
        if (f.key == key) return &f;
    }
    return nullptr;
}

CorruptionSpec make_corruption(const std::string& kind, double level) {
    if (kind == "none") return CorruptionSpec::none();
    if (kind == "gaussian") return CorruptionSpec::gaussian(level);
    if (kind == "masking") return CorruptionSpec::masking(level);
    throw ConfigError("unknown corruption '" + kind + "' (none, gaussian, masking)");
}

RegularizerSpec make_regularizer(const std::string& kind, double level) {
    if (kind == "none") return RegularizerSpec::none();
    if (kind == "l2") return RegularizerSpec::l2(level);
    if (kind == "contractive") return RegularizerSpec::contractive(level);
    throw ConfigError("unknown regularizer '" + kind + "' (none, l2, contractive)");
}

template <typename T>
std::vector<T> broadcast(const std::vector<T>& v, std::size_t depth, const char* key) {
    if (v.size() == depth) return v;
    if (v.size() == 1) return std::vector<T>(depth, v.front());
    throw ConfigError(std::string(key) + " must have 1 or depth=" + std::to_string(depth) + " entries, got " +
                      std::to_string(v.size()));
}

void require(bool ok, const std::string& message) {
    if (!ok) throw ConfigError(message);
}

} // namespace

std::vector<std::size_t> RunConfig::hidden_widths() const { return broadcast(hidden, depth, "hidden"); }

Scheme RunConfig::parsed_scheme() const { return parse_scheme(scheme); }

TrainPlan RunConfig::train_plan() const {
    TrainPlan plan;
    plan.epochs = epochs;
    plan.minibatch = minibatch;
    plan.optimizer = {learning_rate, decay, epsilon};
    for (double level : broadcast(corruption_levels, depth, "corruption_levels")) {
        plan.corruption.push_back(make_corruption(corruption, level));
    }
    for (double level : broadcast(regularizer_levels, depth, "regularizer_levels")) {
        plan.regularizer.push_back(make_regularizer(regularizer, level));
    }
    if (parsed_scheme() == Scheme::scheduled) {
        plan.schedule = Schedule::layerwise_mimic(depth, schedule_window);
    }
    if (patience > 0) {
        plan.early_stopping = EarlyStopping{patience};
    }
    plan.budget = budget == "equal" ? Budget::equal : Budget::paper;
    plan.seed = seed;
    return plan;
}

GridSpec RunConfig::grid_spec() const {
    GridSpec grid;
    grid.learning_rates = grid_learning_rates;
    grid.noise_levels = grid_noise_levels;
    grid.lambdas = grid_lambdas;
    return grid;
}

GenerativeEvalConfig RunConfig::generative_config() const {
    GenerativeEvalConfig cfg;
    cfg.samples = samples;
    cfg.sigma_grid = sigma_grid;
    cfg.burn_in = burn_in;
    cfg.corruption = make_corruption(chain_corruption, chain_level);
    return cfg;
}

ProbeConfig RunConfig::probe_config() const { return {probe_c, probe_epochs}; }

FinetunePlan RunConfig::finetune_plan() const {
    FinetunePlan plan;
    plan.epochs = finetune_epochs;
    plan.minibatch = finetune_minibatch;
    plan.optimizer = {finetune_learning_rate, 0.9, 1e-8};
    plan.patience = finetune_patience;
    plan.seed = seed;
    return plan;
}

void RunConfig::validate() const {
    require(!dataset.empty(), "dataset must not be empty");
    require(dataset == "synth_bars" || dataset == "synth_rects" || find_benchmark(dataset).has_value(),
            "unknown dataset '" + dataset + "'");
    require(synth_side >= 4, "synth_side must be at least 4");
    require(pixel_noise >= 0.0, "pixel_noise must be non-negative");
    parsed_scheme();
    require(depth >= 1, "depth must be at least 1");
    for (std::size_t w : hidden_widths()) require(w >= 1, "hidden widths must be at least 1");
    for (double l : corruption_levels) require(l >= 0.0, "corruption_levels must be non-negative");
    if (corruption == "masking") {
        for (double l : corruption_levels) require(l <= 1.0, "masking probability must be at most 1");
    }
    for (double l : regularizer_levels) require(l >= 0.0, "regularizer_levels must be non-negative");
    require(learning_rate > 0.0, "learning_rate must be positive");
    require(decay >= 0.0 && decay < 1.0, "decay must lie in [0, 1)");
    require(epsilon > 0.0, "epsilon must be positive");
    require(epochs >= 1, "epochs must be at least 1");
    require(minibatch >= 1, "minibatch must be at least 1");
    require(budget == "paper" || budget == "equal", "budget must be paper or equal");
    require(parsed_scheme() != Scheme::scheduled || schedule_window >= 1,
            "scheme=scheduled needs schedule_window >= 1");
    require(!out.empty(), "out must not be empty");
    require(!ledger.empty(), "ledger must not be empty");
    require(threads >= 1, "threads must be at least 1");
    require(samples >= 1, "samples must be at least 1");
    require(chain_level >= 0.0, "chain_level must be non-negative");
    require(!sigma_grid.empty(), "sigma_grid must not be empty");
    for (double s : sigma_grid) require(s > 0.0, "sigma_grid entries must be positive");
    require(sample_steps >= 1, "sample_steps must be at least 1");
    require(thinning >= 1, "thinning must be at least 1");
    require(!probe_c.empty(), "probe_c must not be empty");
    for (double c : probe_c) require(c > 0.0, "probe_c entries must be positive");
    require(finetune_minibatch >= 1, "finetune_minibatch must be at least 1");
    require(finetune_learning_rate > 0.0, "finetune_learning_rate must be positive");
    require(!grid_learning_rates.empty(), "grid_learning_rates must not be empty");
    // Build the derived objects too so any remaining inconsistency surfaces here.
    train_plan().validate(depth);
    generative_config();
}

void set_config_value(RunConfig& config, std::string_view key, std::string_view value) {
    const Field* f = find_field(trim(key));
    if (f == nullptr) {
        throw ConfigError("unknown key '" + std::string(trim(key)) + "'");
    }
    f->set(config, value);
}

RunConfig parse_run_config(std::string_view text, const std::string& source) {
    RunConfig config;
    std::set<std::string, std::less<>> seen;
    std::size_t line_no = 0;
    std::size_t pos = 0;
    while (pos <= text.size()) {
        const auto nl = text.find('\n', pos);
        std::string_view line = text.substr(pos, nl == std::string_view::npos ? std::string_view::npos : nl - pos);
        pos = nl == std::string_view::npos ? text.size() + 1 : nl + 1;
        ++line_no;
        const auto hash = line.find('#');
        if (hash != std::string_view::npos) line = line.substr(0, hash);
        line = trim(line);
        if (line.empty()) continue;
        const std::string where = source + ":" + std::to_string(line_no) + ": ";
        const auto eq = line.find('=');
        if (eq == std::string_view::npos) {
            throw ConfigError(where + "expected key=value, got '" + std::string(line) + "'");
        }
        const std::string key(trim(line.substr(0, eq)));
        if (!seen.insert(key).second) {
            throw ConfigError(where + "duplicate key '" + key + "'");
        }
        try {
            set_config_value(config, key, line.substr(eq + 1));
        } catch (const ConfigError& e) {
            throw ConfigError(where + (find_field(key) ? key + ": " : std::string()) + e.what());
        }
    }
    try {
        config.validate();
    } catch (const ConfigError& e) {
        throw ConfigError(source + ": " + e.what());
    }
    return config;
}

RunConfig load_run_config(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw ConfigError("cannot open config file " + path.string());
    }
    std::ostringstream ss;
    ss << in.rdbuf();
    return parse_run_config(ss.str(), path.string());
}

std::string to_text(const RunConfig& config) {
    std::string out;
    for (const auto& f : schema()) out += f.key + "=" + f.get(config) + "\n";
    return out;
}

std::vector<std::string> config_keys() {
    std::vector<std::string> keys;
    for (const auto& f : schema()) keys.push_back(f.key);
    return keys;
}

} // namespace deepstack::cli
