#include <cmath>
#include <fstream>
#include <iomanip>
#include <map>
#include <ostream>
#include <set>
#include <sstream>

#include "commands.hpp"
#include "ledger.hpp"

namespace deepstack::cli {

namespace {

struct Cell {
    double sum = 0.0;
    std::size_t n = 0;
    double mean() const { return sum / static_cast<double>(n); }
};

struct Table {
    std::string title;
    std::string id;
    bool higher_is_better = false;
    // (dataset, depth) -> scheme -> accumulated value
    std::map<std::pair<std::string, std::string>, std::map<std::string, Cell>> rows;
    std::set<std::string> schemes;
};

double to_double(const std::string& s) {
    if (s == "nan") return std::nan("");
    std::size_t used = 0;
    const double v = std::stod(s, &used);
    if (used != s.size()) throw std::runtime_error("ledger value '" + s + "' is not a number");
    return v;
}

void add(Table& t, const std::string& dataset, const std::string& depth, const std::string& scheme, double v) {
    Cell& c = t.rows[{dataset, depth}][scheme];
    c.sum += v;
    ++c.n;
    t.schemes.insert(scheme);
}

bool is_best(const Table& t, const std::map<std::string, Cell>& row, const Cell& cell) {
    for (const auto& [scheme, other] : row) {
        if (t.higher_is_better ? other.mean() > cell.mean() : other.mean() < cell.mean()) return false;
    }
    return true;
}

std::string fixed(double v) {
    std::ostringstream os;
    os << std::fixed << std::setprecision(4) << v;
    return os.str();
}

void print_table(const Table& t, std::ostream& text, std::ostream& csv) {
    if (t.rows.empty()) return;
    text << "== " << t.title << " ==\n";
    text << std::left << std::setw(18) << "dataset" << std::setw(7) << "depth";
    for (const auto& s : t.schemes) text << std::setw(16) << s;
    text << '\n';
    for (const auto& [key, row] : t.rows) {
        text << std::setw(18) << key.first << std::setw(7) << key.second;
        for (const auto& s : t.schemes) {
            const auto it = row.find(s);
            if (it == row.end()) {
                text << std::setw(16) << "-";
                continue;
            }
            const bool best = is_best(t, row, it->second);
            text << std::setw(16) << (fixed(it->second.mean()) + (best ? "*" : "") + " (n=" +
                                      std::to_string(it->second.n) + ")");
            csv << t.id << ',' << key.first << ',' << key.second << ',' << s << ',' << ledger_number(it->second.mean())
                << ',' << it->second.n << ',' << (best ? 1 : 0) << '\n';
        }
        text << '\n';
    }
    text << '\n';
}

std::filesystem::path resolve_log(const std::filesystem::path& ledger, const std::string& log) {
    const std::filesystem::path p(log);
    if (p.is_absolute() || std::filesystem::exists(p)) return p;
    return ledger / p;
}

std::size_t write_fig3(const std::filesystem::path& ledger, const CsvTable& train, const std::filesystem::path& out,
                       std::ostream& warn) {
    std::size_t written = 0;
    for (const auto& row : train.rows) {
        const auto log = resolve_log(ledger, row[train.column("log")]);
        if (!std::filesystem::exists(log)) {
            warn << "report: skipping missing log " << log.string() << '\n';
            continue;
        }
        const CsvTable curve = read_csv(log);
        const std::size_t e = curve.column("epoch"), tr = curve.column("train_err"), va = curve.column("valid_err");
        const auto name = "fig3_" + row[train.column("dataset")] + "_" + row[train.column("scheme")] + "_d" +
                          row[train.column("depth")] + "_s" + row[train.column("seed")] + ".csv";
        std::ofstream f(out / name, std::ios::trunc);
        f << "epoch,train_err,valid_err\n";
        for (const auto& r : curve.rows) f << r[e] << ',' << r[tr] << ',' << r[va] << '\n';
        if (!f) throw std::runtime_error("cannot write " + (out / name).string());
        ++written;
    }
    return written;
}

} // namespace

void cmd_report(const RunConfig& config, const ReportOptions& options, std::ostream& out) {
    const std::filesystem::path ledger = options.ledger.value_or(config.ledger);
    const std::filesystem::path dest = options.out.value_or(ledger / "report");

    Table recon{"input-space reconstruction error, train (lower is better)", "reconstruction", false, {}, {}};
    Table gen{"Parzen mean test log-likelihood (higher is better)", "generative", true, {}, {}};
    Table probe{"linear probe test error % (lower is better)", "probe", false, {}, {}};
    Table fine{"finetuned test error % (lower is better)", "finetune", false, {}, {}};

    std::size_t total = 0;
    CsvTable train;
    if (std::filesystem::exists(ledger / kTrainLedger)) {
        train = read_csv(ledger / kTrainLedger);
        for (const auto& r : train.rows) {
            add(recon, r[train.column("dataset")], r[train.column("depth")], r[train.column("scheme")],
                to_double(r[train.column("train_err")]));
        }
        total += train.rows.size();
    }
    if (std::filesystem::exists(ledger / kGenerativeLedger)) {
        const CsvTable t = read_csv(ledger / kGenerativeLedger);
        for (const auto& r : t.rows) {
            add(gen, r[t.column("dataset")], r[t.column("depth")], r[t.column("scheme")],
                to_double(r[t.column("mean_ll")]));
        }
        total += t.rows.size();
    }
    if (std::filesystem::exists(ledger / kClassifierLedger)) {
        const CsvTable t = read_csv(ledger / kClassifierLedger);
        for (const auto& r : t.rows) {
            const std::string stage = r[t.column("stage")];
            if (stage != "probe" && stage != "finetune") {
                throw std::runtime_error("classifier ledger has unknown stage '" + stage + "'");
            }
            add(stage == "probe" ? probe : fine, r[t.column("dataset")], r[t.column("depth")], r[t.column("scheme")],
                to_double(r[t.column("error")]));
        }
        total += t.rows.size();
    }
    if (total == 0) {
        throw std::runtime_error("ledger " + ledger.string() + " has no rows to report");
    }

    std::filesystem::create_directories(dest);
    std::ostringstream text;
    std::ostringstream csv;
    csv << "table,dataset,depth,scheme,value,n,best\n";
    for (const Table* t : {&recon, &gen, &probe, &fine}) print_table(*t, text, csv);
    text << "* marks the best entry in each row\n";

    std::ofstream(dest / "report.txt", std::ios::trunc) << text.str();
    std::ofstream(dest / "report.csv", std::ios::trunc) << csv.str();
    const std::size_t curves = train.rows.empty() ? 0 : write_fig3(ledger, train, dest, out);
    out << text.str() << "wrote " << (dest / "report.txt").string() << ", " << (dest / "report.csv").string() << " and "
        << curves << " curve file(s)\n";
}

} // namespace deepstack::cli
