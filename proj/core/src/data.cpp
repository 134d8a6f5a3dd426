#include "deepstack/data.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <cmath>
#include <cstdlib>
#include <fstream>
#include <iterator>
#include <map>
#include <numeric>
#include <sstream>

#include "deepstack/errors.hpp"

namespace deepstack {

namespace {

std::vector<std::uint8_t> read_bytes(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw std::runtime_error("cannot open " + path.string());
    }
    return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

std::string read_text(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) {
        throw std::runtime_error("cannot open " + path.string());
    }
    std::ostringstream os;
    os << in.rdbuf();
    return os.str();
}

std::uint32_t read_be32(std::span<const std::uint8_t> bytes, std::size_t offset, const char* what) {
    if (bytes.size() < offset + 4) {
        throw ParseError(std::string("IDX file truncated reading ") + what + " at offset " + std::to_string(offset),
                         offset);
    }
    return (std::uint32_t{bytes[offset]} << 24) | (std::uint32_t{bytes[offset + 1]} << 16) |
           (std::uint32_t{bytes[offset + 2]} << 8) | std::uint32_t{bytes[offset + 3]};
}

void put_be32(std::vector<std::uint8_t>& out, std::uint32_t v) {
    out.push_back(static_cast<std::uint8_t>(v >> 24));
    out.push_back(static_cast<std::uint8_t>(v >> 16));
    out.push_back(static_cast<std::uint8_t>(v >> 8));
    out.push_back(static_cast<std::uint8_t>(v));
}

std::vector<std::size_t> iota_range(std::size_t begin, std::size_t end) {
    std::vector<std::size_t> v(end - begin);
    std::iota(v.begin(), v.end(), begin);
    return v;
}

// Rows of `ds` in `rows` order, carrying labels and provenance along.
void append_rows(const Dataset& ds, std::span<const std::size_t> rows, std::vector<double>& values,
                 std::vector<int>& labels, std::vector<std::size_t>& source) {
    for (std::size_t r : rows) {
        auto row = ds.x.row(r);
        values.insert(values.end(), row.begin(), row.end());
        if (ds.labeled()) {
            labels.push_back(ds.y[r]);
        }
        source.push_back(ds.source_index.empty() ? r : ds.source_index[r]);
    }
}

Dataset assemble(const Dataset& ds, std::span<const std::size_t> train, std::span<const std::size_t> valid,
                 std::span<const std::size_t> test) {
    std::vector<double> values;
    std::vector<int> labels;
    std::vector<std::size_t> source;
    append_rows(ds, train, values, labels, source);
    append_rows(ds, valid, values, labels, source);
    append_rows(ds, test, values, labels, source);
    Dataset out;
    out.name = ds.name;
    out.x = Matrix(source.size(), ds.x.cols());
    std::copy(values.begin(), values.end(), out.x.data().begin());
    out.y = std::move(labels);
    out.classes = ds.classes;
    out.n_train = train.size();
    out.n_valid = valid.size();
    out.source_index = std::move(source);
    return out;
}

// Picks `want` of `pool`, proportionally per label (largest remainder), in
// ascending row order.
std::vector<std::size_t> stratified_pick(const Dataset& ds, std::vector<std::size_t> pool, std::size_t want,
                                         Rng& rng) {
    if (want > pool.size()) {
        throw ContractViolation("subsample: requested " + std::to_string(want) + " rows but only " +
                                std::to_string(pool.size()) + " are available");
    }
    std::vector<std::size_t> picked;
    if (!ds.labeled()) {
        auto order = shuffled_indices(pool.size(), rng);
        for (std::size_t i = 0; i < want; ++i) {
            picked.push_back(pool[order[i]]);
        }
    } else {
        std::map<int, std::vector<std::size_t>> by_class;
        for (std::size_t r : pool) {
            by_class[ds.y[r]].push_back(r);
        }
        struct Share {
            int label;
            std::size_t quota;
            double remainder;
        };
        std::vector<Share> shares;
        std::size_t assigned = 0;
        for (const auto& [label, rows] : by_class) {
            const double exact =
                static_cast<double>(want) * static_cast<double>(rows.size()) / static_cast<double>(pool.size());
            const auto quota = static_cast<std::size_t>(std::floor(exact));
            shares.push_back({label, quota, exact - static_cast<double>(quota)});
            assigned += quota;
        }
        std::vector<std::size_t> order(shares.size());
        std::iota(order.begin(), order.end(), std::size_t{0});
        std::stable_sort(order.begin(), order.end(),
                         [&](std::size_t a, std::size_t b) { return shares[a].remainder > shares[b].remainder; });
        for (std::size_t i = 0; assigned < want; i = (i + 1) % order.size()) {
            Share& s = shares[order[i]];
            if (s.quota < by_class[s.label].size()) {
                ++s.quota;
                ++assigned;
            }
        }
        for (const Share& s : shares) {
            const auto& rows = by_class[s.label];
            auto perm = shuffled_indices(rows.size(), rng);
            for (std::size_t i = 0; i < s.quota; ++i) {
                picked.push_back(rows[perm[i]]);
            }
        }
    }
    std::sort(picked.begin(), picked.end());
    return picked;
}

void set_pixel(Matrix& x, std::size_t row, std::size_t side, std::size_t r, std::size_t c) {
    x(row, r * side + c) = 1.0;
}

} // namespace

void Dataset::validate() const {
    if (n_train + n_valid > x.rows()) {
        throw ContractViolation("dataset '" + name + "': split sizes exceed row count");
    }
    for (double v : x.data()) {
        if (!(v >= 0.0 && v <= 1.0)) {
            throw ContractViolation("dataset '" + name + "': feature outside [0, 1]");
        }
    }
    if (labeled()) {
        if (y.size() != x.rows()) {
            throw ContractViolation("dataset '" + name + "': label count does not match rows");
        }
        for (int label : y) {
            if (label < 0 || static_cast<std::size_t>(label) >= classes) {
                throw ContractViolation("dataset '" + name + "': label outside class range");
            }
        }
    }
    if (!source_index.empty() && source_index.size() != x.rows()) {
        throw ContractViolation("dataset '" + name + "': provenance does not match rows");
    }
}

Dataset make_dataset(std::string name, Matrix x, std::vector<int> y, std::size_t classes) {
    Dataset ds;
    ds.name = std::move(name);
    ds.n_train = x.rows();
    ds.x = std::move(x);
    ds.y = std::move(y);
    ds.classes = ds.y.empty() ? 0 : classes;
    ds.source_index = iota_range(0, ds.x.rows());
    ds.validate();
    return ds;
}

Dataset with_split(Dataset ds, std::size_t n_train, std::size_t n_valid) {
    if (n_train + n_valid > ds.rows()) {
        throw ContractViolation("with_split: split sizes exceed row count");
    }
    ds.n_train = n_train;
    ds.n_valid = n_valid;
    return ds;
}

Dataset concat_with_test(Dataset a, std::size_t n_train, const Dataset& test) {
    if (a.x.cols() != test.x.cols() || a.labeled() != test.labeled()) {
        throw ContractViolation("concat_with_test: incompatible datasets");
    }
    if (n_train > a.rows()) {
        throw ContractViolation("concat_with_test: n_train exceeds row count");
    }
    Dataset out;
    out.name = a.name;
    out.x = Matrix(a.rows() + test.rows(), a.x.cols());
    std::copy(a.x.data().begin(), a.x.data().end(), out.x.data().begin());
    std::copy(test.x.data().begin(), test.x.data().end(), out.x.data().begin() + static_cast<std::ptrdiff_t>(a.x.size()));
    out.y = a.y;
    out.y.insert(out.y.end(), test.y.begin(), test.y.end());
    out.classes = std::max(a.classes, test.classes);
    out.n_train = n_train;
    out.n_valid = a.rows() - n_train;
    out.source_index = iota_range(0, out.x.rows());
    out.validate();
    return out;
}

Matrix parse_idx_images(std::span<const std::uint8_t> bytes) {
    const std::uint32_t magic = read_be32(bytes, 0, "magic");
    if (magic != kIdxImagesMagic) {
        throw ParseError("bad IDX image magic at offset 0", 0);
    }
    const std::uint32_t n = read_be32(bytes, 4, "image count");
    const std::uint32_t rows = read_be32(bytes, 8, "row count");
    const std::uint32_t cols = read_be32(bytes, 12, "column count");
    const std::size_t d = std::size_t{rows} * cols;
    const std::size_t need = 16 + std::size_t{n} * d;
    if (bytes.size() < need) {
        throw ParseError("IDX image payload truncated at offset " + std::to_string(bytes.size()), bytes.size());
    }
    if (bytes.size() > need) {
        throw ParseError("IDX image file has trailing bytes at offset " + std::to_string(need), need);
    }
    Matrix x(n, d);
    auto out = x.data();
    for (std::size_t i = 0; i < out.size(); ++i) {
        out[i] = static_cast<double>(bytes[16 + i]) / 255.0;
    }
    return x;
}

std::vector<int> parse_idx_labels(std::span<const std::uint8_t> bytes) {
    const std::uint32_t magic = read_be32(bytes, 0, "magic");
    if (magic != kIdxLabelsMagic) {
        throw ParseError("bad IDX label magic at offset 0", 0);
    }
    const std::uint32_t n = read_be32(bytes, 4, "label count");
    if (bytes.size() != 8 + std::size_t{n}) {
        const std::size_t at = std::min<std::size_t>(bytes.size(), 8 + std::size_t{n});
        throw ParseError("IDX label payload length mismatch at offset " + std::to_string(at), at);
    }
    return {bytes.begin() + 8, bytes.end()};
}

std::vector<std::uint8_t> write_idx_images(const std::vector<std::vector<std::uint8_t>>& images, std::uint32_t rows,
                                           std::uint32_t cols) {
    std::vector<std::uint8_t> out;
    put_be32(out, kIdxImagesMagic);
    put_be32(out, static_cast<std::uint32_t>(images.size()));
    put_be32(out, rows);
    put_be32(out, cols);
    for (const auto& img : images) {
        if (img.size() != std::size_t{rows} * cols) {
            throw ContractViolation("write_idx_images: image size mismatch");
        }
        out.insert(out.end(), img.begin(), img.end());
    }
    return out;
}

std::vector<std::uint8_t> write_idx_labels(std::span<const std::uint8_t> labels) {
    std::vector<std::uint8_t> out;
    put_be32(out, kIdxLabelsMagic);
    put_be32(out, static_cast<std::uint32_t>(labels.size()));
    out.insert(out.end(), labels.begin(), labels.end());
    return out;
}

Dataset load_idx(const std::filesystem::path& images, const std::filesystem::path& labels) {
    Matrix x = parse_idx_images(read_bytes(images));
    std::vector<int> y = parse_idx_labels(read_bytes(labels));
    if (y.size() != x.rows()) {
        throw ParseError("IDX image count " + std::to_string(x.rows()) + " does not match label count " +
                             std::to_string(y.size()) + " (offset 4)",
                         4);
    }
    const int max_label = y.empty() ? 0 : *std::max_element(y.begin(), y.end());
    return make_dataset(images.stem().string(), std::move(x), std::move(y), static_cast<std::size_t>(max_label) + 1);
}

Dataset parse_amat(std::string_view text, std::size_t d, std::string name) {
    std::vector<double> values;
    std::vector<int> labels;
    std::size_t line_no = 0;
    std::size_t start = 0;
    while (start <= text.size()) {
        std::size_t end = text.find('\n', start);
        if (end == std::string_view::npos) {
            end = text.size();
        }
        std::string_view line = text.substr(start, end - start);
        ++line_no;
        start = end + 1;

        std::vector<double> fields;
        std::size_t pos = 0;
        while (pos < line.size()) {
            while (pos < line.size() && std::isspace(static_cast<unsigned char>(line[pos]))) ++pos;
            if (pos >= line.size()) break;
            std::size_t tok_end = pos;
            while (tok_end < line.size() && !std::isspace(static_cast<unsigned char>(line[tok_end]))) ++tok_end;
            const std::string token(line.substr(pos, tok_end - pos));
            char* parse_end = nullptr;
            const double v = std::strtod(token.c_str(), &parse_end);
            if (parse_end != token.c_str() + token.size()) {
                throw ParseError("amat line " + std::to_string(line_no) + ": not a number '" + token + "'", line_no);
            }
            fields.push_back(v);
            pos = tok_end;
        }
        if (fields.empty()) {
            if (end == text.size()) break;
            continue;
        }
        if (fields.size() != d + 1) {
            throw ParseError("amat line " + std::to_string(line_no) + ": expected " + std::to_string(d + 1) +
                                 " fields, found " + std::to_string(fields.size()),
                             line_no);
        }
        for (std::size_t j = 0; j < d; ++j) {
            if (!(fields[j] >= 0.0 && fields[j] <= 1.0)) {
                throw ParseError("amat line " + std::to_string(line_no) + ": feature " + std::to_string(j + 1) +
                                     " outside [0, 1]",
                                 line_no);
            }
        }
        const double label = fields[d];
        if (label < 0.0 || label != std::floor(label)) {
            throw ParseError("amat line " + std::to_string(line_no) + ": label is not a non-negative integer", line_no);
        }
        values.insert(values.end(), fields.begin(), fields.begin() + static_cast<std::ptrdiff_t>(d));
        labels.push_back(static_cast<int>(label));
        if (end == text.size()) break;
    }
    Matrix x(labels.size(), d);
    std::copy(values.begin(), values.end(), x.data().begin());
    const int max_label = labels.empty() ? 0 : *std::max_element(labels.begin(), labels.end());
    return make_dataset(std::move(name), std::move(x), std::move(labels), static_cast<std::size_t>(max_label) + 1);
}

Dataset load_amat(const std::filesystem::path& path, std::size_t d) {
    return parse_amat(read_text(path), d, path.stem().string());
}

Dataset synth_bars(std::size_t n, std::size_t side, Rng& rng) {
    if (side < 4) {
        throw ContractViolation("synth_bars: side must be at least 4");
    }
    Matrix x(n, side * side);
    std::vector<int> y(n);
    const std::size_t lo = side / 4;
    for (std::size_t i = 0; i < n; ++i) {
        y[i] = static_cast<int>(i % 2);
        const std::size_t thickness = 1 + rng.below(2);
        const std::size_t span = side - 2 * lo;  // central half
        const std::size_t offset = lo + rng.below(span - thickness + 1);
        for (std::size_t t = 0; t < thickness; ++t) {
            for (std::size_t k = 0; k < side; ++k) {
                if (y[i] == 0) {
                    set_pixel(x, i, side, offset + t, k);
                } else {
                    set_pixel(x, i, side, k, offset + t);
                }
            }
        }
    }
    return make_dataset("synth_bars", std::move(x), std::move(y), 2);
}

Dataset synth_rects(std::size_t n, std::size_t side, Rng& rng) {
    if (side < 4) {
        throw ContractViolation("synth_rects: side must be at least 4");
    }
    Matrix x(n, side * side);
    std::vector<int> y(n);
    for (std::size_t i = 0; i < n; ++i) {
        y[i] = static_cast<int>(i % 2);
        // Two distinct extents in [2, side-1]; the larger is the long side.
        std::size_t a = 2 + rng.below(side - 2);
        std::size_t b = 2 + rng.below(side - 3);
        if (b >= a) ++b;
        const std::size_t longer = std::max(a, b);
        const std::size_t shorter = std::min(a, b);
        const std::size_t height = y[i] == 1 ? longer : shorter;
        const std::size_t width = y[i] == 1 ? shorter : longer;
        const std::size_t top = rng.below(side - height + 1);
        const std::size_t left = rng.below(side - width + 1);
        for (std::size_t r = top; r < top + height; ++r) {
            for (std::size_t c = left; c < left + width; ++c) {
                set_pixel(x, i, side, r, c);
            }
        }
    }
    return make_dataset("synth_rects", std::move(x), std::move(y), 2);
}

Dataset add_pixel_noise(Dataset ds, double stddev, Rng& rng) {
    if (!(stddev >= 0.0)) {
        throw ContractViolation("add_pixel_noise: stddev must be non-negative");
    }
    for (double& v : ds.x.data()) {
        v = std::clamp(v + stddev * rng.normal(), 0.0, 1.0);
    }
    return ds;
}

Dataset subsample(const Dataset& ds, std::size_t n_train, std::size_t n_valid, std::uint64_t seed) {
    Rng rng(seed);
    Rng train_rng = rng.split(1);
    Rng valid_rng = rng.split(2);
    const auto train = stratified_pick(ds, iota_range(0, ds.n_train), n_train, train_rng);
    const auto valid = stratified_pick(ds, iota_range(ds.n_train, ds.n_train + ds.n_valid), n_valid, valid_rng);
    const auto test = iota_range(ds.n_train + ds.n_valid, ds.rows());
    return assemble(ds, train, valid, test);
}

SplitManifest manifest_of(const Dataset& ds) {
    SplitManifest m;
    for (std::size_t r = 0; r < ds.rows(); ++r) {
        const std::size_t src = ds.source_index.empty() ? r : ds.source_index[r];
        if (r < ds.n_train) {
            m.train.push_back(src);
        } else if (r < ds.n_train + ds.n_valid) {
            m.valid.push_back(src);
        } else {
            m.test.push_back(src);
        }
    }
    return m;
}

std::string to_csv(const SplitManifest& manifest) {
    std::ostringstream os;
    os << "split,index\n";
    for (std::size_t i : manifest.train) os << "train," << i << '\n';
    for (std::size_t i : manifest.valid) os << "valid," << i << '\n';
    for (std::size_t i : manifest.test) os << "test," << i << '\n';
    return os.str();
}

SplitManifest parse_split_manifest(std::string_view csv) {
    SplitManifest m;
    std::istringstream in{std::string(csv)};
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (line_no == 1) {
            if (line != "split,index") {
                throw ParseError("split manifest line 1: expected header 'split,index'", 1);
            }
            continue;
        }
        if (line.empty()) continue;
        const auto comma = line.find(',');
        if (comma == std::string::npos) {
            throw ParseError("split manifest line " + std::to_string(line_no) + ": missing comma", line_no);
        }
        const std::string split = line.substr(0, comma);
        std::size_t index = 0;
        const auto* first = line.data() + comma + 1;
        const auto* last = line.data() + line.size();
        auto [ptr, ec] = std::from_chars(first, last, index);
        if (ec != std::errc() || ptr != last) {
            throw ParseError("split manifest line " + std::to_string(line_no) + ": bad index", line_no);
        }
        if (split == "train") {
            m.train.push_back(index);
        } else if (split == "valid") {
            m.valid.push_back(index);
        } else if (split == "test") {
            m.test.push_back(index);
        } else {
            throw ParseError("split manifest line " + std::to_string(line_no) + ": unknown split '" + split + "'",
                             line_no);
        }
    }
    return m;
}

void write_split_manifest(const SplitManifest& manifest, const std::filesystem::path& path) {
    std::ofstream out(path, std::ios::trunc);
    if (!out) {
        throw std::runtime_error("cannot write " + path.string());
    }
    out << to_csv(manifest);
}

SplitManifest read_split_manifest(const std::filesystem::path& path) { return parse_split_manifest(read_text(path)); }

Dataset apply_manifest(const Dataset& source, const SplitManifest& manifest) {
    std::vector<std::size_t> seen;
    for (const auto* part : {&manifest.train, &manifest.valid, &manifest.test}) {
        for (std::size_t i : *part) {
            if (i >= source.rows()) {
                throw ContractViolation("apply_manifest: index " + std::to_string(i) + " out of range");
            }
            seen.push_back(i);
        }
    }
    std::sort(seen.begin(), seen.end());
    if (std::adjacent_find(seen.begin(), seen.end()) != seen.end()) {
        throw ContractViolation("apply_manifest: splits overlap");
    }
    Dataset base = source;
    base.source_index.clear();
    return assemble(base, manifest.train, manifest.valid, manifest.test);
}

std::filesystem::path cache_root() {
    if (const char* env = std::getenv("DEEPSTACK_CACHE"); env != nullptr && *env != '\0') {
        return env;
    }
    const char* home = std::getenv("HOME");
    return std::filesystem::path(home ? home : ".") / ".cache" / "deepstack";
}

const std::vector<BenchmarkInfo>& benchmark_registry() {
    static const std::vector<BenchmarkInfo> registry = {
        {"mnist",
         "idx",
         {"train-images-idx3-ubyte", "train-labels-idx1-ubyte", "t10k-images-idx3-ubyte", "t10k-labels-idx1-ubyte"},
         50000,
         10000,
         784,
         10},
        {"mnist_basic", "amat", {"mnist_train.amat", "mnist_test.amat"}, 10000, 2000, 784, 10},
        {"mnist_rot",
         "amat",
         {"mnist_all_rotation_normalized_float_train_valid.amat", "mnist_all_rotation_normalized_float_test.amat"},
         10000,
         2000,
         784,
         10},
        {"mnist_bg_img",
         "amat",
         {"mnist_background_images_train.amat", "mnist_background_images_test.amat"},
         10000,
         2000,
         784,
         10},
        {"mnist_bg_rand",
         "amat",
         {"mnist_background_random_train.amat", "mnist_background_random_test.amat"},
         10000,
         2000,
         784,
         10},
        {"mnist_bg_img_rot",
         "amat",
         {"mnist_all_background_images_rotation_normalized_train_valid.amat",
          "mnist_all_background_images_rotation_normalized_test.amat"},
         10000,
         2000,
         784,
         10},
        {"rect", "amat", {"rectangles_train.amat", "rectangles_test.amat"}, 1000, 200, 784, 2},
        {"rect_img", "amat", {"rectangles_im_train.amat", "rectangles_im_test.amat"}, 10000, 2000, 784, 2},
        {"convex", "amat", {"convex_train.amat", "50k/convex_test.amat"}, 6000, 2000, 784, 2},
    };
    return registry;
}

std::optional<BenchmarkInfo> find_benchmark(std::string_view name) {
    for (const auto& info : benchmark_registry()) {
        if (info.name == name) {
            return info;
        }
    }
    return std::nullopt;
}

Dataset load_benchmark(const BenchmarkInfo& info, const std::filesystem::path& cache) {
    const auto dir = cache / info.name;
    for (const auto& f : info.files) {
        if (!std::filesystem::exists(dir / f)) {
            throw DataUnavailable("dataset '" + info.name + "' not found: missing " + (dir / f).string() +
                                     " (run `deepstack fetch` or set DEEPSTACK_CACHE)");
        }
    }
    Dataset train_part;
    Dataset test_part;
    if (info.format == "idx") {
        train_part = load_idx(dir / info.files[0], dir / info.files[1]);
        test_part = load_idx(dir / info.files[2], dir / info.files[3]);
    } else {
        train_part = load_amat(dir / info.files[0], info.dim);
        test_part = load_amat(dir / info.files[1], info.dim);
    }
    train_part.classes = info.classes;
    test_part.classes = info.classes;
    if (info.n_train + info.n_valid > train_part.rows()) {
        throw std::runtime_error("dataset '" + info.name + "' has fewer training rows than its split requires");
    }
    // Drop anything past the train+valid budget (MNIST's file holds exactly 60k).
    Dataset trimmed = assemble(train_part, iota_range(0, info.n_train + info.n_valid), {}, {});
    Dataset out = concat_with_test(std::move(trimmed), info.n_train, test_part);
    out.name = info.name;
    return out;
}

} // namespace deepstack
