#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "deepstack/matrix.hpp"
#include "deepstack/rng.hpp"

namespace deepstack {

/// Design matrix with entries in [0, 1], optional labels, and a split into
/// contiguous train / valid / test row ranges (test is whatever follows the
/// first n_train + n_valid rows).
struct Dataset {
    std::string name;
    Matrix x;
    std::vector<int> y;       ///< empty when unlabeled
    std::size_t classes = 0;  ///< 0 when unlabeled
    std::size_t n_train = 0;
    std::size_t n_valid = 0;
    std::vector<std::size_t> source_index;  ///< original row of each row, for split manifests

    std::size_t rows() const { return x.rows(); }
    std::size_t n_test() const { return x.rows() - n_train - n_valid; }
    bool labeled() const { return !y.empty(); }

    Matrix train_x() const { return slice_rows(x, 0, n_train); }
    Matrix valid_x() const { return slice_rows(x, n_train, n_train + n_valid); }
    Matrix test_x() const { return slice_rows(x, n_train + n_valid, x.rows()); }
    std::span<const int> train_y() const { return std::span(y).first(labeled() ? n_train : 0); }
    std::span<const int> valid_y() const { return std::span(y).subspan(labeled() ? n_train : 0, labeled() ? n_valid : 0); }
    std::span<const int> test_y() const {
        return labeled() ? std::span(y).subspan(n_train + n_valid) : std::span<const int>{};
    }

    /// Throws ContractViolation when any invariant is broken.
    void validate() const;
};

/// Builds a dataset with every row in the training range.
Dataset make_dataset(std::string name, Matrix x, std::vector<int> y, std::size_t classes);
/// Re-partitions rows into train / valid / rest-is-test.
Dataset with_split(Dataset ds, std::size_t n_train, std::size_t n_valid);
/// Rows of `a` followed by rows of `b`; the split of the result puts all of
/// `a` before the test range, which is `b`.
Dataset concat_with_test(Dataset a, std::size_t n_train, const Dataset& test);

// IDX container: big-endian u32 magic, big-endian u32 dims, then u8 payload.
inline constexpr std::uint32_t kIdxImagesMagic = 0x00000803;
inline constexpr std::uint32_t kIdxLabelsMagic = 0x00000801;

/// Images as rows scaled by 1/255, in [0, 1].
Matrix parse_idx_images(std::span<const std::uint8_t> bytes);
std::vector<int> parse_idx_labels(std::span<const std::uint8_t> bytes);
std::vector<std::uint8_t> write_idx_images(const std::vector<std::vector<std::uint8_t>>& images, std::uint32_t rows,
                                           std::uint32_t cols);
std::vector<std::uint8_t> write_idx_labels(std::span<const std::uint8_t> labels);

/// Parses an images/labels pair; throws ParseError on bad magic, truncation
/// or an image/label count mismatch.
Dataset load_idx(const std::filesystem::path& images, const std::filesystem::path& labels);

/// Whitespace-delimited rows of `d` features followed by an integer label.
/// Out-of-range features and ragged rows throw ParseError carrying the
/// 1-based line number.
Dataset load_amat(const std::filesystem::path& path, std::size_t d);
Dataset parse_amat(std::string_view text, std::size_t d, std::string name = "amat");

/// side×side binary images holding one horizontal (label 0) or vertical
/// (label 1) stripe, 1–2 pixels thick, inside the central half of the image.
/// Labels alternate so classes are balanced.
Dataset synth_bars(std::size_t n, std::size_t side, Rng& rng);
/// side×side binary images with one filled rectangle, wide (label 0) or
/// tall (label 1), at a random position.
Dataset synth_rects(std::size_t n, std::size_t side, Rng& rng);

/// Adds N(0, stddev²) noise to every pixel and clips back into [0, 1].
Dataset add_pixel_noise(Dataset ds, double stddev, Rng& rng);

/// Draws n_train rows from the train range and n_valid from the valid range,
/// stratified by label when labels exist; the test range is kept whole.
/// Selected rows keep their original relative order.
Dataset subsample(const Dataset& ds, std::size_t n_train, std::size_t n_valid, std::uint64_t seed);

struct SplitManifest {
    std::vector<std::size_t> train;
    std::vector<std::size_t> valid;
    std::vector<std::size_t> test;

    friend bool operator==(const SplitManifest&, const SplitManifest&) = default;
};

SplitManifest manifest_of(const Dataset& ds);
/// CSV with header `split,index`, one row per example.
std::string to_csv(const SplitManifest& manifest);
SplitManifest parse_split_manifest(std::string_view csv);
void write_split_manifest(const SplitManifest& manifest, const std::filesystem::path& path);
SplitManifest read_split_manifest(const std::filesystem::path& path);
/// Rebuilds a split from the rows of `source` named in the manifest.
Dataset apply_manifest(const Dataset& source, const SplitManifest& manifest);

/// Cache root: $DEEPSTACK_CACHE if set, otherwise $HOME/.cache/deepstack.
std::filesystem::path cache_root();

/// Files and split sizes of a benchmark dataset stored under
/// `<cache>/<name>/`.
struct BenchmarkInfo {
    std::string name;
    std::string format;  ///< "idx" or "amat"
    std::vector<std::string> files;
    std::size_t n_train = 0;
    std::size_t n_valid = 0;
    std::size_t dim = 0;
    std::size_t classes = 0;
};

const std::vector<BenchmarkInfo>& benchmark_registry();
std::optional<BenchmarkInfo> find_benchmark(std::string_view name);

/// Loads a benchmark from the cache. Throws std::runtime_error naming the
/// expected path when files are missing.
Dataset load_benchmark(const BenchmarkInfo& info, const std::filesystem::path& cache);

} // namespace deepstack
