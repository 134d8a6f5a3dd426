#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace deepstack::cli {

struct FetchOptions {
    std::filesystem::path cache;
    std::string source;  ///< URL prefix overriding the built-in mirror (http, https or file)
    std::optional<std::filesystem::path> expected_sums;  ///< sha256sum-format file to check against
    bool force = false;
    bool verify_only = false;
};

struct FetchReport {
    std::vector<std::filesystem::path> files;
    bool downloaded = false;
};

/// Downloads a registry dataset into `<cache>/<name>/`, unpacks it and checks
/// every file against SHA256SUMS. A first fetch records the sums; later
/// fetches and `verify_only` runs must match them.
FetchReport fetch_dataset(const std::string& name, const FetchOptions& options);

std::vector<std::uint8_t> http_get(const std::string& url);
std::string sha256_hex(std::span<const std::uint8_t> bytes);
std::vector<std::uint8_t> gunzip(std::span<const std::uint8_t> bytes);
/// Entries of a zip archive (stored or deflated members), keyed by path.
std::map<std::string, std::vector<std::uint8_t>> unzip(std::span<const std::uint8_t> bytes);

/// sha256sum format: "<hex>  <path>" per line.
std::map<std::string, std::string> parse_sha256sums(const std::string& text);

} // namespace deepstack::cli
