#pragma once

#include <filesystem>
#include <string>
#include <vector>

namespace deepstack::cli {

inline constexpr const char* kTrainHeader = "dataset,scheme,depth,train_err,valid_err,epochs,seed,log";
inline constexpr const char* kGenerativeHeader = "dataset,scheme,depth,mean_ll,stderr,sigma,S,seed";
inline constexpr const char* kClassifierHeader = "dataset,scheme,depth,stage,error,ci,seed";

inline constexpr const char* kTrainLedger = "train.csv";
inline constexpr const char* kGenerativeLedger = "generative.csv";
inline constexpr const char* kClassifierLedger = "classifier.csv";

/// Appends one row under an exclusive lock, writing the header first when the
/// file is new. Throws if an existing file carries a different header.
void append_row(const std::filesystem::path& path, const std::string& header, const std::string& row);

struct CsvTable {
    std::vector<std::string> header;
    std::vector<std::vector<std::string>> rows;

    /// Column index by name; throws when absent.
    std::size_t column(const std::string& name) const;
};

/// Plain comma-separated reader (no quoting; ledger fields never contain commas).
CsvTable read_csv(const std::filesystem::path& path);

std::vector<std::string> split_csv_line(const std::string& line);

/// Ledger number formatting: 17 significant digits, so reruns compare exactly.
std::string ledger_number(double v);

} // namespace deepstack::cli
