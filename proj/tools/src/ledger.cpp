#include "ledger.hpp"

#include <fcntl.h>
#include <sys/file.h>
#include <unistd.h>

#include <cerrno>
#include <cmath>
#include <cstring>
#include <fstream>
#include <sstream>
#include <stdexcept>

namespace deepstack::cli {

namespace {

class LockedFile {
public:
    explicit LockedFile(const std::filesystem::path& path) {
        fd_ = ::open(path.c_str(), O_RDWR | O_CREAT | O_APPEND, 0644);
        if (fd_ < 0) {
            throw std::runtime_error("cannot open ledger " + path.string() + ": " + std::strerror(errno));
        }
        if (::flock(fd_, LOCK_EX) != 0) {
            const int err = errno;
            ::close(fd_);
            throw std::runtime_error("cannot lock ledger " + path.string() + ": " + std::strerror(err));
        }
    }
    ~LockedFile() {
        ::flock(fd_, LOCK_UN);
        ::close(fd_);
    }
    LockedFile(const LockedFile&) = delete;
    LockedFile& operator=(const LockedFile&) = delete;

    std::string first_line() const {
        std::string line;
        char c = 0;
        off_t off = 0;
        while (::pread(fd_, &c, 1, off) == 1 && c != '\n') {
            line += c;
            ++off;
        }
        return line;
    }

    off_t size() const { return ::lseek(fd_, 0, SEEK_END); }

    void write_all(const std::string& text) {
        const char* p = text.data();
        std::size_t left = text.size();
        while (left > 0) {
            const ssize_t n = ::write(fd_, p, left);
            if (n < 0) {
                if (errno == EINTR) continue;
                throw std::runtime_error(std::string("ledger write failed: ") + std::strerror(errno));
            }
            p += n;
            left -= static_cast<std::size_t>(n);
        }
    }

private:
    int fd_ = -1;
};

} // namespace

void append_row(const std::filesystem::path& path, const std::string& header, const std::string& row) {
    if (path.has_parent_path()) {
        std::filesystem::create_directories(path.parent_path());
    }
    LockedFile file(path);
    if (file.size() == 0) {
        file.write_all(header + "\n" + row + "\n");
        return;
    }
    if (const std::string existing = file.first_line(); existing != header) {
        throw std::runtime_error("ledger " + path.string() + " has header '" + existing + "', expected '" + header +
                                 "'");
    }
    file.write_all(row + "\n");
}

std::vector<std::string> split_csv_line(const std::string& line) {
    std::vector<std::string> out;
    std::string cell;
    std::istringstream ss(line);
    while (std::getline(ss, cell, ',')) out.push_back(cell);
    if (!line.empty() && line.back() == ',') out.emplace_back();
    return out;
}

std::size_t CsvTable::column(const std::string& name) const {
    for (std::size_t i = 0; i < header.size(); ++i) {
        if (header[i] == name) return i;
    }
    throw std::runtime_error("CSV has no column '" + name + "'");
}

CsvTable read_csv(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) {
        throw std::runtime_error("cannot open " + path.string());
    }
    CsvTable table;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        auto cells = split_csv_line(line);
        if (table.header.empty()) {
            table.header = std::move(cells);
            continue;
        }
        if (cells.size() != table.header.size()) {
            throw std::runtime_error(path.string() + ":" + std::to_string(line_no) + ": expected " +
                                     std::to_string(table.header.size()) + " fields, got " +
                                     std::to_string(cells.size()));
        }
        table.rows.push_back(std::move(cells));
    }
    return table;
}

std::string ledger_number(double v) {
    if (std::isnan(v)) return "nan";
    std::ostringstream os;
    os.precision(17);
    os << v;
    return os.str();
}

} // namespace deepstack::cli
