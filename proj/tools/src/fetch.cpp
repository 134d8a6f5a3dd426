#include "fetch.hpp"

#include <curl/curl.h>
#include <openssl/evp.h>
#include <zlib.h>

#include <fstream>
#include <mutex>
#include <sstream>
#include <stdexcept>

#include "deepstack/data.hpp"
#include "deepstack/errors.hpp"

namespace deepstack::cli {

namespace {

enum class Packing { gzip, zip };

struct Source {
    std::string dataset;
    std::string default_base;
    Packing packing;
    std::vector<std::string> archives;  ///< gzip: one per registry file, in order; zip: one archive
};

const std::vector<Source>& sources() {
    static const std::string lisa = "http://www.iro.umontreal.ca/~lisa/icml2007data/";
    static const std::vector<Source> table = {
        {"mnist",
         "https://ossci-datasets.s3.amazonaws.com/mnist/",
         Packing::gzip,
         {"train-images-idx3-ubyte.gz", "train-labels-idx1-ubyte.gz", "t10k-images-idx3-ubyte.gz",
          "t10k-labels-idx1-ubyte.gz"}},
        {"mnist_basic", lisa, Packing::zip, {"mnist.zip"}},
        {"mnist_rot", lisa, Packing::zip, {"mnist_rotation_new.zip"}},
        {"mnist_bg_img", lisa, Packing::zip, {"mnist_background_images.zip"}},
        {"mnist_bg_rand", lisa, Packing::zip, {"mnist_background_random.zip"}},
        {"mnist_bg_img_rot", lisa, Packing::zip, {"mnist_rotation_back_image_new.zip"}},
        {"rect", lisa, Packing::zip, {"rectangles.zip"}},
        {"rect_img", lisa, Packing::zip, {"rectangles_images.zip"}},
        {"convex", lisa, Packing::zip, {"convex.zip"}},
    };
    return table;
}

std::size_t write_callback(char* ptr, std::size_t size, std::size_t nmemb, void* userdata) {
    auto* buf = static_cast<std::vector<std::uint8_t>*>(userdata);
    buf->insert(buf->end(), ptr, ptr + size * nmemb);
    return size * nmemb;
}

std::vector<std::uint8_t> read_file(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot read " + path.string());
    return {std::istreambuf_iterator<char>(in), {}};
}

void write_file(const std::filesystem::path& path, std::span<const std::uint8_t> bytes) {
    std::filesystem::create_directories(path.parent_path());
    const auto tmp = path.string() + ".part";
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
        if (!out) throw std::runtime_error("cannot write " + tmp);
    }
    std::filesystem::rename(tmp, path);
}

std::uint32_t le32(std::span<const std::uint8_t> b, std::size_t off) {
    if (off + 4 > b.size()) throw ParseError("zip: truncated archive", off);
    return static_cast<std::uint32_t>(b[off]) | static_cast<std::uint32_t>(b[off + 1]) << 8 |
           static_cast<std::uint32_t>(b[off + 2]) << 16 | static_cast<std::uint32_t>(b[off + 3]) << 24;
}

std::uint16_t le16(std::span<const std::uint8_t> b, std::size_t off) {
    if (off + 2 > b.size()) throw ParseError("zip: truncated archive", off);
    return static_cast<std::uint16_t>(b[off] | b[off + 1] << 8);
}

std::vector<std::uint8_t> inflate_stream(std::span<const std::uint8_t> in, int window_bits, std::size_t size_hint) {
    z_stream zs{};
    if (inflateInit2(&zs, window_bits) != Z_OK) throw std::runtime_error("zlib: inflateInit2 failed");
    std::vector<std::uint8_t> out;
    out.reserve(size_hint);
    std::vector<std::uint8_t> chunk(1 << 16);
    zs.next_in = const_cast<Bytef*>(in.data());
    zs.avail_in = static_cast<uInt>(in.size());
    int rc = Z_OK;
    while (rc != Z_STREAM_END) {
        zs.next_out = chunk.data();
        zs.avail_out = static_cast<uInt>(chunk.size());
        rc = inflate(&zs, Z_NO_FLUSH);
        if (rc != Z_OK && rc != Z_STREAM_END) {
            inflateEnd(&zs);
            throw ParseError("compressed stream is corrupt", zs.total_in);
        }
        out.insert(out.end(), chunk.begin(), chunk.begin() + static_cast<std::ptrdiff_t>(chunk.size() - zs.avail_out));
        if (rc == Z_OK && zs.avail_in == 0 && zs.avail_out != 0) {
            inflateEnd(&zs);
            throw ParseError("compressed stream is truncated", zs.total_in);
        }
    }
    inflateEnd(&zs);
    return out;
}

std::string basename_of(const std::string& path) {
    const auto slash = path.find_last_of('/');
    return slash == std::string::npos ? path : path.substr(slash + 1);
}

} // namespace

std::vector<std::uint8_t> http_get(const std::string& url) {
    static std::once_flag init;
    std::call_once(init, [] { curl_global_init(CURL_GLOBAL_DEFAULT); });
    CURL* curl = curl_easy_init();
    if (curl == nullptr) throw std::runtime_error("libcurl initialization failed");
    std::vector<std::uint8_t> body;
    char err[CURL_ERROR_SIZE] = {};
    curl_easy_setopt(curl, CURLOPT_URL, url.c_str());
    curl_easy_setopt(curl, CURLOPT_FOLLOWLOCATION, 1L);
    curl_easy_setopt(curl, CURLOPT_FAILONERROR, 1L);
    curl_easy_setopt(curl, CURLOPT_CONNECTTIMEOUT, 30L);
    curl_easy_setopt(curl, CURLOPT_USERAGENT, "deepstack-fetch/0.1");
    curl_easy_setopt(curl, CURLOPT_WRITEFUNCTION, write_callback);
    curl_easy_setopt(curl, CURLOPT_WRITEDATA, &body);
    curl_easy_setopt(curl, CURLOPT_ERRORBUFFER, err);
    const CURLcode rc = curl_easy_perform(curl);
    curl_easy_cleanup(curl);
    if (rc != CURLE_OK) {
        throw std::runtime_error("download of " + url + " failed: " + (err[0] ? err : curl_easy_strerror(rc)));
    }
    return body;
}

std::string sha256_hex(std::span<const std::uint8_t> bytes) {
    unsigned char digest[EVP_MAX_MD_SIZE];
    unsigned int len = 0;
    if (EVP_Digest(bytes.data(), bytes.size(), digest, &len, EVP_sha256(), nullptr) != 1) {
        throw std::runtime_error("SHA-256 computation failed");
    }
    static const char* hex = "0123456789abcdef";
    std::string out;
    for (unsigned int i = 0; i < len; ++i) {
        out += hex[digest[i] >> 4];
        out += hex[digest[i] & 0xF];
    }
    return out;
}

std::vector<std::uint8_t> gunzip(std::span<const std::uint8_t> bytes) {
    return inflate_stream(bytes, 16 + MAX_WBITS, bytes.size() * 4);
}

std::map<std::string, std::vector<std::uint8_t>> unzip(std::span<const std::uint8_t> bytes) {
    // End-of-central-directory record: last 22+ bytes, optional comment after it.
    if (bytes.size() < 22) throw ParseError("zip: archive too small", 0);
    std::size_t eocd = bytes.size() - 22;
    while (le32(bytes, eocd) != 0x06054b50) {
        if (eocd == 0 || bytes.size() - eocd > 22 + 0xFFFF) throw ParseError("zip: no end of central directory", 0);
        --eocd;
    }
    const std::size_t entries = le16(bytes, eocd + 10);
    std::size_t p = le32(bytes, eocd + 16);
    std::map<std::string, std::vector<std::uint8_t>> out;
    for (std::size_t i = 0; i < entries; ++i) {
        if (le32(bytes, p) != 0x02014b50) throw ParseError("zip: bad central directory entry", p);
        const std::uint16_t method = le16(bytes, p + 10);
        const std::uint32_t crc = le32(bytes, p + 16);
        const std::uint32_t csize = le32(bytes, p + 20);
        const std::uint32_t usize = le32(bytes, p + 24);
        const std::uint16_t name_len = le16(bytes, p + 28);
        const std::uint16_t extra_len = le16(bytes, p + 30);
        const std::uint16_t comment_len = le16(bytes, p + 32);
        const std::uint32_t local = le32(bytes, p + 42);
        if (p + 46 + name_len > bytes.size()) throw ParseError("zip: truncated name", p);
        std::string name(reinterpret_cast<const char*>(bytes.data() + p + 46), name_len);
        p += 46u + name_len + extra_len + comment_len;
        if (csize == 0xFFFFFFFFu || usize == 0xFFFFFFFFu) throw ParseError("zip: zip64 members are not supported", p);
        if (name.empty() || name.back() == '/') continue;

        if (le32(bytes, local) != 0x04034b50) throw ParseError("zip: bad local header", local);
        const std::size_t data = local + 30u + le16(bytes, local + 26) + le16(bytes, local + 28);
        if (data + csize > bytes.size()) throw ParseError("zip: member data truncated", data);
        const auto payload = bytes.subspan(data, csize);
        std::vector<std::uint8_t> content;
        if (method == 0) {
            content.assign(payload.begin(), payload.end());
        } else if (method == 8) {
            content = inflate_stream(payload, -MAX_WBITS, usize);
        } else {
            throw ParseError("zip: unsupported compression method " + std::to_string(method), local);
        }
        if (content.size() != usize ||
            ::crc32(0L, content.data(), static_cast<uInt>(content.size())) != crc) {
            throw ParseError("zip: CRC mismatch in member " + name, local);
        }
        out.emplace(std::move(name), std::move(content));
    }
    return out;
}

std::map<std::string, std::string> parse_sha256sums(const std::string& text) {
    std::map<std::string, std::string> sums;
    std::istringstream in(text);
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        const auto sep = line.find(' ');
        if (sep != 64 || line.size() < 67) {
            throw ParseError("SHA256SUMS line " + std::to_string(line_no) + " is malformed", line_no);
        }
        std::string name = line.substr(sep + 1);
        if (!name.empty() && (name.front() == ' ' || name.front() == '*')) name.erase(0, 1);
        sums[name] = line.substr(0, 64);
    }
    return sums;
}

FetchReport fetch_dataset(const std::string& name, const FetchOptions& options) {
    const auto info = find_benchmark(name);
    if (!info) {
        throw ConfigError("unknown dataset '" + name + "'" +
                          (name.rfind("synth_", 0) == 0 ? " (synthetic datasets are generated, not fetched)" : ""));
    }
    const Source* src = nullptr;
    for (const auto& s : sources()) {
        if (s.dataset == name) src = &s;
    }
    if (src == nullptr) throw ConfigError("no download source for '" + name + "'");

    const auto dir = options.cache / name;
    const auto sums_path = dir / "SHA256SUMS";
    std::map<std::string, std::string> expected;
    if (options.expected_sums) {
        std::ifstream in(*options.expected_sums);
        if (!in) throw ConfigError("cannot open checksum file " + options.expected_sums->string());
        expected = parse_sha256sums(std::string(std::istreambuf_iterator<char>(in), {}));
    } else if (std::filesystem::exists(sums_path)) {
        std::ifstream in(sums_path);
        expected = parse_sha256sums(std::string(std::istreambuf_iterator<char>(in), {}));
    }

    bool complete = true;
    for (const auto& f : info->files) complete = complete && std::filesystem::exists(dir / f);

    auto check = [&](const std::string& file, std::span<const std::uint8_t> bytes) {
        const std::string got = sha256_hex(bytes);
        if (const auto it = expected.find(file); it != expected.end() && it->second != got) {
            throw std::runtime_error("checksum mismatch for " + (dir / file).string() + ": expected " + it->second +
                                     ", got " + got);
        }
        return got;
    };

    FetchReport report;
    std::map<std::string, std::string> actual;
    if (options.verify_only || (complete && !options.force)) {
        if (!complete) throw DataUnavailable("dataset '" + name + "' is incomplete in " + dir.string());
        if (options.verify_only && expected.empty()) {
            throw std::runtime_error("no checksums recorded for '" + name + "' (expected " + sums_path.string() + ")");
        }
        for (const auto& f : info->files) {
            actual[f] = check(f, read_file(dir / f));
            report.files.push_back(dir / f);
        }
    } else {
        const std::string base = options.source.empty() ? src->default_base : options.source;
        const auto join = [&](const std::string& file) {
            return base.empty() || base.back() == '/' ? base + file : base + "/" + file;
        };
        // Everything is verified in memory before the first file lands in the cache.
        std::map<std::string, std::vector<std::uint8_t>> staged;
        if (src->packing == Packing::gzip) {
            for (std::size_t i = 0; i < info->files.size(); ++i) {
                staged[info->files[i]] = gunzip(http_get(join(src->archives[i])));
            }
        } else {
            auto members = unzip(http_get(join(src->archives.front())));
            for (const auto& f : info->files) {
                const auto it = std::find_if(members.begin(), members.end(),
                                             [&](const auto& m) { return basename_of(m.first) == basename_of(f); });
                if (it == members.end()) {
                    throw std::runtime_error("archive " + src->archives.front() + " has no member " + basename_of(f));
                }
                staged[f] = std::move(it->second);
            }
        }
        for (const auto& [file, bytes] : staged) actual[file] = check(file, bytes);
        for (const auto& [file, bytes] : staged) {
            write_file(dir / file, bytes);
            report.files.push_back(dir / file);
        }
        report.downloaded = true;
    }

    if (!std::filesystem::exists(sums_path) || report.downloaded) {
        std::string text;
        for (const auto& f : info->files) text += actual[f] + "  " + f + "\n";
        write_file(sums_path, std::span(reinterpret_cast<const std::uint8_t*>(text.data()), text.size()));
    }
    return report;
}

} // namespace deepstack::cli
