#include <bit>
#include <cstring>
#include <fstream>
#include <iterator>
#include <string>

#include <zlib.h>

#include "deepstack/errors.hpp"
#include "deepstack/model.hpp"

namespace deepstack {

namespace {

constexpr char kMagic[4] = {'D', 'A', 'E', 'J'};
constexpr std::size_t kLayerHeaderBytes = 4 + 4 + 1 + 1 + 1;

class Writer {
public:
    void bytes(const void* data, std::size_t n) {
        const auto* p = static_cast<const std::uint8_t*>(data);
        out_.insert(out_.end(), p, p + n);
    }
    void u8(std::uint8_t v) { out_.push_back(v); }
    void u32(std::uint32_t v) {
        for (int i = 0; i < 4; ++i) {
            out_.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
        }
    }
    void u64(std::uint64_t v) {
        for (int i = 0; i < 8; ++i) {
            out_.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
        }
    }
    void f64s(const Matrix& m) {
        for (double v : m.data()) {
            u64(std::bit_cast<std::uint64_t>(v));
        }
    }
    std::vector<std::uint8_t>& buffer() { return out_; }

private:
    std::vector<std::uint8_t> out_;
};

class Reader {
public:
    explicit Reader(std::span<const std::uint8_t> in) : in_(in) {}

    std::size_t offset() const { return pos_; }

    void need(std::size_t n, const char* what) const {
        if (in_.size() - pos_ < n) {
            throw ParseError(std::string("model file truncated while reading ") + what + " at offset " +
                                 std::to_string(pos_),
                             pos_);
        }
    }
    std::uint8_t u8(const char* what) {
        need(1, what);
        return in_[pos_++];
    }
    std::uint32_t u32(const char* what) {
        need(4, what);
        std::uint32_t v = 0;
        for (int i = 0; i < 4; ++i) {
            v |= static_cast<std::uint32_t>(in_[pos_ + i]) << (8 * i);
        }
        pos_ += 4;
        return v;
    }
    double f64(const char* what) {
        need(8, what);
        std::uint64_t v = 0;
        for (int i = 0; i < 8; ++i) {
            v |= static_cast<std::uint64_t>(in_[pos_ + i]) << (8 * i);
        }
        pos_ += 8;
        return std::bit_cast<double>(v);
    }
    void fill(Matrix& m, const char* what) {
        need(m.size() * 8, what);
        for (double& v : m.data()) {
            v = f64(what);
        }
    }

private:
    std::span<const std::uint8_t> in_;
    std::size_t pos_ = 0;
};

std::uint32_t crc32_of(std::span<const std::uint8_t> bytes) {
    uLong crc = crc32(0L, Z_NULL, 0);
    crc = crc32(crc, bytes.data(), static_cast<uInt>(bytes.size()));
    return static_cast<std::uint32_t>(crc);
}

Activation parse_activation(std::uint8_t v, std::size_t offset) {
    if (v > static_cast<std::uint8_t>(Activation::linear)) {
        throw ParseError("unknown activation tag " + std::to_string(v) + " at offset " + std::to_string(offset), offset);
    }
    return static_cast<Activation>(v);
}

} // namespace

std::vector<std::uint8_t> serialize(const StackParams& stack) {
    Writer w;
    w.bytes(kMagic, sizeof kMagic);
    w.u32(kModelFormatVersion);
    w.u32(static_cast<std::uint32_t>(stack.depth()));
    for (const auto& layer : stack.layers()) {
        w.u32(static_cast<std::uint32_t>(layer.input_width()));
        w.u32(static_cast<std::uint32_t>(layer.hidden_width()));
        w.u8(layer.tied ? 1 : 0);
        w.u8(static_cast<std::uint8_t>(layer.act_enc));
        w.u8(static_cast<std::uint8_t>(layer.act_dec));
    }
    for (const auto& layer : stack.layers()) {
        for (const Matrix* t : layer.tensors()) {
            w.f64s(*t);
        }
    }
    w.u32(crc32_of(w.buffer()));
    return std::move(w.buffer());
}

StackParams deserialize(std::span<const std::uint8_t> bytes) {
    Reader r(bytes);
    r.need(4, "magic");
    if (std::memcmp(bytes.data(), kMagic, 4) != 0) {
        throw ParseError("bad magic at offset 0 (expected \"DAEJ\")", 0);
    }
    r.u8("magic");
    r.u8("magic");
    r.u8("magic");
    r.u8("magic");
    const std::uint32_t version = r.u32("format version");
    if (version != kModelFormatVersion) {
        throw VersionError("unsupported model format version " + std::to_string(version) + " (this build reads " +
                           std::to_string(kModelFormatVersion) + ")");
    }
    const std::size_t count_offset = r.offset();
    const std::uint32_t count = r.u32("layer count");
    if (count == 0) {
        throw ParseError("layer count is zero at offset " + std::to_string(count_offset), count_offset);
    }
    r.need(static_cast<std::size_t>(count) * kLayerHeaderBytes, "layer headers");

    std::vector<LayerParams> layers;
    layers.reserve(count);
    for (std::uint32_t i = 0; i < count; ++i) {
        const std::size_t header_offset = r.offset();
        const std::uint32_t d_in = r.u32("layer header");
        const std::uint32_t h = r.u32("layer header");
        const std::uint8_t tied = r.u8("layer header");
        if (d_in == 0 || h == 0 || tied > 1) {
            throw ParseError("invalid layer header at offset " + std::to_string(header_offset), header_offset);
        }
        LayerParams layer = LayerParams::zeros(d_in, h, tied == 1);
        layer.act_enc = parse_activation(r.u8("layer header"), r.offset() - 1);
        layer.act_dec = parse_activation(r.u8("layer header"), r.offset() - 1);
        if (!layers.empty() && layers.back().hidden_width() != d_in) {
            throw ParseError("layer widths do not chain at offset " + std::to_string(header_offset), header_offset);
        }
        layers.push_back(std::move(layer));
    }
    for (auto& layer : layers) {
        for (Matrix* t : layer.tensors()) {
            r.fill(*t, "parameters");
        }
    }
    const std::size_t crc_offset = r.offset();
    const std::uint32_t stored = r.u32("checksum");
    if (r.offset() != bytes.size()) {
        throw ParseError("trailing bytes after checksum at offset " + std::to_string(r.offset()), r.offset());
    }
    if (stored != crc32_of(bytes.first(crc_offset))) {
        throw ParseError("checksum mismatch at offset " + std::to_string(crc_offset), crc_offset);
    }
    return StackParams(std::move(layers));
}

void save(const StackParams& stack, const std::filesystem::path& path) {
    const auto bytes = serialize(stack);
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) {
        throw std::runtime_error("cannot open " + path.string() + " for writing");
    }
    out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
    if (!out) {
        throw std::runtime_error("write failed for " + path.string());
    }
}

StackParams load(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw std::runtime_error("cannot open " + path.string());
    }
    std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    return deserialize(bytes);
}

} // namespace deepstack
