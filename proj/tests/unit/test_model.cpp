#include <gtest/gtest.h>
#include <zlib.h>

#include <bit>
#include <cmath>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <vector>

#include "deepstack/errors.hpp"
#include "deepstack/model.hpp"
#include "deepstack/objectives.hpp"

using namespace deepstack;

namespace {

StackParams random_stack(std::size_t d, std::vector<std::size_t> widths, bool tied, std::uint64_t seed) {
    Rng rng(seed);
    return StackParams::random(d, widths, tied, rng);
}

Matrix random_unit(std::size_t r, std::size_t c, Rng& rng) {
    Matrix m(r, c);
    for (double& v : m.data()) v = rng.uniform();
    return m;
}

std::filesystem::path temp_path(const std::string& name) {
    return std::filesystem::temp_directory_path() / ("deepstack_test_" + name);
}

std::vector<std::uint8_t> read_all(const std::filesystem::path& p) {
    std::ifstream in(p, std::ios::binary);
    return {std::istreambuf_iterator<char>(in), {}};
}

// Big-endian host simulation: the writer emits every scalar by explicitly
// shifting bytes out in little-endian order, never by memcpy.
void put_u32(std::vector<std::uint8_t>& out, std::uint32_t v) {
    for (int i = 0; i < 4; ++i) out.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
}
void put_f64(std::vector<std::uint8_t>& out, double d) {
    const auto bits = std::bit_cast<std::uint64_t>(d);
    for (int i = 0; i < 8; ++i) out.push_back(static_cast<std::uint8_t>(bits >> (8 * i)));
}

} // namespace

TEST(Encode, ZeroWeightsGiveHalf) {
    StackParams stack({LayerParams::zeros(3, 2, true)});
    Rng rng(1);
    const ForwardTrace t = encode(stack, Matrix(4, 3, 0.7), {}, rng);
    for (double v : t.top().data()) EXPECT_EQ(v, 0.5);
}

TEST(Encode, NoCorruptionFeedsCleanInputs) {
    const StackParams stack = random_stack(5, {4, 3}, true, 2);
    Rng rng(3);
    const Matrix x = random_unit(6, 5, rng);
    const ForwardTrace t = encode(stack, x, {}, rng);
    ASSERT_EQ(t.fed.size(), 2u);
    for (std::size_t i = 0; i < 2; ++i) EXPECT_EQ(t.fed[i], t.inputs[i]);
    EXPECT_EQ(t.inputs[0], x);
}

TEST(Encode, TwoLayersComposeSingleLayerEncodes) {
    const StackParams stack = random_stack(6, {5, 3}, false, 4);
    Rng rng(5);
    const Matrix x = random_unit(7, 6, rng);
    const ForwardTrace t = encode(stack, x, {}, rng);
    const Matrix manual = encode_layer(stack.layer(1), encode_layer(stack.layer(0), x));
    EXPECT_EQ(t.top(), manual);
    Matrix by_hand = matmul_nt(x, stack.layer(0).w_enc);
    add_row_inplace(by_hand, stack.layer(0).b_enc);
    EXPECT_LE(max_abs_diff(sigmoid(by_hand), t.hidden[0]), 1e-15);
}

TEST(Encode, WidthMismatchThrows) {
    const StackParams stack = random_stack(5, {4}, true, 2);
    Rng rng(1);
    EXPECT_THROW(encode(stack, Matrix(2, 4), {}, rng), ContractViolation);
    EXPECT_THROW(decode(stack, Matrix(2, 5)), ContractViolation);
}

TEST(Decode, TiedZeroWeightsGiveHalf) {
    StackParams stack({LayerParams::zeros(3, 2, true)});
    const Matrix xr = decode(stack, Matrix(2, 2, 0.3));
    for (double v : xr.data()) EXPECT_EQ(v, 0.5);
}

TEST(Decode, ThreeLayersMatchManualRightToLeft) {
    const StackParams stack = random_stack(8, {6, 5, 3}, false, 6);
    Rng rng(7);
    const Matrix h = random_unit(4, 3, rng);
    Matrix manual = h;
    for (int i = 2; i >= 0; --i) {
        const LayerParams& l = stack.layer(static_cast<std::size_t>(i));
        Matrix pre = matmul_nt(manual, l.w_dec);
        add_row_inplace(pre, l.b_dec);
        manual = sigmoid(pre);
    }
    EXPECT_LE(max_abs_diff(decode(stack, h), manual), 1e-15);
}

TEST(Reconstruct, ShapeMatchesInputAndStaysInUnitInterval) {
    const StackParams stack = random_stack(9, {7, 4}, true, 8);
    Rng rng(9);
    const Matrix x = random_unit(5, 9, rng);
    auto [xr, trace] = reconstruct(stack, x, {}, rng);
    EXPECT_EQ(xr.rows(), x.rows());
    EXPECT_EQ(xr.cols(), x.cols());
    for (double v : xr.data()) {
        EXPECT_GT(v, 0.0);
        EXPECT_LT(v, 1.0);
    }
    EXPECT_EQ(trace.decoded[0], xr);
}

TEST(Reconstruct, UntrainedStackLossNearConstantHalfPredictor) {
    // Sparse, digit-like data: a constant 0.5 predictor costs d·ln2 per row.
    Rng rng(10);
    Matrix x(50, 64);
    for (double& v : x.data()) v = rng.uniform() < 0.2 ? rng.uniform() : 0.0;
    const StackParams stack = random_stack(64, {32, 16}, true, 11);
    const double model = mean_loss({}, x, reconstruct_clean(stack.layers(), x));
    const double baseline = mean_loss({}, x, Matrix(50, 64, 0.5));
    EXPECT_NEAR(model, baseline, 0.2 * baseline);
}

TEST(Reconstruct, DeterministicGivenSeed) {
    const StackParams stack = random_stack(6, {4, 3}, true, 12);
    Rng a(13), b(13);
    const Matrix x = random_unit(3, 6, a);
    (void)random_unit(3, 6, b);
    const std::vector<CorruptionSpec> c(2, CorruptionSpec::gaussian(0.3));
    EXPECT_EQ(reconstruct(stack, x, c, a).first, reconstruct(stack, x, c, b).first);
}

TEST(Reconstruct, SingleLayerIsBasicAutoencoder) {
    const StackParams stack = random_stack(5, {3}, true, 14);
    Rng rng(15);
    const Matrix x = random_unit(4, 5, rng);
    const LayerParams& l = stack.layer(0);
    EXPECT_EQ(reconstruct(stack, x, {}, rng).first, decode_layer(l, encode_layer(l, x)));
}

TEST(Encode, InputsAreNotMutated) {
    const StackParams stack = random_stack(4, {3}, true, 16);
    const StackParams before = stack;
    Rng rng(17);
    const Matrix x = random_unit(3, 4, rng);
    const Matrix x_before = x;
    const std::vector<CorruptionSpec> c{CorruptionSpec::masking(0.5)};
    (void)reconstruct(stack, x, c, rng);
    EXPECT_EQ(x, x_before);
    EXPECT_EQ(stack, before);
}

TEST(Tied, WeightUpdateVisibleInDecoder) {
    StackParams stack = random_stack(4, {3}, true, 18);
    EXPECT_TRUE(stack.layer(0).w_dec.empty());
    EXPECT_EQ(stack.layer(0).tensors().size(), 3u);
    stack.layer(0).w_enc(1, 2) = 42.0;
    EXPECT_EQ(stack.layer(0).decoder_weights()(2, 1), 42.0);
    const StackParams untied = random_stack(4, {3}, false, 18);
    EXPECT_EQ(untied.layer(0).tensors().size(), 4u);
}

TEST(Init, UniformRangeAndZeroBiases) {
    const StackParams stack = random_stack(30, {20}, true, 19);
    const double bound = std::sqrt(6.0 / 50.0);
    for (double v : stack.layer(0).w_enc.data()) EXPECT_LE(std::abs(v), bound);
    for (double v : stack.layer(0).b_enc.data()) EXPECT_EQ(v, 0.0);
    for (double v : stack.layer(0).b_dec.data()) EXPECT_EQ(v, 0.0);
}

TEST(Flatten, RoundTripIsIdentity) {
    const StackParams stack = random_stack(7, {5, 3}, false, 20);
    StackParams copy = random_stack(7, {5, 3}, false, 21);
    const std::vector<double> flat = flatten(stack);
    EXPECT_EQ(flat.size(), stack.parameter_count());
    unflatten(copy, flat);
    EXPECT_EQ(copy, stack);
    EXPECT_THROW(unflatten(copy, std::span(flat).first(flat.size() - 1)), ContractViolation);
}

TEST(Serialization, SaveLoadSaveIsByteIdentical) {
    StackParams stack = random_stack(6, {4, 2}, false, 22);
    stack.layer(1).act_dec = Activation::linear;
    const auto p1 = temp_path("rt1.daej"), p2 = temp_path("rt2.daej");
    save(stack, p1);
    const StackParams loaded = load(p1);
    EXPECT_EQ(loaded, stack);
    save(loaded, p2);
    EXPECT_EQ(read_all(p1), read_all(p2));
    std::filesystem::remove(p1);
    std::filesystem::remove(p2);
}

TEST(Serialization, TruncatedFileRejected) {
    const auto bytes = serialize(random_stack(5, {3}, true, 23));
    for (std::size_t cut : {std::size_t{0}, std::size_t{3}, std::size_t{10}, std::size_t{20}, bytes.size() - 1}) {
        try {
            (void)deserialize(std::span(bytes).first(cut));
            FAIL() << "accepted truncation at " << cut;
        } catch (const ParseError& e) {
            EXPECT_LE(e.offset(), cut);
        }
    }
}

TEST(Serialization, BadMagicChecksumAndVersion) {
    auto bytes = serialize(random_stack(3, {2}, true, 24));
    auto bad_magic = bytes;
    bad_magic[0] = 'X';
    EXPECT_THROW((void)deserialize(bad_magic), ParseError);
    auto flipped = bytes;
    flipped[30] ^= 0x01;
    EXPECT_THROW((void)deserialize(flipped), ParseError);
    auto version = bytes;
    version[4] = 2;
    EXPECT_THROW((void)deserialize(version), VersionError);
}

TEST(Serialization, HandBuiltLittleEndianFixtureLoads) {
    std::vector<std::uint8_t> f{'D', 'A', 'E', 'J'};
    put_u32(f, 1);  // version
    put_u32(f, 1);  // layers
    put_u32(f, 2);  // d_in
    put_u32(f, 1);  // h
    f.push_back(1); // tied
    f.push_back(0); // logistic encoder
    f.push_back(0); // logistic decoder
    put_f64(f, 0.25);   // W_e[0,0]
    put_f64(f, -1.5);   // W_e[0,1]
    put_f64(f, 0.125);  // b_e
    put_f64(f, 3.0);    // b_d[0]
    put_f64(f, -2.0);   // b_d[1]
    put_u32(f, static_cast<std::uint32_t>(crc32(0L, f.data(), static_cast<uInt>(f.size()))));

    const StackParams s = deserialize(f);
    ASSERT_EQ(s.depth(), 1u);
    const LayerParams& l = s.layer(0);
    EXPECT_TRUE(l.tied);
    EXPECT_EQ(l.w_enc, (Matrix{{0.25, -1.5}}));
    EXPECT_EQ(l.b_enc, (Matrix{{0.125}}));
    EXPECT_EQ(l.b_dec, (Matrix{{3.0, -2.0}}));
    EXPECT_EQ(serialize(s), f);
}

TEST(Serialization, MissingFileReportsPath) {
    try {
        (void)load("/nonexistent/dir/model.daej");
        FAIL();
    } catch (const std::runtime_error& e) {
        EXPECT_NE(std::string(e.what()).find("/nonexistent/dir/model.daej"), std::string::npos);
    }
}

TEST(Stack, MismatchedWidthsRejected) {
    EXPECT_THROW(StackParams({LayerParams::zeros(4, 3, true), LayerParams::zeros(2, 2, true)}), ContractViolation);
    EXPECT_THROW(StackParams(std::vector<LayerParams>{}), ContractViolation);
}
