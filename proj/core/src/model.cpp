#include "deepstack/model.hpp"

#include <cmath>
#include <string>

#include "deepstack/errors.hpp"

namespace deepstack {

std::string_view to_string(Activation act) {
    return act == Activation::logistic ? "logistic" : "linear";
}

LayerParams LayerParams::zeros(std::size_t input_width, std::size_t hidden_width, bool tied) {
    if (input_width == 0 || hidden_width == 0) {
        throw ContractViolation("LayerParams: widths must be positive");
    }
    LayerParams layer;
    layer.w_enc = Matrix(hidden_width, input_width);
    layer.b_enc = Matrix(1, hidden_width);
    if (!tied) {
        layer.w_dec = Matrix(input_width, hidden_width);
    }
    layer.b_dec = Matrix(1, input_width);
    layer.tied = tied;
    return layer;
}

LayerParams LayerParams::random(std::size_t input_width, std::size_t hidden_width, bool tied, Rng& rng) {
    LayerParams layer = zeros(input_width, hidden_width, tied);
    const double bound = std::sqrt(6.0 / static_cast<double>(input_width + hidden_width));
    for (double& w : layer.w_enc.data()) {
        w = bound * (2.0 * rng.uniform() - 1.0);
    }
    for (double& w : layer.w_dec.data()) {
        w = bound * (2.0 * rng.uniform() - 1.0);
    }
    return layer;
}

Matrix LayerParams::decoder_weights() const { return tied ? transpose(w_enc) : w_dec; }

std::vector<Matrix*> LayerParams::tensors() {
    if (tied) {
        return {&w_enc, &b_enc, &b_dec};
    }
    return {&w_enc, &b_enc, &w_dec, &b_dec};
}

std::vector<const Matrix*> LayerParams::tensors() const {
    if (tied) {
        return {&w_enc, &b_enc, &b_dec};
    }
    return {&w_enc, &b_enc, &w_dec, &b_dec};
}

void LayerParams::check_shapes() const {
    const std::size_t h = w_enc.rows();
    const std::size_t d = w_enc.cols();
    bool ok = h > 0 && d > 0 && b_enc.rows() == 1 && b_enc.cols() == h && b_dec.rows() == 1 && b_dec.cols() == d;
    if (tied) {
        ok = ok && w_dec.empty();
    } else {
        ok = ok && w_dec.rows() == d && w_dec.cols() == h;
    }
    if (!ok) {
        throw ContractViolation("LayerParams: inconsistent tensor shapes");
    }
}

LayerGrads LayerGrads::zeros_like(const LayerParams& layer) {
    LayerGrads g;
    g.w_enc = Matrix(layer.w_enc.rows(), layer.w_enc.cols());
    g.b_enc = Matrix(1, layer.b_enc.cols());
    if (!layer.tied) {
        g.w_dec = Matrix(layer.w_dec.rows(), layer.w_dec.cols());
    }
    g.b_dec = Matrix(1, layer.b_dec.cols());
    return g;
}

std::vector<Matrix*> LayerGrads::tensors() {
    if (w_dec.empty()) {
        return {&w_enc, &b_enc, &b_dec};
    }
    return {&w_enc, &b_enc, &w_dec, &b_dec};
}

std::vector<const Matrix*> LayerGrads::tensors() const {
    if (w_dec.empty()) {
        return {&w_enc, &b_enc, &b_dec};
    }
    return {&w_enc, &b_enc, &w_dec, &b_dec};
}

StackParams::StackParams(std::vector<LayerParams> layers) : layers_(std::move(layers)) {
    if (layers_.empty()) {
        throw ContractViolation("StackParams: at least one layer required");
    }
    for (std::size_t i = 0; i < layers_.size(); ++i) {
        layers_[i].check_shapes();
        if (i > 0 && layers_[i].input_width() != layers_[i - 1].hidden_width()) {
            throw ContractViolation("StackParams: layer " + std::to_string(i) + " input width " +
                                    std::to_string(layers_[i].input_width()) + " does not match hidden width " +
                                    std::to_string(layers_[i - 1].hidden_width()));
        }
    }
}

StackParams StackParams::random(std::size_t input_width, std::span<const std::size_t> hidden_widths, bool tied,
                                Rng& rng) {
    std::vector<LayerParams> layers;
    std::size_t width = input_width;
    for (std::size_t h : hidden_widths) {
        layers.push_back(LayerParams::random(width, h, tied, rng));
        width = h;
    }
    return StackParams(std::move(layers));
}

std::size_t StackParams::input_width() const { return layers_.front().input_width(); }
std::size_t StackParams::top_width() const { return layers_.back().hidden_width(); }

std::size_t StackParams::parameter_count() const {
    std::size_t n = 0;
    for (const auto& layer : layers_) {
        for (const Matrix* t : layer.tensors()) {
            n += t->size();
        }
    }
    return n;
}

Matrix activate(Activation act, Matrix pre) {
    if (act == Activation::logistic) {
        return sigmoid(pre);
    }
    return pre;
}

Matrix encode_layer(const LayerParams& layer, const Matrix& input) {
    if (input.cols() != layer.input_width()) {
        throw ContractViolation("encode: input width " + std::to_string(input.cols()) + " does not match layer width " +
                                std::to_string(layer.input_width()));
    }
    Matrix pre = matmul_nt(input, layer.w_enc);
    add_row_inplace(pre, layer.b_enc);
    return activate(layer.act_enc, std::move(pre));
}

Matrix decode_layer(const LayerParams& layer, const Matrix& hidden) {
    if (hidden.cols() != layer.hidden_width()) {
        throw ContractViolation("decode: hidden width " + std::to_string(hidden.cols()) + " does not match layer width " +
                                std::to_string(layer.hidden_width()));
    }
    Matrix pre = layer.tied ? matmul(hidden, layer.w_enc) : matmul_nt(hidden, layer.w_dec);
    add_row_inplace(pre, layer.b_dec);
    return activate(layer.act_dec, std::move(pre));
}

ForwardTrace encode(std::span<const LayerParams> layers, const Matrix& x, std::span<const CorruptionSpec> corruption,
                    Rng& rng) {
    if (layers.empty()) {
        throw ContractViolation("encode: empty stack");
    }
    if (!corruption.empty() && corruption.size() != layers.size()) {
        throw ContractViolation("encode: need one corruption spec per layer");
    }
    ForwardTrace trace;
    trace.inputs.reserve(layers.size());
    trace.fed.reserve(layers.size());
    trace.masks.reserve(layers.size());
    trace.hidden.reserve(layers.size());

    const Matrix* current = &x;
    for (std::size_t i = 0; i < layers.size(); ++i) {
        trace.inputs.push_back(*current);
        if (corruption.empty() || corruption[i].kind == CorruptionKind::none) {
            trace.fed.push_back(*current);
            trace.masks.emplace_back();
        } else {
            CorruptionDraw draw = corrupt_with_mask(corruption[i], *current, rng);
            trace.fed.push_back(std::move(draw.value));
            trace.masks.push_back(std::move(draw.mask));
        }
        trace.hidden.push_back(encode_layer(layers[i], trace.fed.back()));
        current = &trace.hidden.back();
    }
    return trace;
}

ForwardTrace encode(const StackParams& stack, const Matrix& x, std::span<const CorruptionSpec> corruption, Rng& rng) {
    return encode(stack.layers(), x, corruption, rng);
}

Matrix decode(std::span<const LayerParams> layers, const Matrix& h_top) {
    Matrix current = h_top;
    for (std::size_t i = layers.size(); i-- > 0;) {
        current = decode_layer(layers[i], current);
    }
    return current;
}

Matrix decode(const StackParams& stack, const Matrix& h_top) { return decode(stack.layers(), h_top); }

std::pair<Matrix, ForwardTrace> reconstruct(std::span<const LayerParams> layers, const Matrix& x,
                                            std::span<const CorruptionSpec> corruption, Rng& rng) {
    ForwardTrace trace = encode(layers, x, corruption, rng);
    trace.decoded.resize(layers.size());
    const Matrix* current = &trace.top();
    for (std::size_t i = layers.size(); i-- > 0;) {
        trace.decoded[i] = decode_layer(layers[i], *current);
        current = &trace.decoded[i];
    }
    Matrix x_r = trace.decoded.front();
    return {std::move(x_r), std::move(trace)};
}

std::pair<Matrix, ForwardTrace> reconstruct(const StackParams& stack, const Matrix& x,
                                            std::span<const CorruptionSpec> corruption, Rng& rng) {
    return reconstruct(stack.layers(), x, corruption, rng);
}

Matrix encode_clean(std::span<const LayerParams> layers, const Matrix& x) {
    Matrix current = x;
    for (const auto& layer : layers) {
        current = encode_layer(layer, current);
    }
    return current;
}

Matrix reconstruct_clean(std::span<const LayerParams> layers, const Matrix& x) {
    return decode(layers, encode_clean(layers, x));
}

std::vector<double> flatten(const StackParams& stack) {
    std::vector<double> out;
    out.reserve(stack.parameter_count());
    for (const auto& layer : stack.layers()) {
        for (const Matrix* t : layer.tensors()) {
            out.insert(out.end(), t->data().begin(), t->data().end());
        }
    }
    return out;
}

void unflatten(StackParams& stack, std::span<const double> values) {
    if (values.size() != stack.parameter_count()) {
        throw ContractViolation("unflatten: expected " + std::to_string(stack.parameter_count()) + " values, got " +
                                std::to_string(values.size()));
    }
    std::size_t pos = 0;
    for (auto& layer : stack.layers()) {
        for (Matrix* t : layer.tensors()) {
            auto dst = t->data();
            std::copy(values.begin() + static_cast<std::ptrdiff_t>(pos),
                      values.begin() + static_cast<std::ptrdiff_t>(pos + dst.size()), dst.begin());
            pos += dst.size();
        }
    }
}

} // namespace deepstack
