#include "deepstack/objectives.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "deepstack/errors.hpp"

namespace deepstack {

namespace {

void require_same_shape(const Matrix& a, const Matrix& b, const char* what) {
    if (a.rows() != b.rows() || a.cols() != b.cols()) {
        throw ContractViolation(std::string(what) + ": shape mismatch");
    }
}

double clamp_prob(double p) { return std::clamp(p, kCrossEntropyClamp, 1.0 - kCrossEntropyClamp); }

double cross_entropy_term(double target, double pred) {
    const double p = clamp_prob(pred);
    return -(target * std::log(p) + (1.0 - target) * std::log1p(-p));
}

// Multiplies `grad` in place by the derivative of `act`, given its output.
void scale_by_activation_derivative(Matrix& grad, Activation act, const Matrix& output) {
    if (act == Activation::linear) {
        return;
    }
    auto g = grad.data();
    auto a = output.data();
    for (std::size_t i = 0; i < g.size(); ++i) {
        g[i] *= a[i] * (1.0 - a[i]);
    }
}

// Penalty terms for a logistic layer whose input `h_in` produced `h`.
ContractiveResult contractive_from_activations(const LayerParams& layer, const Matrix& h_in, const Matrix& h) {
    if (layer.act_enc != Activation::logistic) {
        throw UnsupportedConfiguration("contractive penalty requires a logistic encoder");
    }
    const std::size_t n = h.rows();
    const std::size_t hidden = layer.hidden_width();
    const std::size_t width = layer.input_width();

    std::vector<double> row_norm(hidden, 0.0);
    for (std::size_t j = 0; j < hidden; ++j) {
        for (double w : layer.w_enc.row(j)) {
            row_norm[j] += w * w;
        }
    }

    ContractiveResult out;
    Matrix delta(n, hidden);
    std::vector<double> q_sum(hidden, 0.0);
    for (std::size_t r = 0; r < n; ++r) {
        for (std::size_t j = 0; j < hidden; ++j) {
            const double a = h(r, j);
            const double s = a * (1.0 - a);
            const double q = s * s;
            out.value += q * row_norm[j];
            q_sum[j] += q;
            delta(r, j) = row_norm[j] * 2.0 * q * (1.0 - 2.0 * a);
        }
    }

    out.grad_w_enc = matmul_tn(delta, h_in);
    for (std::size_t j = 0; j < hidden; ++j) {
        for (std::size_t i = 0; i < width; ++i) {
            out.grad_w_enc(j, i) += 2.0 * layer.w_enc(j, i) * q_sum[j];
        }
    }
    out.grad_b_enc = column_sums(delta);
    out.grad_input = matmul(delta, layer.w_enc);
    return out;
}

} // namespace

std::string_view to_string(RegularizerKind kind) {
    switch (kind) {
    case RegularizerKind::none:
        return "none";
    case RegularizerKind::l2:
        return "l2";
    case RegularizerKind::contractive:
        return "contractive";
    }
    return "none";
}

RegularizerKind parse_regularizer_kind(std::string_view text) {
    if (text == "none") return RegularizerKind::none;
    if (text == "l2") return RegularizerKind::l2;
    if (text == "contractive") return RegularizerKind::contractive;
    throw ConfigError("unknown regularizer kind '" + std::string(text) + "'");
}

std::string_view to_string(LossKind kind) {
    return kind == LossKind::cross_entropy ? "cross_entropy" : "squared_error";
}

LossKind parse_loss_kind(std::string_view text) {
    if (text == "cross_entropy") return LossKind::cross_entropy;
    if (text == "squared_error") return LossKind::squared_error;
    throw ConfigError("unknown loss '" + std::string(text) + "'");
}

LossResult loss_value_grad(const LossSpec& spec, const Matrix& x, const Matrix& x_r) {
    require_same_shape(x, x_r, "loss_value_grad");
    LossResult out;
    out.grad = Matrix(x.rows(), x.cols());
    auto t = x.data();
    auto p = x_r.data();
    auto g = out.grad.data();
    if (spec.kind == LossKind::cross_entropy) {
        for (std::size_t i = 0; i < t.size(); ++i) {
            out.value += cross_entropy_term(t[i], p[i]);
            const double pc = clamp_prob(p[i]);
            g[i] = -t[i] / pc + (1.0 - t[i]) / (1.0 - pc);
        }
    } else {
        for (std::size_t i = 0; i < t.size(); ++i) {
            const double diff = p[i] - t[i];
            out.value += diff * diff;
            g[i] = 2.0 * diff;
        }
    }
    return out;
}

std::vector<double> loss_per_example(const LossSpec& spec, const Matrix& x, const Matrix& x_r) {
    require_same_shape(x, x_r, "loss_per_example");
    std::vector<double> out(x.rows(), 0.0);
    for (std::size_t r = 0; r < x.rows(); ++r) {
        auto t = x.row(r);
        auto p = x_r.row(r);
        double acc = 0.0;
        for (std::size_t i = 0; i < t.size(); ++i) {
            if (spec.kind == LossKind::cross_entropy) {
                acc += cross_entropy_term(t[i], p[i]);
            } else {
                acc += (p[i] - t[i]) * (p[i] - t[i]);
            }
        }
        out[r] = acc;
    }
    return out;
}

double mean_loss(const LossSpec& spec, const Matrix& x, const Matrix& x_r) {
    if (x.rows() == 0) {
        return 0.0;
    }
    const auto per = loss_per_example(spec, x, x_r);
    double acc = 0.0;
    for (double v : per) {
        acc += v;
    }
    return acc / static_cast<double>(per.size());
}

Matrix output_delta(const LossSpec& spec, Activation output_act, const Matrix& x, const Matrix& x_r) {
    require_same_shape(x, x_r, "output_delta");
    if (spec.kind == LossKind::cross_entropy && output_act == Activation::logistic) {
        Matrix delta = x_r;
        axpy_inplace(delta, -1.0, x);
        return delta;
    }
    Matrix grad = loss_value_grad(spec, x, x_r).grad;
    scale_by_activation_derivative(grad, output_act, x_r);
    return grad;
}

ContractiveResult contractive_penalty_value_grad(const LayerParams& layer, const Matrix& h_in) {
    if (layer.act_enc != Activation::logistic) {
        throw UnsupportedConfiguration("contractive penalty requires a logistic encoder");
    }
    return contractive_from_activations(layer, h_in, encode_layer(layer, h_in));
}

L2Result l2_penalty_value_grad(const LayerParams& layer) {
    L2Result out;
    out.value = sum_squares(layer.w_enc);
    out.grad_w_enc = layer.w_enc;
    for (double& v : out.grad_w_enc.data()) {
        v *= 2.0;
    }
    if (!layer.tied) {
        out.value += sum_squares(layer.w_dec);
        out.grad_w_dec = layer.w_dec;
        for (double& v : out.grad_w_dec.data()) {
            v *= 2.0;
        }
    }
    return out;
}

double l2_penalty_value(std::span<const LayerParams> layers) {
    double acc = 0.0;
    for (const auto& layer : layers) {
        acc += l2_penalty_value_grad(layer).value;
    }
    return acc;
}

ObjectiveResult joint_objective(std::span<const LayerParams> layers, const Matrix& x, const ObjectiveSpec& spec,
                                Rng& rng, std::span<const double> lambda_scale) {
    const std::size_t depth = layers.size();
    if (!spec.regularizer.empty() && spec.regularizer.size() != depth) {
        throw ContractViolation("joint_objective: need one regularizer per layer");
    }
    if (!lambda_scale.empty() && lambda_scale.size() != depth) {
        throw ContractViolation("joint_objective: need one lambda scale per layer");
    }
    auto [x_r, trace] = reconstruct(layers, x, spec.corruption, rng);

    ObjectiveResult out;
    out.penalties.assign(depth, 0.0);
    out.grads.reserve(depth);
    for (const auto& layer : layers) {
        out.grads.push_back(LayerGrads::zeros_like(layer));
    }
    out.loss = loss_value_grad(spec.loss, x, x_r).value;
    out.value = out.loss;

    // Decoder stages, bottom (output) to top.
    Matrix delta = output_delta(spec.loss, layers[0].act_dec, x, x_r);
    Matrix d_hidden;
    for (std::size_t i = 0; i < depth; ++i) {
        const LayerParams& layer = layers[i];
        const Matrix& dec_in = (i + 1 == depth) ? trace.hidden.back() : trace.decoded[i + 1];
        LayerGrads& g = out.grads[i];
        if (layer.tied) {
            axpy_inplace(g.w_enc, 1.0, matmul_tn(dec_in, delta));
        } else {
            axpy_inplace(g.w_dec, 1.0, matmul_tn(delta, dec_in));
        }
        axpy_inplace(g.b_dec, 1.0, column_sums(delta));
        Matrix d_in = layer.tied ? matmul_nt(delta, layer.w_enc) : matmul(delta, layer.w_dec);
        if (i + 1 == depth) {
            d_hidden = std::move(d_in);
        } else {
            scale_by_activation_derivative(d_in, layers[i + 1].act_dec, trace.decoded[i + 1]);
            delta = std::move(d_in);
        }
    }

    // Encoder stages, top to bottom, adding each layer's regularizer.
    for (std::size_t i = depth; i-- > 0;) {
        const LayerParams& layer = layers[i];
        LayerGrads& g = out.grads[i];
        const RegularizerSpec reg = spec.regularizer.empty() ? RegularizerSpec{} : spec.regularizer[i];
        const double lambda = reg.lambda * (lambda_scale.empty() ? 1.0 : lambda_scale[i]);

        Matrix dz = std::move(d_hidden);
        scale_by_activation_derivative(dz, layer.act_enc, trace.hidden[i]);
        axpy_inplace(g.w_enc, 1.0, matmul_tn(dz, trace.fed[i]));
        axpy_inplace(g.b_enc, 1.0, column_sums(dz));
        Matrix d_fed = matmul(dz, layer.w_enc);

        switch (reg.kind) {
        case RegularizerKind::none:
            break;
        case RegularizerKind::l2: {
            const L2Result l2 = l2_penalty_value_grad(layer);
            out.penalties[i] = l2.value;
            axpy_inplace(g.w_enc, lambda, l2.grad_w_enc);
            if (!layer.tied) {
                axpy_inplace(g.w_dec, lambda, l2.grad_w_dec);
            }
            break;
        }
        case RegularizerKind::contractive: {
            const ContractiveResult cae = contractive_from_activations(layer, trace.fed[i], trace.hidden[i]);
            out.penalties[i] = cae.value;
            axpy_inplace(g.w_enc, lambda, cae.grad_w_enc);
            axpy_inplace(g.b_enc, lambda, cae.grad_b_enc);
            axpy_inplace(d_fed, lambda, cae.grad_input);
            break;
        }
        }
        out.value += lambda * out.penalties[i];

        if (i > 0) {
            if (!trace.masks[i].empty()) {
                d_fed = hadamard(d_fed, trace.masks[i]);
            }
            d_hidden = std::move(d_fed);
        }
    }
    out.reconstruction = std::move(x_r);
    return out;
}

ObjectiveResult gae_objective(const LayerParams& layer, const Matrix& batch, const LossSpec& loss,
                              const CorruptionSpec& corruption, const RegularizerSpec& regularizer, Rng& rng) {
    ObjectiveSpec spec{loss, {corruption}, {regularizer}};
    return joint_objective(std::span<const LayerParams>(&layer, 1), batch, spec, rng);
}

} // namespace deepstack
