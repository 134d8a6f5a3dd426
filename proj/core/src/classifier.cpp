#include "deepstack/classifier.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <string>

#include "deepstack/errors.hpp"

namespace deepstack {

namespace {

void check_labels(std::span<const int> labels, std::size_t rows, std::size_t classes, const char* what) {
    if (labels.size() != rows) {
        throw ContractViolation(std::string(what) + ": label count does not match row count");
    }
    for (int y : labels) {
        if (y < 0 || static_cast<std::size_t>(y) >= classes) {
            throw ContractViolation(std::string(what) + ": label " + std::to_string(y) + " outside [0, " +
                                    std::to_string(classes) + ")");
        }
    }
}

std::size_t argmax_row(std::span<const double> row) {
    return static_cast<std::size_t>(std::max_element(row.begin(), row.end()) - row.begin());
}

} // namespace

EvalReport make_report(std::size_t mistakes, std::size_t n) {
    if (n == 0) {
        throw ContractViolation("evaluate: empty test set");
    }
    const double p = static_cast<double>(mistakes) / static_cast<double>(n);
    return {100.0 * p, 100.0 * 1.96 * std::sqrt(p * (1.0 - p) / static_cast<double>(n)), n};
}

EvalReport evaluate_predictions(std::span<const int> predicted, std::span<const int> labels) {
    if (predicted.size() != labels.size()) {
        throw ContractViolation("evaluate: prediction/label count mismatch");
    }
    std::size_t mistakes = 0;
    for (std::size_t i = 0; i < labels.size(); ++i) {
        mistakes += predicted[i] != labels[i] ? 1 : 0;
    }
    return make_report(mistakes, labels.size());
}

Matrix extract_features(const StackParams& stack, const Matrix& x) { return encode_clean(stack.layers(), x); }

LinearProbe train_svm(const Matrix& features, std::span<const int> labels, std::size_t classes, double c,
                      std::size_t epochs) {
    check_labels(labels, features.rows(), classes, "train_svm");
    if (!(c > 0.0)) {
        throw ContractViolation("train_svm: C must be positive");
    }
    const std::size_t n = features.rows();
    const std::size_t dim = features.cols() + 1;  // trailing constant feature
    const double lambda = 1.0 / c;
    const double radius = 1.0 / std::sqrt(lambda);

    LinearProbe probe;
    probe.w = Matrix(classes, features.cols());
    probe.b = Matrix(1, classes);
    probe.c = c;

    std::vector<double> w(dim), avg(dim), step(dim);
    for (std::size_t k = 0; k < classes; ++k) {
        std::fill(w.begin(), w.end(), 0.0);
        std::fill(avg.begin(), avg.end(), 0.0);
        std::size_t averaged = 0;
        for (std::size_t t = 1; t <= epochs; ++t) {
            std::fill(step.begin(), step.end(), 0.0);
            for (std::size_t i = 0; i < n; ++i) {
                const double y = labels[i] == static_cast<int>(k) ? 1.0 : -1.0;
                auto x = features.row(i);
                double score = w[dim - 1];
                for (std::size_t j = 0; j + 1 < dim; ++j) {
                    score += w[j] * x[j];
                }
                if (y * score < 1.0) {
                    for (std::size_t j = 0; j + 1 < dim; ++j) {
                        step[j] += y * x[j];
                    }
                    step[dim - 1] += y;
                }
            }
            const double eta = 1.0 / (lambda * static_cast<double>(t));
            const double shrink = 1.0 - eta * lambda;
            double norm = 0.0;
            for (std::size_t j = 0; j < dim; ++j) {
                w[j] = shrink * w[j] + eta * step[j] / static_cast<double>(n);
                norm += w[j] * w[j];
            }
            norm = std::sqrt(norm);
            if (norm > radius) {
                for (double& v : w) {
                    v *= radius / norm;
                }
            }
            if (2 * t > epochs) {
                for (std::size_t j = 0; j < dim; ++j) {
                    avg[j] += w[j];
                }
                ++averaged;
            }
        }
        for (std::size_t j = 0; j + 1 < dim; ++j) {
            probe.w(k, j) = avg[j] / static_cast<double>(averaged);
        }
        probe.b(0, k) = avg[dim - 1] / static_cast<double>(averaged);
    }
    return probe;
}

LinearProbe train_linear_probe(const Matrix& features, std::span<const int> labels, std::size_t classes,
                               const Matrix& valid_features, std::span<const int> valid_labels,
                               const ProbeConfig& config) {
    check_labels(labels, features.rows(), classes, "train_linear_probe");
    if (config.c_grid.empty()) {
        throw ConfigError("probe C grid is empty");
    }
    if (features.rows() == 0 || std::adjacent_find(labels.begin(), labels.end(), std::not_equal_to<>()) == labels.end()) {
        throw ConfigError("linear probe needs at least two classes in the training data");
    }
    const bool have_valid = valid_features.rows() > 0;
    const Matrix& select_x = have_valid ? valid_features : features;
    const std::span<const int> select_y = have_valid ? valid_labels : labels;

    LinearProbe best;
    double best_err = std::numeric_limits<double>::infinity();
    for (double c : config.c_grid) {
        LinearProbe probe = train_svm(features, labels, classes, c, config.epochs);
        const double err = evaluate(probe, select_x, select_y).error_percent;
        if (err < best_err) {
            best_err = err;
            best = std::move(probe);
        }
    }
    return best;
}

std::vector<int> predict(const LinearProbe& probe, const Matrix& features) {
    if (features.cols() != probe.w.cols()) {
        throw ContractViolation("predict: feature width does not match probe");
    }
    Matrix scores = matmul_nt(features, probe.w);
    add_row_inplace(scores, probe.b);
    std::vector<int> out(features.rows());
    for (std::size_t i = 0; i < features.rows(); ++i) {
        out[i] = static_cast<int>(argmax_row(scores.row(i)));
    }
    return out;
}

EvalReport evaluate(const LinearProbe& probe, const Matrix& features, std::span<const int> labels) {
    return evaluate_predictions(predict(probe, features), labels);
}

FinetuneNet FinetuneNet::from_stack(const StackParams& stack, std::size_t classes, Rng& rng) {
    if (classes < 2) {
        throw ContractViolation("FinetuneNet: need at least two classes");
    }
    FinetuneNet net;
    for (const auto& layer : stack.layers()) {
        if (layer.act_enc != Activation::logistic) {
            throw UnsupportedConfiguration("finetuning expects logistic encoder layers");
        }
        net.weights.push_back(layer.w_enc);
        net.biases.push_back(layer.b_enc);
    }
    const std::size_t top = stack.top_width();
    const double bound = std::sqrt(6.0 / static_cast<double>(top + classes));
    net.w_out = Matrix(classes, top);
    for (double& v : net.w_out.data()) {
        v = bound * (2.0 * rng.uniform() - 1.0);
    }
    net.b_out = Matrix(1, classes);
    return net;
}

std::vector<Matrix*> FinetuneNet::tensors() {
    std::vector<Matrix*> out;
    for (std::size_t i = 0; i < weights.size(); ++i) {
        out.push_back(&weights[i]);
        out.push_back(&biases[i]);
    }
    out.push_back(&w_out);
    out.push_back(&b_out);
    return out;
}

std::vector<const Matrix*> FinetuneNet::tensors() const {
    std::vector<const Matrix*> out;
    for (std::size_t i = 0; i < weights.size(); ++i) {
        out.push_back(&weights[i]);
        out.push_back(&biases[i]);
    }
    out.push_back(&w_out);
    out.push_back(&b_out);
    return out;
}

namespace {

struct NetForward {
    std::vector<Matrix> activations;  // activations[0] = x, then each hidden layer
    Matrix probs;
};

NetForward forward(const FinetuneNet& net, const Matrix& x) {
    NetForward f;
    f.activations.push_back(x);
    for (std::size_t i = 0; i < net.weights.size(); ++i) {
        Matrix pre = matmul_nt(f.activations.back(), net.weights[i]);
        add_row_inplace(pre, net.biases[i]);
        f.activations.push_back(sigmoid(pre));
    }
    Matrix logits = matmul_nt(f.activations.back(), net.w_out);
    add_row_inplace(logits, net.b_out);
    for (std::size_t r = 0; r < logits.rows(); ++r) {
        auto row = logits.row(r);
        const double peak = *std::max_element(row.begin(), row.end());
        double total = 0.0;
        for (double& v : row) {
            v = std::exp(v - peak);
            total += v;
        }
        for (double& v : row) {
            v /= total;
        }
    }
    f.probs = std::move(logits);
    return f;
}

} // namespace

Matrix class_probabilities(const FinetuneNet& net, const Matrix& x) { return forward(net, x).probs; }

std::vector<int> predict(const FinetuneNet& net, const Matrix& x) {
    const Matrix probs = class_probabilities(net, x);
    std::vector<int> out(x.rows());
    for (std::size_t i = 0; i < x.rows(); ++i) {
        out[i] = static_cast<int>(argmax_row(probs.row(i)));
    }
    return out;
}

EvalReport evaluate(const FinetuneNet& net, const Matrix& x, std::span<const int> labels) {
    return evaluate_predictions(predict(net, x), labels);
}

SoftmaxResult softmax_xent_value_grad(const FinetuneNet& net, const Matrix& x, std::span<const int> labels) {
    check_labels(labels, x.rows(), net.classes(), "softmax_xent_value_grad");
    NetForward f = forward(net, x);

    SoftmaxResult out;
    Matrix delta = f.probs;
    for (std::size_t r = 0; r < x.rows(); ++r) {
        const auto y = static_cast<std::size_t>(labels[r]);
        out.value -= std::log(std::max(f.probs(r, y), std::numeric_limits<double>::min()));
        delta(r, y) -= 1.0;
    }

    const std::size_t depth = net.weights.size();
    std::vector<Matrix> grad_w(depth), grad_b(depth);
    Matrix grad_w_out = matmul_tn(delta, f.activations.back());
    Matrix grad_b_out = column_sums(delta);
    Matrix d_act = matmul(delta, net.w_out);
    for (std::size_t i = depth; i-- > 0;) {
        const Matrix& a = f.activations[i + 1];
        for (std::size_t k = 0; k < d_act.size(); ++k) {
            d_act.data()[k] *= a.data()[k] * (1.0 - a.data()[k]);
        }
        grad_w[i] = matmul_tn(d_act, f.activations[i]);
        grad_b[i] = column_sums(d_act);
        if (i > 0) {
            d_act = matmul(d_act, net.weights[i]);
        }
    }
    for (std::size_t i = 0; i < depth; ++i) {
        out.grads.push_back(std::move(grad_w[i]));
        out.grads.push_back(std::move(grad_b[i]));
    }
    out.grads.push_back(std::move(grad_w_out));
    out.grads.push_back(std::move(grad_b_out));
    return out;
}

FinetuneResult finetune(FinetuneNet net, const Matrix& train, std::span<const int> train_labels, const Matrix& valid,
                        std::span<const int> valid_labels, const FinetunePlan& plan) {
    check_labels(train_labels, train.rows(), net.classes(), "finetune");
    const bool have_valid = valid.rows() > 0;
    const Matrix& select_x = have_valid ? valid : train;
    const std::span<const int> select_y = have_valid ? valid_labels : train_labels;

    FinetuneResult result;
    result.best_valid_error = evaluate(net, select_x, select_y).error_percent;
    result.best_epoch = 0;
    FinetuneNet best = net;

    Rng shuffle_rng = Rng(plan.seed).split(kShuffleStream);
    RmsPropState optim{plan.optimizer, {}};
    const std::size_t n = train.rows();
    const std::size_t batch = std::max<std::size_t>(1, plan.minibatch);
    std::size_t since_best = 0;
    for (std::size_t epoch = 1; epoch <= plan.epochs; ++epoch) {
        const auto order = shuffled_indices(n, shuffle_rng);
        double loss = 0.0;
        for (std::size_t begin = 0; begin < n; begin += batch) {
            const std::size_t end = std::min(n, begin + batch);
            const auto idx = std::span(order).subspan(begin, end - begin);
            const Matrix x = gather_rows(train, idx);
            std::vector<int> y(idx.size());
            for (std::size_t i = 0; i < idx.size(); ++i) {
                y[i] = train_labels[idx[i]];
            }
            SoftmaxResult res = softmax_xent_value_grad(net, x, y);
            loss += res.value;
            std::vector<const Matrix*> grads;
            for (const Matrix& g : res.grads) {
                grads.push_back(&g);
            }
            auto params = net.tensors();
            rmsprop_step(optim, params, grads);
        }
        const double err = evaluate(net, select_x, select_y).error_percent;
        result.log.push_back({epoch, loss / static_cast<double>(n), err});
        if (err < result.best_valid_error) {
            result.best_valid_error = err;
            result.best_epoch = epoch;
            best = net;
            since_best = 0;
        } else if (++since_best >= plan.patience) {
            break;
        }
    }
    result.net = std::move(best);
    return result;
}

} // namespace deepstack
