#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "deepstack/matrix.hpp"
#include "deepstack/model.hpp"
#include "deepstack/rng.hpp"
#include "deepstack/training.hpp"

namespace deepstack {

/// Test error in percent with the half-width of its 95% normal-approximation
/// confidence interval, 1.96·√(p(1-p)/n)·100.
struct EvalReport {
    double error_percent = 0.0;
    double ci_halfwidth = 0.0;
    std::size_t n = 0;
};

EvalReport make_report(std::size_t mistakes, std::size_t n);
EvalReport evaluate_predictions(std::span<const int> predicted, std::span<const int> labels);

/// Top-layer features of a trained stack, computed without corruption.
Matrix extract_features(const StackParams& stack, const Matrix& x);

/// One-vs-rest linear SVM on frozen features. Row k of `w` and entry k of `b`
/// score class k.
struct LinearProbe {
    Matrix w;
    Matrix b;
    double c = 1.0;
    std::size_t feature_layer = 0;
};

struct ProbeConfig {
    std::vector<double> c_grid{0.01, 0.1, 1.0, 10.0, 100.0};
    std::size_t epochs = 500;
};

/// Minimizes mean hinge loss + (1/(2C))‖w‖² per class (bias folded into w as
/// a constant feature) with full-batch Pegasos subgradient steps and iterate
/// averaging over the second half of the run. Fully deterministic.
LinearProbe train_svm(const Matrix& features, std::span<const int> labels, std::size_t classes, double c,
                      std::size_t epochs);

/// Trains one probe per C in the grid and keeps the one with the lowest
/// validation error (first in grid order on ties). Without a validation set
/// the training error decides. Single-class data throws ConfigError.
LinearProbe train_linear_probe(const Matrix& features, std::span<const int> labels, std::size_t classes,
                               const Matrix& valid_features, std::span<const int> valid_labels,
                               const ProbeConfig& config = {});

std::vector<int> predict(const LinearProbe& probe, const Matrix& features);
EvalReport evaluate(const LinearProbe& probe, const Matrix& features, std::span<const int> labels);

/// Encoder stack plus a softmax output layer.
struct FinetuneNet {
    std::vector<Matrix> weights;  ///< hidden×input per layer
    std::vector<Matrix> biases;   ///< 1×hidden per layer
    Matrix w_out;                 ///< classes×top
    Matrix b_out;                 ///< 1×classes

    /// Copies the encoder half of `stack`; the output layer is drawn from `rng`.
    static FinetuneNet from_stack(const StackParams& stack, std::size_t classes, Rng& rng);

    std::size_t classes() const { return w_out.rows(); }
    std::vector<Matrix*> tensors();
    std::vector<const Matrix*> tensors() const;

    friend bool operator==(const FinetuneNet&, const FinetuneNet&) = default;
};

Matrix class_probabilities(const FinetuneNet& net, const Matrix& x);
std::vector<int> predict(const FinetuneNet& net, const Matrix& x);
EvalReport evaluate(const FinetuneNet& net, const Matrix& x, std::span<const int> labels);

struct SoftmaxResult {
    double value = 0.0;              ///< summed cross-entropy
    std::vector<Matrix> grads;       ///< aligned with FinetuneNet::tensors()
};

SoftmaxResult softmax_xent_value_grad(const FinetuneNet& net, const Matrix& x, std::span<const int> labels);

struct FinetunePlan {
    std::size_t epochs = 1000;
    std::size_t minibatch = 100;
    RmsPropConfig optimizer{0.001, 0.9, 1e-8};
    std::size_t patience = 20;
    std::uint64_t seed = 0;
};

struct FinetuneEpoch {
    std::size_t epoch = 0;
    double train_loss = 0.0;
    double valid_error = 0.0;
};

struct FinetuneResult {
    FinetuneNet net;
    double best_valid_error = 0.0;  ///< percent
    std::size_t best_epoch = 0;     ///< 0 means the initialization was kept
    std::vector<FinetuneEpoch> log;
};

/// Supervised training of every encoder and output parameter with rms-prop,
/// early stopping on validation classification error; returns the best
/// weights seen (the initialization counts as epoch 0).
FinetuneResult finetune(FinetuneNet net, const Matrix& train, std::span<const int> train_labels, const Matrix& valid,
                        std::span<const int> valid_labels, const FinetunePlan& plan);

} // namespace deepstack
