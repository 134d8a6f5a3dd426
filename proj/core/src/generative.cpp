#include "deepstack/generative.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <limits>
#include <string>

#include "deepstack/errors.hpp"

namespace deepstack {

Matrix gsn_chain(const StackParams& model, std::span<const double> init, std::size_t steps,
                 const CorruptionSpec& corruption, Rng& rng, std::size_t thinning, std::size_t burn_in) {
    if (init.size() != model.input_width()) {
        throw ContractViolation("gsn_chain: init width " + std::to_string(init.size()) + " does not match model width " +
                                std::to_string(model.input_width()));
    }
    if (steps == 0 || thinning == 0) {
        throw ContractViolation("gsn_chain: steps and thinning must be positive");
    }
    Matrix state = Matrix::row_vector(init);
    Matrix out(steps / thinning, model.input_width());
    std::size_t kept = 0;
    for (std::size_t t = 1; t <= burn_in + steps; ++t) {
        const Matrix noisy = corrupt(corruption, state, rng);
        state = reconstruct_clean(model.layers(), noisy);
        if (t > burn_in && (t - burn_in) % thinning == 0) {
            std::copy(state.data().begin(), state.data().end(), out.row(kept).begin());
            ++kept;
        }
    }
    return out;
}

ParzenModel parzen_fit(Matrix samples, double sigma) {
    if (samples.rows() == 0 || samples.cols() == 0) {
        throw ContractViolation("parzen_fit: no samples");
    }
    if (!(sigma > 0.0)) {
        throw ContractViolation("parzen_fit: sigma must be positive");
    }
    return {std::move(samples), sigma};
}

double parzen_loglik(const ParzenModel& model, std::span<const double> x) {
    const Matrix& c = model.components;
    if (x.size() != c.cols()) {
        throw ContractViolation("parzen_loglik: dimension mismatch");
    }
    const double inv = 1.0 / (2.0 * model.sigma * model.sigma);
    std::vector<double> exps(c.rows());
    double peak = -std::numeric_limits<double>::infinity();
    for (std::size_t s = 0; s < c.rows(); ++s) {
        auto comp = c.row(s);
        double dist = 0.0;
        for (std::size_t j = 0; j < x.size(); ++j) {
            const double d = x[j] - comp[j];
            dist += d * d;
        }
        exps[s] = -dist * inv;
        peak = std::max(peak, exps[s]);
    }
    double acc = 0.0;
    for (double e : exps) {
        acc += std::exp(e - peak);
    }
    const double dim = static_cast<double>(x.size());
    return peak + std::log(acc) - std::log(static_cast<double>(c.rows())) -
           0.5 * dim * std::log(2.0 * std::numbers::pi * model.sigma * model.sigma);
}

std::vector<double> parzen_loglik(const ParzenModel& model, const Matrix& xs) {
    std::vector<double> out(xs.rows());
    for (std::size_t i = 0; i < xs.rows(); ++i) {
        out[i] = parzen_loglik(model, xs.row(i));
    }
    return out;
}

std::vector<double> default_sigma_grid() {
    std::vector<double> grid;
    for (int i = 1; i <= 10; ++i) {
        grid.push_back(0.1 * i);
    }
    return grid;
}

namespace {

double mean_of(const std::vector<double>& v) {
    double acc = 0.0;
    for (double x : v) {
        acc += x;
    }
    return acc / static_cast<double>(v.size());
}

} // namespace

double parzen_select_sigma(const Matrix& samples, const Matrix& validation, std::span<const double> grid) {
    if (grid.empty() || validation.rows() == 0 || samples.rows() == 0) {
        throw ContractViolation("parzen_select_sigma: empty samples, validation set or grid");
    }
    std::vector<double> sorted(grid.begin(), grid.end());
    std::sort(sorted.begin(), sorted.end());
    if (!(sorted.front() > 0.0)) {
        throw ContractViolation("parzen_select_sigma: sigma grid must be positive");
    }
    double best_sigma = sorted.front();
    double best_ll = -std::numeric_limits<double>::infinity();
    ParzenModel model{samples, 1.0};
    for (double sigma : sorted) {
        model.sigma = sigma;
        const double ll = mean_of(parzen_loglik(model, validation));
        if (ll > best_ll) {
            best_ll = ll;
            best_sigma = sigma;
        }
    }
    return best_sigma;
}

GenerativeReport evaluate_generative(const StackParams& model, const Matrix& validation, const Matrix& test,
                                     const GenerativeEvalConfig& config, Rng& rng) {
    if (validation.rows() == 0 || test.rows() == 0) {
        throw ContractViolation("evaluate_generative: validation and test sets must be non-empty");
    }
    const std::size_t start = rng.below(validation.rows());
    Matrix samples = gsn_chain(model, validation.row(start), config.samples, config.corruption, rng, 1, config.burn_in);
    const double sigma = parzen_select_sigma(samples, validation, config.sigma_grid);
    const ParzenModel parzen = parzen_fit(std::move(samples), sigma);
    const auto lls = parzen_loglik(parzen, test);

    GenerativeReport report;
    report.mean_ll = mean_of(lls);
    double var = 0.0;
    for (double v : lls) {
        var += (v - report.mean_ll) * (v - report.mean_ll);
    }
    const double n = static_cast<double>(lls.size());
    var = lls.size() > 1 ? var / (n - 1.0) : 0.0;
    report.stderr_ll = std::sqrt(var) / std::sqrt(n);
    report.sigma = sigma;
    report.samples = config.samples;
    return report;
}

std::size_t nearest_training_sample(std::span<const double> sample, const Matrix& training) {
    if (training.rows() == 0) {
        throw ContractViolation("nearest_training_sample: empty training set");
    }
    if (sample.size() != training.cols()) {
        throw ContractViolation("nearest_training_sample: dimension mismatch");
    }
    std::size_t best = 0;
    double best_dist = std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < training.rows(); ++i) {
        auto row = training.row(i);
        double dist = 0.0;
        for (std::size_t j = 0; j < sample.size(); ++j) {
            const double d = sample[j] - row[j];
            dist += d * d;
        }
        if (dist < best_dist) {
            best_dist = dist;
            best = i;
        }
    }
    return best;
}

} // namespace deepstack
