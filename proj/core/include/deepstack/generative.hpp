#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "deepstack/corruption.hpp"
#include "deepstack/matrix.hpp"
#include "deepstack/model.hpp"
#include "deepstack/rng.hpp"

namespace deepstack {

/// Runs the denoising Markov chain X̃ ~ c(X̃|X_t), X_{t+1} = reconstruct(X̃)
/// from `init`. The reconstruction is the deterministic decoder mean, so all
/// randomness comes from the input corruption. After `burn_in` unrecorded
/// steps, `steps` further steps are taken and every `thinning`-th state is
/// returned, one per row (steps / thinning rows).
Matrix gsn_chain(const StackParams& model, std::span<const double> init, std::size_t steps,
                 const CorruptionSpec& corruption, Rng& rng, std::size_t thinning = 1, std::size_t burn_in = 0);

/// Isotropic Gaussian kernel density estimate over S generated samples.
struct ParzenModel {
    Matrix components;
    double sigma = 1.0;
};

ParzenModel parzen_fit(Matrix samples, double sigma);

/// log p(x) = logsumexp_s(-‖x-s‖²/(2σ²)) - log S - (d/2)·log(2πσ²)
double parzen_loglik(const ParzenModel& model, std::span<const double> x);
std::vector<double> parzen_loglik(const ParzenModel& model, const Matrix& xs);

/// Picks the σ from `grid` maximizing mean validation log-likelihood; ties go
/// to the smaller σ.
double parzen_select_sigma(const Matrix& samples, const Matrix& validation, std::span<const double> grid);

std::vector<double> default_sigma_grid();

struct GenerativeEvalConfig {
    std::size_t samples = 10000;
    std::vector<double> sigma_grid = default_sigma_grid();
    std::size_t burn_in = 100;
    CorruptionSpec corruption = CorruptionSpec::gaussian(0.3);
};

struct GenerativeReport {
    double mean_ll = 0.0;
    double stderr_ll = 0.0;  ///< sample stdev of per-example LL / √n
    double sigma = 0.0;
    std::size_t samples = 0;
};

/// Draws `config.samples` consecutive chain states starting from a uniformly
/// chosen validation example, selects σ on `validation` and scores `test`.
GenerativeReport evaluate_generative(const StackParams& model, const Matrix& validation, const Matrix& test,
                                     const GenerativeEvalConfig& config, Rng& rng);

/// Index of the training row closest in Euclidean distance; lowest index on ties.
std::size_t nearest_training_sample(std::span<const double> sample, const Matrix& training);

} // namespace deepstack
