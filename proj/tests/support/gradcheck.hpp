#pragma once

// Finite-difference oracles shared by the unit and acceptance suites. Nothing
// here calls into the analytic gradient code it is used to check.

#include <algorithm>
#include <cmath>
#include <functional>
#include <span>
#include <vector>

namespace deepstack::testing {

/// Central (3-point) or 5-point finite-difference gradient of `f` at `x`.
inline std::vector<double> numeric_gradient(const std::function<double(std::span<const double>)>& f,
                                            std::vector<double> x, double step = 1e-5, bool five_point = false) {
    std::vector<double> grad(x.size());
    for (std::size_t i = 0; i < x.size(); ++i) {
        const double orig = x[i];
        auto eval = [&](double delta) {
            x[i] = orig + delta;
            const double v = f(x);
            x[i] = orig;
            return v;
        };
        if (five_point) {
            grad[i] = (-eval(2 * step) + 8 * eval(step) - 8 * eval(-step) + eval(-2 * step)) / (12 * step);
        } else {
            grad[i] = (eval(step) - eval(-step)) / (2 * step);
        }
    }
    return grad;
}

/// ‖a - b‖ / max(‖a‖, ‖b‖), zero when both vanish.
inline double relative_error(std::span<const double> a, std::span<const double> b) {
    double diff = 0.0, na = 0.0, nb = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        diff += (a[i] - b[i]) * (a[i] - b[i]);
        na += a[i] * a[i];
        nb += b[i] * b[i];
    }
    const double scale = std::sqrt(std::max(na, nb));
    return scale == 0.0 ? 0.0 : std::sqrt(diff) / scale;
}

struct GradCheck {
    double error = 0.0;
    double tolerance = 0.0;
    bool five_point = false;
    bool passed() const { return error <= tolerance; }
};

/// Central differences at `tol`; if that fails, retries with the 5-point
/// stencil at `fallback_tol` (saturated units make the 3-point stencil noisy).
inline GradCheck check_gradient(const std::function<double(std::span<const double>)>& f, const std::vector<double>& x,
                                std::span<const double> analytic, double tol = 1e-6, double fallback_tol = 1e-5) {
    GradCheck r{relative_error(analytic, numeric_gradient(f, x)), tol, false};
    if (r.passed()) {
        return r;
    }
    return {relative_error(analytic, numeric_gradient(f, x, 1e-4, true)), fallback_tol, true};
}

} // namespace deepstack::testing
