#pragma once

#include <functional>
#include <string>
#include <vector>

#include "wgqed/trace.hpp"
#include "wgqed/types.hpp"

namespace wgqed {

enum class FitModel { Exponential, DampedSinusoid, GaussianEnvelope, Lorentzian };

std::string to_string(FitModel model);

struct FitParameter {
    std::string name;
    double value = 0.0;
    double sigma = 0.0;
};

struct FitResult {
    FitModel model = FitModel::Exponential;
    std::vector<FitParameter> parameters;
    double residual_norm = 0.0;
    int evaluations = 0;

    double value(const std::string& name) const;
    double sigma(const std::string& name) const;
    bool has(const std::string& name) const;
};

// Raised when a fit does not converge or is unidentifiable. Carries the best
// parameters seen so far, when there are any.
class FitError : public NumericalError {
public:
    FitError(const std::string& what, FitResult best) : NumericalError(what), best_(std::move(best)) {}
    explicit FitError(const std::string& what) : NumericalError(what) {}
    const FitResult& best() const { return best_; }

private:
    FitResult best_;
};

using Residuals = std::function<void(const RVector& params, RVector& residuals)>;

// Levenberg-Marquardt with a central-difference Jacobian; one-sigma errors from
// s^2 (J^T J)^-1 with s^2 the residual variance.
FitResult least_squares(const Residuals& residuals, Eigen::Index n_residuals, const RVector& start,
                        const std::vector<std::string>& names, FitModel model);

// y = A exp(-t / tau) + C. Adds derived parameter "rate_mhz" = 1 / (2 pi tau).
FitResult fit_exponential(const TimeTrace& trace);

struct SinusoidOptions {
    bool decaying_baseline = false;  // adds B exp(-t / tau_b)
    double frequency_guess = 0.0;    // MHz, 0 means periodogram estimate
};

// y = A exp(-t / tau) cos(2 pi f t + phi) + C [+ B exp(-t / tau_b)].
// Adds "rate_mhz" for the envelope decay.
FitResult fit_damped_sinusoid(const TimeTrace& trace, const SinusoidOptions& opts = {});

// y = A exp(-(t / tau)^2 / 2) + C. Adds "sigma_mhz" = 1 / (2 pi tau).
FitResult fit_gaussian_envelope(const TimeTrace& trace);

// Frequency (MHz) of the strongest periodogram peak of a trace.
double dominant_frequency(const TimeTrace& trace);

}  // namespace wgqed
