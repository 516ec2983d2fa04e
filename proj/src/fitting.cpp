#include "wgqed/fitting.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <optional>

#include <unsupported/Eigen/LevenbergMarquardt>

namespace wgqed {

std::string to_string(FitModel model) {
    switch (model) {
        case FitModel::Exponential: return "exponential";
        case FitModel::DampedSinusoid: return "damped-sinusoid";
        case FitModel::GaussianEnvelope: return "gaussian-envelope";
        case FitModel::Lorentzian: return "lorentzian";
    }
    return "unknown";
}

namespace {

const FitParameter* find_param(const FitResult& r, const std::string& name) {
    for (const auto& p : r.parameters)
        if (p.name == name) return &p;
    return nullptr;
}

// Central differences with a step floored by the parameter's starting
// magnitude, so a parameter that converges to ~0 keeps a usable derivative.
struct ResidualFunctor : Eigen::DenseFunctor<double> {
    ResidualFunctor(const Residuals& f, const RVector& start, int n_res)
        : DenseFunctor(static_cast<int>(start.size()), n_res), fn(&f), floor(start.size()) {
        const double big = start.cwiseAbs().maxCoeff();
        for (Eigen::Index k = 0; k < start.size(); ++k) floor(k) = std::max({std::abs(start(k)), 1e-3 * big, 1e-12});
    }
    int operator()(const InputType& x, ValueType& fvec) const {
        (*fn)(x, fvec);
        for (Eigen::Index i = 0; i < fvec.size(); ++i)
            if (!std::isfinite(fvec(i))) fvec(i) = 1e6;
        return 0;
    }
    int df(const InputType& x, JacobianType& jac) const {
        ValueType up(values()), down(values());
        InputType xp = x;
        for (Eigen::Index k = 0; k < x.size(); ++k) {
            const double h = 1e-6 * std::max(std::abs(x(k)), floor(k));
            xp(k) = x(k) + h;
            (*this)(xp, up);
            xp(k) = x(k) - h;
            (*this)(xp, down);
            xp(k) = x(k);
            jac.col(k) = (up - down) / (2.0 * h);
        }
        return 0;
    }
    const Residuals* fn;
    RVector floor;
};

}  // namespace

double FitResult::value(const std::string& name) const {
    if (auto* p = find_param(*this, name)) return p->value;
    throw InputError("fit has no parameter '" + name + "'");
}

double FitResult::sigma(const std::string& name) const {
    if (auto* p = find_param(*this, name)) return p->sigma;
    throw InputError("fit has no parameter '" + name + "'");
}

bool FitResult::has(const std::string& name) const { return find_param(*this, name) != nullptr; }

FitResult least_squares(const Residuals& residuals, Eigen::Index n_residuals, const RVector& start,
                        const std::vector<std::string>& names, FitModel model) {
    const auto n = start.size();
    if (static_cast<Eigen::Index>(names.size()) != n) throw InputError("parameter name count mismatch");
    if (n_residuals < n) throw InputError("fewer data points than parameters");

    ResidualFunctor functor(residuals, start, static_cast<int>(n_residuals));
    Eigen::LevenbergMarquardt<ResidualFunctor> lm(functor);
    lm.setXtol(1e-13);
    lm.setFtol(1e-13);
    lm.setMaxfev(static_cast<Eigen::Index>(400 * (n + 1)));

    RVector x = start;
    const auto status = lm.minimize(x);

    FitResult out;
    out.model = model;
    out.evaluations = static_cast<int>(lm.nfev());
    RVector r(n_residuals);
    residuals(x, r);
    out.residual_norm = r.norm();
    for (Eigen::Index k = 0; k < n; ++k) out.parameters.push_back({names[static_cast<std::size_t>(k)], x(k), 0.0});

    if (status == Eigen::LevenbergMarquardtSpace::ImproperInputParameters)
        throw FitError("fit rejected its input parameters", out);
    if (status == Eigen::LevenbergMarquardtSpace::TooManyFunctionEvaluation)
        throw FitError("fit did not converge within " + std::to_string(lm.nfev()) + " evaluations", out);
    if (!x.allFinite() || !std::isfinite(out.residual_norm)) throw FitError("fit diverged", out);

    RMatrix jac(n_residuals, n);
    functor.df(x, jac);
    const RMatrix jtj = jac.transpose() * jac;
    Eigen::ColPivHouseholderQR<RMatrix> qr(jtj);
    qr.setThreshold(1e-14);
    if (qr.rank() < n) throw FitError("fit parameters are not identifiable from the data", out);
    const double dof = static_cast<double>(std::max<Eigen::Index>(1, n_residuals - n));
    const RMatrix cov = (out.residual_norm * out.residual_norm / dof) * qr.inverse();
    for (Eigen::Index k = 0; k < n; ++k) out.parameters[static_cast<std::size_t>(k)].sigma = std::sqrt(std::max(0.0, cov(k, k)));
    return out;
}

namespace {

void check_trace(const TimeTrace& trace, std::size_t min_points) {
    trace.validate();
    if (trace.size() < min_points)
        throw InputError("fit needs at least " + std::to_string(min_points) + " points");
}

double tail_mean(const std::vector<double>& v, double fraction) {
    const std::size_t k = std::max<std::size_t>(1, static_cast<std::size_t>(fraction * static_cast<double>(v.size())));
    return std::accumulate(v.end() - static_cast<std::ptrdiff_t>(k), v.end(), 0.0) / static_cast<double>(k);
}

double span_of(const TimeTrace& t) { return t.times.back() - t.times.front(); }

// Time after which |y - c| first drops below level * |y0 - c|.
double crossing_time(const TimeTrace& t, double c, double level) {
    const double a0 = std::abs(t.values.front() - c);
    for (std::size_t i = 0; i < t.size(); ++i)
        if (std::abs(t.values[i] - c) < level * a0) return std::max(t.times[i] - t.times.front(), 1e-9);
    return span_of(t);
}

std::optional<FitResult> best_of(std::optional<FitResult> a, std::optional<FitResult> b) {
    if (!a) return b;
    if (!b) return a;
    return a->residual_norm <= b->residual_norm ? a : b;
}

void add_rate(FitResult& r, const std::string& tau_name, const std::string& rate_name) {
    const double tau = r.value(tau_name);
    const double rate = 1e3 / (kTwoPi * tau);
    r.parameters.push_back({rate_name, rate, rate * r.sigma(tau_name) / tau});
}

// Residual of a least-squares quadratic trend, used before the periodogram.
std::vector<double> detrended(const TimeTrace& t) {
    const auto n = static_cast<Eigen::Index>(t.size());
    RMatrix a(n, 3);
    RVector y(n);
    const double t0 = t.times.front(), s = std::max(span_of(t), 1e-12);
    for (Eigen::Index i = 0; i < n; ++i) {
        const double u = (t.times[static_cast<std::size_t>(i)] - t0) / s;
        a(i, 0) = 1.0;
        a(i, 1) = u;
        a(i, 2) = u * u;
        y(i) = t.values[static_cast<std::size_t>(i)];
    }
    const RVector c = a.colPivHouseholderQr().solve(y);
    const RVector r = y - a * c;
    return {r.data(), r.data() + r.size()};
}

cplx fourier(const TimeTrace& t, const std::vector<double>& y, double f_mhz) {
    cplx acc = 0.0;
    for (std::size_t i = 0; i < t.size(); ++i) acc += y[i] * std::exp(cplx(0.0, -kTwoPi * f_mhz * 1e-3 * t.times[i]));
    return acc;
}

}  // namespace

double dominant_frequency(const TimeTrace& trace) {
    check_trace(trace, 8);
    const double span = span_of(trace);
    std::vector<double> gaps(trace.size() - 1);
    for (std::size_t i = 1; i < trace.size(); ++i) gaps[i - 1] = trace.times[i] - trace.times[i - 1];
    std::nth_element(gaps.begin(), gaps.begin() + static_cast<std::ptrdiff_t>(gaps.size() / 2), gaps.end());
    const double dt = gaps[gaps.size() / 2];
    const double f_lo = 1.5e3 / span, f_hi = 0.5e3 / dt;
    if (!(f_hi > f_lo)) throw InputError("trace too short for a frequency estimate");

    const auto y = detrended(trace);
    const std::size_t n_grid = 8 * trace.size();
    double best_f = f_lo, best_p = -1.0;
    for (std::size_t k = 0; k <= n_grid; ++k) {
        const double f = f_lo + (f_hi - f_lo) * static_cast<double>(k) / static_cast<double>(n_grid);
        const double p = std::norm(fourier(trace, y, f));
        if (p > best_p) best_p = p, best_f = f;
    }
    // golden-section polish inside one grid cell either side
    const double cell = (f_hi - f_lo) / static_cast<double>(n_grid);
    double lo = std::max(f_lo, best_f - cell), hi = std::min(f_hi, best_f + cell);
    const double g = 0.5 * (std::sqrt(5.0) - 1.0);
    for (int it = 0; it < 60; ++it) {
        const double m1 = hi - g * (hi - lo), m2 = lo + g * (hi - lo);
        if (std::norm(fourier(trace, y, m1)) > std::norm(fourier(trace, y, m2)))
            hi = m2;
        else
            lo = m1;
    }
    return 0.5 * (lo + hi);
}

FitResult fit_exponential(const TimeTrace& trace) {
    check_trace(trace, 8);
    const auto& t = trace.times;
    const auto& y = trace.values;
    const auto [lo, hi] = std::minmax_element(y.begin(), y.end());
    const double scale = std::max(1.0, std::max(std::abs(*lo), std::abs(*hi)));
    if (*hi - *lo < 1e-9 * scale) throw FitError("exponential rate unidentifiable: trace is flat");

    const auto m = static_cast<Eigen::Index>(trace.size());
    const double t0 = t.front();
    Residuals res = [&](const RVector& p, RVector& r) {
        for (Eigen::Index i = 0; i < m; ++i) {
            const auto k = static_cast<std::size_t>(i);
            r(i) = p(0) * std::exp(-(t[k] - t0) / p(1)) + p(2) - y[k];
        }
    };
    const double c0 = tail_mean(y, 0.1);
    const double tau_e = crossing_time(trace, c0, std::exp(-1.0));
    const double span = span_of(trace);
    std::optional<FitResult> best;
    for (double tau0 : {tau_e, span / 5.0, span}) {
        RVector p0(3);
        p0 << y.front() - c0, tau0, c0;
        try {
            auto r = least_squares(res, m, p0, {"amplitude", "tau_ns", "offset"}, FitModel::Exponential);
            if (r.value("tau_ns") > 0.0) best = best_of(best, r);
        } catch (const FitError&) {
        }
    }
    if (!best) throw FitError("exponential fit did not converge");
    // amplitude referenced to t = 0 rather than the first sample
    if (t0 != 0.0) {
        auto& a = best->parameters[0];
        const double f = std::exp(t0 / best->value("tau_ns"));
        a.value *= f;
        a.sigma *= f;
    }
    add_rate(*best, "tau_ns", "rate_mhz");
    return *best;
}

FitResult fit_damped_sinusoid(const TimeTrace& trace, const SinusoidOptions& opts) {
    check_trace(trace, 8);
    const auto& t = trace.times;
    const auto& y = trace.values;
    const double span = span_of(trace);
    const double f0 = opts.frequency_guess > 0.0 ? opts.frequency_guess : dominant_frequency(trace);
    if (f0 * span * 1e-3 < 2.0) throw FitError("fewer than two visible periods in the trace");

    const auto m = static_cast<Eigen::Index>(trace.size());
    const bool base = opts.decaying_baseline;
    Residuals res = [&](const RVector& p, RVector& r) {
        for (Eigen::Index i = 0; i < m; ++i) {
            const auto k = static_cast<std::size_t>(i);
            double v = p(0) * std::exp(-t[k] / p(1)) * std::cos(kTwoPi * p(2) * 1e-3 * t[k] + p(3)) + p(4);
            if (base) v += p(5) * std::exp(-t[k] / p(6));
            r(i) = v - y[k];
        }
    };

    const auto yd = detrended(trace);
    const cplx ft = fourier(trace, yd, f0);
    const double amp0 = 0.5 * (*std::max_element(yd.begin(), yd.end()) - *std::min_element(yd.begin(), yd.end()));
    const double c0 = tail_mean(y, 0.2);
    std::vector<std::string> names = {"amplitude", "tau_ns", "frequency_mhz", "phase", "offset"};
    if (base) names.insert(names.end(), {"baseline_amplitude", "baseline_tau_ns"});

    std::optional<FitResult> best;
    for (double tau0 : {span / 2.0, span / 8.0, 2.0 * span}) {
        for (double phase_shift : {0.0, std::numbers::pi}) {
            RVector p0(base ? 7 : 5);
            const double phi0 = std::arg(ft) + phase_shift;
            const double a0 = phase_shift == 0.0 ? amp0 : -amp0;
            p0(0) = a0;
            p0(1) = tau0;
            p0(2) = f0;
            p0(3) = phi0;
            p0(4) = c0;
            if (base) {
                p0(5) = y.front() - c0 - a0 * std::cos(phi0);
                p0(6) = span / 3.0;
            }
            try {
                auto r = least_squares(res, m, p0, names, FitModel::DampedSinusoid);
                if (r.value("tau_ns") > 0.0 && (!base || r.value("baseline_tau_ns") > 0.0)) best = best_of(best, r);
            } catch (const FitError&) {
            }
        }
    }
    if (!best) throw FitError("damped-sinusoid fit did not converge");

    auto& p = best->parameters;
    if (p[2].value < 0.0) {  // cos is even: flip frequency and phase together
        p[2].value = -p[2].value;
        p[3].value = -p[3].value;
    }
    if (p[0].value < 0.0) {
        p[0].value = -p[0].value;
        p[3].value += std::numbers::pi;
    }
    p[3].value = std::remainder(p[3].value, kTwoPi);
    if (p[2].value * span * 1e-3 < 2.0) throw FitError("fitted oscillation shows fewer than two periods", *best);
    add_rate(*best, "tau_ns", "rate_mhz");
    return *best;
}

FitResult fit_gaussian_envelope(const TimeTrace& trace) {
    check_trace(trace, 8);
    const auto& t = trace.times;
    const auto& y = trace.values;
    const auto [lo, hi] = std::minmax_element(y.begin(), y.end());
    if (*hi - *lo < 1e-9 * std::max(1.0, std::abs(*hi))) throw FitError("Gaussian width unidentifiable: trace is flat");
    const auto m = static_cast<Eigen::Index>(trace.size());
    Residuals res = [&](const RVector& p, RVector& r) {
        for (Eigen::Index i = 0; i < m; ++i) {
            const auto k = static_cast<std::size_t>(i);
            const double u = t[k] / p(1);
            r(i) = p(0) * std::exp(-0.5 * u * u) + p(2) - y[k];
        }
    };
    const double c0 = tail_mean(y, 0.1);
    std::optional<FitResult> best;
    for (double tau0 : {crossing_time(trace, c0, std::exp(-0.5)), span_of(trace) / 3.0}) {
        RVector p0(3);
        p0 << y.front() - c0, tau0, c0;
        try {
            best = best_of(best, least_squares(res, m, p0, {"amplitude", "tau_ns", "offset"}, FitModel::GaussianEnvelope));
        } catch (const FitError&) {
        }
    }
    if (!best) throw FitError("Gaussian-envelope fit did not converge");
    best->parameters[1].value = std::abs(best->parameters[1].value);
    add_rate(*best, "tau_ns", "sigma_mhz");
    return *best;
}

}  // namespace wgqed
