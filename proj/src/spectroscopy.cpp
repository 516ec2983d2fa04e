#include "wgqed/spectroscopy.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "wgqed/lindblad.hpp"
#include "wgqed/parallel.hpp"

namespace wgqed {

namespace {

void require(bool ok, const std::string& msg) {
    if (!ok) throw InputError(msg);
}

std::size_t reference_qubit(const SystemSpec& spec) {
    std::size_t best = 0;
    for (std::size_t j = 1; j < spec.size(); ++j)
        if (spec.params(j).gamma_1d > spec.params(best).gamma_1d) best = j;
    return best;
}

double drive_frequency(const SystemSpec& spec, const DriveSpec& drive) {
    const double f = drive.frequency > 0.0 ? drive.frequency : spec.working_frequency;
    require(f > 0.0, "a drive power needs a drive frequency or a working frequency");
    return f;
}

// Field emitted into the forward direction, referenced to free propagation.
cplx forward_field(const SystemSpec& spec, const std::vector<CMatrix>& lower, const DensityMatrix& rho) {
    cplx out = 0.0;
    for (std::size_t j = 0; j < spec.size(); ++j) {
        const cplx sm = (lower[j] * rho.elements()).trace();
        out += std::sqrt(0.5 * spec.params(j).gamma_1d) * std::exp(cplx(0.0, -spec.phase(j))) * sm;
    }
    return out;
}

// Per-qubit drive terms and the normalization a_in (transmission = 1 + field / a_in)
// or the XY drive amplitude.
struct DrivePlan {
    std::vector<DriveTerm> terms;
    cplx input;  // a_in = i alpha for waveguide drives, i Omega for XY
};

DrivePlan plan_drive(const SystemSpec& spec, const DriveSpec& drive) {
    DrivePlan plan;
    if (drive.port == DrivePort::LocalXY) {
        require(drive.xy_qubit < spec.size(), "XY drive qubit out of range");
        const double omega = drive.omega_rabi ? *drive.omega_rabi
                                              : rabi_from_power(spec.params(drive.xy_qubit).gamma_1d,
                                                                *drive.power_dbm, drive_frequency(spec, drive));
        plan.terms.push_back({drive.xy_qubit, cplx(omega, 0.0)});
        plan.input = cplx(0.0, omega);
        return plan;
    }
    const std::size_t ref = reference_qubit(spec);
    const double g_ref = spec.params(ref).gamma_1d;
    require(g_ref > 0.0, "a waveguide drive needs at least one waveguide-coupled qubit");
    const double omega_ref =
        drive.omega_rabi ? *drive.omega_rabi : rabi_from_power(g_ref, *drive.power_dbm, drive_frequency(spec, drive));
    const double alpha = omega_ref / std::sqrt(2.0 * g_ref);
    for (std::size_t j = 0; j < spec.size(); ++j) {
        const double g = spec.params(j).gamma_1d;
        if (g == 0.0) continue;
        plan.terms.push_back({j, 2.0 * std::sqrt(0.5 * g) * alpha * std::exp(cplx(0.0, spec.phase(j)))});
    }
    plan.input = cplx(0.0, alpha);
    return plan;
}

}  // namespace

void DriveSpec::validate() const {
    require(power_dbm.has_value() != omega_rabi.has_value(), "set exactly one of power_dbm and omega_rabi");
    if (omega_rabi) require(std::isfinite(*omega_rabi) && *omega_rabi > 0.0, "omega_rabi must be positive");
    if (power_dbm) require(std::isfinite(*power_dbm), "power_dbm must be finite");
    require(std::isfinite(frequency) && frequency >= 0.0, "drive frequency must be >= 0");
}

std::vector<double> SpectrumScan::abs_sq() const {
    std::vector<double> out;
    out.reserve(t.size());
    for (const auto& v : t) out.push_back(std::norm(v));
    return out;
}

void SpectrumScan::validate() const {
    require(detunings.size() == t.size(), "scan detunings and values differ in length");
}

cplx single_qubit_transmission(const QubitParams& params, double n_th, double omega_rabi, double delta) {
    params.validate();
    require(std::isfinite(n_th) && n_th >= 0.0, "n_th must be >= 0");
    const double g1 = params.gamma_1();
    const double g1th = (2.0 * n_th + 1.0) * g1;
    const double g2th = 0.5 * g1th + params.gamma_phi;
    require(g2th > 0.0, "transmission undefined for a qubit with no decay");
    const double x = delta / g2th;
    const double s = omega_rabi * omega_rabi / (g1th * g2th);
    return 1.0 - params.gamma_1d / (2.0 * g2th * (2.0 * n_th + 1.0)) * cplx(1.0, x) / (1.0 + x * x + s);
}

PowerBound saturation_power_bound(double g1d, double gprime, double f_q_ghz) {
    require(g1d > 0.0 && gprime > 0.0 && f_q_ghz > 0.0, "saturation bound needs positive inputs");
    PowerBound out;
    out.watts = kPlanck * f_q_ghz * 1e9 * (kTwoPi * gprime * 1e6) / 4.0;
    out.dbm = 10.0 * std::log10(out.watts / 1e-3);
    return out;
}

double thermal_bound(double t0_resonant) {
    require(t0_resonant >= 0.0 && t0_resonant <= 1.0, "resonant transmission amplitude must lie in [0, 1]");
    return t0_resonant / 4.0;
}

double temperature_from_occupation(double f_ghz, double n_th) {
    require(f_ghz > 0.0 && n_th > 0.0, "temperature needs positive frequency and occupation");
    return kPlanck * f_ghz * 1e9 / (kBoltzmann * std::log1p(1.0 / n_th));
}

double occupation_from_temperature(double f_ghz, double kelvin) {
    require(f_ghz > 0.0 && kelvin >= 0.0, "occupation needs positive frequency and non-negative temperature");
    if (kelvin == 0.0) return 0.0;
    return 1.0 / std::expm1(kPlanck * f_ghz * 1e9 / (kBoltzmann * kelvin));
}

double rabi_from_power(double g1d, double power_dbm, double f_ghz) {
    require(g1d >= 0.0 && f_ghz > 0.0 && std::isfinite(power_dbm), "invalid drive power conversion inputs");
    const double watts = 1e-3 * std::pow(10.0, power_dbm / 10.0);
    const double omega_ang = std::sqrt(2.0 * kTwoPi * g1d * 1e6 * watts / (kPlanck * f_ghz * 1e9));
    return omega_ang / (kTwoPi * 1e6);
}

double weak_drive_omega(const QubitParams& params, double s) {
    require(s > 0.0, "saturation parameter must be positive");
    const double g1 = params.gamma_1();
    return std::sqrt(s * g1 * (0.5 * g1 + params.gamma_phi));
}

SpectrumScan multi_qubit_transmission(const SystemSpec& spec, const DriveSpec& drive,
                                      std::span<const double> detunings) {
    spec.validate();
    drive.validate();
    const DrivePlan plan = plan_drive(spec, drive);

    SpectrumScan scan;
    scan.drive = drive;
    scan.detunings.assign(detunings.begin(), detunings.end());
    scan.t.assign(detunings.size(), cplx(0.0));
    scan.metadata["qubits"] = std::to_string(spec.size());
    scan.metadata["quantity"] = drive.port == DrivePort::WaveguideLeft ? "transmission" : "emitted_field_per_drive";

    // narrowest linewidth among the collective modes this drive reaches
    const auto modes = collective_modes(spec);
    std::vector<double> reach(modes.size(), 0.0);
    for (std::size_t k = 0; k < modes.size(); ++k) {
        cplx overlap = 0.0;
        for (const auto& term : plan.terms) overlap += std::conj(modes[k].amplitudes(static_cast<Eigen::Index>(term.qubit))) * term.omega;
        reach[k] = std::abs(overlap);
    }
    const double max_reach = reach.empty() ? 0.0 : *std::max_element(reach.begin(), reach.end());
    double min_rate = 0.0;
    for (std::size_t k = 0; k < modes.size(); ++k) {
        if (reach[k] <= 1e-6 * max_reach || !(modes[k].decay_rate > 0.0)) continue;
        min_rate = min_rate == 0.0 ? modes[k].decay_rate : std::min(min_rate, modes[k].decay_rate);
    }
    for (const auto& term : plan.terms) {
        if (min_rate > 0.0 && std::abs(term.omega) > 0.3 * min_rate) {
            std::ostringstream w;
            w << "drive on qubit " << term.qubit << " (" << std::abs(term.omega)
              << " MHz) exceeds 0.3x the narrowest linewidth it drives; the response is not weak-drive";
            scan.warnings.push_back(w.str());
        }
    }

    const QubitBasis basis = QubitBasis::full(spec.size());
    std::vector<CMatrix> lower(spec.size());
    for (std::size_t j = 0; j < spec.size(); ++j) lower[j] = basis.lowering(j);

    parallel_for(detunings.size(), [&](std::size_t k) {
        ModelOptions opts;
        opts.frame = detunings[k];
        opts.drives = plan.terms;
        const DensityMatrix rho = steady_state(waveguide_model(spec, opts));
        const cplx field = forward_field(spec, lower, rho);
        scan.t[k] = drive.port == DrivePort::WaveguideLeft ? 1.0 + field / plan.input : field / plan.input;
    });
    return scan;
}

cplx shelved_transmission(double g1d, double gamma_b, double rho_dd, double delta) {
    require(rho_dd >= 0.0 && rho_dd <= 1.0, "rho_DD must lie in [0, 1]");
    require(g1d >= 0.0 && gamma_b > 0.0, "shelving model needs g1d >= 0 and gamma_b > 0");
    return 1.0 - (1.0 - rho_dd) * g1d / cplx(0.5 * gamma_b, -delta);
}

SpectrumScan shelved_transmission_full(double g1d, double rho_dd, double x, std::span<const double> detunings) {
    require(g1d > 0.0, "g1d must be positive");
    require(rho_dd >= 0.0 && rho_dd <= 1.0, "rho_DD must lie in [0, 1]");
    require(x > 0.0, "drive ratio x must be positive");

    SystemSpec pair;
    pair.qubits = {{{"m1", g1d, 0.0, 0.0}, {0.0}}, {{"m2", g1d, 0.0, 0.0}, {std::numbers::pi}}};
    DriveSpec drive;
    // Omega_B = sqrt(2) Omega_j and Gamma_B = 2 Gamma_1D
    drive.omega_rabi = std::sqrt(2.0) * x * g1d;

    const QubitBasis basis = QubitBasis::full(2);
    const CVector dark = (basis.state(0b01) + basis.state(0b10)) / std::sqrt(2.0);
    const CVector ground = basis.state(0);
    const CMatrix rho0 = rho_dd * dark * dark.adjoint() + (1.0 - rho_dd) * ground * ground.adjoint();
    const std::vector<CMatrix> lower = {basis.lowering(0), basis.lowering(1)};
    const DrivePlan plan = plan_drive(pair, drive);
    const double relax_ns = 60.0 * 1e3 / (kTwoPi * 2.0 * g1d);

    SpectrumScan scan;
    scan.drive = drive;
    scan.detunings.assign(detunings.begin(), detunings.end());
    scan.t.assign(detunings.size(), cplx(0.0));
    scan.metadata["quantity"] = "transmission";
    scan.metadata["rho_dd"] = std::to_string(rho_dd);
    parallel_for(detunings.size(), [&](std::size_t k) {
        ModelOptions opts;
        opts.frame = detunings[k];
        opts.drives = plan.terms;
        const Propagator prop(waveguide_model(pair, opts), relax_ns);
        const DensityMatrix rho(unvectorize(prop.apply(vectorize(rho0)), 4));
        scan.t[k] = 1.0 + forward_field(pair, lower, rho) / plan.input;
    });
    return scan;
}

double pulse_bandwidth_mhz(double duration_ns) {
    require(std::isfinite(duration_ns) && duration_ns > 0.0, "pulse duration must be positive");
    return 1e3 / duration_ns;
}

SpectrumScan pulse_bandwidth_average(const SpectrumScan& scan, double duration_ns) {
    scan.validate();
    const double bw = pulse_bandwidth_mhz(duration_ns);
    require(scan.size() >= 2, "bandwidth averaging needs at least two points");
    const auto& f = scan.detunings;
    for (std::size_t i = 1; i < f.size(); ++i) require(f[i] > f[i - 1], "scan detunings must increase");
    require(f.back() - f.front() >= 3.0 * bw, "scan grid is narrower than three pulse bandwidths");

    std::vector<double> w(f.size());  // trapezoid weights
    for (std::size_t i = 0; i < f.size(); ++i) {
        const double lo = i == 0 ? f[i] : 0.5 * (f[i] + f[i - 1]);
        const double hi = i + 1 == f.size() ? f[i] : 0.5 * (f[i] + f[i + 1]);
        w[i] = hi - lo;
    }
    const auto intensity = scan.abs_sq();
    SpectrumScan out = scan;
    out.metadata["averaged"] = "intensity";
    out.metadata["pulse_duration_ns"] = std::to_string(duration_ns);
    for (std::size_t k = 0; k < f.size(); ++k) {
        double num = 0.0, den = 0.0;
        for (std::size_t i = 0; i < f.size(); ++i) {
            const double u = std::numbers::pi * (f[i] - f[k]) * duration_ns * 1e-3;
            const double sinc = u == 0.0 ? 1.0 : std::sin(u) / u;
            const double weight = sinc * sinc * w[i];
            num += weight * intensity[i];
            den += weight;
        }
        out.t[k] = std::sqrt(num / den);
    }
    return out;
}

LorentzianFit lorentzian_fit(const SpectrumScan& scan) {
    scan.validate();
    require(scan.size() >= 8, "Lorentzian fit needs at least 8 points");
    const auto& f = scan.detunings;
    std::vector<double> mag(scan.size());
    for (std::size_t i = 0; i < scan.size(); ++i) mag[i] = std::abs(scan.t[i]);

    const auto imin = static_cast<std::size_t>(std::min_element(mag.begin(), mag.end()) - mag.begin());
    const double t_min = mag[imin];
    const double depth = 1.0 - t_min * t_min;
    if (depth < 1e-3) throw FitError("no resonance found in the scan");
    std::size_t lo = imin, hi = imin;
    while (lo > 0 && 1.0 - mag[lo] * mag[lo] > 0.5 * depth) --lo;
    while (hi + 1 < mag.size() && 1.0 - mag[hi] * mag[hi] > 0.5 * depth) ++hi;
    const double width = std::max(f[hi] - f[lo], 1e-9);
    require(f.back() - f.front() >= 3.0 * width, "scan must cover at least three linewidths");

    const auto m = static_cast<Eigen::Index>(scan.size());
    Residuals res = [&](const RVector& p, RVector& r) {
        const double g = std::abs(p(1)), gp = std::abs(p(2));
        const double g2 = 0.5 * (g + gp);
        for (Eigen::Index i = 0; i < m; ++i) {
            const auto k = static_cast<std::size_t>(i);
            r(i) = std::abs(1.0 - 0.5 * g / cplx(g2, -(f[k] - p(0)))) - mag[k];
        }
    };
    RVector p0(3);
    p0 << f[imin], (1.0 - t_min) * width, std::max(t_min * width, 1e-6 * width);
    LorentzianFit out;
    out.fit = least_squares(res, m, p0, {"f0_mhz", "gamma_1d_mhz", "gamma_prime_mhz"}, FitModel::Lorentzian);
    out.fit.parameters[1].value = std::abs(out.fit.parameters[1].value);
    out.fit.parameters[2].value = std::abs(out.fit.parameters[2].value);
    out.f0 = out.fit.value("f0_mhz");
    out.g1d = out.fit.value("gamma_1d_mhz");
    out.gprime = out.fit.value("gamma_prime_mhz");
    out.residual = out.fit.residual_norm;
    return out;
}

double peak_separation(const SpectrumScan& scan, const SpectrumScan* background, double min_fraction) {
    scan.validate();
    if (background) {
        require(background->size() == scan.size(), "background grid differs from the scan");
        for (std::size_t i = 0; i < scan.size(); ++i)
            require(background->detunings[i] == scan.detunings[i], "background grid differs from the scan");
    }
    std::vector<double> a(scan.size());
    for (std::size_t i = 0; i < scan.size(); ++i)
        a[i] = std::abs(background ? scan.t[i] - background->t[i] : scan.t[i]);
    const double top = *std::max_element(a.begin(), a.end());

    std::vector<double> peaks;
    const auto& f = scan.detunings;
    for (std::size_t i = 1; i + 1 < a.size(); ++i) {
        if (!(a[i] > a[i - 1] && a[i] >= a[i + 1]) || a[i] < min_fraction * top) continue;
        // vertex of the parabola through the three samples
        const double h1 = f[i] - f[i - 1], h2 = f[i + 1] - f[i];
        const double d1 = (a[i] - a[i - 1]) / h1, d2 = (a[i + 1] - a[i]) / h2;
        const double curv = (d2 - d1) / (0.5 * (h1 + h2));
        const double slope = d1 + curv * 0.5 * h1;
        peaks.push_back(curv < 0.0 ? f[i] - slope / curv : f[i]);
    }
    if (peaks.size() < 2) throw NumericalError("fewer than two peaks found in the spectrum");
    return peaks.back() - peaks.front();
}

}  // namespace wgqed
