#include "wgqed/core.hpp"

#include <algorithm>
#include <cmath>
#include <set>
#include <utility>

#include <Eigen/Eigenvalues>

namespace wgqed {

namespace {

void require(bool ok, const std::string& msg) {
    if (!ok) throw InputError(msg);
}

bool finite_nonneg(double x) { return std::isfinite(x) && x >= 0.0; }

}  // namespace

void QubitParams::validate() const {
    const std::string who = label.empty() ? "qubit" : label;
    require(finite_nonneg(gamma_1d), who + ": gamma_1d must be finite and >= 0");
    require(finite_nonneg(gamma_loss), who + ": gamma_loss must be finite and >= 0");
    require(finite_nonneg(gamma_phi), who + ": gamma_phi must be finite and >= 0");
    require(std::isfinite(f_max) && std::isfinite(f_min), who + ": non-finite frequency range");
    require(f_min <= f_max, who + ": f_min exceeds f_max");
}

void SystemSpec::validate() const {
    const std::size_t n = qubits.size();
    require(n >= 1, "system needs at least one qubit");
    require(n <= kMaxQubits, "at most " + std::to_string(kMaxQubits) + " qubits are supported");
    for (const auto& q : qubits) {
        q.params.validate();
        require(std::isfinite(q.placement.phase), "non-finite phase for " + q.params.label);
    }
    if (probe_index) require(*probe_index < n, "probe_index out of range");
    require(detunings.empty() || detunings.size() == n, "detunings must list one value per qubit");
    for (double d : detunings) require(std::isfinite(d), "non-finite detuning");
    require(finite_nonneg(n_th), "n_th must be finite and >= 0");
    require(std::isfinite(working_frequency) && working_frequency >= 0.0, "bad working_frequency");

    std::set<std::pair<std::size_t, std::size_t>> seen;
    for (const auto& c : direct_couplings) {
        require(c.i < n && c.j < n, "direct coupling index out of range");
        require(c.i != c.j, "direct coupling must join two different qubits");
        require(std::isfinite(c.g), "non-finite direct coupling");
        require(seen.insert(std::minmax(c.i, c.j)).second, "duplicate direct coupling");
    }
    seen.clear();
    for (const auto& c : dephasing_correlations) {
        require(c.i < n && c.j < n, "dephasing correlation index out of range");
        require(c.i != c.j, "dephasing correlation must join two different qubits");
        require(std::isfinite(c.rate), "non-finite dephasing correlation");
        require(seen.insert(std::minmax(c.i, c.j)).second, "duplicate dephasing correlation");
    }
}

SystemSpec without_qubit(const SystemSpec& spec, std::size_t index) {
    spec.validate();
    require(index < spec.size(), "qubit index out of range");
    require(spec.size() > 1, "cannot remove the only qubit");
    auto shift = [index](std::size_t k) { return k > index ? k - 1 : k; };
    SystemSpec out = spec;
    out.qubits.erase(out.qubits.begin() + static_cast<std::ptrdiff_t>(index));
    if (!out.detunings.empty()) out.detunings.erase(out.detunings.begin() + static_cast<std::ptrdiff_t>(index));
    if (spec.probe_index) {
        if (*spec.probe_index == index)
            out.probe_index.reset();
        else
            out.probe_index = shift(*spec.probe_index);
    }
    out.direct_couplings.clear();
    for (auto c : spec.direct_couplings)
        if (c.i != index && c.j != index) out.direct_couplings.push_back({shift(c.i), shift(c.j), c.g});
    out.dephasing_correlations.clear();
    for (auto c : spec.dephasing_correlations)
        if (c.i != index && c.j != index) out.dephasing_correlations.push_back({shift(c.i), shift(c.j), c.rate});
    return out;
}

RMatrix exchange_matrix(const SystemSpec& spec) {
    spec.validate();
    const auto n = static_cast<Eigen::Index>(spec.size());
    RMatrix j = RMatrix::Zero(n, n);
    for (Eigen::Index m = 0; m < n; ++m) {
        j(m, m) = spec.detuning(m);
        for (Eigen::Index k = 0; k < n; ++k) {
            if (k == m) continue;
            const double gm = std::sqrt(spec.params(m).gamma_1d * spec.params(k).gamma_1d);
            j(m, k) = 0.5 * gm * std::sin(std::abs(spec.phase(m) - spec.phase(k)));
        }
    }
    for (const auto& c : spec.direct_couplings) {
        j(c.i, c.j) += c.g;
        j(c.j, c.i) += c.g;
    }
    return j;
}

RMatrix dissipation_matrix(const SystemSpec& spec) {
    spec.validate();
    const auto n = static_cast<Eigen::Index>(spec.size());
    RMatrix g(n, n);
    for (Eigen::Index m = 0; m < n; ++m) {
        for (Eigen::Index k = 0; k < n; ++k) {
            const double gm = std::sqrt(spec.params(m).gamma_1d * spec.params(k).gamma_1d);
            g(m, k) = gm * std::cos(std::abs(spec.phase(m) - spec.phase(k)));
        }
        g(m, m) = spec.params(m).gamma_1d + spec.params(m).gamma_loss;
    }
    return g;
}

RMatrix dephasing_matrix(const SystemSpec& spec) {
    spec.validate();
    const auto n = static_cast<Eigen::Index>(spec.size());
    RMatrix d = RMatrix::Zero(n, n);
    for (Eigen::Index m = 0; m < n; ++m) d(m, m) = spec.params(m).gamma_phi;
    for (const auto& c : spec.dephasing_correlations) {
        d(c.i, c.j) = c.rate;
        d(c.j, c.i) = c.rate;
    }
    return d;
}

CMatrix build_effective_hamiltonian(const SystemSpec& spec) {
    const RMatrix j = exchange_matrix(spec);
    const RMatrix g = dissipation_matrix(spec);
    return j.cast<cplx>() - cplx(0.0, 0.5) * g.cast<cplx>();
}

std::vector<CollectiveMode> collective_modes(const SystemSpec& spec) {
    const CMatrix h = build_effective_hamiltonian(spec);
    Eigen::ComplexEigenSolver<CMatrix> es(h);
    if (es.info() != Eigen::Success) throw NumericalError("eigendecomposition of H_eff failed");

    std::vector<CollectiveMode> modes;
    for (Eigen::Index k = 0; k < h.rows(); ++k) {
        CollectiveMode mode;
        mode.amplitudes = es.eigenvectors().col(k).normalized();
        mode.decay_rate = -2.0 * es.eigenvalues()(k).imag();
        if (std::abs(mode.decay_rate) < 1e-9) mode.decay_rate = 0.0;
        mode.frequency_shift = es.eigenvalues()(k).real();
        modes.push_back(std::move(mode));
    }
    std::stable_sort(modes.begin(), modes.end(),
                     [](const CollectiveMode& a, const CollectiveMode& b) { return a.decay_rate > b.decay_rate; });
    return modes;
}

DarkBrightPair dark_bright_asymmetric(double g1d_1, double g1d_2, double g1d_probe) {
    require(std::isfinite(g1d_1) && std::isfinite(g1d_2) && g1d_1 > 0.0 && g1d_2 > 0.0,
            "dark/bright decomposition needs two positive waveguide rates");
    require(finite_nonneg(g1d_probe), "probe rate must be finite and >= 0");

    const double sum = g1d_1 + g1d_2;
    const double norm = std::sqrt(sum);
    DarkBrightPair out;
    out.dark.amplitudes = CVector(2);
    out.dark.amplitudes << std::sqrt(g1d_2) / norm, std::sqrt(g1d_1) / norm;
    out.dark.decay_rate = 0.0;
    out.bright.amplitudes = CVector(2);
    out.bright.amplitudes << std::sqrt(g1d_1) / norm, -std::sqrt(g1d_2) / norm;
    out.bright.decay_rate = sum;
    out.j_dark = std::sqrt(g1d_probe * g1d_1 * g1d_2) / norm;
    out.j_bright = std::sqrt(g1d_probe) * (g1d_1 - g1d_2) / (2.0 * norm);
    return out;
}

double rate_asymmetry(double g1d_1, double g1d_2) {
    require(g1d_1 + g1d_2 > 0.0, "asymmetry undefined for two zero rates");
    return std::abs(g1d_1 - g1d_2) / (g1d_1 + g1d_2);
}

double coupling_rate_2j(std::size_t n_mirrors, double g1d_mirror, double g1d_probe) {
    require(finite_nonneg(g1d_mirror) && finite_nonneg(g1d_probe), "rates must be finite and >= 0");
    return std::sqrt(static_cast<double>(n_mirrors) * g1d_mirror * g1d_probe);
}

double cooperativity(double two_j, double g1d_probe, double gprime_probe, double gprime_dark) {
    const double denom = (g1d_probe + gprime_probe) * gprime_dark;
    require(std::isfinite(denom) && denom > 0.0, "cooperativity denominator must be positive");
    return two_j * two_j / denom;
}

double purcell_factor(double g1d, double gprime) {
    require(std::isfinite(gprime) && gprime > 0.0, "Purcell factor needs gprime > 0");
    return g1d / gprime;
}

double phase_mismatch_decay(double g1d, double phase) {
    require(finite_nonneg(g1d), "g1d must be finite and >= 0");
    require(std::isfinite(phase), "non-finite phase");
    return g1d * (1.0 - std::abs(std::cos(phase)));
}

}  // namespace wgqed
