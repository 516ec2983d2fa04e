#pragma once

#include <cstddef>
#include <optional>
#include <string>
#include <vector>

#include "wgqed/types.hpp"

namespace wgqed {

// All rates are linear frequencies in MHz (Gamma / 2pi), frequencies in GHz.
struct QubitParams {
    std::string label;
    double gamma_1d = 0.0;
    double gamma_loss = 0.0;
    double gamma_phi = 0.0;
    double f_max = 0.0;
    double f_min = 0.0;

    // Non-waveguide decoherence, Gamma' = Gamma_loss + 2 Gamma_phi.
    double gamma_prime() const { return gamma_loss + 2.0 * gamma_phi; }
    double gamma_1() const { return gamma_1d + gamma_loss; }
    void validate() const;
};

// Accumulated waveguide phase k0 * x at the working frequency.
struct Placement {
    double phase = 0.0;
};

struct Emitter {
    QubitParams params;
    Placement placement;
};

struct DirectCoupling {
    std::size_t i = 0;
    std::size_t j = 0;
    double g = 0.0;  // MHz
};

// Off-diagonal entry of the dephasing-rate matrix (Gamma_phi,jk). Diagonal
// entries come from each qubit's gamma_phi.
struct DephasingCorrelation {
    std::size_t i = 0;
    std::size_t j = 0;
    double rate = 0.0;  // MHz, may be negative
};

inline constexpr std::size_t kMaxQubits = 5;

struct SystemSpec {
    std::vector<Emitter> qubits;
    std::optional<std::size_t> probe_index;
    std::vector<DirectCoupling> direct_couplings;
    std::vector<double> detunings;  // MHz, empty means all zero
    double n_th = 0.0;
    double working_frequency = 0.0;  // GHz
    std::vector<DephasingCorrelation> dephasing_correlations;

    std::size_t size() const { return qubits.size(); }
    double detuning(std::size_t i) const { return detunings.empty() ? 0.0 : detunings.at(i); }
    const QubitParams& params(std::size_t i) const { return qubits.at(i).params; }
    double phase(std::size_t i) const { return qubits.at(i).placement.phase; }
    void validate() const;
};

struct CollectiveMode {
    CVector amplitudes;
    double decay_rate = 0.0;       // MHz
    double frequency_shift = 0.0;  // MHz
};

// Copy of the system with one qubit removed; couplings are re-indexed.
SystemSpec without_qubit(const SystemSpec& spec, std::size_t index);

// Real symmetric exchange part J_mn plus detunings and direct couplings.
RMatrix exchange_matrix(const SystemSpec& spec);
// Real symmetric dissipative part Gamma_mn including the loss diagonal.
RMatrix dissipation_matrix(const SystemSpec& spec);
// Dephasing-rate matrix Gamma_phi,jk.
RMatrix dephasing_matrix(const SystemSpec& spec);

// H_mn = J_mn - i Gamma_mn / 2 + delta_mn (Delta_m - i Gamma_loss,m / 2), MHz.
CMatrix build_effective_hamiltonian(const SystemSpec& spec);

// Sorted by decay rate, largest first.
std::vector<CollectiveMode> collective_modes(const SystemSpec& spec);

struct DarkBrightPair {
    CollectiveMode dark;
    CollectiveMode bright;
    double j_dark = 0.0;
    double j_bright = 0.0;
};

// Dark and bright states of a lambda/2 pair with unequal waveguide rates, and
// the probe's exchange rate to each.
DarkBrightPair dark_bright_asymmetric(double g1d_1, double g1d_2, double g1d_probe);

// d = |G1 - G2| / (G1 + G2)
double rate_asymmetry(double g1d_1, double g1d_2);

double coupling_rate_2j(std::size_t n_mirrors, double g1d_mirror, double g1d_probe);
double cooperativity(double two_j, double g1d_probe, double gprime_probe, double gprime_dark);
double purcell_factor(double g1d, double gprime);
double phase_mismatch_decay(double g1d, double phase);

}  // namespace wgqed
