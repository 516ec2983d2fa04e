#pragma once

#include <optional>
#include <span>
#include <variant>
#include <vector>

#include "wgqed/core.hpp"
#include "wgqed/fitting.hpp"
#include "wgqed/lindblad.hpp"
#include "wgqed/trace.hpp"

namespace wgqed {

struct LocalDrive {
    std::size_t qubit = 0;
    double omega = 0.0;  // MHz
    double phase = 0.0;  // rad
};

// Piecewise-constant interval. Detunings replace the system's own for the
// duration (empty keeps them); drives are resonant with the rotating frame.
struct Segment {
    double duration_ns = 0.0;
    std::vector<double> detunings;
    std::vector<LocalDrive> drives;
};

// Instantaneous rotation exp(-i angle/2 (cos(phase) X + sin(phase) Y)) of one qubit.
struct Rotation {
    std::size_t qubit = 0;
    double angle = 0.0;
    double phase = 0.0;
};

using SequenceStep = std::variant<Segment, Rotation>;

// Projective readout of one qubit's excited-state population.
struct Readout {
    std::size_t qubit = 0;
};

struct PulseSequence {
    std::vector<SequenceStep> steps;
    Readout readout;

    double duration_ns() const;
    void validate(std::size_t n_qubits) const;
};

// Applies a sequence to a state in the full product basis.
DensityMatrix run_sequence(const SystemSpec& spec, const PulseSequence& seq, const DensityMatrix& rho0);
double read_out(const DensityMatrix& rho, const Readout& readout, std::size_t n_qubits);

// The mirror mode the probe exchanges with: the lowest-decay collective mode
// of the non-probe qubits that has non-negligible exchange with the probe.
struct DarkMode {
    CVector amplitudes;    // over all qubits, zero on the probe
    double frequency = 0.0;  // MHz
    double decay = 0.0;      // MHz
    double two_j = 0.0;      // probe exchange, MHz
};

DarkMode probe_dark_mode(const SystemSpec& spec);
std::vector<DarkMode> mirror_modes(const SystemSpec& spec);

// Probe population after preparing |e>_p and holding the probe at the given
// detuning from the dark mode.
TimeTrace simulate_vacuum_rabi(const SystemSpec& spec, std::span<const double> taus_ns, double detuning);

// Same, with every mirror pushed far off resonance.
TimeTrace simulate_free_decay(const SystemSpec& spec, std::span<const double> taus_ns, double mirror_detuning = 2000.0);

struct SwapResult {
    PulseSequence sequence;
    DensityMatrix state;
    double swap_time_ns = 0.0;
    double dark_population = 0.0;
    double two_j = 0.0;
};

// Half a vacuum-Rabi period at the system's own detunings, starting from |e>_p.
SwapResult iswap(const SystemSpec& spec);

struct DarkDecayResult {
    TimeTrace trace;
    FitResult fit;
    double rate_mhz = 0.0;
    double time_ns = 0.0;
};

struct DarkProtocolOptions {
    double park_detuning = 200.0;       // probe detuning during the wait, MHz
    double artificial_detuning = 5.0;   // Ramsey phase advance, MHz
};

DarkDecayResult simulate_t1_dark(const SystemSpec& spec, std::span<const double> delays_ns,
                                 const DarkProtocolOptions& opts = {});
// pi/2 on the probe, swap into the dark mode, wait, swap back, pi/2 with a
// phase that advances at the artificial detuning.
DarkDecayResult simulate_ramsey_dark(const SystemSpec& spec, std::span<const double> delays_ns,
                                     const DarkProtocolOptions& opts = {});

struct TwoExcitationResult {
    TimeTrace atomic;           // second excitation added after the swap
    TimeTrace single;           // single-excitation reference
    TimeTrace cavity_first;     // linear cavity from |e, 0>
    TimeTrace cavity_second;    // linear cavity from |e, 1>
    double cavity_first_mhz = 0.0;
    double cavity_second_mhz = 0.0;
    double frequency_ratio = 0.0;
    double single_damping_mhz = 0.0;  // envelope decay of the single-excitation oscillation
    double second_damping_mhz = 0.0;  // decay of the two-excitation manifold
    double damping_ratio = 0.0;
};

TwoExcitationResult simulate_two_excitation(const SystemSpec& spec, std::span<const double> taus_ns);

// 2 Gamma_1D,p Gamma_1D / ((Gamma_1D,p + Gamma'_p)(2 Gamma_1D + Gamma'))
double second_manifold_cooperativity(double g1d_probe, double gprime_probe, double g1d, double gprime);
// (2J)^2 / (2 Gamma_1D)
double two_excitation_transfer_rate(double two_j, double g1d);

struct CompoundResult {
    TimeTrace d1;
    TimeTrace d2;
    double frequency_1 = 0.0;  // MHz
    double frequency_2 = 0.0;
    double splitting = 0.0;
    double two_j_1 = 0.0;  // from the mode
    double two_j_2 = 0.0;
};

// Probe Rabi traces against the two dark modes of a pair of compound mirrors.
CompoundResult simulate_compound_mirrors(const SystemSpec& spec, std::span<const double> taus_ns);

// Oscillation frequency (MHz) and its amplitude for the largest oscillating
// Liouvillian mode in a trace; frequency below min_frequency counts as static.
struct OscillationMode {
    double frequency = 0.0;
    double decay = 0.0;
    double amplitude = 0.0;
};

OscillationMode dominant_oscillation(const CMatrix& liouvillian, const CMatrix& observable, const CMatrix& rho0,
                                     double min_frequency = 0.05);

}  // namespace wgqed
