#pragma once

#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "wgqed/core.hpp"
#include "wgqed/fitting.hpp"
#include "wgqed/types.hpp"

namespace wgqed {

enum class DrivePort { WaveguideLeft, LocalXY };

struct DriveSpec {
    DrivePort port = DrivePort::WaveguideLeft;
    std::size_t xy_qubit = 0;
    std::optional<double> power_dbm;
    std::optional<double> omega_rabi;  // MHz
    double frequency = 0.0;            // GHz, 0 means the system's working frequency
    void validate() const;
};

// For a waveguide drive, omega_rabi (or the power) refers to the qubit with the
// largest Gamma_1D; every other qubit sees the same field scaled by its own
// coupling and propagation phase.
struct SpectrumScan {
    std::vector<double> detunings;  // MHz
    std::vector<cplx> t;
    DriveSpec drive;
    std::map<std::string, std::string> metadata;
    std::vector<std::string> warnings;

    std::size_t size() const { return detunings.size(); }
    std::vector<double> abs_sq() const;
    void validate() const;
};

// Closed-form single-qubit transmission with thermal occupation and drive.
cplx single_qubit_transmission(const QubitParams& params, double n_th, double omega_rabi, double delta);

struct PowerBound {
    double watts = 0.0;
    double dbm = 0.0;
};

// P <= hbar w_q Gamma' / 4 with Gamma' in angular units.
PowerBound saturation_power_bound(double g1d, double gprime, double f_q_ghz);

// n_th <= |t(0)| / 4, attributing all residual transmission to thermal saturation.
double thermal_bound(double t0_resonant);
double temperature_from_occupation(double f_ghz, double n_th);
double occupation_from_temperature(double f_ghz, double kelvin);

// Rabi frequency (MHz) produced on a qubit by a waveguide tone of given power.
double rabi_from_power(double g1d, double power_dbm, double f_ghz);

// Rabi frequency giving saturation parameter s = Omega^2 / (Gamma1 Gamma2).
double weak_drive_omega(const QubitParams& params, double s = 0.01);

// Steady-state transmission (waveguide port) or emitted field (XY port) of
// the full master equation over a detuning grid (drive minus working frequency).
SpectrumScan multi_qubit_transmission(const SystemSpec& spec, const DriveSpec& drive,
                                      std::span<const double> detunings);

// Reduced three-level model: t = 1 - (1 - rho_DD) Gamma_1D / (-i delta + Gamma_B / 2).
cplx shelved_transmission(double g1d, double gamma_b, double rho_dd, double delta);

// Full lambda/2 pair (no loss or dephasing) prepared in p|D><D| + (1-p)|G><G|
// and driven with Omega_B / Gamma_B = x until the bright manifold relaxes.
SpectrumScan shelved_transmission_full(double g1d, double rho_dd, double x, std::span<const double> detunings);

double pulse_bandwidth_mhz(double duration_ns);

// Convolves |t|^2 with the sinc^2 spectrum of a rectangular pulse. Output
// amplitudes are sqrt of the averaged intensity (phase is discarded).
SpectrumScan pulse_bandwidth_average(const SpectrumScan& scan, double duration_ns);

struct LorentzianFit {
    double f0 = 0.0;      // MHz
    double g1d = 0.0;     // MHz
    double gprime = 0.0;  // MHz
    double residual = 0.0;
    FitResult fit;
};

// Fits |t| of the zero-temperature weak-drive lineshape.
LorentzianFit lorentzian_fit(const SpectrumScan& scan);

// Separation (MHz) of the outermost local maxima of |t - t_background| that
// reach at least min_fraction of the largest one. Without a background the
// maxima of |t| itself are used.
double peak_separation(const SpectrumScan& scan, const SpectrumScan* background = nullptr, double min_fraction = 0.2);

}  // namespace wgqed
