#pragma once

#include <string>
#include <vector>

#include "wgqed/types.hpp"

namespace wgqed {

// Asymmetric-SQUID transmon, energies in GHz.
struct TransmonModel {
    double ej1 = 0.0;
    double ej2 = 0.0;
    double ec = 0.0;

    double asymmetry() const { return (ej1 - ej2) / (ej1 + ej2); }
    void validate() const;
};

// f01 in GHz; flux in units of the flux quantum.
double transmon_frequency(const TransmonModel& model, double flux);

// chi = g^2 eta / (Delta (Delta + eta)); g and eta in MHz, delta in GHz, result in MHz.
double dispersive_shift(double g_mhz, double delta_ghz, double eta_mhz);

// Linearized flux crosstalk f = f0 + M (v - v0), M in GHz/V.
struct CrosstalkMatrix {
    RMatrix m;
    RVector f0;  // GHz
    RVector v0;  // V

    void validate() const;
    double condition_number() const;
    RVector frequencies(const RVector& v) const;

    // {"m": [row-major, n*n numbers], "f0": [GHz...], "v0": [V...]}
    static CrosstalkMatrix from_json_text(const std::string& text);
    static CrosstalkMatrix load(const std::string& path);
};

struct BiasSolution {
    RVector v;
    std::vector<std::string> warnings;
};

// Targets further than 100 MHz from f0 are solved anyway, with a warning.
BiasSolution crosstalk_bias(const CrosstalkMatrix& ct, const RVector& f_target);

struct ReadoutResonator {
    double f_r = 0.0;  // GHz
    double g = 0.0;    // MHz
    double qi = 0.0;
    double qe = 0.0;

    void validate() const;
};

// Order-of-magnitude estimate (g/Delta)^2 kappa_e with kappa_e = f_r / Q_e, in kHz.
double resonator_purcell_estimate(const ReadoutResonator& res, double f_q);

}  // namespace wgqed
