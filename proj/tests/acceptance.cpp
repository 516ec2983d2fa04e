// One PASS/FAIL line per acceptance criterion; exits nonzero if any fails.
#include <cmath>
#include <cstdio>
#include <functional>
#include <numbers>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include <Eigen/Eigenvalues>

#include "wgqed/calibration.hpp"
#include "wgqed/experiment.hpp"
#include "wgqed/lindblad.hpp"
#include "wgqed/protocols.hpp"
#include "wgqed/spectroscopy.hpp"

using namespace wgqed;

namespace {

constexpr double pi = std::numbers::pi;

struct Check {
    bool ok = true;
    std::ostringstream detail;

    // relative tolerance against a reference value
    void rel(const std::string& what, double value, double ref, double tol) {
        const double err = std::abs(value - ref) / std::abs(ref);
        ok = ok && err <= tol;
        detail << "; " << what << " " << value << " vs " << ref << " (" << 100.0 * err << "% <= " << 100.0 * tol << "%)";
    }
    void abs(const std::string& what, double value, double ref, double tol) {
        const double err = std::abs(value - ref);
        ok = ok && err <= tol;
        detail << "; " << what << " " << value << " vs " << ref << " (|d| " << err << " <= " << tol << ")";
    }
    void that(const std::string& what, bool cond) {
        ok = ok && cond;
        detail << "; " << what << (cond ? " yes" : " NO");
    }
};

int failures = 0;

void report(int id, const std::string& name, const std::function<void(Check&)>& body) {
    Check c;
    try {
        body(c);
    } catch (const std::exception& e) {
        c.ok = false;
        c.detail << "; threw: " << e.what();
    }
    if (!c.ok) ++failures;
    std::printf("%s %2d %s%s\n", c.ok ? "PASS" : "FAIL", id, name.c_str(), c.detail.str().c_str());
    std::fflush(stdout);
}

Json run(const std::string& name) {
    RunOptions opts;
    opts.write_files = false;
    const std::string dir = WGQED_CONFIG_DIR;
    return execute(load_config(dir + "/" + name + ".cfg"), opts, dir).summary;
}

double num(const Json& j, const char* key) { return j.at(key).get<double>(); }

Emitter emitter(double g1d, double phase, double loss = 0.0, double gphi = 0.0) {
    Emitter e;
    e.params.gamma_1d = g1d;
    e.params.gamma_loss = loss;
    e.params.gamma_phi = gphi;
    e.placement.phase = phase;
    return e;
}

CMatrix random_matrix(std::mt19937_64& rng, Eigen::Index d) {
    std::normal_distribution<double> n(0.0, 1.0);
    CMatrix m(d, d);
    for (Eigen::Index i = 0; i < d; ++i)
        for (Eigen::Index j = 0; j < d; ++j) m(i, j) = cplx(n(rng), n(rng));
    return m;
}

}  // namespace

int main() {
    report(1, "coupling rate 2J", [](Check& c) {
        c.rel("type-I", coupling_rate_2j(2, 13.4, 1.19), 5.64, 0.01);
        c.rel("type-II", coupling_rate_2j(2, 96.7, 0.87), 13.0, 0.01);
    });

    report(2, "extinction and probe Purcell factor", [](Check& c) {
        QubitParams q1;
        q1.gamma_1d = 94.1;
        q1.gamma_loss = 0.0065;
        q1.gamma_phi = 0.5 * (0.43 - 0.0065);
        c.rel("|t(0)|^2", std::norm(single_qubit_transmission(q1, 0.0, 0.0, 0.0)), 2e-5, 0.05);
        c.rel("P1D from the fitted Q4 scan", num(run("extinction_q4"), "fit_purcell"), 11.0, 0.05);
    });

    report(3, "thermal chain", [](Check& c) {
        const Json s = run("calib_q4");
        c.rel("n_th bound", num(s, "n_th_bound"), 1.1e-3, 0.05);
        c.rel("T [mK]", num(s, "temperature_mk"), 43.0, 0.05);
    });

    report(4, "vacuum Rabi trace", [](Check& c) {
        const Json s = run("rabi_type1");
        c.rel("frequency [MHz]", num(s, "frequency_mhz"), std::hypot(coupling_rate_2j(2, 13.4, 1.19), 1.0), 0.01);
        c.rel("free decay [MHz]", num(s, "free_decay_rate_mhz"), 1.19, 0.02);
    });

    report(5, "dark-state lifetimes", [](Check& c) {
        c.rel("T1 type-I [ns]", num(run("t1_dark_type1"), "t1_ns"), 757.0, 0.1);
        c.rel("T2 type-I [ns]", num(run("ramsey_dark_type1"), "t2_ns"), 435.0, 0.1);
        c.rel("T1 type-II [ns]", num(run("t1_dark_type2"), "t1_ns"), 274.0, 0.1);
        c.rel("T2 type-II [ns]", num(run("ramsey_dark_type2"), "t2_ns"), 191.0, 0.1);
    });

    report(6, "cooperativity", [](Check& c) {
        c.rel("type-I", cooperativity(coupling_rate_2j(2, 13.4, 1.19), 1.19, 0.0065 + 2 * 0.191, 0.210), 94.0, 0.15);
        c.rel("type-II", cooperativity(coupling_rate_2j(2, 96.7, 0.87), 0.87, 0.0065 + 2 * 0.332, 0.581), 172.0, 0.15);
    });

    report(7, "shelving", [](Check& c) {
        const double g = 13.4;
        const double empty = std::norm(shelved_transmission(g, 2 * g, 0.0, 0.0));
        const double shelved = std::norm(shelved_transmission(g, 2 * g, 0.58, 0.0));
        c.abs("|t(0)|^2 empty", empty, 0.0, 1e-12);
        c.abs("|t(0)|^2 shelved", shelved, 0.58 * 0.58, 1e-12);
        const double x = 0.15;
        std::vector<double> dets;
        for (int k = 0; k <= 80; ++k) dets.push_back(-40.0 + k);
        double worst = 0.0;
        for (double rho : {0.0, 0.58}) {
            const auto full = shelved_transmission_full(g, rho, x, dets);
            for (std::size_t k = 0; k < dets.size(); ++k)
                worst = std::max(worst, std::abs(full.t[k] - shelved_transmission(g, 2 * g, rho, dets[k])));
        }
        c.that("full vs reduced " + std::to_string(worst) + " <= 2x^2 = " + std::to_string(2 * x * x), worst <= 2 * x * x);
    });

    report(8, "Fano splitting", [](Check& c) {
        c.rel("peak separation [MHz]", num(run("fano_type1"), "peak_separation_mhz"), coupling_rate_2j(2, 13.4, 1.19),
              0.05);
    });

    report(9, "compound mirrors", [](Check& c) {
        const Json s = run("compound_pair");
        c.rel("dark-pair splitting [MHz]", num(s, "splitting_mhz"), std::hypot(2 * 46.0, 88.0), 0.01);
        c.rel("2J dark row [MHz]", num(run("rabi_compound_dark"), "two_j_fit_mhz"), 3.20, 0.02);
        c.rel("2J bright row [MHz]", num(run("rabi_compound_bright"), "two_j_fit_mhz"), 6.93, 0.02);
    });

    report(10, "two-excitation", [](Check& c) {
        std::mt19937_64 rng(10);
        std::uniform_real_distribution<double> u(-6.0, 3.0);
        bool below = true;
        for (int k = 0; k < 1000; ++k)
            below = below && second_manifold_cooperativity(std::pow(10.0, u(rng)), std::pow(10.0, u(rng)),
                                                           std::pow(10.0, u(rng)), std::pow(10.0, u(rng))) < 1.0;
        c.that("second-manifold C < 1 over 1000 draws", below);
        c.rel("cavity frequency ratio", num(run("two_excitation"), "frequency_ratio"), std::sqrt(2.0), 0.01);
    });

    report(11, "calibration", [](Check& c) {
        c.rel("chi [MHz]", dispersive_shift(116.0, 6.638 - 5.156, -272.0), -2.05, 0.02);
        const TransmonModel q4{18.4, 3.5, 0.272};
        c.rel("f_max [GHz]", transmon_frequency(q4, 0.0), 6.638, 0.01);
        c.rel("f_min [GHz]", transmon_frequency(q4, 0.5), 5.431, 0.01);
        std::mt19937_64 rng(11);
        std::normal_distribution<double> n(0.0, 1.0);
        double worst = 0.0;
        for (int k = 0; k < 100; ++k) {
            CrosstalkMatrix ct;
            ct.m = RMatrix::Identity(3, 3) * 0.5;
            for (int i = 0; i < 3; ++i)
                for (int j = 0; j < 3; ++j) ct.m(i, j) += 0.1 * n(rng);
            ct.f0 = RVector::Constant(3, 6.6);
            ct.v0 = RVector::Zero(3);
            RVector target(3);
            for (int i = 0; i < 3; ++i) target(i) = 6.6 + 0.05 * n(rng);
            worst = std::max(worst, (ct.frequencies(crosstalk_bias(ct, target).v) - target).cwiseAbs().maxCoeff());
        }
        c.abs("crosstalk round trip [GHz]", worst, 0.0, 1e-9);
    });

    report(12, "oracle suites", [](Check& c) {
        // 50 random Lindblad models
        std::mt19937_64 rng(12);
        std::uniform_int_distribution<int> dims(2, 6), nops(1, 4);
        std::uniform_real_distribution<double> rate(0.01, 5.0);
        double worst_trace = 0.0, worst_eig = 0.0;
        for (int m = 0; m < 50; ++m) {
            const Eigen::Index d = dims(rng);
            LindbladModel model;
            const CMatrix h = random_matrix(rng, d);
            model.hamiltonian = 0.5 * (h + h.adjoint());
            const int k = nops(rng);
            for (int i = 0; i < k; ++i) model.dissipators.push_back({random_matrix(rng, d) / std::sqrt(double(d)), rate(rng)});
            const CMatrix a = random_matrix(rng, d);
            CMatrix rho0 = a * a.adjoint();
            rho0 /= rho0.trace();
            const std::vector<double> times = {0.0, 10.0, 50.0, 200.0, 1000.0};
            for (const auto& rho : evolve(model, DensityMatrix(0.5 * (rho0 + rho0.adjoint())), times)) {
                worst_trace = std::max(worst_trace, std::abs(rho.elements().trace() - 1.0));
                Eigen::SelfAdjointEigenSolver<CMatrix> es(rho.elements());
                worst_eig = std::min(worst_eig, es.eigenvalues().minCoeff());
            }
        }
        c.abs("trace drift over 50 models", worst_trace, 0.0, 1e-8);
        c.that("min eigenvalue " + std::to_string(worst_eig) + " >= -1e-8", worst_eig >= -1e-8);

        // driven thermal qubit against the Bloch-equation solution, 125 points
        double worst_ss = 0.0;
        for (double nth : {0.0, 1e-3, 0.01, 0.1, 0.5})
            for (double w : {0.0, 0.05, 0.3, 1.0, 3.0})
                for (double dl : {-2.0, -0.4, 0.0, 0.7, 3.0}) {
                    const double g1 = 1.19 + 0.0065, gphi = 0.191;
                    const double gd = g1 * (1 + nth), gu = g1 * nth, g2 = 0.5 * (gd + gu) + gphi;
                    const double aa = w * w * g2 / (2.0 * (g2 * g2 + dl * dl));
                    const double ee = (aa + gu) / (2.0 * aa + gd + gu);
                    const cplx eg = cplx(0.0, -0.5 * w) * (1.0 - 2.0 * ee) / cplx(g2, -dl);
                    SystemSpec s;
                    s.qubits = {emitter(1.19, 0.0, 0.0065, gphi)};
                    s.n_th = nth;
                    ModelOptions o;
                    o.frame = dl;
                    o.drives = {{0, cplx(w, 0.0)}};
                    const DensityMatrix rho = steady_state(waveguide_model(s, o));
                    worst_ss = std::max({worst_ss, std::abs(rho(1, 1).real() - ee), std::abs(rho(1, 0) - eg)});
                }
        c.abs("steady state vs Bloch, 125 points", worst_ss, 0.0, 1e-9);

        // collective decay rates sum to the single-qubit total
        std::uniform_int_distribution<int> count(1, 5);
        std::uniform_real_distribution<double> g(0.01, 100.0), loss(0.0, 1.0), ph(0.0, 2 * pi), det(-20.0, 20.0);
        double worst_sum = 0.0;
        for (int t = 0; t < 100; ++t) {
            SystemSpec s;
            const int n = count(rng);
            double single = 0.0, modes = 0.0;
            for (int k = 0; k < n; ++k) {
                s.qubits.push_back(emitter(g(rng), ph(rng), loss(rng)));
                single += s.qubits.back().params.gamma_1();
                s.detunings.push_back(det(rng));
            }
            for (const auto& m : collective_modes(s)) modes += m.decay_rate;
            worst_sum = std::max(worst_sum, std::abs(modes - single) / single);
        }
        c.abs("decay-sum mismatch over 100 specs (relative)", worst_sum, 0.0, 1e-9);
    });

    std::printf("%d of 12 criteria failed\n", failures);
    return failures == 0 ? 0 : 1;
}
