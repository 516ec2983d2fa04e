#include <cmath>
#include <numbers>
#include <random>

#include <Eigen/Eigenvalues>

#include "doctest.h"
#include "wgqed/core.hpp"

using namespace wgqed;

namespace {

constexpr double pi = std::numbers::pi;

Emitter emitter(double g1d, double phase, double loss = 0.0, double gphi = 0.0) {
    Emitter e;
    e.params.gamma_1d = g1d;
    e.params.gamma_loss = loss;
    e.params.gamma_phi = gphi;
    e.placement.phase = phase;
    return e;
}

SystemSpec random_spec(std::mt19937_64& rng) {
    std::uniform_int_distribution<int> count(1, 5);
    std::uniform_real_distribution<double> rate(0.01, 100.0), loss(0.0, 1.0), phase(0.0, 2.0 * pi), det(-20.0, 20.0);
    SystemSpec s;
    const int n = count(rng);
    for (int k = 0; k < n; ++k) s.qubits.push_back(emitter(rate(rng), phase(rng), loss(rng)));
    for (int k = 0; k < n; ++k) s.detunings.push_back(det(rng));
    if (n >= 2) s.direct_couplings.push_back({0, 1, det(rng)});
    return s;
}

}  // namespace

TEST_CASE("effective Hamiltonian of a lambda/4 pair, written out by hand") {
    SystemSpec s;
    s.qubits = {emitter(4.0, 0.0, 0.1), emitter(9.0, pi / 2)};
    s.detunings = {1.0, -2.0};
    const CMatrix h = build_effective_hamiltonian(s);
    // sqrt(4*9) = 6; sin(pi/2) = 1, cos(pi/2) = 0
    CHECK(std::abs(h(0, 0) - cplx(1.0, -0.5 * 4.1)) < 1e-12);
    CHECK(std::abs(h(1, 1) - cplx(-2.0, -0.5 * 9.0)) < 1e-12);
    CHECK(std::abs(h(0, 1) - cplx(3.0, 0.0)) < 1e-12);
    CHECK(std::abs(h(1, 0) - cplx(3.0, 0.0)) < 1e-12);
}

TEST_CASE("lambda/2 pair: pure dissipative coupling and a dark mode") {
    SystemSpec s;
    s.qubits = {emitter(13.4, 0.0), emitter(13.4, pi)};
    const CMatrix h = build_effective_hamiltonian(s);
    CHECK(std::abs(h(0, 1) - cplx(0.0, 0.5 * 13.4)) < 1e-12);
    const auto modes = collective_modes(s);
    REQUIRE(modes.size() == 2);
    CHECK(modes[0].decay_rate == doctest::Approx(26.8).epsilon(1e-12));
    CHECK(modes[1].decay_rate < 1e-9 * 13.4);
    // dark mode is the symmetric combination for a pi phase separation
    CHECK(std::abs(std::abs(modes[1].amplitudes(0)) - std::sqrt(0.5)) < 1e-9);

    s.qubits[1].placement.phase = 0.98 * pi;
    CHECK(collective_modes(s)[1].decay_rate > 1e-9 * 13.4);
    s.qubits[1].placement.phase = pi;
    s.qubits[1].params.gamma_loss = 0.01;
    CHECK(collective_modes(s)[1].decay_rate > 1e-9 * 13.4);
}

TEST_CASE("Hermitian and anti-Hermitian parts split into exchange and dissipation") {
    std::mt19937_64 rng(11);
    for (int trial = 0; trial < 50; ++trial) {
        const SystemSpec s = random_spec(rng);
        const CMatrix h = build_effective_hamiltonian(s);
        const CMatrix herm = 0.5 * (h + h.adjoint());
        const CMatrix anti = cplx(0.0, 1.0) * (h - h.adjoint());
        CHECK((herm - exchange_matrix(s).cast<cplx>()).cwiseAbs().maxCoeff() < 1e-12);
        CHECK((anti - dissipation_matrix(s).cast<cplx>()).cwiseAbs().maxCoeff() < 1e-12);
    }
}

TEST_CASE("shifting every phase by 2pi leaves H unchanged") {
    std::mt19937_64 rng(12);
    for (int trial = 0; trial < 20; ++trial) {
        SystemSpec s = random_spec(rng);
        const CMatrix h = build_effective_hamiltonian(s);
        for (auto& q : s.qubits) q.placement.phase += 2.0 * pi;
        CHECK((build_effective_hamiltonian(s) - h).cwiseAbs().maxCoeff() < 1e-12);
    }
}

TEST_CASE("collective decay rates sum to the total single-qubit decay") {
    std::mt19937_64 rng(13);
    for (int trial = 0; trial < 100; ++trial) {
        const SystemSpec s = random_spec(rng);
        double modes = 0.0, single = 0.0;
        for (const auto& m : collective_modes(s)) modes += m.decay_rate;
        for (const auto& q : s.qubits) single += q.params.gamma_1d + q.params.gamma_loss;
        CHECK(std::abs(modes - single) < 1e-9 * std::max(1.0, single));
    }
}

TEST_CASE("modes are sorted by decay, largest first") {
    std::mt19937_64 rng(14);
    for (int trial = 0; trial < 20; ++trial) {
        const auto modes = collective_modes(random_spec(rng));
        for (std::size_t k = 1; k < modes.size(); ++k) CHECK(modes[k - 1].decay_rate >= modes[k].decay_rate);
    }
}

TEST_CASE("2J from the formula matches the splitting of the exchange matrix") {
    for (auto [gm, gp] : {std::pair{13.4, 1.19}, std::pair{96.7, 0.87}, std::pair{4.3, 1.19}}) {
        SystemSpec s;
        s.qubits = {emitter(gm, 0.0), emitter(gp, pi / 2), emitter(gm, pi)};
        Eigen::SelfAdjointEigenSolver<RMatrix> es(exchange_matrix(s));
        const auto ev = es.eigenvalues();
        CHECK(std::abs((ev(2) - ev(0)) - coupling_rate_2j(2, gm, gp)) < 1e-9);
    }
}

TEST_CASE("closed-form collective quantities") {
    CHECK(coupling_rate_2j(2, 13.4, 1.19) == doctest::Approx(5.64730).epsilon(1e-5));
    CHECK(coupling_rate_2j(2, 96.7, 0.87) == doctest::Approx(12.97143).epsilon(1e-5));
    CHECK(coupling_rate_2j(0, 13.4, 1.19) == 0.0);
    CHECK_THROWS_AS(coupling_rate_2j(2, -1.0, 1.0), InputError);

    // (2J)^2 / ((G1D,p + G'p) G'D) with G'p = loss + 2 gphi
    const double c1 = cooperativity(coupling_rate_2j(2, 13.4, 1.19), 1.19, 0.0065 + 2 * 0.191, 0.210);
    CHECK(c1 == doctest::Approx(96.209).epsilon(1e-4));
    CHECK_THROWS_AS(cooperativity(1.0, 0.0, 0.0, 0.1), InputError);

    CHECK(purcell_factor(0.91, 0.081) == doctest::Approx(11.2346).epsilon(1e-4));
    CHECK_THROWS_AS(purcell_factor(1.0, 0.0), InputError);

    CHECK(phase_mismatch_decay(13.4, 0.05 * pi) == doctest::Approx(0.16498).epsilon(1e-4));
    CHECK(phase_mismatch_decay(96.7, 0.035 * pi) == doctest::Approx(0.58398).epsilon(1e-4));
    CHECK(phase_mismatch_decay(13.4, pi) == doctest::Approx(0.0));

    CHECK(rate_asymmetry(16.5, 18.1) == doctest::Approx(0.046243).epsilon(1e-4));
    CHECK(rate_asymmetry(94.1, 99.5) == doctest::Approx(0.027893).epsilon(1e-4));
}

TEST_CASE("asymmetric dark state is a null vector of the dissipative block") {
    std::mt19937_64 rng(15);
    std::uniform_real_distribution<double> rate(0.1, 100.0);
    for (int trial = 0; trial < 100; ++trial) {
        const double g1 = rate(rng), g2 = rate(rng);
        const auto pair = dark_bright_asymmetric(g1, g2, 1.0);
        RMatrix gamma(2, 2);
        gamma << g1, -std::sqrt(g1 * g2), -std::sqrt(g1 * g2), g2;  // lambda/2 spacing
        const CVector out = gamma.cast<cplx>() * pair.dark.amplitudes;
        CHECK(out.cwiseAbs().maxCoeff() < 1e-12 * std::max(g1, g2));
        CHECK(pair.bright.decay_rate == doctest::Approx(g1 + g2));
    }
    // equal rates: the probe sees the full sqrt(2) enhancement on the dark state
    const auto eq = dark_bright_asymmetric(13.4, 13.4, 1.19);
    CHECK(2.0 * eq.j_dark == doctest::Approx(coupling_rate_2j(2, 13.4, 1.19)));
    CHECK(eq.j_bright == doctest::Approx(0.0));
}

TEST_CASE("system validation") {
    SystemSpec s;
    CHECK_THROWS_AS(s.validate(), InputError);
    s.qubits = {emitter(1.0, 0.0), emitter(1.0, pi)};
    CHECK_NOTHROW(s.validate());

    SystemSpec bad = s;
    bad.qubits[0].params.gamma_1d = -1.0;
    CHECK_THROWS_AS(bad.validate(), InputError);
    bad = s;
    bad.qubits[0].params.gamma_phi = std::nan("");
    CHECK_THROWS_AS(bad.validate(), InputError);
    bad = s;
    bad.direct_couplings = {{0, 1, 1.0}, {1, 0, 2.0}};
    CHECK_THROWS_AS(bad.validate(), InputError);
    bad = s;
    bad.direct_couplings = {{0, 2, 1.0}};
    CHECK_THROWS_AS(bad.validate(), InputError);
    bad = s;
    bad.probe_index = 2;
    CHECK_THROWS_AS(bad.validate(), InputError);
    bad = s;
    bad.detunings = {0.0};
    CHECK_THROWS_AS(bad.validate(), InputError);
    bad = s;
    bad.qubits.resize(6, emitter(1.0, 0.0));
    CHECK_THROWS_AS(bad.validate(), InputError);
}

TEST_CASE("removing a qubit re-indexes couplings and the probe") {
    SystemSpec s;
    s.qubits = {emitter(1.0, 0.0), emitter(2.0, 0.5), emitter(3.0, 1.0), emitter(4.0, 1.5)};
    s.probe_index = 2;
    s.detunings = {1, 2, 3, 4};
    s.direct_couplings = {{0, 1, 5.0}, {2, 3, 6.0}};
    s.dephasing_correlations = {{0, 3, 0.1}};
    const SystemSpec r = without_qubit(s, 1);
    REQUIRE(r.size() == 3);
    CHECK(r.probe_index == std::optional<std::size_t>(1));
    CHECK(r.detunings == std::vector<double>{1, 3, 4});
    REQUIRE(r.direct_couplings.size() == 1);
    CHECK(r.direct_couplings[0].i == 1);
    CHECK(r.direct_couplings[0].j == 2);
    CHECK(r.dephasing_correlations[0].j == 2);
    CHECK_FALSE(without_qubit(s, 2).probe_index.has_value());
}
