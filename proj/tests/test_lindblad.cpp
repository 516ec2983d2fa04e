#include <cmath>
#include <cstdlib>
#include <numbers>
#include <random>

#include <Eigen/Eigenvalues>
#include <unsupported/Eigen/KroneckerProduct>

#include "doctest.h"
#include "wgqed/fitting.hpp"
#include "wgqed/lindblad.hpp"

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

CMatrix random_matrix(std::mt19937_64& rng, Eigen::Index d) {
    std::normal_distribution<double> n(0.0, 1.0);
    CMatrix m(d, d);
    for (Eigen::Index i = 0; i < d; ++i)
        for (Eigen::Index j = 0; j < d; ++j) m(i, j) = cplx(n(rng), n(rng));
    return m;
}

DensityMatrix random_state(std::mt19937_64& rng, Eigen::Index d) {
    const CMatrix a = random_matrix(rng, d);
    CMatrix rho = a * a.adjoint();
    rho /= rho.trace();
    return DensityMatrix(0.5 * (rho + rho.adjoint()));
}

// Steady state of a driven qubit from the Bloch equations, solved by hand:
// x = (A + Gu) / (2A + Gd + Gu), A = W^2 G2 / (2 (G2^2 + D^2)), D = qubit - drive.
struct BlochSteady {
    double ee;
    cplx eg;
};

BlochSteady bloch_steady(double g1, double gphi, double n_th, double omega, double qubit_minus_drive) {
    const double gd = g1 * (1.0 + n_th), gu = g1 * n_th;
    const double g2 = 0.5 * (gd + gu) + gphi;
    const double d = qubit_minus_drive;
    const double a = omega * omega * g2 / (2.0 * (g2 * g2 + d * d));
    const double x = (a + gu) / (2.0 * a + gd + gu);
    const cplx eg = cplx(0.0, -0.5 * omega) * (1.0 - 2.0 * x) / cplx(g2, d);
    return {x, eg};
}

}  // namespace

TEST_CASE("column-major vectorization identity") {
    std::mt19937_64 rng(1);
    const CMatrix a = random_matrix(rng, 3), b = random_matrix(rng, 3), rho = random_matrix(rng, 3);
    const CMatrix lhs = Eigen::kroneckerProduct(CMatrix(b.transpose()), a).eval() * vectorize(rho);
    CHECK((lhs - vectorize(a * rho * b)).cwiseAbs().maxCoeff() < 1e-12);
    CHECK((unvectorize(vectorize(rho), 3) - rho).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("basis operators") {
    const QubitBasis b = QubitBasis::full(2);
    CHECK(b.dim() == 4);
    // sigma- of qubit 1 takes |11> (mask 3) to |01> (mask 1)
    const CVector out = b.lowering(1) * b.state(3);
    CHECK(std::abs(out(*b.index_of(1)) - 1.0) < 1e-15);
    CHECK((b.number(0) - b.raising(0) * b.lowering(0)).norm() == 0.0);
    CHECK((b.sigma_z(1) - (2.0 * b.number(1) - CMatrix::Identity(4, 4))).norm() == 0.0);

    const QubitBasis t = QubitBasis::truncated(3, 1);
    CHECK(t.dim() == 4);
    CHECK_FALSE(t.is_full());
    CHECK_FALSE(t.index_of(3).has_value());
}

TEST_CASE("density matrix validation") {
    CMatrix m = CMatrix::Identity(2, 2) * 0.5;
    CHECK_NOTHROW(DensityMatrix{m});
    CMatrix bad = m;
    bad(0, 1) = 0.1;
    CHECK_THROWS_AS(DensityMatrix{bad}, InputError);
    CHECK_THROWS_AS(DensityMatrix{CMatrix::Identity(2, 2)}, InputError);
    CMatrix neg(2, 2);
    neg << 1.5, 0.0, 0.0, -0.5;
    CHECK_THROWS_AS(DensityMatrix{neg}, InputError);
}

TEST_CASE("free decay of one qubit follows exp(-2 pi Gamma1 t)") {
    SystemSpec s;
    s.qubits = {emitter(1.19, 0.0, 0.0065)};
    const LindbladModel m = waveguide_model(s);
    const QubitBasis b = QubitBasis::full(1);
    const std::vector<double> times = {0.0, 100.0, 250.0, 700.0};
    const auto states = evolve(m, DensityMatrix::pure(b.state(1)), times);
    for (std::size_t k = 0; k < times.size(); ++k)
        CHECK(states[k].expectation(b.number(0)) ==
              doctest::Approx(std::exp(-2.0 * pi * 1.1965 * times[k] * 1e-3)).epsilon(1e-8));
}

TEST_CASE("integrator and exact propagator agree") {
    SystemSpec s;
    s.qubits = {emitter(13.4, 0.0, 0.0065, 0.2), emitter(1.19, pi / 2, 0.0065, 0.19), emitter(13.4, pi, 0.0065, 0.2)};
    s.detunings = {0.0, 1.0, 0.0};
    const LindbladModel m = waveguide_model(s);
    const QubitBasis b = QubitBasis::full(3);
    const DensityMatrix rho0 = DensityMatrix::pure(b.state(2));
    const double t[] = {123.0};
    const auto ode = evolve(m, rho0, t);
    const CVector exact = Propagator(m, 123.0).apply(vectorize(rho0.elements()));
    CHECK((vectorize(ode.back().elements()) - exact).cwiseAbs().maxCoeff() < 1e-8);
}

TEST_CASE("trace, Hermiticity and positivity over random Lindblad models") {
    std::mt19937_64 rng(2024);
    std::uniform_int_distribution<int> dims(2, 6), nops(1, 4);
    std::uniform_real_distribution<double> rate(0.01, 5.0);
    for (int seed = 0; seed < 50; ++seed) {
        const Eigen::Index d = dims(rng);
        LindbladModel m;
        const CMatrix h = random_matrix(rng, d);
        m.hamiltonian = 0.5 * (h + h.adjoint());
        const int k = nops(rng);
        for (int i = 0; i < k; ++i) m.dissipators.push_back({random_matrix(rng, d) / std::sqrt(double(d)), rate(rng)});
        const std::vector<double> times = {0.0, 10.0, 50.0, 200.0, 1000.0};
        std::vector<DensityMatrix> traj;
        REQUIRE_NOTHROW(traj = evolve(m, random_state(rng, d), times));
        for (const auto& rho : traj) {
            const CMatrix& e = rho.elements();
            CHECK(std::abs(e.trace() - 1.0) < 1e-8);
            CHECK((e - e.adjoint()).cwiseAbs().maxCoeff() < 1e-10);
            Eigen::SelfAdjointEigenSolver<CMatrix> es(e);
            CHECK(es.eigenvalues().minCoeff() > -1e-8);
        }
    }
}

TEST_CASE("driven thermal qubit: numeric steady state against the Bloch solution") {
    const double g1d = 1.19, gloss = 0.0065, gphi = 0.191;
    const double occupations[] = {0.0, 1e-3, 0.01, 0.1, 0.5};
    const double omegas[] = {0.0, 0.05, 0.3, 1.0, 3.0};
    const double deltas[] = {-2.0, -0.4, 0.0, 0.7, 3.0};
    int points = 0;
    for (double n : occupations)
        for (double w : omegas)
            for (double dl : deltas) {
                SystemSpec s;
                s.qubits = {emitter(g1d, 0.0, gloss, gphi)};
                s.n_th = n;
                ModelOptions o;
                o.frame = dl;  // drive sits dl above the qubit
                o.drives = {{0, cplx(w, 0.0)}};
                const DensityMatrix rho = steady_state(waveguide_model(s, o));
                const QubitBasis b = QubitBasis::full(1);
                const auto e = *b.index_of(1), g = *b.index_of(0);
                const BlochSteady ref = bloch_steady(g1d + gloss, gphi, n, w, -dl);
                CHECK(std::abs(rho(e, e).real() - ref.ee) < 1e-9);
                CHECK(std::abs(rho(e, g) - ref.eg) < 1e-9);

                const ThermalSteadyState closed = thermal_qubit_steady(g1d, gloss, gphi, n, w, dl);
                CHECK(std::abs(closed.rho_ee - ref.ee) < 1e-9);
                CHECK(std::abs(closed.rho_eg - ref.eg) < 1e-9);
                ++points;
            }
    CHECK(points == 125);
}

TEST_CASE("steady state rejects a degenerate Liouvillian") {
    LindbladModel m;
    m.hamiltonian = CMatrix::Zero(2, 2);
    CHECK_THROWS_AS(steady_state(m), DegenerateSteadyState);
}

TEST_CASE("dark-state rates: closed form, inverse, and ordering") {
    const auto r = dark_state_rates(0.0065, 0.3, 0.1);
    CHECK(r.gamma1 == doctest::Approx(0.2065));
    CHECK(r.gamma2 == doctest::Approx(0.30325));
    const auto inv = invert_dark_state_rates(r.gamma1, r.gamma2, 0.0065);
    CHECK(inv.gphi == doctest::Approx(0.3));
    CHECK(inv.gphi_c == doctest::Approx(0.1));

    // Gamma2,D <= Gamma1,D without correlation, and above it once gphi_c > gloss / 2
    const auto uncorrelated = dark_state_rates(0.0065, 0.3, 0.0);
    CHECK(uncorrelated.gamma2 <= uncorrelated.gamma1);
    const auto correlated = dark_state_rates(0.0065, 0.3, 0.0065 / 2 + 1e-4);
    CHECK(correlated.gamma2 > correlated.gamma1);

    // measured type-I dark-state rates
    const auto t1 = invert_dark_state_rates(0.210, 0.366, 0.0065);
    CHECK(t1.gphi == doctest::Approx(0.36275));
    CHECK(t1.gphi_c == doctest::Approx(0.15925));
    CHECK_THROWS_AS(invert_dark_state_rates(0.2, 0.001, 0.0065), InputError);
}

TEST_CASE("simulated dark-state decay and decoherence match the closed forms") {
    // A strongly radiating lambda/2 pair isolates the dark state: leakage into
    // the bright state is removed at Gamma_B before it can return.
    std::mt19937_64 rng(77);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    const QubitBasis b = QubitBasis::full(2);
    const CVector dark = b.single_excitation((CVector(2) << 1.0, 1.0).finished() / std::sqrt(2.0));
    const CVector ground = b.state(0);
    for (int trial = 0; trial < 20; ++trial) {
        const double gloss = 0.05 * u(rng);
        const double gphi = 0.05 + 0.45 * u(rng);
        const double gphi_c = (2.0 * u(rng) - 1.0) * gphi;  // keeps the dephasing matrix PSD
        SystemSpec s;
        s.qubits = {emitter(3000.0, 0.0, gloss, gphi), emitter(3000.0, pi, gloss, gphi)};
        s.dephasing_correlations = {{0, 1, gphi_c}};
        const LindbladModel m = waveguide_model(s);
        const auto expect = dark_state_rates(gloss, gphi, gphi_c);

        const double tmax = 1e3 / (2.0 * pi * expect.gamma1);
        std::vector<double> times;
        for (int k = 0; k <= 40; ++k) times.push_back(tmax * k / 40.0);

        const CVector plus = (ground + dark) / std::sqrt(2.0);
        const auto traj = evolve(m, DensityMatrix::pure(plus), times);
        TimeTrace pop, coh;
        pop.times = coh.times = times;
        for (const auto& rho : traj) {
            pop.values.push_back(2.0 * rho.overlap(dark));
            coh.values.push_back(2.0 * (dark.adjoint() * rho.elements() * ground)(0).real());
        }
        CHECK(fit_exponential(pop).value("rate_mhz") == doctest::Approx(expect.gamma1).epsilon(0.01));
        CHECK(fit_exponential(coh).value("rate_mhz") == doctest::Approx(expect.gamma2).epsilon(0.01));
    }
}

TEST_CASE("detuning asymmetry damps the dark state at 4 delta_d^2 / Gamma_B") {
    SystemSpec s;
    s.qubits = {emitter(20.0, 0.0), emitter(20.0, pi)};
    const double dd = 0.5;  // well below Gamma_B = 40 MHz
    s.detunings = {dd, -dd};
    const CMatrix l = assemble_liouvillian(waveguide_model(s));
    Eigen::ComplexEigenSolver<CMatrix> es(l);
    double slowest = 1e9;
    for (Eigen::Index k = 0; k < es.eigenvalues().size(); ++k) {
        const double rate = -es.eigenvalues()(k).real() / (2.0 * pi);
        if (rate > 1e-9) slowest = std::min(slowest, rate);
    }
    CHECK(slowest == doctest::Approx(4.0 * dd * dd / 40.0).epsilon(0.1));
}

TEST_CASE("quasi-static averaging is seeded and independent of the thread count") {
    SystemSpec s;
    s.qubits = {emitter(10.0, 0.0), emitter(10.0, pi)};
    const QubitBasis b = QubitBasis::full(2);
    const CVector dark = b.single_excitation((CVector(2) << 1.0, 1.0).finished() / std::sqrt(2.0));
    auto builder = [&](double dc, double dd) {
        ModelOptions o;
        o.extra_detunings = {dc + dd, dc - dd};
        return waveguide_model(s, o);
    };
    auto pop = [&](const DensityMatrix& r) { return r.overlap(dark); };
    NoiseSpec noise;
    noise.sigma_common = 0.3;
    noise.sigma_diff = 0.4;
    noise.samples = 12;
    noise.seed = 99;
    const std::vector<double> times = {0.0, 50.0, 200.0, 400.0};

    setenv("WGQED_THREADS", "1", 1);
    const TimeTrace one = quasi_static_average(builder, noise, pop, DensityMatrix::pure(dark), times);
    setenv("WGQED_THREADS", "3", 1);
    const TimeTrace three = quasi_static_average(builder, noise, pop, DensityMatrix::pure(dark), times);
    unsetenv("WGQED_THREADS");
    CHECK(one.values == three.values);

    noise.seed = 100;
    const TimeTrace other = quasi_static_average(builder, noise, pop, DensityMatrix::pure(dark), times);
    CHECK(other.values != one.values);
    CHECK(one.values.front() == doctest::Approx(1.0));
    CHECK(one.values.back() < 1.0);
}

TEST_CASE("trace modes reproduce the time trace") {
    SystemSpec s;
    s.qubits = {emitter(13.4, 0.0, 0.0065, 0.2), emitter(1.19, pi / 2, 0.0065, 0.19), emitter(13.4, pi, 0.0065, 0.2)};
    s.detunings = {0.0, 1.0, 0.0};
    const LindbladModel m = waveguide_model(s);
    const QubitBasis b = QubitBasis::full(3);
    const CMatrix rho0 = b.state(2) * b.state(2).adjoint();
    const auto modes = trace_modes(assemble_liouvillian(m), b.number(1), rho0);
    const double t_ns = 180.0;
    cplx sum = 0.0;
    for (const auto& md : modes) sum += md.amplitude * std::exp(md.eigenvalue * t_ns * 1e-3);
    const double tt[] = {t_ns};
    const double direct = evolve(m, DensityMatrix(rho0), tt).back().expectation(b.number(1));
    CHECK(std::abs(sum.real() - direct) < 1e-8);
    CHECK(std::abs(sum.imag()) < 1e-8);
}

TEST_CASE("truncated basis requires an undriven zero-temperature model") {
    SystemSpec s;
    s.qubits = {emitter(1.0, 0.0), emitter(1.0, pi)};
    ModelOptions o;
    o.max_excitations = 1;
    CHECK(basis_for(s, o).dim() == 3);
    o.drives = {{0, cplx(0.1, 0.0)}};
    CHECK_THROWS_AS(basis_for(s, o), InputError);
}
