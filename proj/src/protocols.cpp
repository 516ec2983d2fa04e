#include "wgqed/protocols.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <map>
#include <numbers>

#include <unsupported/Eigen/KroneckerProduct>

namespace wgqed {

namespace {

void require(bool ok, const std::string& msg) {
    if (!ok) throw InputError(msg);
}

std::size_t probe_of(const SystemSpec& spec) {
    spec.validate();
    require(spec.probe_index.has_value(), "this protocol needs a designated probe qubit");
    require(spec.size() >= 2, "this protocol needs at least one mirror qubit");
    return *spec.probe_index;
}

SystemSpec with_detunings(const SystemSpec& spec, const std::vector<double>& detunings) {
    SystemSpec out = spec;
    if (!detunings.empty()) out.detunings = detunings;
    return out;
}

SystemSpec with_qubit_detuning(const SystemSpec& spec, std::size_t q, double detuning) {
    SystemSpec out = spec;
    if (out.detunings.empty()) out.detunings.assign(spec.size(), 0.0);
    out.detunings[q] = detuning;
    return out;
}

CMatrix rotation_unitary(const QubitBasis& basis, const Rotation& r) {
    const CMatrix sm = basis.lowering(r.qubit);
    const CMatrix sp = sm.adjoint();
    const CMatrix x = sp + sm;
    const CMatrix y = cplx(0.0, 1.0) * (sp - sm);
    const CMatrix g = std::cos(r.phase) * x + std::sin(r.phase) * y;
    return std::cos(0.5 * r.angle) * CMatrix::Identity(basis.dim(), basis.dim()) -
           cplx(0.0, std::sin(0.5 * r.angle)) * g;
}

CMatrix segment_liouvillian(const SystemSpec& spec, const Segment& seg) {
    ModelOptions opts;
    for (const auto& d : seg.drives) opts.drives.push_back({d.qubit, d.omega * std::exp(cplx(0.0, d.phase))});
    return assemble_liouvillian(waveguide_model(with_detunings(spec, seg.detunings), opts));
}

CMatrix rotate(const CMatrix& rho, const CMatrix& u) { return u * rho * u.adjoint(); }

// Steps a vectorized state through increasing times, reusing the propagator
// for repeated gaps, and hands each state to visit(k, vec_rho).
template <class Visit>
void sweep(const CMatrix& liouvillian, const CVector& start, std::span<const double> times_ns, Visit visit) {
    std::map<double, CMatrix> cache;
    CVector v = start;
    double t = 0.0;
    for (std::size_t k = 0; k < times_ns.size(); ++k) {
        require(times_ns[k] >= t, "time grid must be non-negative and increasing");
        const double gap = times_ns[k] - t;
        if (gap > 0.0) {
            // grids built by linspace differ in the last bits; round the key
            const double key = std::round(gap * 1e9) / 1e9;
            auto it = cache.find(key);
            if (it == cache.end()) it = cache.emplace(key, Propagator(liouvillian, gap).matrix()).first;
            v = it->second * v;
        }
        t = times_ns[k];
        visit(k, v);
    }
}

TimeTrace rabi_trace(const SystemSpec& spec, std::size_t probe, double probe_detuning, std::span<const double> taus) {
    const SystemSpec tuned = with_qubit_detuning(spec, probe, probe_detuning);
    ModelOptions opts;
    opts.max_excitations = 1;
    const QubitBasis basis = basis_for(tuned, opts);
    const CMatrix l = assemble_liouvillian(waveguide_model(tuned, opts));
    const CVector psi = basis.state(1u << probe);
    const CMatrix n_p = basis.number(probe);
    const Eigen::Index d = basis.dim();

    TimeTrace trace;
    trace.times.assign(taus.begin(), taus.end());
    trace.values.resize(taus.size());
    sweep(l, vectorize(psi * psi.adjoint()), taus,
          [&](std::size_t k, const CVector& v) { trace.values[k] = (n_p * unvectorize(v, d)).trace().real(); });
    trace.metadata["observable"] = "probe_population";
    trace.metadata["probe_detuning_mhz"] = std::to_string(probe_detuning);
    return trace;
}

double mean_mirror(const SystemSpec& spec, std::size_t probe, double (*field)(const QubitParams&)) {
    double s = 0.0;
    for (std::size_t j = 0; j < spec.size(); ++j)
        if (j != probe) s += field(spec.params(j));
    return s / static_cast<double>(spec.size() - 1);
}

}  // namespace

double PulseSequence::duration_ns() const {
    double t = 0.0;
    for (const auto& s : steps)
        if (const auto* seg = std::get_if<Segment>(&s)) t += seg->duration_ns;
    return t;
}

void PulseSequence::validate(std::size_t n_qubits) const {
    require(readout.qubit < n_qubits, "readout qubit out of range");
    for (const auto& s : steps) {
        if (const auto* seg = std::get_if<Segment>(&s)) {
            require(std::isfinite(seg->duration_ns) && seg->duration_ns > 0.0, "segment durations must be positive");
            require(seg->detunings.empty() || seg->detunings.size() == n_qubits, "segment detunings: one per qubit");
            for (double d : seg->detunings) require(std::isfinite(d), "non-finite segment detuning");
            for (const auto& dr : seg->drives) {
                require(dr.qubit < n_qubits, "drive qubit out of range");
                require(std::isfinite(dr.omega) && std::isfinite(dr.phase), "non-finite drive");
            }
        } else {
            const auto& r = std::get<Rotation>(s);
            require(r.qubit < n_qubits, "rotation qubit out of range");
            require(std::isfinite(r.angle) && std::isfinite(r.phase), "non-finite rotation");
        }
    }
}

DensityMatrix run_sequence(const SystemSpec& spec, const PulseSequence& seq, const DensityMatrix& rho0) {
    spec.validate();
    seq.validate(spec.size());
    const QubitBasis basis = QubitBasis::full(spec.size());
    require(rho0.dimension() == basis.dim(), "initial state must live in the full product basis");
    CMatrix rho = rho0.elements();
    for (const auto& step : seq.steps) {
        if (const auto* seg = std::get_if<Segment>(&step)) {
            const Propagator p(segment_liouvillian(spec, *seg), seg->duration_ns);
            rho = unvectorize(p.apply(vectorize(rho)), basis.dim());
        } else {
            rho = rotate(rho, rotation_unitary(basis, std::get<Rotation>(step)));
        }
    }
    return DensityMatrix(0.5 * (rho + rho.adjoint()));
}

double read_out(const DensityMatrix& rho, const Readout& readout, std::size_t n_qubits) {
    return rho.expectation(QubitBasis::full(n_qubits).number(readout.qubit));
}

std::vector<DarkMode> mirror_modes(const SystemSpec& spec) {
    const std::size_t p = probe_of(spec);
    const CMatrix h = build_effective_hamiltonian(spec);
    const SystemSpec mirrors = without_qubit(spec, p);
    std::vector<DarkMode> out;
    for (const auto& m : collective_modes(mirrors)) {
        DarkMode dm;
        dm.amplitudes = CVector::Zero(static_cast<Eigen::Index>(spec.size()));
        cplx coupling = 0.0;
        for (std::size_t j = 0, k = 0; j < spec.size(); ++j) {
            if (j == p) continue;
            dm.amplitudes(j) = m.amplitudes(k++);
            coupling += h(p, j) * dm.amplitudes(j);
        }
        dm.frequency = m.frequency_shift;
        dm.decay = m.decay_rate;
        dm.two_j = 2.0 * std::abs(coupling);
        out.push_back(dm);
    }
    std::stable_sort(out.begin(), out.end(), [](const DarkMode& a, const DarkMode& b) { return a.decay < b.decay; });
    return out;
}

DarkMode probe_dark_mode(const SystemSpec& spec) {
    const auto modes = mirror_modes(spec);
    double max_j = 0.0;
    for (const auto& m : modes) max_j = std::max(max_j, m.two_j);
    require(max_j > 0.0, "the probe does not exchange with any mirror mode");
    for (const auto& m : modes)
        if (m.two_j > 1e-6 * max_j) return m;
    return modes.front();
}

TimeTrace simulate_vacuum_rabi(const SystemSpec& spec, std::span<const double> taus_ns, double detuning) {
    const std::size_t p = probe_of(spec);
    const DarkMode dark = probe_dark_mode(spec);
    TimeTrace trace = rabi_trace(spec, p, dark.frequency + detuning, taus_ns);
    trace.metadata["experiment"] = "vacuum_rabi";
    trace.metadata["two_j_mhz"] = std::to_string(dark.two_j);
    return trace;
}

TimeTrace simulate_free_decay(const SystemSpec& spec, std::span<const double> taus_ns, double mirror_detuning) {
    const std::size_t p = probe_of(spec);
    SystemSpec far = spec;
    far.detunings.assign(spec.size(), mirror_detuning);
    far.detunings[p] = spec.detuning(p);
    TimeTrace trace = rabi_trace(far, p, spec.detuning(p), taus_ns);
    trace.metadata["experiment"] = "free_decay";
    return trace;
}

SwapResult iswap(const SystemSpec& spec) {
    const std::size_t p = probe_of(spec);
    const DarkMode dark = probe_dark_mode(spec);
    const double delta = spec.detuning(p) - dark.frequency;
    const double rabi = std::hypot(dark.two_j, delta);

    PulseSequence seq;
    seq.steps.push_back(Rotation{p, std::numbers::pi, 0.0});
    seq.steps.push_back(Segment{1e3 / (2.0 * rabi), {}, {}});
    seq.readout.qubit = p;

    const QubitBasis basis = QubitBasis::full(spec.size());
    const DensityMatrix ground = DensityMatrix::pure(basis.state(0));
    DensityMatrix state = run_sequence(spec, seq, ground);
    const CVector d = basis.single_excitation(dark.amplitudes.normalized());
    const double pop = state.overlap(d);
    return {seq, std::move(state), 1e3 / (2.0 * rabi), pop, dark.two_j};
}

namespace {

// Shared skeleton of the T1 and Ramsey dark-state sequences.
DarkDecayResult dark_sequence(const SystemSpec& spec, std::span<const double> delays, const DarkProtocolOptions& opts,
                              bool ramsey) {
    const std::size_t p = probe_of(spec);
    const SwapResult swap = iswap(spec);
    const QubitBasis basis = QubitBasis::full(spec.size());
    const Eigen::Index d = basis.dim();
    const CMatrix swap_map = Propagator(assemble_liouvillian(waveguide_model(spec)), swap.swap_time_ns).matrix();
    const SystemSpec parked = with_qubit_detuning(spec, p, opts.park_detuning);
    const CMatrix wait_l = assemble_liouvillian(waveguide_model(parked));
    const CMatrix n_p = basis.number(p);

    const CVector ground = basis.state(0);
    CMatrix rho = ground * ground.adjoint();
    rho = rotate(rho, rotation_unitary(basis, {p, ramsey ? 0.5 * std::numbers::pi : std::numbers::pi, 0.0}));
    const CVector start = swap_map * vectorize(rho);

    DarkDecayResult out;
    out.trace.times.assign(delays.begin(), delays.end());
    out.trace.values.resize(delays.size());
    sweep(wait_l, start, delays, [&](std::size_t k, const CVector& v) {
        CMatrix r = unvectorize(swap_map * v, d);
        if (ramsey) {
            const double phase = kTwoPi * opts.artificial_detuning * delays[k] * 1e-3;
            r = rotate(r, rotation_unitary(basis, {p, 0.5 * std::numbers::pi, phase}));
        }
        out.trace.values[k] = (n_p * r).trace().real();
    });
    out.trace.metadata["experiment"] = ramsey ? "ramsey_dark" : "t1_dark";
    out.trace.metadata["observable"] = "probe_population";
    out.trace.metadata["swap_time_ns"] = std::to_string(swap.swap_time_ns);

    if (ramsey) {
        SinusoidOptions so;
        so.frequency_guess = opts.artificial_detuning;
        out.fit = fit_damped_sinusoid(out.trace, so);
    } else {
        out.fit = fit_exponential(out.trace);
    }
    out.rate_mhz = out.fit.value("rate_mhz");
    out.time_ns = out.fit.value("tau_ns");
    return out;
}

}  // namespace

DarkDecayResult simulate_t1_dark(const SystemSpec& spec, std::span<const double> delays_ns,
                                 const DarkProtocolOptions& opts) {
    return dark_sequence(spec, delays_ns, opts, false);
}

DarkDecayResult simulate_ramsey_dark(const SystemSpec& spec, std::span<const double> delays_ns,
                                     const DarkProtocolOptions& opts) {
    return dark_sequence(spec, delays_ns, opts, true);
}

OscillationMode dominant_oscillation(const CMatrix& liouvillian, const CMatrix& observable, const CMatrix& rho0,
                                     double min_frequency) {
    OscillationMode best;
    for (const auto& m : trace_modes(liouvillian, observable, rho0)) {
        if (m.frequency < min_frequency) continue;
        if (2.0 * std::abs(m.amplitude) > best.amplitude) {
            best.frequency = m.frequency;
            best.decay = m.decay;
            best.amplitude = 2.0 * std::abs(m.amplitude);
        }
    }
    if (best.amplitude == 0.0) throw NumericalError("trace has no oscillating component");
    return best;
}

TwoExcitationResult simulate_two_excitation(const SystemSpec& spec, std::span<const double> taus_ns) {
    const std::size_t p = probe_of(spec);
    const DarkMode dark = probe_dark_mode(spec);
    const SwapResult swap = iswap(spec);
    const QubitBasis basis = QubitBasis::full(spec.size());
    const Eigen::Index d = basis.dim();
    const CMatrix n_p = basis.number(p);
    const CMatrix l = assemble_liouvillian(waveguide_model(spec));

    TwoExcitationResult out;

    // atomic cavity with a second excitation added after the swap
    const CMatrix rho2 = rotate(swap.state.elements(), rotation_unitary(basis, {p, std::numbers::pi, 0.0}));
    out.atomic.times.assign(taus_ns.begin(), taus_ns.end());
    out.atomic.values.resize(taus_ns.size());
    sweep(l, vectorize(rho2), taus_ns,
          [&](std::size_t k, const CVector& v) { out.atomic.values[k] = (n_p * unvectorize(v, d)).trace().real(); });
    out.atomic.metadata["experiment"] = "two_excitation";

    const double delta = spec.detuning(p) - dark.frequency;
    out.single = simulate_vacuum_rabi(spec, taus_ns, delta);

    {
        ModelOptions k1;
        k1.max_excitations = 1;
        const QubitBasis b1 = basis_for(spec, k1);
        const CVector e = b1.state(1u << p);
        out.single_damping_mhz = dominant_oscillation(assemble_liouvillian(waveguide_model(spec, k1)), b1.number(p),
                                                      e * e.adjoint())
                                     .decay;
    }
    {
        CMatrix two = CMatrix::Zero(d, d);
        for (Eigen::Index a = 0; a < d; ++a)
            if (std::popcount(basis.states()[static_cast<std::size_t>(a)]) == 2) two(a, a) = 1.0;
        double best_amp = 0.0;
        for (const auto& m : trace_modes(l, two, rho2)) {
            if (m.decay < 1e-6) continue;
            if (std::abs(m.amplitude) > best_amp) {
                best_amp = std::abs(m.amplitude);
                out.second_damping_mhz = m.decay;
            }
        }
        out.damping_ratio = out.second_damping_mhz / out.single_damping_mhz;
    }

    // linear-cavity companion: probe (x) 3-level oscillator with the same 2J and dark-state loss
    const auto& pp = spec.params(p);
    const double mirror_phi = mean_mirror(spec, p, [](const QubitParams& q) { return q.gamma_phi; });
    double mirror_corr = 0.0;
    std::size_t n_corr = 0;
    for (const auto& c : spec.dephasing_correlations)
        if (c.i != p && c.j != p) mirror_corr += c.rate, ++n_corr;
    if (n_corr) mirror_corr /= static_cast<double>(n_corr);
    const double kappa = dark.decay + mirror_phi - mirror_corr;

    const int levels = 3;
    CMatrix a3 = CMatrix::Zero(levels, levels);
    for (int n = 1; n < levels; ++n) a3(n - 1, n) = std::sqrt(static_cast<double>(n));
    CMatrix sm2 = CMatrix::Zero(2, 2);
    sm2(0, 1) = 1.0;
    const CMatrix id2 = CMatrix::Identity(2, 2), id3 = CMatrix::Identity(levels, levels);
    const CMatrix s = Eigen::kroneckerProduct(sm2, id3).eval();
    const CMatrix a = Eigen::kroneckerProduct(id2, a3).eval();
    LindbladModel cav;
    cav.hamiltonian = 0.5 * dark.two_j * (a.adjoint() * s + s.adjoint() * a) + delta * s.adjoint() * s;
    cav.dissipators.push_back({s, pp.gamma_1()});
    cav.dissipators.push_back({a, kappa});
    cav.dissipators.push_back({s.adjoint() * s * 2.0 - CMatrix::Identity(2 * levels, 2 * levels), 0.5 * pp.gamma_phi});
    const CMatrix lc = assemble_liouvillian(cav);
    const CMatrix n_c = s.adjoint() * s;

    auto cavity_trace = [&](int photons, TimeTrace& tr) {
        CVector psi = CVector::Zero(2 * levels);
        psi(levels + photons) = 1.0;
        const CMatrix rho0 = psi * psi.adjoint();
        tr.times.assign(taus_ns.begin(), taus_ns.end());
        tr.values.resize(taus_ns.size());
        sweep(lc, vectorize(rho0), taus_ns,
              [&](std::size_t k, const CVector& v) { tr.values[k] = (n_c * unvectorize(v, 2 * levels)).trace().real(); });
        tr.metadata["experiment"] = "linear_cavity";
        tr.metadata["initial_photons"] = std::to_string(photons);
        return dominant_oscillation(lc, n_c, rho0).frequency;
    };
    out.cavity_first_mhz = cavity_trace(0, out.cavity_first);
    out.cavity_second_mhz = cavity_trace(1, out.cavity_second);
    out.frequency_ratio = out.cavity_second_mhz / out.cavity_first_mhz;
    return out;
}

double second_manifold_cooperativity(double g1d_probe, double gprime_probe, double g1d, double gprime) {
    require(g1d_probe >= 0.0 && gprime_probe >= 0.0 && g1d >= 0.0 && gprime >= 0.0, "rates must be >= 0");
    const double denom = (g1d_probe + gprime_probe) * (2.0 * g1d + gprime);
    require(denom > 0.0, "second-manifold cooperativity denominator must be positive");
    return 2.0 * g1d_probe * g1d / denom;
}

double two_excitation_transfer_rate(double two_j, double g1d) {
    require(g1d > 0.0, "g1d must be positive");
    return two_j * two_j / (2.0 * g1d);
}

CompoundResult simulate_compound_mirrors(const SystemSpec& spec, std::span<const double> taus_ns) {
    const std::size_t p = probe_of(spec);
    require(spec.direct_couplings.size() >= 2, "compound mirrors need two directly coupled pairs");
    auto modes = mirror_modes(spec);
    require(modes.size() >= 2, "compound mirrors need at least two mirror modes");
    std::vector<DarkMode> dark(modes.begin(), modes.begin() + 2);
    std::sort(dark.begin(), dark.end(), [](const DarkMode& a, const DarkMode& b) { return a.frequency < b.frequency; });

    CompoundResult out;
    out.frequency_1 = dark[0].frequency;
    out.frequency_2 = dark[1].frequency;
    out.splitting = out.frequency_2 - out.frequency_1;
    out.two_j_1 = dark[0].two_j;
    out.two_j_2 = dark[1].two_j;
    out.d1 = rabi_trace(spec, p, dark[0].frequency, taus_ns);
    out.d2 = rabi_trace(spec, p, dark[1].frequency, taus_ns);
    out.d1.metadata["experiment"] = "compound_d1";
    out.d2.metadata["experiment"] = "compound_d2";
    return out;
}

}  // namespace wgqed
