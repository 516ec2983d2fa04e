#include "wgqed/experiment.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <filesystem>
#include <numbers>
#include <set>
#include <sstream>

#include "wgqed/calibration.hpp"
#include "wgqed/io.hpp"
#include "wgqed/lindblad.hpp"
#include "wgqed/protocols.hpp"
#include "wgqed/spectroscopy.hpp"

#ifndef WGQED_VERSION
#define WGQED_VERSION "0.0.0"
#endif

namespace wgqed {

namespace fs = std::filesystem;

namespace {

// Reads keys from one JSON object and remembers which were used, so that
// leftovers can be reported as unknown.
class Obj {
public:
    Obj(const Json& j, std::string path) : j_(j), path_(std::move(path)) {
        if (!j_.is_object()) throw ConfigError(where() + " must be an object");
    }

    bool has(const std::string& key) {
        used_.insert(key);
        return j_.contains(key);
    }

    double num(const std::string& key) {
        require_key(key);
        const Json& v = j_.at(key);
        if (!v.is_number()) throw ConfigError(at(key) + " must be a number");
        const double x = v.get<double>();
        if (!std::isfinite(x)) throw ConfigError(at(key) + " must be finite");
        return x;
    }
    double num(const std::string& key, double fallback) { return has(key) ? num(key) : fallback; }

    std::size_t index(const std::string& key) {
        require_key(key);
        const Json& v = j_.at(key);
        if (!v.is_number_integer() || v.get<long long>() < 0) throw ConfigError(at(key) + " must be a non-negative integer");
        return static_cast<std::size_t>(v.get<long long>());
    }
    std::size_t index(const std::string& key, std::size_t fallback) { return has(key) ? index(key) : fallback; }

    bool flag(const std::string& key, bool fallback) {
        if (!has(key)) return fallback;
        if (!j_.at(key).is_boolean()) throw ConfigError(at(key) + " must be true or false");
        return j_.at(key).get<bool>();
    }

    std::string text(const std::string& key) {
        require_key(key);
        if (!j_.at(key).is_string()) throw ConfigError(at(key) + " must be a string");
        return j_.at(key).get<std::string>();
    }
    std::string text(const std::string& key, const std::string& fallback) { return has(key) ? text(key) : fallback; }

    std::vector<double> numbers(const std::string& key) {
        require_key(key);
        const Json& v = j_.at(key);
        if (!v.is_array()) throw ConfigError(at(key) + " must be an array of numbers");
        std::vector<double> out;
        for (const auto& x : v) {
            if (!x.is_number() || !std::isfinite(x.get<double>())) throw ConfigError(at(key) + " must hold finite numbers");
            out.push_back(x.get<double>());
        }
        return out;
    }

    const Json& array(const std::string& key) {
        require_key(key);
        if (!j_.at(key).is_array()) throw ConfigError(at(key) + " must be an array");
        return j_.at(key);
    }

    Obj child(const std::string& key) {
        require_key(key);
        return Obj(j_.at(key), at(key));
    }

    std::string at(const std::string& key) const { return "'" + (path_.empty() ? key : path_ + "." + key) + "'"; }
    std::string where() const { return path_.empty() ? "config" : "'" + path_ + "'"; }

    // Rejects any key that was never asked for.
    void finish() const {
        for (auto it = j_.begin(); it != j_.end(); ++it)
            if (!used_.count(it.key())) throw ConfigError("unknown key " + at(it.key()));
    }

private:
    void require_key(const std::string& key) {
        used_.insert(key);
        if (!j_.contains(key)) throw ConfigError("missing key " + at(key));
    }

    const Json& j_;
    std::string path_;
    std::set<std::string> used_;
};

std::vector<double> grid(Obj g) {
    const double start = g.num("start"), stop = g.num("stop");
    const std::size_t n = g.index("points");
    g.finish();
    if (n < 2) throw ConfigError(g.where() + ": points must be at least 2");
    if (!(stop > start)) throw ConfigError(g.where() + ": stop must exceed start");
    std::vector<double> out(n);
    for (std::size_t k = 0; k < n; ++k) out[k] = start + (stop - start) * static_cast<double>(k) / static_cast<double>(n - 1);
    return out;
}

DriveSpec parse_drive(Obj d, const SystemSpec* spec, bool xy) {
    DriveSpec drive;
    const std::string port = d.text("port", xy ? "xy" : "waveguide");
    if (port == "xy")
        drive.port = DrivePort::LocalXY;
    else if (port == "waveguide")
        drive.port = DrivePort::WaveguideLeft;
    else
        throw ConfigError(d.at("port") + " must be 'waveguide' or 'xy'");
    if (xy && drive.port != DrivePort::LocalXY) throw ConfigError(d.at("port") + " must be 'xy' for xy-spectrum");
    std::size_t fallback = 0;
    if (spec && spec->probe_index) fallback = *spec->probe_index;
    drive.xy_qubit = d.index("xy_qubit", fallback);
    if (d.has("power_dbm")) drive.power_dbm = d.num("power_dbm");
    if (d.has("omega_rabi")) drive.omega_rabi = d.num("omega_rabi");
    drive.frequency = d.num("frequency_ghz", 0.0);
    d.finish();
    if (drive.power_dbm.has_value() == drive.omega_rabi.has_value())
        throw ConfigError(d.where() + ": give exactly one of power_dbm or omega_rabi");
    return drive;
}

// ---------------------------------------------------------------- experiments

struct Context {
    std::optional<SystemSpec> system;
    std::uint64_t seed = 0;
    std::string prefix;
    std::string base_dir;
    bool write = true;
    bool dry = false;  // schema check only
    Json summary = Json::object();
    std::vector<std::string> outputs;

    const SystemSpec& sys() const { return *system; }

    void emit(const std::string& suffix, const std::string& text) {
        const std::string path = prefix + "_" + suffix;
        if (write) {
            const fs::path parent = fs::path(path).parent_path();
            if (!parent.empty()) fs::create_directories(parent);
            write_text(path, text);
            outputs.push_back(path);
        }
    }
};

using Runner = void (*)(Obj&, Context&);

// Thrown once an experiment has read all of its parameters during a dry run.
struct SchemaChecked {};

void parsed(const Obj& p, const Context& c) {
    p.finish();
    if (c.dry) throw SchemaChecked{};
}

std::size_t probe(const Context& c) {
    if (!c.sys().probe_index) throw ConfigError("'system.probe_index' is required for this experiment");
    return *c.sys().probe_index;
}

void spectrum_common(Obj& p, Context& c, bool xy) {
    const DriveSpec drive = parse_drive(p.child("drive"), &*c.system, xy);
    const auto dets = grid(p.child("grid"));
    const bool fit = p.flag("lorentzian_fit", false);
    const std::string peaks = p.text("peaks", "none");
    const double pulse = p.num("pulse_ns", 0.0);
    if (peaks != "none" && peaks != "raw" && peaks != "without_probe")
        throw ConfigError(p.at("peaks") + " must be 'none', 'raw' or 'without_probe'");
    parsed(p, c);

    SpectrumScan scan = multi_qubit_transmission(c.sys(), drive, dets);
    if (pulse > 0.0) scan = pulse_bandwidth_average(scan, pulse);
    c.emit("spectrum.csv", scan_csv(scan));

    const auto a2 = scan.abs_sq();
    const auto imin = static_cast<std::size_t>(std::min_element(a2.begin(), a2.end()) - a2.begin());
    c.summary["points"] = scan.size();
    c.summary["min_abs_t_sq"] = a2[imin];
    c.summary["detuning_at_min_mhz"] = scan.detunings[imin];
    c.summary["max_abs_t_sq"] = *std::max_element(a2.begin(), a2.end());
    if (!scan.warnings.empty()) c.summary["warnings"] = scan.warnings;

    if (fit) {
        const LorentzianFit lf = lorentzian_fit(scan);
        c.emit("fit.json", fit_json(lf.fit));
        c.summary["fit_f0_mhz"] = lf.f0;
        c.summary["fit_g1d_mhz"] = lf.g1d;
        c.summary["fit_gprime_mhz"] = lf.gprime;
        c.summary["fit_purcell"] = lf.gprime > 0.0 ? lf.g1d / lf.gprime : 0.0;
    }
    if (peaks == "raw") {
        c.summary["peak_separation_mhz"] = peak_separation(scan);
    } else if (peaks == "without_probe") {
        const SystemSpec bg_spec = without_qubit(c.sys(), probe(c));
        DriveSpec bg_drive = drive;
        if (bg_drive.port == DrivePort::LocalXY)
            throw ConfigError("'peaks: without_probe' needs a waveguide drive");
        SpectrumScan bg = multi_qubit_transmission(bg_spec, bg_drive, dets);
        if (pulse > 0.0) bg = pulse_bandwidth_average(bg, pulse);
        c.emit("background.csv", scan_csv(bg));
        c.summary["peak_separation_mhz"] = peak_separation(scan, &bg);
    }
}

void run_spectrum(Obj& p, Context& c) { spectrum_common(p, c, false); }
void run_xy_spectrum(Obj& p, Context& c) { spectrum_common(p, c, true); }

void fit_into(Context& c, const std::string& key, const FitResult& fit) {
    Json f = Json::object();
    for (const auto& par : fit.parameters) f[par.name] = par.value;
    c.summary[key] = f;
}

void run_rabi(Obj& p, Context& c) {
    const auto taus = grid(p.child("taus"));
    const bool free = p.flag("free_decay", true);
    const double mirror_detuning = p.num("mirror_detuning", 2000.0);
    parsed(p, c);

    const std::size_t pi = probe(c);
    const DarkMode dark = probe_dark_mode(c.sys());
    const double delta = c.sys().detuning(pi) - dark.frequency;
    const TimeTrace tr = simulate_vacuum_rabi(c.sys(), taus, delta);
    c.emit("rabi.csv", trace_csv(tr));
    SinusoidOptions so;
    so.decaying_baseline = true;
    so.frequency_guess = std::hypot(dark.two_j, delta);
    const FitResult fit = fit_damped_sinusoid(tr, so);
    c.emit("rabi_fit.json", fit_json(fit));
    const double f = fit.value("frequency_mhz");
    c.summary["frequency_mhz"] = f;
    c.summary["detuning_mhz"] = delta;
    c.summary["two_j_fit_mhz"] = std::sqrt(std::max(0.0, f * f - delta * delta));
    c.summary["two_j_model_mhz"] = dark.two_j;
    c.summary["predicted_frequency_mhz"] = std::hypot(dark.two_j, delta);
    if (free) {
        const TimeTrace fd = simulate_free_decay(c.sys(), taus, mirror_detuning);
        c.emit("free_decay.csv", trace_csv(fd));
        const FitResult ef = fit_exponential(fd);
        c.emit("free_decay_fit.json", fit_json(ef));
        c.summary["free_decay_rate_mhz"] = ef.value("rate_mhz");
    }
}

// Replaces the mirrors' dephasing with values reproducing measured dark-state rates.
SystemSpec apply_dark_rates(const SystemSpec& spec, std::size_t probe_index, double gamma1, double gamma2) {
    SystemSpec out = spec;
    std::vector<std::size_t> mirrors;
    for (std::size_t j = 0; j < spec.size(); ++j)
        if (j != probe_index) mirrors.push_back(j);
    if (mirrors.size() != 2) throw ConfigError("'params.dark_rates_mhz' needs exactly two mirror qubits");
    const DephasingPair dp = invert_dark_state_rates(gamma1, gamma2, spec.params(mirrors[0]).gamma_loss);
    for (auto j : mirrors) out.qubits[j].params.gamma_phi = dp.gphi;
    out.dephasing_correlations.clear();
    for (const auto& c : spec.dephasing_correlations)
        if (c.i == probe_index || c.j == probe_index) out.dephasing_correlations.push_back(c);
    out.dephasing_correlations.push_back({mirrors[0], mirrors[1], dp.gphi_c});
    return out;
}

struct QuasiStatic {
    NoiseSpec noise;
    std::vector<double> times;
};

QuasiStatic parse_quasi_static(Obj q) {
    QuasiStatic out;
    out.noise.sigma_common = q.num("sigma_common");
    out.noise.sigma_diff = q.num("sigma_diff");
    out.noise.samples = q.index("samples");
    out.times = grid(q.child("times"));
    q.finish();
    return out;
}

// Dark-state Ramsey fringe of the mirror pair alone under static Gaussian
// detuning noise, averaged over seeded draws.
void quasi_static_ramsey(QuasiStatic qs, const SystemSpec& spec, std::size_t probe_index, Context& c) {
    qs.noise.seed = c.seed;
    const SystemSpec mirrors = without_qubit(spec, probe_index);
    if (mirrors.size() != 2) throw ConfigError("'params.quasi_static' needs exactly two mirror qubits");
    const auto modes = collective_modes(mirrors);
    const QubitBasis basis = QubitBasis::full(2);
    const CVector d = basis.single_excitation(modes.back().amplitudes);
    const CVector g = basis.state(0);
    const CVector psi = (g + d) / std::sqrt(2.0);

    auto builder = [&](double dc, double dd) {
        ModelOptions o;
        o.extra_detunings = {dc + dd, dc - dd};
        return waveguide_model(mirrors, o);
    };
    auto coherence = [&](const DensityMatrix& rho) { return 2.0 * (d.adjoint() * rho.elements() * g)(0).real(); };
    const TimeTrace tr = quasi_static_average(builder, qs.noise, coherence, DensityMatrix::pure(psi), qs.times);
    c.emit("quasi_static.csv", trace_csv(tr));
    const FitResult fit = fit_gaussian_envelope(tr);
    c.emit("quasi_static_fit.json", fit_json(fit));
    c.summary["quasi_static_sigma_mhz"] = fit.value("sigma_mhz");
}

void dark_common(Obj& p, Context& c, bool ramsey) {
    const auto delays = grid(p.child("delays"));
    DarkProtocolOptions opts;
    opts.park_detuning = p.num("park_detuning", opts.park_detuning);
    if (ramsey) opts.artificial_detuning = p.num("artificial_detuning", opts.artificial_detuning);
    SystemSpec spec = c.sys();
    const std::size_t pi = probe(c);
    if (p.has("dark_rates_mhz")) {
        const auto r = p.numbers("dark_rates_mhz");
        if (r.size() != 2) throw ConfigError(p.at("dark_rates_mhz") + " must be [gamma1_D, gamma2_D]");
        spec = apply_dark_rates(spec, pi, r[0], r[1]);
    }
    std::optional<QuasiStatic> qs;
    if (ramsey && p.has("quasi_static")) qs = parse_quasi_static(p.child("quasi_static"));
    parsed(p, c);

    const DarkDecayResult res = ramsey ? simulate_ramsey_dark(spec, delays, opts) : simulate_t1_dark(spec, delays, opts);
    c.emit(ramsey ? "ramsey.csv" : "t1.csv", trace_csv(res.trace));
    c.emit("fit.json", fit_json(res.fit));
    c.summary[ramsey ? "t2_ns" : "t1_ns"] = res.time_ns;
    c.summary["rate_mhz"] = res.rate_mhz;
    fit_into(c, "fit", res.fit);
    if (qs) quasi_static_ramsey(*qs, spec, pi, c);
}

void run_t1_dark(Obj& p, Context& c) { dark_common(p, c, false); }
void run_ramsey_dark(Obj& p, Context& c) { dark_common(p, c, true); }

void run_shelve(Obj& p, Context& c) {
    const double g1d = p.num("g1d");
    const double rho_dd = p.num("rho_dd");
    const double x = p.num("x", 0.15);
    const double pulse = p.num("pulse_ns", 0.0);
    const auto dets = grid(p.child("grid"));
    parsed(p, c);

    auto reduced = [&](double rho) {
        SpectrumScan s;
        s.detunings = dets;
        for (double d : dets) s.t.push_back(shelved_transmission(g1d, 2.0 * g1d, rho, d));
        s.metadata["model"] = "reduced";
        s.metadata["rho_dd"] = std::to_string(rho);
        return s;
    };
    SpectrumScan empty = reduced(0.0), shelved = reduced(rho_dd);
    SpectrumScan full = shelved_transmission_full(g1d, rho_dd, x, dets);
    double dev = 0.0;
    for (std::size_t k = 0; k < dets.size(); ++k) dev = std::max(dev, std::abs(full.t[k] - shelved.t[k]));
    if (pulse > 0.0) {
        empty = pulse_bandwidth_average(empty, pulse);
        shelved = pulse_bandwidth_average(shelved, pulse);
    }
    c.emit("empty.csv", scan_csv(empty));
    c.emit("shelved.csv", scan_csv(shelved));
    c.emit("full.csv", scan_csv(full));
    c.summary["t0_sq_empty"] = std::norm(shelved_transmission(g1d, 2.0 * g1d, 0.0, 0.0));
    c.summary["t0_sq_shelved"] = std::norm(shelved_transmission(g1d, 2.0 * g1d, rho_dd, 0.0));
    c.summary["max_full_vs_reduced"] = dev;
    c.summary["bound_2x2"] = 2.0 * x * x;
}

void run_two_excitation(Obj& p, Context& c) {
    const auto taus = grid(p.child("taus"));
    parsed(p, c);
    const TwoExcitationResult r = simulate_two_excitation(c.sys(), taus);
    c.emit("atomic.csv", trace_csv(r.atomic));
    c.emit("single.csv", trace_csv(r.single));
    c.emit("cavity_first.csv", trace_csv(r.cavity_first));
    c.emit("cavity_second.csv", trace_csv(r.cavity_second));
    c.summary["cavity_first_mhz"] = r.cavity_first_mhz;
    c.summary["cavity_second_mhz"] = r.cavity_second_mhz;
    c.summary["frequency_ratio"] = r.frequency_ratio;
    c.summary["single_damping_mhz"] = r.single_damping_mhz;
    c.summary["second_damping_mhz"] = r.second_damping_mhz;
    c.summary["damping_ratio"] = r.damping_ratio;
}

void run_compound(Obj& p, Context& c) {
    const auto taus = grid(p.child("taus"));
    parsed(p, c);
    const CompoundResult r = simulate_compound_mirrors(c.sys(), taus);
    c.emit("d1.csv", trace_csv(r.d1));
    c.emit("d2.csv", trace_csv(r.d2));
    c.summary["frequency_1_mhz"] = r.frequency_1;
    c.summary["frequency_2_mhz"] = r.frequency_2;
    c.summary["splitting_mhz"] = r.splitting;
    c.summary["two_j_1_mhz"] = r.two_j_1;
    c.summary["two_j_2_mhz"] = r.two_j_2;
    for (const auto& [name, tr, two_j] : {std::tuple{"d1", &r.d1, r.two_j_1}, std::tuple{"d2", &r.d2, r.two_j_2}}) {
        SinusoidOptions so;
        so.decaying_baseline = true;
        so.frequency_guess = two_j;
        const FitResult fit = fit_damped_sinusoid(*tr, so);
        c.emit(std::string(name) + "_fit.json", fit_json(fit));
        c.summary[std::string(name) + "_frequency_mhz"] = fit.value("frequency_mhz");
    }
}

void run_calib(Obj& p, Context& c) {
    Json out = Json::object();
    if (p.has("transmon")) {
        Obj t = p.child("transmon");
        TransmonModel m{t.num("ej1"), t.num("ej2"), t.num("ec")};
        std::vector<double> flux = t.has("flux") ? t.numbers("flux") : std::vector<double>{0.0, 0.5};
        t.finish();
        Json f = Json::array();
        for (double x : flux) f.push_back({{"flux", x}, {"f01_ghz", transmon_frequency(m, x)}});
        out["transmon"] = {{"asymmetry", m.asymmetry()}, {"frequencies", f}};
        c.summary["f_max_ghz"] = transmon_frequency(m, 0.0);
        c.summary["f_min_ghz"] = transmon_frequency(m, 0.5);
    }
    if (p.has("dispersive")) {
        Obj d = p.child("dispersive");
        const double chi = dispersive_shift(d.num("g_mhz"), d.num("delta_ghz"), d.num("eta_mhz"));
        d.finish();
        out["dispersive_shift_mhz"] = chi;
        c.summary["chi_mhz"] = chi;
    }
    if (p.has("resonator")) {
        Obj r = p.child("resonator");
        ReadoutResonator res{r.num("f_r"), r.num("g"), r.num("qi"), r.num("qe")};
        const double k = resonator_purcell_estimate(res, r.num("f_q"));
        r.finish();
        out["resonator_purcell_khz_estimate"] = k;
        c.summary["resonator_purcell_khz_estimate"] = k;
    }
    if (p.has("crosstalk")) {
        Obj x = p.child("crosstalk");
        fs::path file = x.text("file");
        if (file.is_relative()) file = fs::path(c.base_dir) / file;
        const auto offsets = x.numbers("target_offsets_mhz");
        x.finish();
        const CrosstalkMatrix ct = CrosstalkMatrix::load(file.string());
        if (static_cast<Eigen::Index>(offsets.size()) != ct.f0.size())
            throw ConfigError(x.at("target_offsets_mhz") + " must have one entry per qubit");
        RVector target = ct.f0;
        for (std::size_t k = 0; k < offsets.size(); ++k) target(static_cast<Eigen::Index>(k)) += offsets[k] * 1e-3;
        const BiasSolution b = crosstalk_bias(ct, target);
        out["crosstalk"] = {{"v", std::vector<double>(b.v.data(), b.v.data() + b.v.size())},
                            {"dv", std::vector<double>(b.v.size())},
                            {"warnings", b.warnings}};
        for (Eigen::Index k = 0; k < b.v.size(); ++k) out["crosstalk"]["dv"][static_cast<std::size_t>(k)] = b.v(k) - ct.v0(k);
        c.summary["crosstalk_dv"] = out["crosstalk"]["dv"];
    }
    if (p.has("thermal")) {
        Obj t = p.child("thermal");
        const double t0 = t.num("t0_sq"), f = t.num("f_ghz");
        t.finish();
        const double n = thermal_bound(std::sqrt(t0));
        out["thermal"] = {{"n_th_bound", n}, {"temperature_k", temperature_from_occupation(f, n)}};
        c.summary["n_th_bound"] = n;
        c.summary["temperature_mk"] = 1e3 * temperature_from_occupation(f, n);
    }
    if (p.has("saturation")) {
        Obj s = p.child("saturation");
        const PowerBound pb = saturation_power_bound(s.num("g1d"), s.num("gprime"), s.num("f_ghz"));
        s.finish();
        out["saturation"] = {{"watts", pb.watts}, {"dbm", pb.dbm}};
        c.summary["saturation_dbm"] = pb.dbm;
    }
    if (out.empty()) throw ConfigError("'params' for calib needs at least one of transmon, dispersive, resonator, "
                                       "crosstalk, thermal, saturation");
    parsed(p, c);
    c.emit("calib.json", out.dump(2) + "\n");
}

void run_steady(Obj& p, Context& c) {
    const DriveSpec drive = parse_drive(p.child("drive"), &*c.system, false);
    const double det = p.num("detuning", 0.0);
    parsed(p, c);
    const double one[] = {det};
    const SpectrumScan s = multi_qubit_transmission(c.sys(), drive, one);
    c.emit("steady.csv", scan_csv(s));
    c.summary["re_t"] = s.t[0].real();
    c.summary["im_t"] = s.t[0].imag();
    c.summary["abs_t_sq"] = std::norm(s.t[0]);
    if (!s.warnings.empty()) c.summary["warnings"] = s.warnings;
}

void run_modes(Obj& p, Context& c) {
    parsed(p, c);
    Json modes = Json::array();
    for (const auto& m : collective_modes(c.sys())) {
        Json amps = Json::array();
        for (Eigen::Index k = 0; k < m.amplitudes.size(); ++k) amps.push_back({m.amplitudes(k).real(), m.amplitudes(k).imag()});
        modes.push_back({{"frequency_mhz", m.frequency_shift}, {"decay_mhz", m.decay_rate}, {"amplitudes", amps}});
    }
    Json out = {{"modes", modes}};
    double sum = 0.0;
    for (const auto& m : collective_modes(c.sys())) sum += m.decay_rate;
    c.summary["decay_sum_mhz"] = sum;
    if (c.sys().probe_index && c.sys().size() > 1) {
        Json mm = Json::array();
        for (const auto& m : mirror_modes(c.sys()))
            mm.push_back({{"frequency_mhz", m.frequency}, {"decay_mhz", m.decay}, {"two_j_mhz", m.two_j}});
        out["mirror_modes"] = mm;
        c.summary["probe_two_j_mhz"] = probe_dark_mode(c.sys()).two_j;
    }
    c.emit("modes.json", out.dump(2) + "\n");
}

struct Entry {
    ExperimentInfo info;
    Runner run;
    bool needs_system;
};

const std::vector<Entry>& registry() {
    static const std::vector<Entry> entries = {
        {{"spectrum", "steady-state waveguide transmission over a detuning grid",
          {{"drive", "{port, xy_qubit, power_dbm | omega_rabi (MHz), frequency_ghz}"},
           {"grid", "{start, stop, points} drive detuning, MHz"},
           {"pulse_ns", "optional rectangular-pulse bandwidth averaging"},
           {"lorentzian_fit", "fit the single-resonance lineshape"},
           {"peaks", "none | raw | without_probe: report peak separation"}}},
         run_spectrum, true},
        {{"xy-spectrum", "field emitted under a local XY drive over a detuning grid",
          {{"drive", "{xy_qubit, power_dbm | omega_rabi (MHz)}"}, {"grid", "{start, stop, points} MHz"},
           {"pulse_ns", "optional"}, {"lorentzian_fit", "optional"}, {"peaks", "none | raw"}}},
         run_xy_spectrum, true},
        {{"rabi", "probe vacuum Rabi oscillation with the mirror dark mode, plus free decay",
          {{"taus", "{start, stop, points} interaction time, ns"},
           {"free_decay", "also simulate the detuned-mirror reference (default true)"},
           {"mirror_detuning", "mirror detuning for the reference, MHz (default 2000)"}}},
         run_rabi, true},
        {{"t1-dark", "dark-state population decay via iSWAP in and out",
          {{"delays", "{start, stop, points} wait time, ns"}, {"park_detuning", "probe detuning while waiting, MHz"},
           {"dark_rates_mhz", "optional [Gamma1_D, Gamma2_D]: set mirror dephasing from dark-state rates"}}},
         run_t1_dark, true},
        {{"ramsey-dark", "dark-state Ramsey sequence",
          {{"delays", "{start, stop, points} ns"}, {"park_detuning", "MHz"},
           {"artificial_detuning", "phase advance of the second pulse, MHz"}, {"dark_rates_mhz", "optional"},
           {"quasi_static", "optional {sigma_common, sigma_diff, samples, times}: seeded static-noise fringe"}}},
         run_ramsey_dark, true},
        {{"shelve", "transmission through a lambda/2 pair with and without a stored excitation",
          {{"g1d", "mirror waveguide rate, MHz"}, {"rho_dd", "dark-state population"},
           {"x", "Omega_B / Gamma_B of the full model (default 0.15)"}, {"pulse_ns", "optional averaging"},
           {"grid", "{start, stop, points} MHz"}}},
         run_shelve, false},
        {{"two-excitation", "Rabi oscillation with a second probe excitation and the linear-cavity companion",
          {{"taus", "{start, stop, points} ns"}}},
         run_two_excitation, true},
        {{"compound", "probe Rabi oscillations against the two dark modes of compound mirrors",
          {{"taus", "{start, stop, points} ns"}}},
         run_compound, true},
        {{"calib", "transmon, dispersive, crosstalk, resonator, thermal and saturation calculators",
          {{"transmon", "{ej1, ej2, ec (GHz), flux}"}, {"dispersive", "{g_mhz, delta_ghz, eta_mhz}"},
           {"resonator", "{f_r, g, qi, qe, f_q}"}, {"crosstalk", "{file, target_offsets_mhz}"},
           {"thermal", "{t0_sq, f_ghz}"}, {"saturation", "{g1d, gprime, f_ghz}"}}},
         run_calib, false},
        {{"steady", "driven steady state at a single detuning",
          {{"drive", "as for spectrum"}, {"detuning", "MHz"}}},
         run_steady, true},
        {{"modes", "collective modes of the effective Hamiltonian", {}}, run_modes, true},
    };
    return entries;
}

const Entry* find_entry(const std::string& name) {
    for (const auto& e : registry())
        if (e.info.name == name) return &e;
    return nullptr;
}

std::size_t levenshtein(const std::string& a, const std::string& b) {
    std::vector<std::size_t> prev(b.size() + 1), cur(b.size() + 1);
    for (std::size_t j = 0; j <= b.size(); ++j) prev[j] = j;
    for (std::size_t i = 1; i <= a.size(); ++i) {
        cur[0] = i;
        for (std::size_t j = 1; j <= b.size(); ++j)
            cur[j] = std::min({prev[j] + 1, cur[j - 1] + 1, prev[j - 1] + (a[i - 1] == b[j - 1] ? 0 : 1)});
        std::swap(prev, cur);
    }
    return prev[b.size()];
}

struct Parsed {
    const Entry* entry = nullptr;
    std::optional<SystemSpec> system;
    std::string output;
    std::uint64_t seed = 0;
};

}  // namespace

SystemSpec parse_system(const Json& j) {
    Obj s(j, "system");
    SystemSpec spec;
    const Json& qs = s.array("qubits");
    for (std::size_t k = 0; k < qs.size(); ++k) {
        Obj q(qs[k], "system.qubits[" + std::to_string(k) + "]");
        Emitter e;
        e.params.label = q.text("label", "Q" + std::to_string(k));
        e.params.gamma_1d = q.num("gamma_1d");
        e.params.gamma_loss = q.num("gamma_loss", 0.0);
        e.params.gamma_phi = q.num("gamma_phi", 0.0);
        e.params.f_max = q.num("f_max", 0.0);
        e.params.f_min = q.num("f_min", e.params.f_max);
        e.placement.phase = std::numbers::pi * q.num("phase_pi", 0.0);
        q.finish();
        spec.qubits.push_back(std::move(e));
    }
    if (s.has("probe_index")) spec.probe_index = s.index("probe_index");
    if (s.has("direct_couplings")) {
        const Json& cs = s.array("direct_couplings");
        for (std::size_t k = 0; k < cs.size(); ++k) {
            Obj c(cs[k], "system.direct_couplings[" + std::to_string(k) + "]");
            spec.direct_couplings.push_back({c.index("i"), c.index("j"), c.num("g")});
            c.finish();
        }
    }
    if (s.has("dephasing_correlations")) {
        const Json& cs = s.array("dephasing_correlations");
        for (std::size_t k = 0; k < cs.size(); ++k) {
            Obj c(cs[k], "system.dephasing_correlations[" + std::to_string(k) + "]");
            spec.dephasing_correlations.push_back({c.index("i"), c.index("j"), c.num("rate")});
            c.finish();
        }
    }
    if (s.has("detunings")) spec.detunings = s.numbers("detunings");
    spec.n_th = s.num("n_th", 0.0);
    spec.working_frequency = s.num("working_frequency", 0.0);
    s.finish();
    try {
        spec.validate();
    } catch (const InputError& e) {
        throw ConfigError(std::string("'system': ") + e.what());
    }
    return spec;
}

const std::vector<ExperimentInfo>& experiments() {
    static const std::vector<ExperimentInfo> infos = [] {
        std::vector<ExperimentInfo> v;
        for (const auto& e : registry()) v.push_back(e.info);
        return v;
    }();
    return infos;
}

std::string nearest_experiment(const std::string& name) {
    std::string best;
    std::size_t best_d = std::string::npos;
    for (const auto& e : registry()) {
        const std::size_t d = levenshtein(name, e.info.name);
        if (d < best_d) best_d = d, best = e.info.name;
    }
    return best;
}

std::string list_experiments(bool as_json) {
    if (as_json) {
        Json arr = Json::array();
        for (const auto& e : experiments()) {
            Json params = Json::object();
            for (const auto& p : e.params) params[p.key] = p.doc;
            arr.push_back({{"name", e.name}, {"summary", e.summary}, {"params", params}});
        }
        return arr.dump(2) + "\n";
    }
    std::ostringstream os;
    for (const auto& e : experiments()) {
        os << e.name << "\n    " << e.summary << "\n";
        for (const auto& p : e.params) os << "      " << p.key << ": " << p.doc << "\n";
    }
    return os.str();
}

Json load_config(const std::string& path) {
    const std::string text = read_text(path);
    try {
        return Json::parse(text);
    } catch (const Json::parse_error& e) {
        throw ConfigError(path + ": not valid JSON: " + e.what());
    }
}

namespace {

Parsed check(const Json& config, Context& c) {
    if (!config.is_object() || config.empty()) throw ConfigError("config is empty; 'experiment' is required");
    Obj top(config, "");
    Parsed parsed;
    const std::string name = top.text("experiment");
    parsed.entry = find_entry(name);
    if (!parsed.entry)
        throw ConfigError("unknown experiment '" + name + "'; nearest match is '" + nearest_experiment(name) + "'");
    if (top.has("system")) parsed.system = parse_system(config.at("system"));
    if (parsed.entry->needs_system && !parsed.system) throw ConfigError("missing key 'system'");
    parsed.output = top.text("output", "out/" + name);
    if (top.has("seed")) parsed.seed = top.index("seed");
    const Json empty = Json::object();
    Obj params(top.has("params") ? config.at("params") : empty, "params");
    top.finish();

    c.system = parsed.system;
    c.seed = parsed.seed;
    c.prefix = parsed.output;
    try {
        parsed.entry->run(params, c);
    } catch (const SchemaChecked&) {
    }
    return parsed;
}

}  // namespace

void validate_config(const Json& config, const std::string& base_dir) {
    Context c;
    c.base_dir = base_dir;
    c.dry = true;
    c.write = false;
    check(config, c);
}

RunResult execute(Json config, const RunOptions& opts, const std::string& base_dir) {
    const auto t0 = std::chrono::steady_clock::now();
    if (config.is_object() && !config.empty()) {
        if (opts.output) config["output"] = *opts.output;
        if (opts.seed) config["seed"] = *opts.seed;
    }
    Context ctx;
    ctx.write = opts.write_files;
    ctx.base_dir = base_dir;
    const Parsed parsed = check(config, ctx);

    RunResult r;
    r.summary = ctx.summary;
    r.outputs = ctx.outputs;
    const double wall = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    r.manifest = {{"tool", "wgqed"},
                  {"version", WGQED_VERSION},
                  {"experiment", parsed.entry->info.name},
                  {"config_hash", hex64(fnv1a64(config.dump()))},
                  {"seed", parsed.seed},
                  {"wall_time_s", wall},
                  {"outputs", r.outputs},
                  {"summary", r.summary}};
    if (opts.write_files) {
        const std::string path = ctx.prefix + "_manifest.json";
        write_text(path, r.manifest.dump(2) + "\n");
        r.outputs.push_back(path);
    }
    return r;
}

int run_config_file(const std::string& path, const RunOptions& opts, std::ostream& out, std::ostream& err) {
    try {
        const Json config = load_config(path);
        const RunResult r = execute(config, opts, fs::path(path).parent_path().string());
        out << r.manifest.dump(2) << "\n";
        return 0;
    } catch (const InputError& e) {
        err << "error: " << e.what() << "\n";
        return 1;
    } catch (const std::exception& e) {
        err << "numerical failure: " << e.what() << "\n";
        return 2;
    }
}

int validate_config_file(const std::string& path, std::ostream& out, std::ostream& err) {
    try {
        validate_config(load_config(path), fs::path(path).parent_path().string());
        out << "ok\n";
        return 0;
    } catch (const InputError& e) {
        err << "error: " << e.what() << "\n";
        return 1;
    }
}

}  // namespace wgqed
