#include "wgqed/io.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

#include "json.hpp"

namespace wgqed {

namespace {

std::string num(double x) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.12e", x);
    return buf;
}

void header(std::ostringstream& os, const std::map<std::string, std::string>& meta, const Header& extra) {
    Header all = meta;
    for (const auto& [k, v] : extra) all[k] = v;
    for (const auto& [k, v] : all) os << "# " << k << '=' << v << '\n';
}

}  // namespace

std::string scan_csv(const SpectrumScan& scan, const Header& extra) {
    std::ostringstream os;
    header(os, scan.metadata, extra);
    for (const auto& w : scan.warnings) os << "# warning=" << w << '\n';
    os << "detuning_mhz,re_t,im_t,abs_t,abs_t_sq\n";
    for (std::size_t k = 0; k < scan.size(); ++k) {
        const cplx t = scan.t[k];
        os << num(scan.detunings[k]) << ',' << num(t.real()) << ',' << num(t.imag()) << ',' << num(std::abs(t)) << ','
           << num(std::norm(t)) << '\n';
    }
    return os.str();
}

std::string trace_csv(const TimeTrace& trace, const Header& extra) {
    std::ostringstream os;
    header(os, trace.metadata, extra);
    os << "time_ns,value\n";
    for (std::size_t k = 0; k < trace.size(); ++k) os << num(trace.times[k]) << ',' << num(trace.values[k]) << '\n';
    return os.str();
}

std::string fit_json(const FitResult& fit) {
    nlohmann::ordered_json j;
    j["model"] = to_string(fit.model);
    j["residual_norm"] = fit.residual_norm;
    j["evaluations"] = fit.evaluations;
    auto& params = j["parameters"] = nlohmann::ordered_json::array();
    for (const auto& p : fit.parameters) params.push_back({{"name", p.name}, {"value", p.value}, {"sigma", p.sigma}});
    return j.dump(2) + "\n";
}

std::uint64_t fnv1a64(const std::string& bytes) {
    std::uint64_t h = 1469598103934665603ULL;
    for (unsigned char c : bytes) {
        h ^= c;
        h *= 1099511628211ULL;
    }
    return h;
}

std::string hex64(std::uint64_t x) {
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(x));
    return buf;
}

void write_text(const std::string& path, const std::string& text) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw Error("cannot write " + path);
    out << text;
    if (!out) throw Error("write failed for " + path);
}

std::string read_text(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw InputError("cannot read " + path);
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

}  // namespace wgqed
