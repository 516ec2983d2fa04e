#include "wgqed/calibration.hpp"

#include <cmath>
#include <fstream>
#include <limits>
#include <numbers>
#include <sstream>

#include <Eigen/LU>
#include <Eigen/SVD>
#include "json.hpp"

namespace wgqed {

namespace {

void require(bool ok, const std::string& msg) {
    if (!ok) throw InputError(msg);
}

}  // namespace

void TransmonModel::validate() const {
    require(std::isfinite(ej1) && std::isfinite(ej2) && std::isfinite(ec), "non-finite transmon energy");
    require(ej2 > 0.0 && ej1 >= ej2, "transmon needs ej1 >= ej2 > 0");
    require(ec > 0.0, "transmon needs ec > 0");
}

double transmon_frequency(const TransmonModel& model, double flux) {
    model.validate();
    require(std::isfinite(flux), "non-finite flux");
    const double d = model.asymmetry();
    const double x = std::numbers::pi * flux;
    const double c = std::cos(x), s = std::sin(x);
    // |cos| sqrt(1 + d^2 tan^2) without the pole at half a flux quantum
    const double ej = (model.ej1 + model.ej2) * std::sqrt(c * c + d * d * s * s);
    return std::sqrt(8.0 * model.ec * ej) - model.ec;
}

double dispersive_shift(double g_mhz, double delta_ghz, double eta_mhz) {
    require(std::isfinite(g_mhz) && std::isfinite(delta_ghz) && std::isfinite(eta_mhz), "non-finite input");
    const double delta = delta_ghz * 1e3;
    require(delta != 0.0 && delta + eta_mhz != 0.0, "dispersive shift is singular at Delta = 0 or Delta = -eta");
    require((delta > 0.0) == (delta + eta_mhz > 0.0), "straddling regime: Delta and Delta + eta differ in sign");
    return g_mhz * g_mhz * eta_mhz / (delta * (delta + eta_mhz));
}

void CrosstalkMatrix::validate() const {
    require(m.rows() > 0 && m.rows() == m.cols(), "crosstalk matrix must be square");
    require(f0.size() == m.rows() && v0.size() == m.rows(), "f0 and v0 must match the matrix size");
    require(m.allFinite() && f0.allFinite() && v0.allFinite(), "non-finite crosstalk data");
    const double cond = condition_number();
    require(std::isfinite(cond) && cond < 1e6, "crosstalk matrix is singular or ill-conditioned");
}

double CrosstalkMatrix::condition_number() const {
    Eigen::JacobiSVD<RMatrix> svd(m);
    const auto& s = svd.singularValues();
    if (s(s.size() - 1) == 0.0) return std::numeric_limits<double>::infinity();
    return s(0) / s(s.size() - 1);
}

RVector CrosstalkMatrix::frequencies(const RVector& v) const {
    require(v.size() == m.cols(), "voltage vector has the wrong size");
    return f0 + m * (v - v0);
}

CrosstalkMatrix CrosstalkMatrix::from_json_text(const std::string& text) {
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(text);
    } catch (const nlohmann::json::parse_error& e) {
        throw InputError(std::string("crosstalk file: ") + e.what());
    }
    require(j.is_object(), "crosstalk file must hold an object");
    for (auto it = j.begin(); it != j.end(); ++it)
        require(it.key() == "m" || it.key() == "f0" || it.key() == "v0", "crosstalk file: unknown key '" + it.key() + "'");
    for (const char* key : {"m", "f0", "v0"}) {
        require(j.contains(key) && j[key].is_array(), std::string("crosstalk file: '") + key + "' must be an array");
        for (const auto& x : j[key]) require(x.is_number(), std::string("crosstalk file: '") + key + "' must hold numbers");
    }
    const auto n = static_cast<Eigen::Index>(j["f0"].size());
    require(static_cast<Eigen::Index>(j["m"].size()) == n * n, "crosstalk file: 'm' must have n*n entries");
    CrosstalkMatrix ct;
    ct.m.resize(n, n);
    ct.f0.resize(n);
    ct.v0.resize(n);
    for (Eigen::Index r = 0; r < n; ++r) {
        for (Eigen::Index c = 0; c < n; ++c) ct.m(r, c) = j["m"][static_cast<std::size_t>(r * n + c)].get<double>();
        ct.f0(r) = j["f0"][static_cast<std::size_t>(r)].get<double>();
    }
    require(static_cast<Eigen::Index>(j["v0"].size()) == n, "crosstalk file: 'v0' must have n entries");
    for (Eigen::Index r = 0; r < n; ++r) ct.v0(r) = j["v0"][static_cast<std::size_t>(r)].get<double>();
    ct.validate();
    return ct;
}

CrosstalkMatrix CrosstalkMatrix::load(const std::string& path) {
    std::ifstream in(path);
    require(static_cast<bool>(in), "cannot read crosstalk file " + path);
    std::stringstream ss;
    ss << in.rdbuf();
    return from_json_text(ss.str());
}

BiasSolution crosstalk_bias(const CrosstalkMatrix& ct, const RVector& f_target) {
    ct.validate();
    require(f_target.size() == ct.f0.size() && f_target.allFinite(), "target frequencies must match the matrix size");
    BiasSolution out;
    const RVector df = f_target - ct.f0;
    for (Eigen::Index k = 0; k < df.size(); ++k)
        if (std::abs(df(k)) > 0.1)
            out.warnings.push_back("target " + std::to_string(k) + " is " + std::to_string(df(k) * 1e3) +
                                   " MHz from f0, outside the linear range");
    out.v = ct.v0 + ct.m.partialPivLu().solve(df);
    return out;
}

void ReadoutResonator::validate() const {
    require(std::isfinite(f_r) && f_r > 0.0, "resonator frequency must be positive");
    require(std::isfinite(g) && g >= 0.0, "resonator coupling must be >= 0");
    require(std::isfinite(qi) && qi > 0.0 && std::isfinite(qe) && qe > 0.0, "quality factors must be positive");
}

double resonator_purcell_estimate(const ReadoutResonator& res, double f_q) {
    res.validate();
    require(std::isfinite(f_q), "non-finite qubit frequency");
    const double delta = (f_q - res.f_r) * 1e3;  // MHz
    require(delta != 0.0, "qubit sits on the resonator");
    const double kappa_e = res.f_r * 1e3 / res.qe;  // MHz
    const double r = res.g / delta;
    return r * r * kappa_e * 1e3;
}

}  // namespace wgqed
