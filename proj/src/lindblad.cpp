#include "wgqed/lindblad.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <random>
#include <sstream>

#include <Eigen/Eigenvalues>
#include <Eigen/SVD>
#include <unsupported/Eigen/KroneckerProduct>
#include <unsupported/Eigen/MatrixFunctions>
#include <boost/numeric/odeint.hpp>

#include "wgqed/parallel.hpp"

namespace wgqed {

namespace odeint = boost::numeric::odeint;

void TimeTrace::validate() const {
    if (times.size() != values.size()) throw InputError("trace times and values differ in length");
    for (std::size_t i = 1; i < times.size(); ++i)
        if (!(times[i] > times[i - 1])) throw InputError("trace times must be strictly increasing");
}

// ---- basis --------------------------------------------------------------

QubitBasis QubitBasis::full(std::size_t n_qubits) { return truncated(n_qubits, n_qubits); }

QubitBasis QubitBasis::truncated(std::size_t n_qubits, std::size_t max_excitations) {
    if (n_qubits == 0 || n_qubits > kMaxQubits) throw InputError("basis supports 1 to 5 qubits");
    QubitBasis b;
    b.n_qubits_ = n_qubits;
    for (std::uint32_t s = 0; s < (1u << n_qubits); ++s)
        if (static_cast<std::size_t>(std::popcount(s)) <= max_excitations) b.states_.push_back(s);
    return b;
}

std::optional<Eigen::Index> QubitBasis::index_of(std::uint32_t mask) const {
    auto it = std::lower_bound(states_.begin(), states_.end(), mask);
    if (it == states_.end() || *it != mask) return std::nullopt;
    return static_cast<Eigen::Index>(it - states_.begin());
}

CMatrix QubitBasis::lowering(std::size_t j) const {
    if (j >= n_qubits_) throw InputError("qubit index out of range");
    CMatrix m = CMatrix::Zero(dim(), dim());
    const std::uint32_t bit = 1u << j;
    for (Eigen::Index a = 0; a < dim(); ++a) {
        const std::uint32_t s = states_[static_cast<std::size_t>(a)];
        if (s & bit) m(*index_of(s ^ bit), a) = 1.0;
    }
    return m;
}

CMatrix QubitBasis::number(std::size_t j) const {
    if (j >= n_qubits_) throw InputError("qubit index out of range");
    CMatrix m = CMatrix::Zero(dim(), dim());
    for (Eigen::Index a = 0; a < dim(); ++a)
        if (states_[static_cast<std::size_t>(a)] & (1u << j)) m(a, a) = 1.0;
    return m;
}

CMatrix QubitBasis::sigma_z(std::size_t j) const {
    return 2.0 * number(j) - CMatrix::Identity(dim(), dim());
}

CVector QubitBasis::state(std::uint32_t mask) const {
    auto idx = index_of(mask);
    if (!idx) throw InputError("state outside the basis");
    CVector v = CVector::Zero(dim());
    v(*idx) = 1.0;
    return v;
}

CVector QubitBasis::single_excitation(const CVector& amplitudes) const {
    if (static_cast<std::size_t>(amplitudes.size()) != n_qubits_) throw InputError("amplitude count mismatch");
    CVector v = CVector::Zero(dim());
    for (std::size_t j = 0; j < n_qubits_; ++j) v(*index_of(1u << j)) = amplitudes(static_cast<Eigen::Index>(j));
    return v;
}

// ---- model and state ----------------------------------------------------

void LindbladModel::validate() const {
    const Eigen::Index d = hamiltonian.rows();
    if (d == 0 || hamiltonian.cols() != d) throw InputError("Hamiltonian must be square and non-empty");
    if (!hamiltonian.allFinite()) throw InputError("non-finite Hamiltonian");
    const double scale = std::max(1.0, hamiltonian.cwiseAbs().maxCoeff());
    if ((hamiltonian - hamiltonian.adjoint()).cwiseAbs().maxCoeff() > 1e-12 * scale)
        throw InputError("Hamiltonian is not Hermitian");
    for (const auto& dis : dissipators) {
        if (dis.op.rows() != d || dis.op.cols() != d) throw InputError("jump operator dimension mismatch");
        if (!std::isfinite(dis.rate) || dis.rate < 0.0) throw InputError("dissipator rates must be >= 0");
    }
    if (dephasing_matrix.size() > 0) {
        const auto n = dephasing_matrix.rows();
        if (dephasing_matrix.cols() != n || static_cast<Eigen::Index>(dephasing_ops.size()) != n)
            throw InputError("dephasing matrix must be square with one operator per qubit");
        if ((dephasing_matrix - dephasing_matrix.transpose()).cwiseAbs().maxCoeff() > 1e-12)
            throw InputError("dephasing matrix must be symmetric");
        for (const auto& z : dephasing_ops)
            if (z.rows() != d || z.cols() != d) throw InputError("dephasing operator dimension mismatch");
    }
}

DensityMatrix::DensityMatrix(CMatrix elements) : rho_(std::move(elements)) {
    if (rho_.rows() == 0 || rho_.rows() != rho_.cols()) throw InputError("density matrix must be square");
    if (!rho_.allFinite()) throw InputError("density matrix has non-finite entries");
    const double herm = (rho_ - rho_.adjoint()).cwiseAbs().maxCoeff();
    if (herm > 1e-10) throw InputError("density matrix is not Hermitian (" + std::to_string(herm) + ")");
    const double tr = rho_.trace().real();
    if (std::abs(tr - 1.0) > 1e-9) throw InputError("density matrix trace is " + std::to_string(tr));
    Eigen::SelfAdjointEigenSolver<CMatrix> es(0.5 * (rho_ + rho_.adjoint()), Eigen::EigenvaluesOnly);
    if (es.eigenvalues().minCoeff() < -1e-8)
        throw InputError("density matrix has eigenvalue " + std::to_string(es.eigenvalues().minCoeff()));
}

DensityMatrix DensityMatrix::pure(const CVector& psi) {
    const CVector u = psi.normalized();
    return DensityMatrix(u * u.adjoint());
}

double DensityMatrix::expectation(const CMatrix& op) const { return (op * rho_).trace().real(); }

double DensityMatrix::overlap(const CVector& psi) const { return (psi.adjoint() * rho_ * psi)(0, 0).real(); }

void NoiseSpec::validate() const {
    if (!(sigma_common >= 0.0) || !(sigma_diff >= 0.0)) throw InputError("noise sigmas must be >= 0");
    if (samples < 1) throw InputError("noise needs at least one sample");
}

CVector vectorize(const CMatrix& rho) { return Eigen::Map<const CVector>(rho.data(), rho.size()); }

CMatrix unvectorize(const CVector& v, Eigen::Index dim) { return Eigen::Map<const CMatrix>(v.data(), dim, dim); }

namespace {

std::vector<Dissipator> all_dissipators(const LindbladModel& model) {
    std::vector<Dissipator> out = model.dissipators;
    if (model.dephasing_matrix.size() > 0) {
        auto deph = correlated_dephasing_dissipator(model.dephasing_matrix, model.dephasing_ops);
        out.insert(out.end(), deph.begin(), deph.end());
    }
    return out;
}

}  // namespace

CMatrix assemble_liouvillian(const LindbladModel& model) {
    model.validate();
    const Eigen::Index d = model.dimension();
    const CMatrix id = CMatrix::Identity(d, d);
    const CMatrix& h = model.hamiltonian;
    CMatrix l = cplx(0.0, -1.0) * (Eigen::kroneckerProduct(id, h).eval() -
                                   Eigen::kroneckerProduct(h.transpose(), id).eval());
    for (const auto& dis : all_dissipators(model)) {
        if (dis.rate == 0.0) continue;
        const CMatrix& a = dis.op;
        const CMatrix ada = a.adjoint() * a;
        l += dis.rate * (Eigen::kroneckerProduct(a.conjugate(), a).eval() -
                         0.5 * Eigen::kroneckerProduct(id, ada).eval() -
                         0.5 * Eigen::kroneckerProduct(ada.transpose(), id).eval());
    }
    return kTwoPi * l;
}

// ---- time evolution -----------------------------------------------------

namespace {

using State = std::vector<cplx>;

// Right-hand side in rad/us. Small systems use the assembled superoperator,
// larger ones the matrix form -i(K rho - rho K^dag) + sum r A rho A^dag.
class MasterEquation {
public:
    explicit MasterEquation(const LindbladModel& model) : d_(model.dimension()) {
        if (d_ * d_ <= 256) {
            liouvillian_ = assemble_liouvillian(model);
            return;
        }
        model.validate();
        k_ = model.hamiltonian;
        for (const auto& dis : all_dissipators(model)) {
            if (dis.rate == 0.0) continue;
            k_ -= cplx(0.0, 0.5 * dis.rate) * (dis.op.adjoint() * dis.op);
            jumps_.push_back(dis.op);
            rates_.push_back(dis.rate);
        }
        k_ *= kTwoPi;
    }

    void operator()(const State& x, State& dxdt, double /*t*/) const {
        Eigen::Map<const CVector> v(x.data(), static_cast<Eigen::Index>(x.size()));
        Eigen::Map<CVector> out(dxdt.data(), static_cast<Eigen::Index>(dxdt.size()));
        if (liouvillian_.size() > 0) {
            out.noalias() = liouvillian_ * v;
            return;
        }
        Eigen::Map<const CMatrix> rho(x.data(), d_, d_);
        Eigen::Map<CMatrix> drho(dxdt.data(), d_, d_);
        const CMatrix kr = k_ * rho;
        drho.noalias() = cplx(0.0, -1.0) * kr;
        drho += cplx(0.0, 1.0) * kr.adjoint();  // rho is Hermitian, so rho K^dag = (K rho)^dag
        for (std::size_t i = 0; i < jumps_.size(); ++i)
            drho.noalias() += (kTwoPi * rates_[i]) * (jumps_[i] * rho * jumps_[i].adjoint());
    }

private:
    Eigen::Index d_;
    CMatrix liouvillian_;
    CMatrix k_;
    std::vector<CMatrix> jumps_;
    std::vector<double> rates_;
};

}  // namespace

std::vector<DensityMatrix> evolve(const LindbladModel& model, const DensityMatrix& rho0,
                                  std::span<const double> times_ns, const IntegratorOptions& opts) {
    const Eigen::Index d = model.dimension();
    if (rho0.dimension() != d) throw InputError("initial state dimension does not match the model");
    if (times_ns.empty()) return {};
    if (!(times_ns.front() >= 0.0)) throw InputError("evolution times must be >= 0");
    for (std::size_t i = 1; i < times_ns.size(); ++i)
        if (!(times_ns[i] > times_ns[i - 1])) throw InputError("evolution times must be strictly increasing");

    const MasterEquation rhs(model);
    std::vector<double> grid_us;
    const bool prepend = times_ns.front() > 0.0;
    if (prepend) grid_us.push_back(0.0);
    for (double t : times_ns) grid_us.push_back(t * 1e-3);

    State x(rho0.elements().data(), rho0.elements().data() + rho0.elements().size());
    std::vector<State> snapshots;
    snapshots.reserve(grid_us.size());
    double last_ok = 0.0;
    auto observer = [&](const State& s, double t) {
        snapshots.push_back(s);
        last_ok = t;
    };

    auto stepper = odeint::make_dense_output(opts.atol, opts.rtol, odeint::runge_kutta_dopri5<State>());
    const double span = grid_us.back() - grid_us.front();
    const double dt0 = span > 0.0 ? std::min(1e-3, span / 10.0) : 1e-3;
    try {
        odeint::integrate_times(stepper, std::cref(rhs), x, grid_us.begin(), grid_us.end(), dt0, observer,
                                odeint::max_step_checker(static_cast<int>(opts.max_steps)));
    } catch (const std::exception& e) {
        throw IntegrationError(std::string("integrator failed: ") + e.what(), last_ok * 1e3);
    }

    std::vector<DensityMatrix> out;
    out.reserve(times_ns.size());
    for (std::size_t i = prepend ? 1 : 0; i < snapshots.size(); ++i) {
        CMatrix rho = Eigen::Map<const CMatrix>(snapshots[i].data(), d, d);
        const double t_ns = grid_us[i] * 1e3;
        if (!rho.allFinite()) throw IntegrationError("state became non-finite", t_ns);
        // the jump terms let round-off build an anti-Hermitian part; drop it once it is known to be small
        const double drift = (rho - rho.adjoint()).cwiseAbs().maxCoeff();
        if (drift > 1e3 * opts.rtol)
            throw IntegrationError("tolerance not met: Hermiticity drift " + std::to_string(drift), t_ns);
        rho = 0.5 * (rho + rho.adjoint()).eval();
        try {
            out.emplace_back(rho);
        } catch (const InputError& e) {
            throw IntegrationError(std::string("tolerance not met: ") + e.what(), t_ns);
        }
    }
    return out;
}

Propagator::Propagator(const LindbladModel& model, double dt_ns) : Propagator(assemble_liouvillian(model), dt_ns) {}

Propagator::Propagator(const CMatrix& liouvillian, double dt_ns) {
    if (!(dt_ns >= 0.0) || !std::isfinite(dt_ns)) throw InputError("propagator step must be finite and >= 0");
    map_ = (liouvillian * (dt_ns * 1e-3)).exp();
}

// ---- steady state -------------------------------------------------------

DensityMatrix steady_state(const LindbladModel& model) {
    const CMatrix l = assemble_liouvillian(model);
    const Eigen::Index d = model.dimension();
    const Eigen::Index n = l.rows();

    if (n > 1) {
        double second_smallest = 0.0, largest = 0.0;
        if (n <= 256) {
            Eigen::BDCSVD<CMatrix> svd(l);
            const auto& s = svd.singularValues();
            largest = s(0);
            second_smallest = s(n - 2);
        } else {
            Eigen::ColPivHouseholderQR<CMatrix> qr(l);
            const RVector r = qr.matrixQR().diagonal().cwiseAbs();
            largest = r(0);
            second_smallest = r(n - 2);
        }
        if (!(second_smallest > 1e-10 * largest))
            throw DegenerateSteadyState("Liouvillian null space is degenerate; steady state is not unique");
    }

    CMatrix a = l;
    a.row(0).setZero();
    for (Eigen::Index i = 0; i < d; ++i) a(0, i * d + i) = 1.0;
    CVector b = CVector::Zero(n);
    b(0) = 1.0;
    const CVector x = a.partialPivLu().solve(b);

    const double residual = (l * x).cwiseAbs().maxCoeff();
    if (!x.allFinite() || residual > 1e-10 * std::max(1.0, l.cwiseAbs().maxCoeff()))
        throw NumericalError("steady-state solve residual " + std::to_string(residual));
    CMatrix rho = unvectorize(x, d);
    rho = 0.5 * (rho + rho.adjoint()).eval();
    rho /= rho.trace().real();
    return DensityMatrix(rho);
}

ThermalSteadyState thermal_qubit_steady(double g1d, double gloss, double gphi, double n_th, double omega_rabi,
                                        double delta) {
    for (double r : {g1d, gloss, gphi, n_th})
        if (!(r >= 0.0) || !std::isfinite(r)) throw InputError("rates and occupancy must be finite and >= 0");
    const double g1 = g1d + gloss;
    const double g1th = (2.0 * n_th + 1.0) * g1;
    const double g2th = 0.5 * g1th + gphi;
    if (!(g1th > 0.0)) throw InputError("thermal steady state needs a nonzero decay rate");
    const double s = omega_rabi * omega_rabi / (g1th * g2th);
    const double x = delta / g2th;
    const double denom = 1.0 + x * x + s;
    ThermalSteadyState out;
    out.rho_ee = n_th / (2.0 * n_th + 1.0) * (1.0 + x * x) / denom + 0.5 * s / denom;
    out.rho_eg = cplx(0.0, -1.0) * omega_rabi / (2.0 * g2th * (2.0 * n_th + 1.0)) * cplx(1.0, x) / denom;
    return out;
}

// ---- dephasing ----------------------------------------------------------

std::vector<Dissipator> correlated_dephasing_dissipator(const RMatrix& dephasing_matrix,
                                                        const std::vector<CMatrix>& sigma_z) {
    const auto n = dephasing_matrix.rows();
    if (dephasing_matrix.cols() != n || static_cast<Eigen::Index>(sigma_z.size()) != n)
        throw InputError("dephasing matrix must be square with one sigma_z per qubit");
    Eigen::SelfAdjointEigenSolver<RMatrix> es(dephasing_matrix);
    const RVector& lam = es.eigenvalues();
    if (n > 0 && lam.minCoeff() < -1e-9) {
        std::ostringstream msg;
        msg << "dephasing matrix is not positive semidefinite; eigenvalues:";
        for (Eigen::Index k = 0; k < n; ++k) msg << ' ' << lam(k);
        throw InputError(msg.str());
    }
    std::vector<Dissipator> out;
    for (Eigen::Index k = 0; k < n; ++k) {
        if (lam(k) <= 0.0) continue;
        CMatrix op = CMatrix::Zero(sigma_z[0].rows(), sigma_z[0].cols());
        for (Eigen::Index j = 0; j < n; ++j) op += es.eigenvectors()(j, k) * sigma_z[static_cast<std::size_t>(j)];
        out.push_back({op, 0.5 * lam(k)});
    }
    return out;
}

DarkStateRates dark_state_rates(double gloss, double gphi, double gphi_c) {
    if (!(gloss >= 0.0) || !(gphi >= 0.0) || !std::isfinite(gphi_c)) throw InputError("invalid dephasing rates");
    return {gloss + gphi - gphi_c, 0.5 * gloss + gphi};
}

DephasingPair invert_dark_state_rates(double gamma1_dark, double gamma2_dark, double gloss) {
    const double gphi = gamma2_dark - 0.5 * gloss;
    if (gphi < 0.0) throw InputError("Gamma2,D is below Gamma_loss / 2; no non-negative dephasing solves it");
    return {gphi, gloss + gphi - gamma1_dark};
}

// ---- quasi-static noise -------------------------------------------------

TimeTrace quasi_static_average(const ModelBuilder& builder, const NoiseSpec& noise, const Observable& observable,
                               const DensityMatrix& rho0, std::span<const double> times_ns) {
    noise.validate();
    std::mt19937_64 rng(noise.seed);
    std::normal_distribution<double> normal(0.0, 1.0);
    std::vector<std::pair<double, double>> draws(noise.samples);
    for (auto& dr : draws) {
        const double zc = normal(rng);
        const double zd = normal(rng);
        dr = {noise.sigma_common * zc, noise.sigma_diff * zd};
    }

    std::vector<std::vector<double>> per_sample(noise.samples);
    parallel_for(noise.samples, [&](std::size_t i) {
        try {
            const auto states = evolve(builder(draws[i].first, draws[i].second), rho0, times_ns);
            per_sample[i].reserve(states.size());
            for (const auto& s : states) per_sample[i].push_back(observable(s));
        } catch (const Error& e) {
            throw NumericalError("quasi-static sample " + std::to_string(i) + ": " + e.what());
        }
    });

    TimeTrace out;
    out.times.assign(times_ns.begin(), times_ns.end());
    out.values.assign(times_ns.size(), 0.0);
    for (const auto& sample : per_sample)
        for (std::size_t k = 0; k < sample.size(); ++k) out.values[k] += sample[k];
    for (double& v : out.values) v /= static_cast<double>(noise.samples);
    out.metadata["samples"] = std::to_string(noise.samples);
    out.metadata["seed"] = std::to_string(noise.seed);
    return out;
}

// ---- waveguide models ---------------------------------------------------

QubitBasis basis_for(const SystemSpec& spec, const ModelOptions& opts) {
    if (!opts.max_excitations) return QubitBasis::full(spec.size());
    if (!opts.drives.empty() || spec.n_th > 0.0)
        throw InputError("a truncated basis needs an undriven system at zero temperature");
    return QubitBasis::truncated(spec.size(), *opts.max_excitations);
}

LindbladModel waveguide_model(const SystemSpec& spec, const ModelOptions& opts) {
    spec.validate();
    const std::size_t n = spec.size();
    if (!opts.extra_detunings.empty() && opts.extra_detunings.size() != n)
        throw InputError("extra detunings must list one value per qubit");
    const QubitBasis basis = basis_for(spec, opts);
    const Eigen::Index d = basis.dim();

    std::vector<CMatrix> lower(n), zs(n);
    for (std::size_t j = 0; j < n; ++j) {
        lower[j] = basis.lowering(j);
        zs[j] = basis.sigma_z(j);
    }

    RMatrix exch = exchange_matrix(spec);
    for (std::size_t j = 0; j < n; ++j) {
        exch(j, j) -= opts.frame;
        if (!opts.extra_detunings.empty()) exch(j, j) += opts.extra_detunings[j];
    }

    LindbladModel model;
    model.hamiltonian = CMatrix::Zero(d, d);
    for (std::size_t m = 0; m < n; ++m)
        for (std::size_t k = 0; k < n; ++k)
            if (exch(m, k) != 0.0) model.hamiltonian += exch(m, k) * lower[m].adjoint() * lower[k];
    for (const auto& drive : opts.drives) {
        if (drive.qubit >= n) throw InputError("drive qubit out of range");
        const CMatrix& a = lower[drive.qubit];
        model.hamiltonian += 0.5 * (drive.omega * a.adjoint() + std::conj(drive.omega) * a);
    }

    const RMatrix gam = dissipation_matrix(spec);
    Eigen::SelfAdjointEigenSolver<RMatrix> es(gam);
    for (Eigen::Index k = 0; k < es.eigenvalues().size(); ++k) {
        const double rate = es.eigenvalues()(k);
        if (rate <= 1e-12 * std::max(1.0, gam.cwiseAbs().maxCoeff())) continue;
        CMatrix op = CMatrix::Zero(d, d);
        for (std::size_t j = 0; j < n; ++j) op += es.eigenvectors()(j, k) * lower[j];
        model.dissipators.push_back({op, rate * (1.0 + spec.n_th)});
    }
    if (spec.n_th > 0.0)
        for (std::size_t j = 0; j < n; ++j)
            model.dissipators.push_back({lower[j].adjoint(), spec.n_th * spec.params(j).gamma_1()});

    model.dephasing_matrix = dephasing_matrix(spec);
    model.dephasing_ops = zs;
    return model;
}

// ---- modal analysis -----------------------------------------------------

std::vector<LiouvillianMode> trace_modes(const CMatrix& liouvillian, const CMatrix& observable, const CMatrix& rho0) {
    const Eigen::Index d = rho0.rows();
    if (liouvillian.rows() != d * d || observable.rows() != d) throw InputError("modal analysis dimension mismatch");
    Eigen::ComplexEigenSolver<CMatrix> es(liouvillian);
    if (es.info() != Eigen::Success) throw NumericalError("Liouvillian eigendecomposition failed");
    const CMatrix& r = es.eigenvectors();
    const CVector coeff = r.partialPivLu().solve(vectorize(rho0));
    const CVector obs = vectorize(observable.transpose());

    std::vector<LiouvillianMode> modes;
    for (Eigen::Index k = 0; k < r.cols(); ++k) {
        LiouvillianMode m;
        m.eigenvalue = es.eigenvalues()(k);
        m.frequency = std::abs(m.eigenvalue.imag()) / kTwoPi;
        m.decay = -m.eigenvalue.real() / kTwoPi;
        m.amplitude = obs.transpose().dot(r.col(k)) * coeff(k);
        modes.push_back(m);
    }
    std::stable_sort(modes.begin(), modes.end(), [](const LiouvillianMode& a, const LiouvillianMode& b) {
        return std::abs(a.amplitude) > std::abs(b.amplitude);
    });
    return modes;
}

}  // namespace wgqed
