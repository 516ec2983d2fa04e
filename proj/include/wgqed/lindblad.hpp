#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <vector>

#include "wgqed/core.hpp"
#include "wgqed/trace.hpp"
#include "wgqed/types.hpp"

namespace wgqed {

// Product basis of n qubits. Bit j of a state's mask is set when qubit j is
// excited. A truncated basis keeps only states with at most max_excitations
// excitations; it is closed under lowering operators, so it is exact for
// excitation-conserving dynamics with decay but no drive.
class QubitBasis {
public:
    static QubitBasis full(std::size_t n_qubits);
    static QubitBasis truncated(std::size_t n_qubits, std::size_t max_excitations);

    std::size_t qubits() const { return n_qubits_; }
    Eigen::Index dim() const { return static_cast<Eigen::Index>(states_.size()); }
    const std::vector<std::uint32_t>& states() const { return states_; }
    std::optional<Eigen::Index> index_of(std::uint32_t mask) const;
    bool is_full() const { return states_.size() == (std::size_t{1} << n_qubits_); }

    CMatrix lowering(std::size_t j) const;
    CMatrix raising(std::size_t j) const { return lowering(j).adjoint(); }
    CMatrix number(std::size_t j) const;
    CMatrix sigma_z(std::size_t j) const;
    CVector state(std::uint32_t mask) const;
    // Sum_j c_j |1_j>, a single-excitation superposition.
    CVector single_excitation(const CVector& amplitudes) const;

private:
    std::size_t n_qubits_ = 0;
    std::vector<std::uint32_t> states_;
};

struct Dissipator {
    CMatrix op;
    double rate = 0.0;  // MHz
};

// Hamiltonian is stored in linear MHz; the factor 2pi is applied once, in
// assemble_liouvillian. The dephasing matrix acts on dephasing_ops (one sigma_z
// per qubit) as sum_jk (G_jk / 2)(Z_j rho Z_k - {Z_k Z_j, rho} / 2).
struct LindbladModel {
    CMatrix hamiltonian;
    std::vector<Dissipator> dissipators;
    RMatrix dephasing_matrix;
    std::vector<CMatrix> dephasing_ops;

    Eigen::Index dimension() const { return hamiltonian.rows(); }
    void validate() const;
};

class DensityMatrix {
public:
    // Checks Hermiticity (1e-10), unit trace (1e-9) and eigenvalues >= -1e-8.
    explicit DensityMatrix(CMatrix elements);

    static DensityMatrix pure(const CVector& psi);

    const CMatrix& elements() const { return rho_; }
    Eigen::Index dimension() const { return rho_.rows(); }
    cplx operator()(Eigen::Index a, Eigen::Index b) const { return rho_(a, b); }
    double expectation(const CMatrix& op) const;
    double overlap(const CVector& psi) const;

private:
    CMatrix rho_;
};

struct NoiseSpec {
    double sigma_common = 0.0;  // MHz
    double sigma_diff = 0.0;    // MHz
    std::size_t samples = 1;
    std::uint64_t seed = 0;
    void validate() const;
};

struct IntegratorOptions {
    double rtol = 1e-9;
    double atol = 1e-12;
    std::size_t max_steps = 2000000;
};

// Column-major vectorization: vec(A rho B) = (B^T kron A) vec(rho).
CVector vectorize(const CMatrix& rho);
CMatrix unvectorize(const CVector& v, Eigen::Index dim);

// Superoperator in rad/us, so that d vec(rho)/dt = L vec(rho) with t in us.
CMatrix assemble_liouvillian(const LindbladModel& model);

// Adaptive Dormand-Prince 5(4) with dense output. rho0 is the state at t = 0;
// times are in ns, non-negative and strictly increasing.
std::vector<DensityMatrix> evolve(const LindbladModel& model, const DensityMatrix& rho0,
                                  std::span<const double> times_ns, const IntegratorOptions& opts = {});

// Exact propagator exp(L dt) for a fixed step, for piecewise-constant control.
class Propagator {
public:
    Propagator(const LindbladModel& model, double dt_ns);
    Propagator(const CMatrix& liouvillian, double dt_ns);
    CVector apply(const CVector& vec_rho) const { return map_ * vec_rho; }
    const CMatrix& matrix() const { return map_; }

private:
    CMatrix map_;
};

DensityMatrix steady_state(const LindbladModel& model);

struct ThermalSteadyState {
    double rho_ee = 0.0;
    cplx rho_eg;
};

ThermalSteadyState thermal_qubit_steady(double g1d, double gloss, double gphi, double n_th, double omega_rabi,
                                        double delta);

// Independent jump operators equivalent to the correlated-dephasing matrix:
// each eigenvector v of G gives sum_j v_j Z_j at rate lambda / 2.
std::vector<Dissipator> correlated_dephasing_dissipator(const RMatrix& dephasing_matrix,
                                                        const std::vector<CMatrix>& sigma_z);

struct DarkStateRates {
    double gamma1 = 0.0;
    double gamma2 = 0.0;
};

DarkStateRates dark_state_rates(double gloss, double gphi, double gphi_c);

struct DephasingPair {
    double gphi = 0.0;
    double gphi_c = 0.0;
};

// Inverse of dark_state_rates for given loss.
DephasingPair invert_dark_state_rates(double gamma1_dark, double gamma2_dark, double gloss);

using ModelBuilder = std::function<LindbladModel(double delta_common, double delta_diff)>;
using Observable = std::function<double(const DensityMatrix&)>;

// Mean of the observable over static Gaussian (delta_c, delta_d) draws.
// Bit-identical for a fixed seed and sample count regardless of thread count.
TimeTrace quasi_static_average(const ModelBuilder& builder, const NoiseSpec& noise, const Observable& observable,
                               const DensityMatrix& rho0, std::span<const double> times_ns);

// Drive term Omega / 2 (sigma+ e^{...}) on one qubit: H += (omega sigma+ + conj(omega) sigma-) / 2.
struct DriveTerm {
    std::size_t qubit = 0;
    cplx omega;  // MHz
};

struct ModelOptions {
    double frame = 0.0;  // rotating-frame offset (drive detuning), MHz
    std::vector<DriveTerm> drives;
    std::optional<std::size_t> max_excitations;
    std::vector<double> extra_detunings;  // added on top of spec detunings
};

// Waveguide master equation for a system: exchange Hamiltonian, collective
// decay (scaled by 1 + n_th), per-qubit thermal excitation and dephasing.
LindbladModel waveguide_model(const SystemSpec& spec, const ModelOptions& opts = {});
QubitBasis basis_for(const SystemSpec& spec, const ModelOptions& opts = {});

struct LiouvillianMode {
    cplx eigenvalue;   // rad/us
    double frequency;  // MHz, |Im| / 2pi
    double decay;      // MHz, -Re / 2pi
    cplx amplitude;    // contribution to the observable trace
};

// Spectral decomposition of <O>(t) = sum_k c_k exp(lambda_k t) for the given
// Liouvillian, observable and initial state, sorted by |c_k| descending.
std::vector<LiouvillianMode> trace_modes(const CMatrix& liouvillian, const CMatrix& observable, const CMatrix& rho0);

}  // namespace wgqed
