#pragma once

#include <complex>
#include <numbers>
#include <stdexcept>
#include <string>

#include <Eigen/Dense>

namespace wgqed {

using cplx = std::complex<double>;
using CMatrix = Eigen::MatrixXcd;
using CVector = Eigen::VectorXcd;
using RMatrix = Eigen::MatrixXd;
using RVector = Eigen::VectorXd;

inline constexpr double kTwoPi = 2.0 * std::numbers::pi;
inline constexpr double kPlanck = 6.62607015e-34;   // J s
inline constexpr double kBoltzmann = 1.380649e-23;  // J/K

// Base of everything thrown by the library.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// Bad input: out-of-range parameters, malformed specs, unknown keys.
class InputError : public Error {
public:
    using Error::Error;
};

// A computation that could not produce a trustworthy answer.
class NumericalError : public Error {
public:
    using Error::Error;
};

class IntegrationError : public NumericalError {
public:
    IntegrationError(const std::string& what, double time_ns)
        : NumericalError(what + " (t = " + std::to_string(time_ns) + " ns)"), time_ns_(time_ns) {}
    double time_ns() const { return time_ns_; }

private:
    double time_ns_;
};

class DegenerateSteadyState : public NumericalError {
public:
    using NumericalError::NumericalError;
};

}  // namespace wgqed
