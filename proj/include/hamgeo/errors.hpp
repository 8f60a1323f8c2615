#pragma once

#include <stdexcept>
#include <string>

namespace hamgeo {

/// Base class for all library errors.
class Error : public std::runtime_error {
public:
    Error(std::string name, std::string detail)
        : std::runtime_error(name + ": " + detail),
          name_(std::move(name)),
          detail_(std::move(detail)) {}

    /// Stable machine-readable error name (used by the CLI error objects).
    const std::string& name() const { return name_; }

    /// Human-readable message without the name prefix that what() carries.
    const std::string& detail() const { return detail_; }

private:
    std::string name_;
    std::string detail_;
};

/// Bad argument shape or value (order/vars out of range, size mismatch, ...).
class InvalidArgument : public Error {
public:
    explicit InvalidArgument(const std::string& detail) : Error("InvalidArgument", detail) {}
};

/// Evaluation outside an operation's domain (log of nonpositive value, division
/// by a jet with zero constant term, ...).
class DomainError : public Error {
public:
    explicit DomainError(const std::string& detail) : Error("DomainError", detail) {}
};

/// Expression source text failed to parse; carries 1-based line/column.
class ParseError : public Error {
public:
    ParseError(const std::string& detail, int line, int column)
        : Error("ParseError", detail + " at " + std::to_string(line) + ":" + std::to_string(column)),
          line_(line), column_(column) {}
    int line() const { return line_; }
    int column() const { return column_; }

private:
    int line_, column_;
};

/// The fiber Hessian of H in p is not positive definite at the requested point.
class NotConvex : public Error {
public:
    explicit NotConvex(const std::string& detail) : Error("NotConvex", detail) {}
};

/// Linearization requested at a phase point that is not an equilibrium.
class NotEquilibrium : public Error {
public:
    explicit NotEquilibrium(const std::string& detail) : Error("NotEquilibrium", detail) {}
};

/// Iterative solve failed to reach tolerance; carries the best residual seen.
class NoConvergence : public Error {
public:
    NoConvergence(const std::string& detail, double best_residual)
        : Error("NoConvergence", detail), best_residual_(best_residual) {}
    double best_residual() const { return best_residual_; }

private:
    double best_residual_;
};

/// Shooting sensitivity matrix is singular (conjugate point).
class SingularSensitivity : public Error {
public:
    explicit SingularSensitivity(const std::string& detail) : Error("SingularSensitivity", detail) {}
};

/// One-dimensional minimization could not bracket a minimum.
class NoBracket : public Error {
public:
    explicit NoBracket(const std::string& detail) : Error("NoBracket", detail) {}
};

/// Integral cannot be evaluated with the requested scheme (e.g. Monte Carlo
/// without a proposal on a non-quadratic model).
class NotIntegrable : public Error {
public:
    explicit NotIntegrable(const std::string& detail) : Error("NotIntegrable", detail) {}
};

/// Adaptive integrator step-size underflow or step failure.
class StepFailure : public Error {
public:
    explicit StepFailure(const std::string& detail) : Error("StepFailure", detail) {}
};

/// Sampled field does not match the trajectory grid it is paired with.
class GridMismatch : public Error {
public:
    explicit GridMismatch(const std::string& detail) : Error("GridMismatch", detail) {}
};

/// Invalid job configuration (CLI layer).
class ConfigError : public Error {
public:
    explicit ConfigError(const std::string& detail, std::string location = "$")
        : Error("ConfigInvalid", detail), location_(std::move(location)) {}
    /// Config path of the offending field, e.g. "$.model.family".
    const std::string& location() const { return location_; }

private:
    std::string location_;
};

} // namespace hamgeo
