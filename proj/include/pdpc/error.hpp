#pragma once

#include <stdexcept>
#include <string>

namespace pdpc {

// Maps one-to-one onto the CLI exit codes (2, 3, 4).
enum class ErrorKind { Input, Solver, Io };

/// Base of every error raised by the library. Carries the pipeline stage
/// (module name) that failed so the CLI can report it.
class Error : public std::runtime_error {
public:
    Error(ErrorKind kind, std::string stage, const std::string& what)
        : std::runtime_error(stage + ": " + what), kind_(kind), stage_(std::move(stage)) {}

    ErrorKind kind() const noexcept { return kind_; }
    const std::string& stage() const noexcept { return stage_; }

private:
    ErrorKind kind_;
    std::string stage_;
};

class InputError : public Error {
public:
    InputError(std::string stage, const std::string& what)
        : Error(ErrorKind::Input, std::move(stage), what) {}
};

class IoError : public Error {
public:
    IoError(std::string stage, const std::string& what)
        : Error(ErrorKind::Io, std::move(stage), what) {}
};

/// Raised when the inner convex solver exhausts its iteration budget.
class SolverStalled : public Error {
public:
    SolverStalled(std::string stage, const std::string& what, double primal_residual,
                  double dual_residual)
        : Error(ErrorKind::Solver, std::move(stage), what),
          primal_residual_(primal_residual), dual_residual_(dual_residual) {}

    double primal_residual() const noexcept { return primal_residual_; }
    double dual_residual() const noexcept { return dual_residual_; }

private:
    double primal_residual_;
    double dual_residual_;
};

}  // namespace pdpc
