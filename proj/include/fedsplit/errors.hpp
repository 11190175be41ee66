#pragma once

#include <stdexcept>
#include <string>

namespace fedsplit
{

/// Malformed configuration, unknown keys, bad file contents. Maps to CLI exit code 2.
class ConfigError : public std::runtime_error
{
public:
    using std::runtime_error::runtime_error;
};

/// Solver or numerical failure. Carries the round (0 when not inside a round loop)
/// and the last residual so diagnostics can report both. Maps to CLI exit code 1.
class NumericalError : public std::runtime_error
{
public:
    NumericalError(const std::string& what, int round = 0, double residual = 0.0)
        : std::runtime_error(what), round_(round), residual_(residual)
    {
    }

    int round() const noexcept { return round_; }
    double residual() const noexcept { return residual_; }

private:
    int round_;
    double residual_;
};

/// Rank-deficient Gram matrix or otherwise ill-posed closed form.
class DegenerateProblem : public NumericalError
{
public:
    using NumericalError::NumericalError;
};

/// Stepsize outside the region where an iteration or closed form is valid.
class StepsizeError : public NumericalError
{
public:
    using NumericalError::NumericalError;
};

/// Shape mismatch between operands; always a caller bug.
class DimensionMismatch : public std::invalid_argument
{
public:
    using std::invalid_argument::invalid_argument;
};

} // namespace fedsplit
