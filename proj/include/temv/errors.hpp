#pragma once

#include <stdexcept>
#include <string>

namespace temv {

/// Coarse error category used by the CLI to map exceptions to exit codes:
/// validation errors exit 1, numerical faults exit 2.
enum class ErrorKind { Validation, Numerical };

class Error : public std::runtime_error {
public:
    Error(ErrorKind kind, std::string type, const std::string& msg)
        : std::runtime_error(msg), kind_(kind), type_(std::move(type)) {}

    ErrorKind kind() const noexcept { return kind_; }
    const std::string& type() const noexcept { return type_; }

private:
    ErrorKind kind_;
    std::string type_;
};

#define TEMV_DEFINE_ERROR(NAME, KIND)                                    \
    class NAME : public Error {                                          \
    public:                                                              \
        explicit NAME(const std::string& msg)                            \
            : Error(ErrorKind::KIND, #NAME, std::string(#NAME ": ") + msg) {} \
    }

TEMV_DEFINE_ERROR(DimensionMismatch, Validation);
TEMV_DEFINE_ERROR(InvalidCorrelation, Validation);
TEMV_DEFINE_ERROR(InsufficientData, Validation);
TEMV_DEFINE_ERROR(OutOfRange, Validation);
TEMV_DEFINE_ERROR(OutOfHorizon, Validation);
TEMV_DEFINE_ERROR(ParseError, Validation);
TEMV_DEFINE_ERROR(EmptySeries, Validation);
TEMV_DEFINE_ERROR(InvalidSpec, Validation);

TEMV_DEFINE_ERROR(DegenerateCovariance, Numerical);
TEMV_DEFINE_ERROR(ErcNonConvergence, Numerical);
TEMV_DEFINE_ERROR(NonPositiveK, Numerical);
TEMV_DEFINE_ERROR(SingularS, Numerical);
TEMV_DEFINE_ERROR(ZeroVolatility, Numerical);
TEMV_DEFINE_ERROR(NonFinitePath, Numerical);
TEMV_DEFINE_ERROR(PsdRepairFailure, Numerical);

#undef TEMV_DEFINE_ERROR

inline int exit_code(const Error& e) {
    return e.kind() == ErrorKind::Validation ? 1 : 2;
}

}  // namespace temv
