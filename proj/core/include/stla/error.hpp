#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>
#include <string_view>

namespace stla {

/// Machine-readable classification of every failure the library reports.
enum class ErrorKind {
    Syntax,
    UnknownVariable,
    Domain,
    DimensionMismatch,
    InsufficientOrder,
    DegenerateInput,
    NumericalBreakdown,
    RankDeficient,
    InfeasibleWitness,
    NoConvergence,
    BudgetExceeded,
    OrderClaimFailed,
    GradientVanishes,
    NoGroupQualifies,
    NotPositiveBasis,
    RankDeficientJacobian,
    SideConditionFailed,
    BudgetExhausted,
    ExitedLocality,
    StepUnderflow,
    DegenerateFit,
    NotInBasin,
    InsufficientSamples,
    Config,
    Io,
};

std::string_view to_string(ErrorKind kind) noexcept;

class Error : public std::runtime_error {
public:
    Error(ErrorKind kind, const std::string& what) : std::runtime_error(what), kind_(kind) {}

    ErrorKind kind() const noexcept { return kind_; }

private:
    ErrorKind kind_;
};

/// Parse failure; offset is the byte position in the source text.
class SyntaxError : public Error {
public:
    SyntaxError(std::size_t offset, const std::string& message);

    std::size_t offset() const noexcept { return offset_; }

private:
    std::size_t offset_;
};

/// Raised when an order claim on a group fails; carries the offending order and value.
class OrderClaimFailed : public Error {
public:
    OrderClaimFailed(int order, double value, const std::string& detail);

    int order() const noexcept { return order_; }
    double value() const noexcept { return value_; }

private:
    int order_;
    double value_;
};

[[noreturn]] void raise(ErrorKind kind, const std::string& message);

}  // namespace stla
