#include "stla/error.hpp"

#include <sstream>

namespace stla {

std::string_view to_string(ErrorKind kind) noexcept {
    switch (kind) {
        case ErrorKind::Syntax: return "SyntaxError";
        case ErrorKind::UnknownVariable: return "UnknownVariable";
        case ErrorKind::Domain: return "DomainError";
        case ErrorKind::DimensionMismatch: return "DimensionMismatch";
        case ErrorKind::InsufficientOrder: return "InsufficientOrder";
        case ErrorKind::DegenerateInput: return "DegenerateInput";
        case ErrorKind::NumericalBreakdown: return "NumericalBreakdown";
        case ErrorKind::RankDeficient: return "RankDeficient";
        case ErrorKind::InfeasibleWitness: return "InfeasibleWitness";
        case ErrorKind::NoConvergence: return "NoConvergence";
        case ErrorKind::BudgetExceeded: return "BudgetExceeded";
        case ErrorKind::OrderClaimFailed: return "OrderClaimFailed";
        case ErrorKind::GradientVanishes: return "GradientVanishes";
        case ErrorKind::NoGroupQualifies: return "NoGroupQualifies";
        case ErrorKind::NotPositiveBasis: return "NotPositiveBasis";
        case ErrorKind::RankDeficientJacobian: return "RankDeficientJacobian";
        case ErrorKind::SideConditionFailed: return "SideConditionFailed";
        case ErrorKind::BudgetExhausted: return "BudgetExhausted";
        case ErrorKind::ExitedLocality: return "ExitedLocality";
        case ErrorKind::StepUnderflow: return "StepUnderflow";
        case ErrorKind::DegenerateFit: return "DegenerateFit";
        case ErrorKind::NotInBasin: return "NotInBasin";
        case ErrorKind::InsufficientSamples: return "InsufficientSamples";
        case ErrorKind::Config: return "ConfigError";
        case ErrorKind::Io: return "IoError";
    }
    return "Unknown";
}

namespace {

std::string with_offset(std::size_t offset, const std::string& message) {
    std::ostringstream os;
    os << message << " (at byte " << offset << ")";
    return os.str();
}

std::string with_order(int order, double value, const std::string& detail) {
    std::ostringstream os;
    os << "order claim failed at order " << order << " (value " << value << ")";
    if (!detail.empty()) os << ": " << detail;
    return os.str();
}

}  // namespace

SyntaxError::SyntaxError(std::size_t offset, const std::string& message)
    : Error(ErrorKind::Syntax, with_offset(offset, message)), offset_(offset) {}

OrderClaimFailed::OrderClaimFailed(int order, double value, const std::string& detail)
    : Error(ErrorKind::OrderClaimFailed, with_order(order, value, detail)), order_(order), value_(value) {}

void raise(ErrorKind kind, const std::string& message) { throw Error(kind, message); }

}  // namespace stla
