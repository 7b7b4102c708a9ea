#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace ndpa {

/// Failure categories raised by the library.
enum class ErrorKind {
    InvalidParameter,
    ParseError,
    DetunedAboveThreshold,
    AboveThreshold,
    BelowThreshold,
    AtOrAboveThreshold,
    AtOrAboveDetunedThreshold,
    EliminationGuardViolated,
    PumpDetuningTooLarge,
    SingularAtFrequency,
    MarginallyStable,
    UnstableStep,
    SeedRequired,
    InsufficientDuration,
    LabelMismatch,
    UnknownFigure,
    InvalidRange,
};

inline std::string_view to_string(ErrorKind kind) {
    switch (kind) {
        case ErrorKind::InvalidParameter: return "InvalidParameter";
        case ErrorKind::ParseError: return "ParseError";
        case ErrorKind::DetunedAboveThreshold: return "DetunedAboveThreshold";
        case ErrorKind::AboveThreshold: return "AboveThreshold";
        case ErrorKind::BelowThreshold: return "BelowThreshold";
        case ErrorKind::AtOrAboveThreshold: return "AtOrAboveThreshold";
        case ErrorKind::AtOrAboveDetunedThreshold: return "AtOrAboveDetunedThreshold";
        case ErrorKind::EliminationGuardViolated: return "EliminationGuardViolated";
        case ErrorKind::PumpDetuningTooLarge: return "PumpDetuningTooLarge";
        case ErrorKind::SingularAtFrequency: return "SingularAtFrequency";
        case ErrorKind::MarginallyStable: return "MarginallyStable";
        case ErrorKind::UnstableStep: return "UnstableStep";
        case ErrorKind::SeedRequired: return "SeedRequired";
        case ErrorKind::InsufficientDuration: return "InsufficientDuration";
        case ErrorKind::LabelMismatch: return "LabelMismatch";
        case ErrorKind::UnknownFigure: return "UnknownFigure";
        case ErrorKind::InvalidRange: return "InvalidRange";
    }
    return "Unknown";
}

class Error : public std::runtime_error {
public:
    Error(ErrorKind kind, const std::string& what)
        : std::runtime_error(std::string(to_string(kind)) + ": " + what), kind_(kind) {}

    [[nodiscard]] ErrorKind kind() const noexcept { return kind_; }

    /// True for errors caused by bad user input rather than model physics.
    [[nodiscard]] bool is_input_error() const noexcept {
        return kind_ == ErrorKind::InvalidParameter || kind_ == ErrorKind::ParseError ||
               kind_ == ErrorKind::InvalidRange || kind_ == ErrorKind::UnknownFigure;
    }

private:
    ErrorKind kind_;
};

}  // namespace ndpa
