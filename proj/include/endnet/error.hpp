#pragma once

#include <stdexcept>
#include <string>

namespace endnet {

enum class ErrorCode {
    Io,
    Config,
    MalformedHeader,
    SizeMismatch,
    NonFiniteValue,
    DegenerateCube,
    DegenerateData,
    DegenerateSimplex,
    RankDeficient,
    DimensionMismatch,
    NumericalDivergence,
};

const char* to_string(ErrorCode code);

// All toolkit failures are reported through this type; the code lets callers
// (the CLI in particular) map failures to exit statuses.
class Error : public std::runtime_error {
public:
    Error(ErrorCode code, const std::string& what)
        : std::runtime_error(std::string(to_string(code)) + ": " + what), code_(code) {}

    ErrorCode code() const noexcept { return code_; }

private:
    ErrorCode code_;
};

inline const char* to_string(ErrorCode code) {
    switch (code) {
    case ErrorCode::Io: return "IoError";
    case ErrorCode::Config: return "ConfigError";
    case ErrorCode::MalformedHeader: return "MalformedHeader";
    case ErrorCode::SizeMismatch: return "SizeMismatch";
    case ErrorCode::NonFiniteValue: return "NonFiniteValue";
    case ErrorCode::DegenerateCube: return "DegenerateCube";
    case ErrorCode::DegenerateData: return "DegenerateData";
    case ErrorCode::DegenerateSimplex: return "DegenerateSimplex";
    case ErrorCode::RankDeficient: return "RankDeficient";
    case ErrorCode::DimensionMismatch: return "DimensionMismatch";
    case ErrorCode::NumericalDivergence: return "NumericalDivergence";
    }
    return "Error";
}

} // namespace endnet
