#pragma once

#include <stdexcept>
#include <string>

namespace bagf {

enum class ErrorCode {
    ZeroRow,
    DimMismatch,
    EmptyInput,
    NotNormalized,
    EmptyVocabulary,
    DuplicateEntry,
    TokenOutOfRange,
    CoverageMismatch,
    EmptyMask,
    GridMismatch,
    NonSquare,
    NonPositiveTau,
    DivergenceDetected,
    DuplicateId,
    UnsupportedMode,
    MissingLateMatrix,
    MissingQrel,
    IoError,
    FormatError,
};

const char* error_code_name(ErrorCode code);

// Library-wide exception. The CLI maps it to a nonzero exit status and a
// single "error: <Code>: <message>" line on stderr.
class Error : public std::runtime_error {
public:
    Error(ErrorCode code, const std::string& message)
        : std::runtime_error(std::string(error_code_name(code)) + ": " + message),
          code_(code) {}

    ErrorCode code() const noexcept { return code_; }

private:
    ErrorCode code_;
};

[[noreturn]] inline void raise(ErrorCode code, const std::string& message) {
    throw Error(code, message);
}

} // namespace bagf
