#pragma once

#include <stdexcept>
#include <string>

namespace pemux {

// Every failure the library can report, grouped by the subsystem that
// raises it. The CLI maps these onto process exit codes (see exit_code_for).
enum class Errc {
    // pe_format
    BadMagic,
    BadNtOffset,
    BadSignature,
    TruncatedSectionTable,
    FileTooShort,
    EntryPointUnmapped,
    // features
    EmptyRegion,
    // ml_math
    NonFiniteInput,
    LabelOutOfRange,
    ShapeMismatch,
    // svm
    DimensionMismatch,
    SingleClassInput,
    DegenerateScores,
    MissingClass,
    // lstm / cnn
    LengthMismatch,
    SideMismatch,
    NonFiniteState,
    // pipeline
    ClassTooSmall,
    // cli / io
    ConfigError,
    DataError,
    IoError,
};

class Error : public std::runtime_error {
public:
    Error(Errc code, std::string message)
        : std::runtime_error(std::move(message)), code_(code) {}

    Errc code() const noexcept { return code_; }

private:
    Errc code_;
};

const char* errc_name(Errc code) noexcept;

// Exit-code taxonomy: 0 ok, 2 config, 3 data/parse, 4 training divergence, 5 I/O.
int exit_code_for(Errc code) noexcept;

// Rethrows err with a "stage" prefix so end-to-end paths can report where a
// propagated failure originated.
[[noreturn]] inline void rethrow_with_stage(const Error& err, const std::string& stage) {
    throw Error(err.code(), "stage " + stage + ": " + err.what());
}

}  // namespace pemux
