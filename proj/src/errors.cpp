#include "pemux/errors.hpp"

namespace pemux {

const char* errc_name(Errc code) noexcept {
    switch (code) {
        case Errc::BadMagic: return "BadMagic";
        case Errc::BadNtOffset: return "BadNtOffset";
        case Errc::BadSignature: return "BadSignature";
        case Errc::TruncatedSectionTable: return "TruncatedSectionTable";
        case Errc::FileTooShort: return "FileTooShort";
        case Errc::EntryPointUnmapped: return "EntryPointUnmapped";
        case Errc::EmptyRegion: return "EmptyRegion";
        case Errc::NonFiniteInput: return "NonFiniteInput";
        case Errc::LabelOutOfRange: return "LabelOutOfRange";
        case Errc::ShapeMismatch: return "ShapeMismatch";
        case Errc::DimensionMismatch: return "DimensionMismatch";
        case Errc::SingleClassInput: return "SingleClassInput";
        case Errc::DegenerateScores: return "DegenerateScores";
        case Errc::MissingClass: return "MissingClass";
        case Errc::LengthMismatch: return "LengthMismatch";
        case Errc::SideMismatch: return "SideMismatch";
        case Errc::NonFiniteState: return "NonFiniteState";
        case Errc::ClassTooSmall: return "ClassTooSmall";
        case Errc::ConfigError: return "ConfigError";
        case Errc::DataError: return "DataError";
        case Errc::IoError: return "IoError";
    }
    return "UnknownError";
}

int exit_code_for(Errc code) noexcept {
    switch (code) {
        case Errc::ConfigError:
            return 2;
        case Errc::NonFiniteState:
            return 4;
        case Errc::IoError:
            return 5;
        default:
            return 3;  // data / parse / model errors
    }
}

}  // namespace pemux
