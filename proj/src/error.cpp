#include "eegemo/error.hpp"

namespace eegemo {

std::string_view to_string(ErrorKind kind) noexcept {
  switch (kind) {
    case ErrorKind::MissingColumn: return "MissingColumn";
    case ErrorKind::RaggedRows: return "RaggedRows";
    case ErrorKind::NonNumericSample: return "NonNumericSample";
    case ErrorKind::EmptyFile: return "EmptyFile";
    case ErrorKind::MixedLabels: return "MixedLabels";
    case ErrorKind::InvalidRecording: return "InvalidRecording";
    case ErrorKind::WindowTooLarge: return "WindowTooLarge";
    case ErrorKind::InsufficientSessions: return "InsufficientSessions";
    case ErrorKind::SignalTooShort: return "SignalTooShort";
    case ErrorKind::TooManyLevels: return "TooManyLevels";
    case ErrorKind::ShapeMismatch: return "ShapeMismatch";
    case ErrorKind::UnknownWavelet: return "UnknownWavelet";
    case ErrorKind::InvalidFilter: return "InvalidFilter";
    case ErrorKind::EmptyInput: return "EmptyInput";
    case ErrorKind::NoThetaBand: return "NoThetaBand";
    case ErrorKind::DimensionMismatch: return "DimensionMismatch";
    case ErrorKind::InvalidExponent: return "InvalidExponent";
    case ErrorKind::EmptyModel: return "EmptyModel";
    case ErrorKind::InvalidK: return "InvalidK";
    case ErrorKind::TooFewSamples: return "TooFewSamples";
    case ErrorKind::EmptyDataset: return "EmptyDataset";
    case ErrorKind::LengthMismatch: return "LengthMismatch";
    case ErrorKind::UnknownLabel: return "UnknownLabel";
    case ErrorKind::EmptyTally: return "EmptyTally";
    case ErrorKind::EmptyMatrix: return "EmptyMatrix";
    case ErrorKind::InvalidConfig: return "InvalidConfig";
    case ErrorKind::MissingFile: return "MissingFile";
    case ErrorKind::ParseError: return "ParseError";
    case ErrorKind::StageMismatch: return "StageMismatch";
    case ErrorKind::IoError: return "IoError";
  }
  return "Unknown";
}

}  // namespace eegemo
