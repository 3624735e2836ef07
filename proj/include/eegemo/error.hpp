#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace eegemo {

enum class ErrorKind {
  // signal-io
  MissingColumn,
  RaggedRows,
  NonNumericSample,
  EmptyFile,
  MixedLabels,
  InvalidRecording,
  WindowTooLarge,
  InsufficientSessions,
  // dwt
  SignalTooShort,
  TooManyLevels,
  ShapeMismatch,
  UnknownWavelet,
  InvalidFilter,
  // features
  EmptyInput,
  NoThetaBand,
  // knn
  DimensionMismatch,
  InvalidExponent,
  EmptyModel,
  InvalidK,
  TooFewSamples,
  // rnn
  EmptyDataset,
  // metrics
  LengthMismatch,
  UnknownLabel,
  EmptyTally,
  EmptyMatrix,
  // pipeline
  InvalidConfig,
  MissingFile,
  ParseError,
  StageMismatch,
  IoError,
};

std::string_view to_string(ErrorKind kind) noexcept;

/// Every failure raised by the library carries one of the kinds above so
/// callers (and the CLI's one-line error report) can branch on it.
class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& message)
      : std::runtime_error(message), kind_(kind) {}

  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

}  // namespace eegemo
