#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace lrwb {

enum class Errc {
  InvalidArgument,
  MissingColumn,
  NonBinaryLabel,
  UnparseableValue,
  BadSchema,
  BadFractions,
  EmptyTrainingSet,
  NonFiniteInput,
  SingleClassDataset,
  SingleClass,
  SchemaMismatch,
  EmptyGridAfterBudget,
  IoError,
  VersionMismatch,
  CorruptTable,
  BindFailed,
  Timeout,
  Disconnected,
  ProtocolError,
};

std::string_view to_string(Errc code) noexcept;

/// Every failure raised by the library. `code()` is stable and is what the
/// CLI prints as the machine-parseable part of its one-line error.
class Error : public std::runtime_error {
 public:
  Error(Errc code, const std::string& message)
      : std::runtime_error(message), code_(code) {}

  Errc code() const noexcept { return code_; }

 private:
  Errc code_;
};

}  // namespace lrwb
