#include "lrwb/error.hpp"

namespace lrwb {

std::string_view to_string(Errc code) noexcept {
  switch (code) {
    case Errc::InvalidArgument: return "InvalidArgument";
    case Errc::MissingColumn: return "MissingColumn";
    case Errc::NonBinaryLabel: return "NonBinaryLabel";
    case Errc::UnparseableValue: return "UnparseableValue";
    case Errc::BadSchema: return "BadSchema";
    case Errc::BadFractions: return "BadFractions";
    case Errc::EmptyTrainingSet: return "EmptyTrainingSet";
    case Errc::NonFiniteInput: return "NonFiniteInput";
    case Errc::SingleClassDataset: return "SingleClassDataset";
    case Errc::SingleClass: return "SingleClass";
    case Errc::SchemaMismatch: return "SchemaMismatch";
    case Errc::EmptyGridAfterBudget: return "EmptyGridAfterBudget";
    case Errc::IoError: return "IoError";
    case Errc::VersionMismatch: return "VersionMismatch";
    case Errc::CorruptTable: return "CorruptTable";
    case Errc::BindFailed: return "BindFailed";
    case Errc::Timeout: return "Timeout";
    case Errc::Disconnected: return "Disconnected";
    case Errc::ProtocolError: return "ProtocolError";
  }
  return "Unknown";
}

}  // namespace lrwb
