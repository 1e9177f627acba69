#include "layoutpnp/error.hpp"

namespace layoutpnp {

std::string_view to_string(ErrorCode code) noexcept {
  switch (code) {
    case ErrorCode::InvalidInput: return "InvalidInput";
    case ErrorCode::DepthNonPositive: return "DepthNonPositive";
    case ErrorCode::DegenerateGeometry: return "DegenerateGeometry";
    case ErrorCode::NoSolution: return "NoSolution";
    case ErrorCode::TooFewCorrespondences: return "TooFewCorrespondences";
    case ErrorCode::NoConsensus: return "NoConsensus";
    case ErrorCode::NonFiniteLoss: return "NonFiniteLoss";
    case ErrorCode::DimensionMismatch: return "DimensionMismatch";
    case ErrorCode::EmptyInput: return "EmptyInput";
    case ErrorCode::AllObjectsNeglected: return "AllObjectsNeglected";
    case ErrorCode::MissingTransform: return "MissingTransform";
    case ErrorCode::PlacementFailure: return "PlacementFailure";
    case ErrorCode::IdMismatch: return "IdMismatch";
    case ErrorCode::SchemaError: return "SchemaError";
    case ErrorCode::IoError: return "IoError";
    case ErrorCode::UnknownFormat: return "UnknownFormat";
  }
  return "Unknown";
}

}  // namespace layoutpnp
