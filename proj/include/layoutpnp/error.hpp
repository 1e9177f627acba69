#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace layoutpnp {

enum class ErrorCode {
  InvalidInput,
  DepthNonPositive,
  DegenerateGeometry,
  NoSolution,
  TooFewCorrespondences,
  NoConsensus,
  NonFiniteLoss,
  DimensionMismatch,
  EmptyInput,
  AllObjectsNeglected,
  MissingTransform,
  PlacementFailure,
  IdMismatch,
  SchemaError,
  IoError,
  UnknownFormat,
};

std::string_view to_string(ErrorCode code) noexcept;

// Every failure raised by the library carries one of the codes above so the
// CLI can map it to an exit status and a machine-readable record.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& what)
      : std::runtime_error(what), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

}  // namespace layoutpnp
