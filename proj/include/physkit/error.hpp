#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace physkit {

enum class Errc {
  MissingFile,
  SchemaViolation,
  MeshParseError,
  IoError,
  ValidationError,
  EmptyGeometry,
  NoAdjacentPart,
  NoContact,
  DegenerateInput,
  UnknownPart,
  ShapeMismatch,
  BackendUnavailable,
  RateLimited,
  Timeout,
  UnparseableResponse,
  LabelMismatch,
  InvalidTransition,
  NoCompatibleRegion,
  ScaleOutOfBounds,
  ValidationFailure,
  UnannotatedPart,
  WrongArity,
  EmbedderUnavailable,
  Divergence,
  InvalidArgument,
};

std::string_view to_string(Errc code);

/// Every failure surfaced by the library carries one of the codes above so
/// callers (the CLI in particular) can map it to an exit status.
class Error : public std::runtime_error {
 public:
  Error(Errc code, const std::string& message)
      : std::runtime_error(std::string(to_string(code)) + ": " + message), code_(code) {}

  Errc code() const noexcept { return code_; }

 private:
  Errc code_;
};

}  // namespace physkit
