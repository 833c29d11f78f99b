#pragma once

#include <stdexcept>
#include <string>

namespace depthprune {

/// Base class for every error raised by the library. `kind()` is a stable,
/// machine-parseable name used by the CLI error line.
class Error : public std::runtime_error {
 public:
  Error(std::string kind, const std::string& message)
      : std::runtime_error(message), kind_(std::move(kind)) {}

  const std::string& kind() const noexcept { return kind_; }

 private:
  std::string kind_;
};

#define DEPTHPRUNE_ERROR(Name)                                             \
  class Name : public Error {                                              \
   public:                                                                 \
    explicit Name(const std::string& message) : Error(#Name, message) {}   \
  }

DEPTHPRUNE_ERROR(ShapeError);
DEPTHPRUNE_ERROR(EmptyInputError);
DEPTHPRUNE_ERROR(LayerIndexError);
DEPTHPRUNE_ERROR(ValueError);
DEPTHPRUNE_ERROR(PlanError);
DEPTHPRUNE_ERROR(SearchError);
DEPTHPRUNE_ERROR(ConfigError);
DEPTHPRUNE_ERROR(DataError);
DEPTHPRUNE_ERROR(TrainError);
DEPTHPRUNE_ERROR(FormatError);
DEPTHPRUNE_ERROR(IntegrityError);
DEPTHPRUNE_ERROR(VersionError);
DEPTHPRUNE_ERROR(IoError);

#undef DEPTHPRUNE_ERROR

}  // namespace depthprune
