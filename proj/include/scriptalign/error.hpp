#pragma once

#include <stdexcept>
#include <string>

namespace scriptalign {

// Base for every error raised by the toolkit. Subclasses name the failure
// kind so callers (and tests) can dispatch on type.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

#define SCRIPTALIGN_ERROR(Name)             \
  class Name : public Error {               \
   public:                                  \
    using Error::Error;                     \
  }

SCRIPTALIGN_ERROR(InvalidImage);
SCRIPTALIGN_ERROR(ImageIoError);
SCRIPTALIGN_ERROR(ManifestError);
SCRIPTALIGN_ERROR(InsufficientManuscripts);
SCRIPTALIGN_ERROR(EmptyTrainingSet);
SCRIPTALIGN_ERROR(EmptyHeldoutSet);
SCRIPTALIGN_ERROR(IncompatibleGeometry);
SCRIPTALIGN_ERROR(InternalError);
SCRIPTALIGN_ERROR(DivergenceError);
SCRIPTALIGN_ERROR(EmptySet);
SCRIPTALIGN_ERROR(InvalidAssignment);
SCRIPTALIGN_ERROR(EmptyLine);
SCRIPTALIGN_ERROR(LinePairingError);
SCRIPTALIGN_ERROR(CheckpointError);
SCRIPTALIGN_ERROR(ConfigError);

#undef SCRIPTALIGN_ERROR

}  // namespace scriptalign
