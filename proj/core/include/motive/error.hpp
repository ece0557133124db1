#pragma once

#include <stdexcept>
#include <string>

namespace motive {

/// Base class for every error raised by the library. Subclasses carry no
/// extra state; the message names the offending file, offset, index or
/// dimension so callers can report it verbatim.
class Error : public std::runtime_error {
 public:
  explicit Error(const std::string& msg) : std::runtime_error(msg) {}
};

#define MOTIVE_ERROR_CLASS(name)                          \
  class name : public Error {                             \
   public:                                                \
    explicit name(const std::string& msg) : Error(msg) {} \
  }

// motion files
MOTIVE_ERROR_CLASS(BadMagic);
MOTIVE_ERROR_CLASS(TruncatedFile);
MOTIVE_ERROR_CLASS(NonFiniteValue);
MOTIVE_ERROR_CLASS(IoFailure);

// shapes and indices
MOTIVE_ERROR_CLASS(IndexOutOfRange);
MOTIVE_ERROR_CLASS(DimensionMismatch);
MOTIVE_ERROR_CLASS(TokenOutOfRange);
MOTIVE_ERROR_CLASS(InvalidToken);
MOTIVE_ERROR_CLASS(TokenizationFailure);

// scoring
MOTIVE_ERROR_CLASS(EmptyText);
MOTIVE_ERROR_CLASS(EmptyGroup);
MOTIVE_ERROR_CLASS(PoolTooSmall);
MOTIVE_ERROR_CLASS(NonPsdAfterClip);

// optimization
MOTIVE_ERROR_CLASS(DivergedLoss);
MOTIVE_ERROR_CLASS(NonFiniteGradient);

// configuration / orchestration
MOTIVE_ERROR_CLASS(ConfigError);
MOTIVE_ERROR_CLASS(PipelineLocked);

#undef MOTIVE_ERROR_CLASS

}  // namespace motive
