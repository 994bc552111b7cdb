#pragma once

#include <stdexcept>
#include <string>

namespace depthlab {

// Base class for every failure the library raises on a violated
// precondition or unusable input. Subtypes give callers and tests a
// stable class to match on.
struct Error : std::runtime_error {
  explicit Error(const std::string& msg) : std::runtime_error(msg) {}
};

#define DEPTHLAB_DEFINE_ERROR(name)                          \
  struct name : Error {                                      \
    explicit name(const std::string& msg) : Error(msg) {}    \
  }

DEPTHLAB_DEFINE_ERROR(OutOfBoundsError);
DEPTHLAB_DEFINE_ERROR(EmptyGridError);
DEPTHLAB_DEFINE_ERROR(TooSmallError);
DEPTHLAB_DEFINE_ERROR(ShapeMismatchError);
DEPTHLAB_DEFINE_ERROR(TooFewPixelsError);
DEPTHLAB_DEFINE_ERROR(DegenerateDepthError);
DEPTHLAB_DEFINE_ERROR(DisjointMasksError);
DEPTHLAB_DEFINE_ERROR(DegeneratePredictionError);
DEPTHLAB_DEFINE_ERROR(NoEvaluablePixelsError);
DEPTHLAB_DEFINE_ERROR(ImageTooSmallError);
DEPTHLAB_DEFINE_ERROR(NonFiniteError);
DEPTHLAB_DEFINE_ERROR(ConfigError);
DEPTHLAB_DEFINE_ERROR(IoError);

#undef DEPTHLAB_DEFINE_ERROR

}  // namespace depthlab
