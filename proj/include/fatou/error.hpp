#pragma once

#include <stdexcept>
#include <string>

namespace fatou {

enum class ErrorCode {
  kInvalidArgument,
  kPointOffBoundary,
  kNonPositiveRadius,
  kEmptySample,
  kNoCorkscrew,
  kDepthCap,
  kDegenerateScene,
  kUnsupported,
  kEmptyRegion,
  kOutOfRange,
  kInsufficientDepth,
  kBracketViolation,
  kPrecondition,
  kIo,
};

class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& what) : std::runtime_error(what), code_(code) {}
  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

inline void require(bool cond, ErrorCode code, const std::string& msg) {
  if (!cond) throw Error(code, msg);
}

}  // namespace fatou
