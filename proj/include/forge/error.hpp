// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <stdexcept>
#include <string>

namespace forge {

enum class ErrorKind {
  kDecode,
  kUnsupportedFormat,
  kDimensionMismatch,
  kChannelMismatch,
  kEmptyRegion,
  kInvalidArgument,
  kConfig,
  kManifest,
  kIo,
  kNonFinite,
};

/// Every failure raised by the library carries a kind so callers (the CLI in
/// particular) can map it onto an exit code without parsing messages.
class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& what)
      : std::runtime_error(what), kind_(kind) {}

  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

}  // namespace forge
