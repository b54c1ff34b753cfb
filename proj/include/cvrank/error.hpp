#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace cvrank {

enum class Errc {
  MalformedFen,
  IllegalPosition,
  FenTooLong,
  FileNotFound,
  Io,
  NoUsableGames,
  HoldoutTooLarge,
  DuplicateFen,
  SampleTooSmall,
  InvalidDf,
  EmptySample,
  EmptyDatabase,
  DatabaseTooSmall,
  ChunkSizeMismatch,
  InsufficientBaseline,
  LengthMismatch,
  InvalidArgument,
};

std::string_view errc_name(Errc code) noexcept;

/// Single exception type for every failure in the library; callers branch on
/// code() rather than on the message text.
class Error : public std::runtime_error {
 public:
  Error(Errc code, const std::string& what)
      : std::runtime_error(std::string(errc_name(code)) + ": " + what), code_(code), detail_(what) {}

  Errc code() const noexcept { return code_; }
  /// Message without the code prefix, for wrapping in more context.
  const std::string& detail() const noexcept { return detail_; }

 private:
  Errc code_;
  std::string detail_;
};

}  // namespace cvrank
