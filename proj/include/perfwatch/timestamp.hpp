// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <chrono>
#include <compare>
#include <cstdint>
#include <string>
#include <string_view>

namespace perfwatch {

/// UTC instant with microsecond resolution.
class Timestamp {
 public:
  constexpr Timestamp() = default;
  constexpr explicit Timestamp(std::int64_t micros) : micros_(micros) {}

  static Timestamp now();
  static Timestamp from_seconds(std::int64_t seconds) { return Timestamp(seconds * 1'000'000); }

  /// Parses "YYYY-MM-DDTHH:MM:SS[.ffffff]Z".
  static Timestamp parse(std::string_view text);

  /// Formats as "YYYY-MM-DDTHH:MM:SS.ffffffZ".
  std::string iso8601() const;

  constexpr std::int64_t micros() const { return micros_; }

  friend constexpr auto operator<=>(Timestamp, Timestamp) = default;

 private:
  std::int64_t micros_ = 0;
};

}  // namespace perfwatch
