// SPDX-License-Identifier: Apache-2.0
#include "perfwatch/timestamp.hpp"

#include <cstdio>
#include <ctime>

#include "perfwatch/error.hpp"

namespace perfwatch {

namespace {

constexpr std::int64_t kMicrosPerSecond = 1'000'000;

std::int64_t floor_div(std::int64_t a, std::int64_t b) {
  std::int64_t q = a / b;
  if ((a % b != 0) && ((a < 0) != (b < 0))) --q;
  return q;
}

}  // namespace

Timestamp Timestamp::now() {
  auto since_epoch = std::chrono::system_clock::now().time_since_epoch();
  return Timestamp(std::chrono::duration_cast<std::chrono::microseconds>(since_epoch).count());
}

Timestamp Timestamp::parse(std::string_view text) {
  auto fail = [&] {
    return Error(ErrorCode::kSyntax, "malformed timestamp '" + std::string(text) + "'");
  };
  // Fixed layout: 2021-11-30T08:15:00[.123456]Z
  if (text.size() < 20 || text.back() != 'Z') throw fail();
  auto digits = [&](std::size_t pos, std::size_t len) {
    int value = 0;
    for (std::size_t i = pos; i < pos + len; ++i) {
      char c = text[i];
      if (c < '0' || c > '9') throw fail();
      value = value * 10 + (c - '0');
    }
    return value;
  };
  if (text[4] != '-' || text[7] != '-' || text[10] != 'T' || text[13] != ':' || text[16] != ':')
    throw fail();
  std::tm tm{};
  tm.tm_year = digits(0, 4) - 1900;
  tm.tm_mon = digits(5, 2) - 1;
  tm.tm_mday = digits(8, 2);
  tm.tm_hour = digits(11, 2);
  tm.tm_min = digits(14, 2);
  tm.tm_sec = digits(17, 2);
  if (tm.tm_mon < 0 || tm.tm_mon > 11 || tm.tm_mday < 1 || tm.tm_mday > 31 || tm.tm_hour > 23 ||
      tm.tm_min > 59 || tm.tm_sec > 60)
    throw fail();

  std::int64_t micros = 0;
  std::size_t pos = 19;
  if (text[pos] == '.') {
    ++pos;
    std::size_t frac_len = text.size() - 1 - pos;
    if (frac_len == 0 || frac_len > 6) throw fail();
    micros = digits(pos, frac_len);
    for (std::size_t i = frac_len; i < 6; ++i) micros *= 10;
    pos += frac_len;
  }
  if (pos != text.size() - 1) throw fail();

  std::int64_t seconds = ::timegm(&tm);
  return Timestamp(seconds * kMicrosPerSecond + micros);
}

std::string Timestamp::iso8601() const {
  std::int64_t seconds = floor_div(micros_, kMicrosPerSecond);
  std::int64_t frac = micros_ - seconds * kMicrosPerSecond;
  std::time_t t = static_cast<std::time_t>(seconds);
  std::tm tm{};
  ::gmtime_r(&t, &tm);
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%04d-%02d-%02dT%02d:%02d:%02d.%06lldZ", tm.tm_year + 1900,
                tm.tm_mon + 1, tm.tm_mday, tm.tm_hour, tm.tm_min, tm.tm_sec,
                static_cast<long long>(frac));
  return buf;
}

}  // namespace perfwatch
