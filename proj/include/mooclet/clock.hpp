#pragma once

#include <cstdint>
#include <functional>
#include <mutex>
#include <optional>
#include <string>
#include <string_view>

namespace mooclet {

// Microseconds since the Unix epoch, UTC.
using Timestamp = std::int64_t;

using ClockFn = std::function<Timestamp()>;

Timestamp system_now();

// A deterministic clock starting at `start` and advancing one microsecond
// per reading.
ClockFn logical_clock(Timestamp start);

// ISO-8601 UTC with microsecond precision, e.g. 2015-03-14T00:00:00.000000Z.
std::string format_timestamp(Timestamp ts);
std::optional<Timestamp> parse_timestamp(std::string_view text);

// Hands out nondecreasing timestamps from an underlying clock even if the
// clock itself steps backwards.
class Stamper {
 public:
  explicit Stamper(ClockFn clock) : clock_(std::move(clock)) {}

  Timestamp next() {
    std::lock_guard lock(mu_);
    last_ = std::max(last_, clock_());
    return last_;
  }

  // Used on replay so that fresh stamps never precede restored ones.
  void observe(Timestamp ts) {
    std::lock_guard lock(mu_);
    last_ = std::max(last_, ts);
  }

 private:
  std::mutex mu_;
  ClockFn clock_;
  Timestamp last_ = 0;
};

}  // namespace mooclet
