#pragma once

#include <atomic>
#include <chrono>
#include <cstdint>

namespace hic {

// Logical time in whole seconds. Tests drive a ManualClock; the daemon maps
// steady wall time onto the same scale.
using Ticks = std::int64_t;

class Clock {
 public:
  virtual ~Clock() = default;
  virtual Ticks now() const = 0;
};

class ManualClock final : public Clock {
 public:
  explicit ManualClock(Ticks start = 0) : now_(start) {}

  Ticks now() const override { return now_.load(); }
  void set(Ticks t) { now_.store(t); }
  void advance(Ticks dt) { now_.fetch_add(dt); }

 private:
  std::atomic<Ticks> now_;
};

// Seconds elapsed since construction, from std::chrono::steady_clock.
class SteadyClock final : public Clock {
 public:
  SteadyClock() : origin_(std::chrono::steady_clock::now()) {}

  Ticks now() const override {
    return std::chrono::duration_cast<std::chrono::seconds>(
               std::chrono::steady_clock::now() - origin_)
        .count();
  }

 private:
  std::chrono::steady_clock::time_point origin_;
};

}  // namespace hic
