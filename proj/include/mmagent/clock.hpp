#pragma once

#include "mmagent/types.hpp"

#include <atomic>

namespace mmagent {

/// Time source for latency accounting. Pipelines measure every interval
/// through a Clock so scripted runs can use simulated time.
class Clock {
public:
    virtual ~Clock() = default;
    virtual Duration now() const = 0;
};

class SteadyClock final : public Clock {
public:
    Duration now() const override {
        return std::chrono::duration_cast<Duration>(std::chrono::steady_clock::now().time_since_epoch());
    }
};

/// Simulated time: only moves when advanced. Scripted models advance it by
/// their configured latency, which makes mock traces byte-reproducible.
class ManualClock final : public Clock {
public:
    Duration now() const override { return Duration(ticks_.load()); }
    void advance(Duration d) { ticks_.fetch_add(d.count()); }

private:
    std::atomic<Duration::rep> ticks_{0};
};

const Clock& steady_clock();

}  // namespace mmagent
