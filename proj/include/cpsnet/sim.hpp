#pragma once

#include <cstdint>
#include <functional>
#include <iosfwd>
#include <queue>
#include <stdexcept>
#include <string>
#include <vector>

namespace cpsnet {

/// Microseconds since scenario start. Integer only so traces replay bit-exactly.
using SimTime = std::uint64_t;

inline constexpr SimTime kMicrosPerMilli = 1000;
inline constexpr SimTime kMicrosPerSecond = 1000000;

/// Raised when a handler tries to schedule an event before the current clock.
class SchedulingError : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

struct Event {
  SimTime fire_at = 0;
  std::uint64_t seq = 0;
  std::string target;
  std::string kind;
  std::function<void()> handler;
};

/// Line in the optional event trace.
struct TraceEntry {
  SimTime time;
  std::uint64_t seq;
  std::string target;
  std::string kind;
};

/// Single-threaded discrete-event loop. Events are dequeued in (fire_at, seq)
/// order where seq is the insertion counter.
class Simulator {
 public:
  Simulator() = default;
  Simulator(const Simulator&) = delete;
  Simulator& operator=(const Simulator&) = delete;
  Simulator(Simulator&&) = default;
  Simulator& operator=(Simulator&&) = default;

  SimTime now() const { return clock_; }

  /// Enqueue `handler` at `fire_at`. Throws SchedulingError if fire_at < now().
  std::uint64_t schedule(SimTime fire_at, std::string target, std::string kind,
                         std::function<void()> handler);

  /// Process every event with fire_at <= t_end, then set the clock to t_end.
  std::size_t run_until(SimTime t_end);

  std::size_t pending() const { return queue_.size(); }
  std::uint64_t processed() const { return processed_; }

  void set_tracing(bool on) { tracing_ = on; }
  const std::vector<TraceEntry>& trace() const { return trace_; }
  void write_trace(std::ostream& out) const;

  /// Debug audit: remembers every dequeued (fire_at, seq) pair.
  void set_audit(bool on) { audit_ = on; }
  const std::vector<std::pair<SimTime, std::uint64_t>>& dequeue_log() const {
    return dequeue_log_;
  }

 private:
  struct Later {
    bool operator()(const Event& a, const Event& b) const {
      if (a.fire_at != b.fire_at) return a.fire_at > b.fire_at;
      return a.seq > b.seq;
    }
  };

  SimTime clock_ = 0;
  std::uint64_t next_seq_ = 0;
  std::uint64_t processed_ = 0;
  std::priority_queue<Event, std::vector<Event>, Later> queue_;
  bool tracing_ = false;
  bool audit_ = false;
  std::vector<TraceEntry> trace_;
  std::vector<std::pair<SimTime, std::uint64_t>> dequeue_log_;
};

}  // namespace cpsnet
