#include "cpsnet/sim.hpp"

#include <ostream>
#include <sstream>

namespace cpsnet {

std::uint64_t Simulator::schedule(SimTime fire_at, std::string target, std::string kind,
                                  std::function<void()> handler) {
  if (fire_at < clock_) {
    std::ostringstream msg;
    msg << "event '" << kind << "' for '" << target << "' scheduled at t=" << fire_at
        << " but clock is already " << clock_;
    throw SchedulingError(msg.str());
  }
  const std::uint64_t seq = next_seq_++;
  queue_.push(Event{fire_at, seq, std::move(target), std::move(kind), std::move(handler)});
  return seq;
}

std::size_t Simulator::run_until(SimTime t_end) {
  if (t_end < clock_) {
    throw SchedulingError("run_until target precedes the current clock");
  }
  std::size_t count = 0;
  while (!queue_.empty() && queue_.top().fire_at <= t_end) {
    // priority_queue::top is const; the event is moved out before pop.
    Event ev = std::move(const_cast<Event&>(queue_.top()));
    queue_.pop();
    clock_ = ev.fire_at;
    if (tracing_) trace_.push_back(TraceEntry{ev.fire_at, ev.seq, ev.target, ev.kind});
    if (audit_) dequeue_log_.emplace_back(ev.fire_at, ev.seq);
    ++count;
    ++processed_;
    if (ev.handler) ev.handler();
  }
  clock_ = t_end;
  return count;
}

void Simulator::write_trace(std::ostream& out) const {
  for (const auto& e : trace_) {
    out << e.time << ' ' << e.seq << ' ' << e.target << ' ' << e.kind << '\n';
  }
}

}  // namespace cpsnet
