#pragma once

#include <cstdint>
#include <deque>
#include <functional>
#include <queue>
#include <vector>

namespace paygo::sim {

using SimTime = double;  // seconds

/// Discrete-event clock. Events at equal times run in scheduling order, so
/// a run is a pure function of the order of schedule() calls.
class Engine {
 public:
  using Action = std::function<void()>;

  SimTime now() const { return now_; }

  void schedule_at(SimTime t, Action action);
  void schedule_after(SimTime delay, Action action) { schedule_at(now_ + delay, std::move(action)); }

  /// Runs until no events remain.
  void run();
  /// Runs events with time <= t, then advances the clock to t.
  void run_until(SimTime t);
  /// Runs events until `done()` holds (checked after each event) or the next
  /// event lies beyond `deadline`. Returns done(); on timeout the clock is
  /// left at `deadline`.
  bool run_until(const std::function<bool()>& done, SimTime deadline);

  bool idle() const { return queue_.empty(); }
  std::size_t pending() const { return queue_.size(); }
  std::uint64_t executed() const { return executed_; }

 private:
  struct Event {
    SimTime time;
    std::uint64_t seq;
    Action action;
  };
  struct Later {
    bool operator()(const Event& a, const Event& b) const {
      return a.time != b.time ? a.time > b.time : a.seq > b.seq;
    }
  };
  void step();

  SimTime now_ = 0.0;
  std::uint64_t next_seq_ = 0;
  std::uint64_t executed_ = 0;
  std::priority_queue<Event, std::vector<Event>, Later> queue_;
};

/// Base for agents driven by the engine. Inputs (messages, timer firings)
/// queue in an inbox and are handled one at a time; work() occupies the
/// agent for a stretch of simulated time during which inputs wait.
class Agent {
 public:
  explicit Agent(Engine& engine) : engine_(engine) {}
  virtual ~Agent() = default;
  Agent(const Agent&) = delete;
  Agent& operator=(const Agent&) = delete;

  /// Queues an input to be handled when the agent is free.
  void post(std::function<void()> input);
  /// Fires `then` after `duration` of busy time.
  void work(SimTime duration, std::function<void()> then);
  /// Posts `input` after `delay`; the returned id can cancel it.
  std::uint64_t set_timer(SimTime delay, std::function<void()> input);
  void cancel_timer(std::uint64_t id);

  bool busy() const { return busy_; }
  Engine& engine() { return engine_; }
  SimTime now() const { return engine_.now(); }

 private:
  void pump();

  Engine& engine_;
  std::deque<std::function<void()>> inbox_;
  bool busy_ = false;
  std::uint64_t next_timer_ = 1;
  std::vector<std::uint64_t> cancelled_;
};

}  // namespace paygo::sim
