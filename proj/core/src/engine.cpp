#include "paygo/engine.hpp"

#include <algorithm>
#include <stdexcept>

namespace paygo::sim {

void Engine::schedule_at(SimTime t, Action action) {
  if (t < now_) t = now_;
  queue_.push(Event{t, next_seq_++, std::move(action)});
}

void Engine::step() {
  Event ev = queue_.top();
  queue_.pop();
  now_ = ev.time;
  ++executed_;
  ev.action();
}

void Engine::run() {
  while (!queue_.empty()) step();
}

void Engine::run_until(SimTime t) {
  while (!queue_.empty() && queue_.top().time <= t) step();
  now_ = std::max(now_, t);
}

bool Engine::run_until(const std::function<bool()>& done, SimTime deadline) {
  if (done()) return true;
  while (!queue_.empty() && queue_.top().time <= deadline) {
    step();
    if (done()) return true;
  }
  now_ = std::max(now_, deadline);
  return false;
}

void Agent::post(std::function<void()> input) {
  inbox_.push_back(std::move(input));
  pump();
}

void Agent::pump() {
  while (!busy_ && !inbox_.empty()) {
    auto input = std::move(inbox_.front());
    inbox_.pop_front();
    input();
  }
}

void Agent::work(SimTime duration, std::function<void()> then) {
  busy_ = true;
  engine_.schedule_after(std::max(0.0, duration), [this, then = std::move(then)] {
    busy_ = false;
    if (then) then();
    pump();
  });
}

std::uint64_t Agent::set_timer(SimTime delay, std::function<void()> input) {
  const auto id = next_timer_++;
  engine_.schedule_after(delay, [this, id, input = std::move(input)]() mutable {
    auto it = std::find(cancelled_.begin(), cancelled_.end(), id);
    if (it != cancelled_.end()) {
      cancelled_.erase(it);
      return;
    }
    post(std::move(input));
  });
  return id;
}

void Agent::cancel_timer(std::uint64_t id) { cancelled_.push_back(id); }

}  // namespace paygo::sim
