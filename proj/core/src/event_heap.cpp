#include "hic/event_heap.hpp"

#include <nlohmann/json.hpp>

#include "hic/error.hpp"

namespace hic {

bool EventTemplate::matches(const Event& event) const {
  if (type && *type != event.type) return false;
  for (const auto& [key, value] : constraints) {
    auto it = event.fields.find(key);
    if (it == event.fields.end() || it->second != value) return false;
  }
  return true;
}

void DeliveryQueue::push(const Event& event) {
  {
    std::lock_guard lock(mutex_);
    if (closed_) return;
    items_.push_back(event);
  }
  cv_.notify_one();
}

void DeliveryQueue::close() {
  {
    std::lock_guard lock(mutex_);
    closed_ = true;
  }
  cv_.notify_all();
}

std::optional<Event> DeliveryQueue::try_pop() {
  std::lock_guard lock(mutex_);
  if (items_.empty()) return std::nullopt;
  Event e = std::move(items_.front());
  items_.pop_front();
  return e;
}

std::optional<Event> DeliveryQueue::pop_for(std::chrono::milliseconds timeout) {
  std::unique_lock lock(mutex_);
  cv_.wait_for(lock, timeout, [&] { return !items_.empty() || closed_; });
  if (items_.empty()) return std::nullopt;
  Event e = std::move(items_.front());
  items_.pop_front();
  return e;
}

std::vector<Event> DeliveryQueue::drain() {
  std::lock_guard lock(mutex_);
  std::vector<Event> out(std::make_move_iterator(items_.begin()),
                         std::make_move_iterator(items_.end()));
  items_.clear();
  return out;
}

std::size_t DeliveryQueue::size() const {
  std::lock_guard lock(mutex_);
  return items_.size();
}

bool DeliveryQueue::closed() const {
  std::lock_guard lock(mutex_);
  return closed_;
}

Seq EventHeap::post(Event event) {
  if (event.type.empty()) throw Error(Errc::kInvalidEvent, "empty event type");
  if (event.ttl <= 0) {
    throw Error(Errc::kInvalidEvent,
                "ttl must be positive, got " + std::to_string(event.ttl));
  }
  std::lock_guard lock(mutex_);
  event.seq = next_seq_++;
  event.posted_at = now_;
  for (auto& [id, sub] : subscribers_) {
    if (event.visible_to(sub.consumer) && sub.tmpl.matches(event)) {
      sub.queue->push(event);
    }
  }
  deadlines_.emplace(event.expires_at(), event.seq);
  const Seq seq = event.seq;
  events_.emplace(seq, std::move(event));
  return seq;
}

std::optional<Event> EventHeap::consume(const ComponentId& consumer,
                                        const EventTemplate& tmpl,
                                        ConsumeMode mode) {
  std::lock_guard lock(mutex_);
  for (auto it = events_.begin(); it != events_.end(); ++it) {
    const Event& e = it->second;
    if (!live(e) || !e.visible_to(consumer) || !tmpl.matches(e)) continue;
    if (mode == ConsumeMode::kSnoop) return e;
    Event out = std::move(it->second);
    auto [lo, hi] = deadlines_.equal_range(out.expires_at());
    for (auto d = lo; d != hi; ++d) {
      if (d->second == out.seq) {
        deadlines_.erase(d);
        break;
      }
    }
    events_.erase(it);
    return out;
  }
  return std::nullopt;
}

Subscription EventHeap::subscribe(const ComponentId& consumer,
                                  EventTemplate tmpl) {
  std::lock_guard lock(mutex_);
  Subscription sub{next_sub_++, std::make_shared<DeliveryQueue>()};
  subscribers_.emplace(sub.id, Subscriber{consumer, std::move(tmpl), sub.queue});
  return sub;
}

void EventHeap::unsubscribe(SubscriptionId id) {
  std::lock_guard lock(mutex_);
  auto it = subscribers_.find(id);
  if (it == subscribers_.end()) {
    throw Error(Errc::kUnknownSubscription,
                "no live subscription " + std::to_string(id));
  }
  it->second.queue->close();
  subscribers_.erase(it);
}

std::size_t EventHeap::expire(Ticks now) {
  std::lock_guard lock(mutex_);
  if (now < now_) {
    throw Error(Errc::kClockRegression, "clock moved from " +
                                            std::to_string(now_) + " to " +
                                            std::to_string(now));
  }
  now_ = now;
  std::size_t removed = 0;
  auto end = deadlines_.upper_bound(now);
  for (auto it = deadlines_.begin(); it != end; ++it) {
    removed += events_.erase(it->second);
  }
  deadlines_.erase(deadlines_.begin(), end);
  return removed;
}

Ticks EventHeap::now() const {
  std::lock_guard lock(mutex_);
  return now_;
}

std::size_t EventHeap::size() const {
  std::lock_guard lock(mutex_);
  return events_.size();
}

std::vector<Event> EventHeap::live_events() const {
  std::lock_guard lock(mutex_);
  std::vector<Event> out;
  out.reserve(events_.size());
  for (const auto& [seq, e] : events_) {
    if (live(e)) out.push_back(e);
  }
  return out;
}

nlohmann::json scalar_to_json(const Scalar& value) {
  return std::visit([](const auto& v) { return nlohmann::json(v); }, value);
}

Scalar scalar_from_json(const nlohmann::json& value) {
  if (value.is_string()) return value.get<std::string>();
  if (value.is_boolean()) return value.get<bool>();
  if (value.is_number_integer()) return value.get<std::int64_t>();
  throw Error(Errc::kBadParams,
              "event fields must be string, integer or boolean: " + value.dump());
}

std::string scalar_to_string(const Scalar& value) {
  struct Visitor {
    std::string operator()(const std::string& s) const { return s; }
    std::string operator()(std::int64_t i) const { return std::to_string(i); }
    std::string operator()(bool b) const { return b ? "true" : "false"; }
  };
  return std::visit(Visitor{}, value);
}

nlohmann::json event_to_json(const Event& event) {
  nlohmann::json fields = nlohmann::json::object();
  for (const auto& [k, v] : event.fields) fields[k] = scalar_to_json(v);
  return {{"seq", event.seq},
          {"type", event.type},
          {"source", event.source},
          {"targets", event.targets},
          {"ttl", event.ttl},
          {"posted_at", event.posted_at},
          {"fields", std::move(fields)}};
}

}  // namespace hic
