#pragma once

#include <chrono>
#include <condition_variable>
#include <cstdint>
#include <deque>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <set>
#include <string>
#include <variant>
#include <vector>

#include <nlohmann/json_fwd.hpp>

#include "hic/clock.hpp"

namespace hic {

using ComponentId = std::string;
using Seq = std::uint64_t;
using SubscriptionId = std::uint64_t;

using Scalar = std::variant<std::string, std::int64_t, bool>;
using FieldMap = std::map<std::string, Scalar>;

// Shared coordination record. `posted_at` and `seq` are assigned by
// EventHeap::post; whatever the caller puts there is overwritten.
struct Event {
  std::string type;
  FieldMap fields;
  ComponentId source;
  std::set<ComponentId> targets;  // empty: visible to every component
  Ticks ttl = 0;
  Ticks posted_at = 0;
  Seq seq = 0;

  Ticks expires_at() const { return posted_at + ttl; }
  bool visible_to(const ComponentId& consumer) const {
    return targets.empty() || targets.count(consumer) > 0;
  }

  friend bool operator==(const Event&, const Event&) = default;
};

// Equality-subset matching: the type (when given) must be equal and every
// constrained field must exist in the event with an equal value.
struct EventTemplate {
  std::optional<std::string> type;
  FieldMap constraints;

  bool matches(const Event& event) const;
};

enum class ConsumeMode { kDestructive, kSnoop };

// Per-subscription delivery queue. Safe to hand to another thread; closed
// queues stop accepting events and wake any blocked pop.
class DeliveryQueue {
 public:
  std::optional<Event> try_pop();
  std::optional<Event> pop_for(std::chrono::milliseconds timeout);
  std::vector<Event> drain();
  std::size_t size() const;
  bool closed() const;

 private:
  friend class EventHeap;
  void push(const Event& event);
  void close();

  mutable std::mutex mutex_;
  std::condition_variable cv_;
  std::deque<Event> items_;
  bool closed_ = false;
};

struct Subscription {
  SubscriptionId id = 0;
  std::shared_ptr<DeliveryQueue> queue;
};

// TTL-bounded tuple space. All operations are linearizable; the clock only
// moves through expire().
class EventHeap {
 public:
  EventHeap() = default;
  EventHeap(const EventHeap&) = delete;
  EventHeap& operator=(const EventHeap&) = delete;

  // Throws Error(kInvalidEvent) for an empty type or ttl <= 0.
  Seq post(Event event);

  // Oldest live, visible, matching event; removed in destructive mode.
  std::optional<Event> consume(const ComponentId& consumer,
                               const EventTemplate& tmpl, ConsumeMode mode);

  Subscription subscribe(const ComponentId& consumer, EventTemplate tmpl);
  // Throws Error(kUnknownSubscription) for an id that is not live.
  void unsubscribe(SubscriptionId id);

  // Advances the clock to `now` and drops every event with
  // posted_at + ttl <= now. Throws Error(kClockRegression) if now decreases.
  std::size_t expire(Ticks now);

  Ticks now() const;
  std::size_t size() const;
  std::vector<Event> live_events() const;

 private:
  struct Subscriber {
    ComponentId consumer;
    EventTemplate tmpl;
    std::shared_ptr<DeliveryQueue> queue;
  };

  bool live(const Event& e) const { return now_ < e.expires_at(); }

  mutable std::mutex mutex_;
  Ticks now_ = 0;
  Seq next_seq_ = 1;
  SubscriptionId next_sub_ = 1;
  std::map<Seq, Event> events_;
  std::multimap<Ticks, Seq> deadlines_;
  std::map<SubscriptionId, Subscriber> subscribers_;
};

nlohmann::json scalar_to_json(const Scalar& value);
// Strings, integers and booleans only; anything else throws Error(kBadParams).
Scalar scalar_from_json(const nlohmann::json& value);
std::string scalar_to_string(const Scalar& value);

nlohmann::json event_to_json(const Event& event);

}  // namespace hic
