#pragma once

#include <filesystem>
#include <set>
#include <string>
#include <string_view>
#include <vector>

#include "hic/param_spec.hpp"

namespace hic {

using StateId = std::string;
using EventId = std::string;

enum class Outcome { kPositive, kNegative };

std::string_view to_string(Outcome outcome);
// Accepts "positive" / "negative"; throws Error(kBadParams) otherwise.
Outcome outcome_from_string(std::string_view text);

struct Branch {
  ParamList out_params;
  StateId next_state;

  friend bool operator==(const Branch&, const Branch&) = default;
};

// The BIP bound to an event and where each of its outcomes leads.
struct InteractionCall {
  std::string id;
  std::string bip_method;  // opaque dotted id
  Branch positive;
  Branch negative;

  const Branch& branch(Outcome outcome) const {
    return outcome == Outcome::kPositive ? positive : negative;
  }

  friend bool operator==(const InteractionCall&,
                         const InteractionCall&) = default;
};

struct EventSpec {
  EventId id;
  ParamList in_params;
  InteractionCall call;

  friend bool operator==(const EventSpec&, const EventSpec&) = default;
};

struct State {
  StateId id;
  std::vector<EventSpec> events;  // document order

  const EventSpec* find_event(std::string_view event_id) const;

  friend bool operator==(const State&, const State&) = default;
};

// Flat task-model state graph, one per user class. Immutable once parsed.
struct TaskModel {
  std::string model_id;
  StateId starting_state;  // empty when the document declares none
  std::vector<State> states;  // document order

  const State* find_state(std::string_view state_id) const;

  friend bool operator==(const TaskModel&, const TaskModel&) = default;
};

// Parses the task-model XML dialect. Throws ParseError with code
// kWellFormednessError for malformed XML and kParseError for vocabulary or
// structure violations (unknown elements, duplicate ids, missing children).
// The root's optional `id` attribute wins over `default_model_id`.
TaskModel parse_task_model(std::string_view xml_text,
                           std::string default_model_id = {});

// Reads a *.task.xml file; the default model id is the file name without the
// ".task.xml" suffix.
TaskModel load_task_model(const std::filesystem::path& path);

// Canonical UTF-8 rendering; parse(serialize(m)) == m for any parsed m.
std::string serialize_task_model(const TaskModel& model);

struct Diagnostic {
  enum class Severity { kError, kWarning };

  Severity severity;
  std::string code;
  std::string location;
  std::string message;
};

std::vector<Diagnostic> validate(const TaskModel& model);
std::size_t error_count(const std::vector<Diagnostic>& diagnostics);

// States reachable from the starting state following both branches of every
// event. Empty when the starting state is missing.
std::set<StateId> reachable_states(const TaskModel& model);

// Throws Error(kUnknownState).
std::set<EventId> allowed_events(const TaskModel& model,
                                 std::string_view state_id);

// Throws Error(kUnknownState) or Error(kEventNotAllowed).
const EventSpec& event_spec(const TaskModel& model, std::string_view state_id,
                            std::string_view event_id);

struct TransitionResult {
  StateId next_state;
  ParamList out_params;

  friend bool operator==(const TransitionResult&,
                         const TransitionResult&) = default;
};

TransitionResult transition(const TaskModel& model, std::string_view state_id,
                            std::string_view event_id, Outcome outcome);

}  // namespace hic
