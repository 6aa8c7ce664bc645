#pragma once

#include <cstddef>
#include <functional>
#include <map>
#include <set>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json_fwd.hpp>

namespace hic {

enum class TerminalKind { kPc, kPda, kPhone };

std::string_view to_string(TerminalKind kind);
// Throws Error(kBadParams) for anything but "pc", "pda" or "phone".
TerminalKind terminal_kind_from_string(std::string_view text);

struct TerminalCapability {
  TerminalKind kind = TerminalKind::kPc;
  int max_columns = 12;
  int max_rows = 40;
  int max_cell_width = 24;
  bool rich = true;

  // Shipped defaults: pc 12x40, pda 6x24, phone 3x12 (columns x rows).
  static TerminalCapability preset(TerminalKind kind);

  friend bool operator==(const TerminalCapability&, const TerminalCapability&) = default;
};

// Per-kind capabilities, starting from the shipped presets.
class CapabilityPresets {
 public:
  CapabilityPresets();

  // Overrides from {"pc": {"max_columns": 10, ...}, ...}.
  void apply_overrides(const nlohmann::json& overrides);
  const TerminalCapability& get(TerminalKind kind) const { return presets_.at(kind); }

 private:
  std::map<TerminalKind, TerminalCapability> presets_;
};

struct ColumnSpec {
  std::string id;
  std::string label;
  int priority = 0;  // 0 is the most important column
  int width = 16;

  friend bool operator==(const ColumnSpec&, const ColumnSpec&) = default;
};

using Row = std::map<std::string, std::string>;

// Abstract tabular data to be adapted onto a terminal.
struct DisplayPayload {
  std::string title;
  std::vector<ColumnSpec> columns;
  std::vector<Row> rows;
  std::set<std::size_t> alert_rows;

  // Throws Error(kMalformedPayload) when a row uses an undeclared column,
  // priorities or ids repeat, widths are not positive, or an alert index is
  // out of range.
  void check() const;

  friend bool operator==(const DisplayPayload&, const DisplayPayload&) = default;
};

struct Highlight {
  std::size_t line = 0;
  std::size_t begin = 0;  // byte offsets into the line
  std::size_t end = 0;

  friend bool operator==(const Highlight&, const Highlight&) = default;
};

struct RenderedView {
  TerminalKind kind = TerminalKind::kPc;
  std::vector<std::string> lines;
  std::vector<Highlight> highlights;  // rich terminals only
  std::vector<std::string> columns;   // chosen column ids, priority order
  std::vector<std::size_t> rows;      // source row indices shown
  std::vector<std::vector<std::string>> cells;  // shown cell text
  std::vector<std::size_t> alert_lines;

  friend bool operator==(const RenderedView&, const RenderedView&) = default;
};

// Maps a canonical cell value to the viewer's personal name for it.
using NameMapper = std::function<std::string(const std::string&)>;

// Priority-prefix column selection, row clipping, and cell truncation with a
// trailing ellipsis. Alert rows get a highlight span on rich terminals and a
// "!" prefix otherwise. Pure: equal inputs give equal views.
RenderedView render(const DisplayPayload& payload, const TerminalCapability& capability,
                    const NameMapper& names = {});

struct JoinSpec {
  std::string key;
};

// Inner key-join of several payloads. Rows are ordered by key, then by the
// contributing row indices. Columns of later sources follow the first
// source's; clashing ids are qualified as "s<index>.<id>". Throws
// Error(kJoinKeyMissing) when a source lacks the key column or a row lacks
// a key value.
DisplayPayload aggregate(const std::vector<DisplayPayload>& sources, const JoinSpec& join);

// Length in Unicode code points.
std::size_t utf8_length(std::string_view text);
// At most `width` code points; over-long text ends in U+2026.
std::string truncate_cell(std::string_view text, std::size_t width);

nlohmann::json capability_to_json(const TerminalCapability& cap);
TerminalCapability capability_from_json(const nlohmann::json& j,
                                        const CapabilityPresets& presets);
nlohmann::json payload_to_json(const DisplayPayload& payload);
// Throws Error(kMalformedPayload) on schema violations.
DisplayPayload payload_from_json(const nlohmann::json& j);
nlohmann::json view_to_json(const RenderedView& view);
RenderedView view_from_json(const nlohmann::json& j);

}  // namespace hic
