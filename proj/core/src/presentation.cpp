#include "hic/presentation.hpp"

#include <algorithm>
#include <numeric>
#include <unordered_map>

#include <nlohmann/json.hpp>

#include "hic/error.hpp"

namespace hic {
namespace {

constexpr std::string_view kEllipsis = "\xE2\x80\xA6";  // U+2026

bool is_continuation(char c) { return (static_cast<unsigned char>(c) & 0xC0) == 0x80; }

std::string pad_to(const std::string& text, std::size_t width) {
  const std::size_t len = utf8_length(text);
  return len >= width ? text : text + std::string(width - len, ' ');
}

[[noreturn]] void malformed(const std::string& reason) {
  throw Error(Errc::kMalformedPayload, reason);
}

std::string cell_string(const nlohmann::json& v) {
  if (v.is_string()) return v.get<std::string>();
  if (v.is_number() || v.is_boolean()) return v.dump();
  if (v.is_null()) return "";
  malformed("cell values must be scalars");
}

}  // namespace

std::string_view to_string(TerminalKind kind) {
  switch (kind) {
    case TerminalKind::kPc: return "pc";
    case TerminalKind::kPda: return "pda";
    case TerminalKind::kPhone: return "phone";
  }
  return "pc";
}

TerminalKind terminal_kind_from_string(std::string_view text) {
  if (text == "pc") return TerminalKind::kPc;
  if (text == "pda") return TerminalKind::kPda;
  if (text == "phone") return TerminalKind::kPhone;
  throw Error(Errc::kBadParams, "unknown terminal kind '" + std::string(text) + "'");
}

TerminalCapability TerminalCapability::preset(TerminalKind kind) {
  switch (kind) {
    case TerminalKind::kPc: return {TerminalKind::kPc, 12, 40, 24, true};
    case TerminalKind::kPda: return {TerminalKind::kPda, 6, 24, 14, true};
    case TerminalKind::kPhone: return {TerminalKind::kPhone, 3, 12, 10, false};
  }
  return {};
}

CapabilityPresets::CapabilityPresets() {
  for (auto k : {TerminalKind::kPc, TerminalKind::kPda, TerminalKind::kPhone}) {
    presets_.emplace(k, TerminalCapability::preset(k));
  }
}

void CapabilityPresets::apply_overrides(const nlohmann::json& overrides) {
  if (overrides.is_null()) return;
  if (!overrides.is_object()) throw Error(Errc::kConfigError, "capabilities must be an object");
  for (const auto& [name, value] : overrides.items()) {
    const TerminalKind kind = terminal_kind_from_string(name);
    nlohmann::json merged = capability_to_json(presets_.at(kind));
    merged.update(value);
    merged["kind"] = name;
    presets_[kind] = capability_from_json(merged, *this);
  }
}

void DisplayPayload::check() const {
  std::set<std::string> ids;
  std::set<int> priorities;
  for (const auto& c : columns) {
    if (c.id.empty()) malformed("column with empty id");
    if (!ids.insert(c.id).second) malformed("duplicate column id '" + c.id + "'");
    if (!priorities.insert(c.priority).second) {
      malformed("duplicate column priority " + std::to_string(c.priority));
    }
    if (c.width <= 0) malformed("column '" + c.id + "' has non-positive width");
  }
  for (std::size_t i = 0; i < rows.size(); ++i) {
    for (const auto& [key, value] : rows[i]) {
      if (!ids.count(key)) {
        malformed("row " + std::to_string(i) + " uses undeclared column '" + key + "'");
      }
    }
  }
  for (auto a : alert_rows) {
    if (a >= rows.size()) malformed("alert row " + std::to_string(a) + " out of range");
  }
}

std::size_t utf8_length(std::string_view text) {
  return static_cast<std::size_t>(
      std::count_if(text.begin(), text.end(), [](char c) { return !is_continuation(c); }));
}

std::string truncate_cell(std::string_view text, std::size_t width) {
  if (utf8_length(text) <= width) return std::string(text);
  if (width == 0) return {};
  // Keep width - 1 code points, then the ellipsis.
  std::size_t kept = 0;
  std::size_t i = 0;
  for (; i < text.size(); ++i) {
    if (!is_continuation(text[i])) {
      if (kept == width - 1) break;
      ++kept;
    }
  }
  return std::string(text.substr(0, i)) + std::string(kEllipsis);
}

RenderedView render(const DisplayPayload& payload, const TerminalCapability& capability,
                    const NameMapper& names) {
  payload.check();
  RenderedView view;
  view.kind = capability.kind;

  std::vector<const ColumnSpec*> order;
  for (const auto& c : payload.columns) order.push_back(&c);
  std::sort(order.begin(), order.end(),
            [](const ColumnSpec* a, const ColumnSpec* b) { return a->priority < b->priority; });
  const auto max_cols = static_cast<std::size_t>(std::max(capability.max_columns, 0));
  if (order.size() > max_cols) order.resize(max_cols);

  std::vector<std::size_t> widths;
  for (const auto* c : order) {
    view.columns.push_back(c->id);
    widths.push_back(static_cast<std::size_t>(std::min(c->width, capability.max_cell_width)));
  }

  const std::string row_gutter = capability.rich ? "" : "  ";
  auto join_cells = [&](const std::vector<std::string>& cells) {
    std::string line;
    for (std::size_t i = 0; i < cells.size(); ++i) {
      if (i) line += " | ";
      line += i + 1 == cells.size() ? cells[i] : pad_to(cells[i], widths[i]);
    }
    return line;
  };

  view.lines.push_back(payload.title);
  std::vector<std::string> header;
  for (std::size_t i = 0; i < order.size(); ++i) {
    header.push_back(truncate_cell(order[i]->label.empty() ? order[i]->id : order[i]->label,
                                   widths[i]));
  }
  view.lines.push_back(row_gutter + join_cells(header));
  std::size_t rule = 0;
  for (std::size_t i = 0; i < widths.size(); ++i) rule += widths[i] + (i ? 3 : 0);
  view.lines.push_back(row_gutter + std::string(rule, '-'));

  const std::size_t max_rows = static_cast<std::size_t>(std::max(capability.max_rows, 0));
  for (std::size_t r = 0; r < payload.rows.size() && view.rows.size() < max_rows; ++r) {
    const Row& row = payload.rows[r];
    std::vector<std::string> cells;
    for (std::size_t i = 0; i < order.size(); ++i) {
      auto it = row.find(order[i]->id);
      std::string value = it == row.end() ? std::string() : it->second;
      if (names && !value.empty()) value = names(value);
      cells.push_back(truncate_cell(value, widths[i]));
    }
    const bool alert = payload.alert_rows.count(r) > 0;
    std::string line = join_cells(cells);
    const std::size_t line_no = view.lines.size();
    if (capability.rich) {
      if (alert) view.highlights.push_back({line_no, 0, line.size()});
    } else {
      line = (alert ? "! " : "  ") + line;
    }
    if (alert) view.alert_lines.push_back(line_no);
    view.lines.push_back(std::move(line));
    view.rows.push_back(r);
    view.cells.push_back(std::move(cells));
  }
  return view;
}

DisplayPayload aggregate(const std::vector<DisplayPayload>& sources, const JoinSpec& join) {
  DisplayPayload out;
  if (sources.empty()) return out;

  for (std::size_t s = 0; s < sources.size(); ++s) {
    const auto& src = sources[s];
    const bool has_key = std::any_of(src.columns.begin(), src.columns.end(),
                                     [&](const ColumnSpec& c) { return c.id == join.key; });
    if (!has_key) {
      throw Error(Errc::kJoinKeyMissing,
                  "source " + std::to_string(s) + " has no column '" + join.key + "'");
    }
    for (std::size_t r = 0; r < src.rows.size(); ++r) {
      if (!src.rows[r].count(join.key)) {
        throw Error(Errc::kJoinKeyMissing, "source " + std::to_string(s) + " row " +
                                               std::to_string(r) + " lacks '" + join.key + "'");
      }
    }
  }

  // Column renames per source (source column id -> output column id).
  std::vector<std::map<std::string, std::string>> rename(sources.size());
  out.title = sources.front().title;
  out.columns = sources.front().columns;
  for (const auto& c : out.columns) rename[0][c.id] = c.id;
  std::set<std::string> used;
  int next_priority = 0;
  for (const auto& c : out.columns) {
    used.insert(c.id);
    next_priority = std::max(next_priority, c.priority + 1);
  }
  for (std::size_t s = 1; s < sources.size(); ++s) {
    std::vector<const ColumnSpec*> cols;
    for (const auto& c : sources[s].columns) {
      if (c.id == join.key) {
        rename[s][c.id] = c.id;
      } else {
        cols.push_back(&c);
      }
    }
    std::sort(cols.begin(), cols.end(),
              [](const ColumnSpec* a, const ColumnSpec* b) { return a->priority < b->priority; });
    for (const auto* c : cols) {
      std::string id = used.count(c->id) ? "s" + std::to_string(s) + "." + c->id : c->id;
      used.insert(id);
      rename[s][c->id] = id;
      out.columns.push_back({id, c->label, next_priority++, c->width});
    }
  }

  // Per-source key index for sources 1..n-1.
  std::vector<std::unordered_map<std::string, std::vector<std::size_t>>> index(sources.size());
  for (std::size_t s = 1; s < sources.size(); ++s) {
    for (std::size_t r = 0; r < sources[s].rows.size(); ++r) {
      index[s][sources[s].rows[r].at(join.key)].push_back(r);
    }
  }

  struct Joined {
    std::string key;
    std::vector<std::size_t> parts;
  };
  std::vector<Joined> joined;
  for (std::size_t r0 = 0; r0 < sources[0].rows.size(); ++r0) {
    const std::string& key = sources[0].rows[r0].at(join.key);
    std::vector<const std::vector<std::size_t>*> matches;
    bool complete = true;
    for (std::size_t s = 1; s < sources.size(); ++s) {
      auto it = index[s].find(key);
      if (it == index[s].end()) {
        complete = false;
        break;
      }
      matches.push_back(&it->second);
    }
    if (!complete) continue;
    // Odometer over the matching rows of every later source.
    std::vector<std::size_t> pos(matches.size(), 0);
    bool more = true;
    while (more) {
      Joined j{key, {r0}};
      for (std::size_t m = 0; m < matches.size(); ++m) j.parts.push_back((*matches[m])[pos[m]]);
      joined.push_back(std::move(j));
      more = false;
      for (std::size_t m = matches.size(); m-- > 0;) {
        if (++pos[m] < matches[m]->size()) {
          more = true;
          break;
        }
        pos[m] = 0;
      }
    }
  }
  std::stable_sort(joined.begin(), joined.end(),
                   [](const Joined& a, const Joined& b) { return a.key < b.key; });

  for (const auto& j : joined) {
    Row row;
    bool alert = false;
    for (std::size_t s = 0; s < sources.size(); ++s) {
      const Row& src = sources[s].rows[j.parts[s]];
      for (const auto& [k, v] : src) row[rename[s].at(k)] = v;
      alert = alert || sources[s].alert_rows.count(j.parts[s]) > 0;
    }
    if (alert) out.alert_rows.insert(out.rows.size());
    out.rows.push_back(std::move(row));
  }
  return out;
}

nlohmann::json capability_to_json(const TerminalCapability& cap) {
  return {{"kind", to_string(cap.kind)},
          {"max_columns", cap.max_columns},
          {"max_rows", cap.max_rows},
          {"max_cell_width", cap.max_cell_width},
          {"rich", cap.rich}};
}

TerminalCapability capability_from_json(const nlohmann::json& j,
                                        const CapabilityPresets& presets) {
  if (j.is_string()) return presets.get(terminal_kind_from_string(j.get<std::string>()));
  if (!j.is_object() || !j.contains("kind") || !j.at("kind").is_string()) {
    throw Error(Errc::kBadParams, "capability must be a kind name or an object with 'kind'");
  }
  TerminalCapability cap = presets.get(terminal_kind_from_string(j.at("kind").get<std::string>()));
  auto positive = [&](const char* key, int& slot) {
    if (!j.contains(key)) return;
    const auto& v = j.at(key);
    if (!v.is_number_integer() || v.get<int>() <= 0) {
      throw Error(Errc::kBadParams, std::string("capability '") + key + "' must be a positive integer");
    }
    slot = v.get<int>();
  };
  positive("max_columns", cap.max_columns);
  positive("max_rows", cap.max_rows);
  positive("max_cell_width", cap.max_cell_width);
  if (j.contains("rich")) {
    if (!j.at("rich").is_boolean()) throw Error(Errc::kBadParams, "capability 'rich' must be a boolean");
    cap.rich = j.at("rich").get<bool>();
  }
  return cap;
}

nlohmann::json payload_to_json(const DisplayPayload& payload) {
  nlohmann::json cols = nlohmann::json::array();
  for (const auto& c : payload.columns) {
    cols.push_back({{"id", c.id}, {"label", c.label}, {"priority", c.priority}, {"width", c.width}});
  }
  nlohmann::json rows = nlohmann::json::array();
  for (const auto& r : payload.rows) rows.push_back(r);
  return {{"title", payload.title},
          {"columns", std::move(cols)},
          {"rows", std::move(rows)},
          {"alert_rows", payload.alert_rows}};
}

DisplayPayload payload_from_json(const nlohmann::json& j) {
  if (!j.is_object()) malformed("payload must be an object");
  DisplayPayload p;
  try {
    p.title = j.value("title", "");
    for (const auto& c : j.value("columns", nlohmann::json::array())) {
      ColumnSpec col;
      col.id = c.at("id").get<std::string>();
      col.label = c.value("label", col.id);
      col.priority = c.at("priority").get<int>();
      col.width = c.value("width", 16);
      p.columns.push_back(std::move(col));
    }
    for (const auto& r : j.value("rows", nlohmann::json::array())) {
      if (!r.is_object()) malformed("rows must be objects");
      Row row;
      for (const auto& [k, v] : r.items()) row.emplace(k, cell_string(v));
      p.rows.push_back(std::move(row));
    }
    for (const auto& a : j.value("alert_rows", nlohmann::json::array())) {
      p.alert_rows.insert(a.get<std::size_t>());
    }
  } catch (const nlohmann::json::exception& e) {
    malformed(e.what());
  }
  p.check();
  return p;
}

nlohmann::json view_to_json(const RenderedView& view) {
  nlohmann::json hl = nlohmann::json::array();
  for (const auto& h : view.highlights) {
    hl.push_back({{"line", h.line}, {"begin", h.begin}, {"end", h.end}});
  }
  return {{"kind", to_string(view.kind)},
          {"lines", view.lines},
          {"highlights", std::move(hl)},
          {"columns", view.columns},
          {"rows", view.rows},
          {"cells", view.cells},
          {"alert_lines", view.alert_lines}};
}

RenderedView view_from_json(const nlohmann::json& j) {
  RenderedView v;
  v.kind = terminal_kind_from_string(j.at("kind").get<std::string>());
  v.lines = j.at("lines").get<std::vector<std::string>>();
  for (const auto& h : j.at("highlights")) {
    v.highlights.push_back({h.at("line").get<std::size_t>(), h.at("begin").get<std::size_t>(),
                            h.at("end").get<std::size_t>()});
  }
  v.columns = j.at("columns").get<std::vector<std::string>>();
  v.rows = j.at("rows").get<std::vector<std::size_t>>();
  v.cells = j.at("cells").get<std::vector<std::vector<std::string>>>();
  v.alert_lines = j.at("alert_lines").get<std::vector<std::size_t>>();
  return v;
}

}  // namespace hic
