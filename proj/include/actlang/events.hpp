#pragma once

#include <algorithm>
#include <array>
#include <cctype>
#include <cstdint>
#include <istream>
#include <map>
#include <optional>
#include <ostream>
#include <sstream>
#include <string>
#include <string_view>
#include <tuple>
#include <vector>

#include "json.hpp"

#include "actlang/errors.hpp"

namespace actlang {

enum class EventKind { KeyDown, KeyUp, MouseMove, MouseDown, MouseUp, MouseClick };

inline constexpr std::array<std::string_view, 6> kEventKindNames = {
    "KeyDown", "KeyUp", "MouseMove", "MouseDown", "MouseUp", "MouseClick"};

inline std::string_view to_string(EventKind k) { return kEventKindNames[static_cast<int>(k)]; }

inline std::optional<EventKind> event_kind_from_string(std::string_view s) {
  for (std::size_t i = 0; i < kEventKindNames.size(); ++i)
    if (kEventKindNames[i] == s) return static_cast<EventKind>(i);
  return std::nullopt;
}

inline bool is_key_kind(EventKind k) { return k == EventKind::KeyDown || k == EventKind::KeyUp; }
inline bool is_mouse_kind(EventKind k) { return !is_key_kind(k); }

// Which click convention a recording uses. BuffaloLike logs a single Click,
// EmakiLike logs separate press/release events.
enum class DatasetProfile { BuffaloLike, EmakiLike };

inline std::string_view to_string(DatasetProfile p) {
  return p == DatasetProfile::BuffaloLike ? "BuffaloLike" : "EmakiLike";
}

inline std::optional<DatasetProfile> dataset_profile_from_string(std::string_view s) {
  std::string lower(s);
  std::transform(lower.begin(), lower.end(), lower.begin(),
                 [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  if (lower == "buffalolike" || lower == "buffalo") return DatasetProfile::BuffaloLike;
  if (lower == "emakilike" || lower == "emaki") return DatasetProfile::EmakiLike;
  return std::nullopt;
}

struct RawEvent {
  std::int64_t timestamp_ms = 0;
  EventKind kind = EventKind::MouseMove;
  std::optional<std::string> key_value;
  std::optional<double> x;
  std::optional<double> y;

  friend bool operator==(const RawEvent&, const RawEvent&) = default;
};

struct Trial {
  std::string participant_id;
  std::string task_id;
  int trial_index = 0;
  std::vector<RawEvent> events;
  int screen_w = 1;
  int screen_h = 1;
  bool normalized = false;

  friend bool operator==(const Trial&, const Trial&) = default;
};

struct Session {
  std::vector<Trial> trials;
  DatasetProfile dataset_profile = DatasetProfile::EmakiLike;

  friend bool operator==(const Session&, const Session&) = default;
};

namespace detail {

inline std::string ascii_lower(std::string_view s) {
  std::string out(s);
  for (char& c : out) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  return out;
}

// Number of code points in a UTF-8 string.
inline std::size_t utf8_length(std::string_view s) {
  std::size_t n = 0;
  for (unsigned char c : s)
    if ((c & 0xC0) != 0x80) ++n;
  return n;
}

}  // namespace detail

// Canonical key name: printable characters lower-cased, named keys in a
// fixed capitalised form ("Shift", "Space", "Ctrl", ...).
inline std::string normalize_key(std::string_view raw) {
  static const std::map<std::string, std::string, std::less<>> named = {
      {" ", "Space"},           {"space", "Space"},         {"spacebar", "Space"},
      {"shift", "Shift"},       {"shiftleft", "Shift"},     {"shiftright", "Shift"},
      {"control", "Ctrl"},      {"ctrl", "Ctrl"},           {"controlleft", "Ctrl"},
      {"controlright", "Ctrl"}, {"alt", "Alt"},             {"altgraph", "AltGr"},
      {"altgr", "AltGr"},       {"meta", "Meta"},           {"cmd", "Meta"},
      {"command", "Meta"},      {"win", "Meta"},            {"os", "Meta"},
      {"backspace", "Backspace"}, {"enter", "Enter"},       {"return", "Enter"},
      {"tab", "Tab"},           {"\t", "Tab"},              {"\n", "Enter"},
      {"escape", "Escape"},     {"esc", "Escape"},          {"delete", "Delete"},
      {"del", "Delete"},        {"capslock", "CapsLock"},   {"arrowleft", "ArrowLeft"},
      {"left", "ArrowLeft"},    {"arrowright", "ArrowRight"}, {"right", "ArrowRight"},
      {"arrowup", "ArrowUp"},   {"up", "ArrowUp"},          {"arrowdown", "ArrowDown"},
      {"down", "ArrowDown"},    {"home", "Home"},           {"end", "End"},
      {"pageup", "PageUp"},     {"pagedown", "PageDown"},   {"insert", "Insert"},
  };
  if (raw.empty()) return std::string{};
  const std::string lower = detail::ascii_lower(raw);
  if (auto it = named.find(lower); it != named.end()) return it->second;
  if (detail::utf8_length(raw) == 1) return lower;
  // Unknown multi-character names (F5, MediaPlay, ...): capitalise the first letter.
  std::string out(raw);
  out[0] = static_cast<char>(std::toupper(static_cast<unsigned char>(out[0])));
  return out;
}

namespace detail {

inline void check_id(std::size_t line, const std::string& field, const std::string& v) {
  if (v.empty()) throw ParseError(line, "empty " + field);
  if (v.find_first_of("\t\n\r") != std::string::npos)
    throw ParseError(line, field + " contains a tab or newline");
}

struct TrialKey {
  std::string participant;
  std::string task;
  int trial = 0;
  auto operator<=>(const TrialKey&) const = default;
};

}  // namespace detail

// Reads one JSON object per line. Blank lines are skipped, unknown fields ignored.
// When `profile` is empty it is inferred from the click events present.
inline Session parse_events(std::istream& in, std::optional<DatasetProfile> profile = std::nullopt) {
  using nlohmann::json;
  std::map<detail::TrialKey, Trial> trials;
  bool saw_click = false;
  bool saw_down_up = false;
  std::size_t click_line = 0;
  std::size_t down_up_line = 0;

  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.find_first_not_of(" \t") == std::string::npos) continue;
    json rec;
    try {
      rec = json::parse(line);
    } catch (const json::parse_error& e) {
      throw ParseError(lineno, std::string("invalid JSON: ") + e.what());
    }
    if (!rec.is_object()) throw ParseError(lineno, "record is not an object");

    auto require = [&](const char* field) -> const json& {
      auto it = rec.find(field);
      if (it == rec.end() || it->is_null()) throw ParseError(lineno, std::string("missing field '") + field + "'");
      return *it;
    };
    auto as_string = [&](const char* field) {
      const json& v = require(field);
      if (v.is_string()) return v.get<std::string>();
      if (v.is_number_integer()) return std::to_string(v.get<long long>());
      throw ParseError(lineno, std::string("field '") + field + "' must be a string");
    };
    auto as_int = [&](const char* field) {
      const json& v = require(field);
      if (!v.is_number_integer()) throw ParseError(lineno, std::string("field '") + field + "' must be an integer");
      return v.get<std::int64_t>();
    };

    detail::TrialKey key{as_string("participant_id"), as_string("task_id"), 0};
    detail::check_id(lineno, "participant_id", key.participant);
    detail::check_id(lineno, "task_id", key.task);
    const auto trial_index = as_int("trial_index");
    if (trial_index < 0) throw ParseError(lineno, "trial_index must be >= 0");
    key.trial = static_cast<int>(trial_index);

    RawEvent ev;
    ev.timestamp_ms = as_int("timestamp_ms");
    if (ev.timestamp_ms < 0) throw ParseError(lineno, "timestamp_ms must be >= 0");
    const auto kind = event_kind_from_string(as_string("kind"));
    if (!kind) throw ParseError(lineno, "unknown event kind '" + as_string("kind") + "'");
    ev.kind = *kind;

    const bool has_key = rec.contains("key_value") && !rec["key_value"].is_null();
    const bool has_x = rec.contains("x") && !rec["x"].is_null();
    const bool has_y = rec.contains("y") && !rec["y"].is_null();
    if (is_key_kind(ev.kind)) {
      if (!has_key) throw ParseError(lineno, std::string(to_string(ev.kind)) + " without key_value");
      if (has_x || has_y) throw ParseError(lineno, std::string(to_string(ev.kind)) + " must not carry coordinates");
      if (!rec["key_value"].is_string()) throw ParseError(lineno, "key_value must be a string");
      ev.key_value = normalize_key(rec["key_value"].get<std::string>());
      if (ev.key_value->empty()) throw ParseError(lineno, "empty key_value");
    } else {
      if (has_key) throw ParseError(lineno, std::string(to_string(ev.kind)) + " must not carry key_value");
      if (!has_x || !has_y) throw ParseError(lineno, std::string(to_string(ev.kind)) + " without x/y");
      if (!rec["x"].is_number() || !rec["y"].is_number()) throw ParseError(lineno, "x/y must be numbers");
      ev.x = rec["x"].get<double>();
      ev.y = rec["y"].get<double>();
      if (ev.kind == EventKind::MouseClick) {
        if (!saw_click) click_line = lineno;
        saw_click = true;
      }
      if (ev.kind == EventKind::MouseDown || ev.kind == EventKind::MouseUp) {
        if (!saw_down_up) down_up_line = lineno;
        saw_down_up = true;
      }
    }

    const auto sw = as_int("screen_w");
    const auto sh = as_int("screen_h");
    if (sw <= 0 || sh <= 0) throw ParseError(lineno, "screen_w/screen_h must be positive");
    const bool normalized = rec.contains("normalized") && rec["normalized"].is_boolean() && rec["normalized"].get<bool>();

    auto [it, inserted] = trials.try_emplace(key);
    Trial& t = it->second;
    if (inserted) {
      t.participant_id = key.participant;
      t.task_id = key.task;
      t.trial_index = key.trial;
      t.screen_w = static_cast<int>(sw);
      t.screen_h = static_cast<int>(sh);
      t.normalized = normalized;
    } else if (t.screen_w != sw || t.screen_h != sh) {
      throw ParseError(lineno, "screen size changes within one trial");
    } else if (t.normalized != normalized) {
      throw ParseError(lineno, "normalized flag changes within one trial");
    }
    t.events.push_back(std::move(ev));
  }

  if (saw_click && saw_down_up)
    throw ProfileConflictError("mixed click conventions: MouseClick at line " + std::to_string(click_line) +
                               ", MouseDown/MouseUp at line " + std::to_string(down_up_line));
  Session session;
  if (profile) {
    if (*profile == DatasetProfile::BuffaloLike && saw_down_up)
      throw ProfileConflictError("BuffaloLike profile but MouseDown/MouseUp at line " + std::to_string(down_up_line));
    if (*profile == DatasetProfile::EmakiLike && saw_click)
      throw ProfileConflictError("EmakiLike profile but MouseClick at line " + std::to_string(click_line));
    session.dataset_profile = *profile;
  } else {
    session.dataset_profile = saw_click ? DatasetProfile::BuffaloLike : DatasetProfile::EmakiLike;
  }

  session.trials.reserve(trials.size());
  for (auto& [key, trial] : trials) {
    std::stable_sort(trial.events.begin(), trial.events.end(),
                     [](const RawEvent& a, const RawEvent& b) { return a.timestamp_ms < b.timestamp_ms; });
    session.trials.push_back(std::move(trial));
  }
  return session;
}

inline Session parse_events(const std::string& text, std::optional<DatasetProfile> profile = std::nullopt) {
  std::istringstream in(text);
  return parse_events(in, profile);
}

inline void serialize_events(const Session& session, std::ostream& out) {
  using nlohmann::ordered_json;
  for (const Trial& t : session.trials) {
    for (const RawEvent& e : t.events) {
      ordered_json rec;
      rec["participant_id"] = t.participant_id;
      rec["task_id"] = t.task_id;
      rec["trial_index"] = t.trial_index;
      rec["timestamp_ms"] = e.timestamp_ms;
      rec["kind"] = std::string(to_string(e.kind));
      if (e.key_value) rec["key_value"] = *e.key_value;
      if (e.x) rec["x"] = *e.x;
      if (e.y) rec["y"] = *e.y;
      rec["screen_w"] = t.screen_w;
      rec["screen_h"] = t.screen_h;
      if (t.normalized) rec["normalized"] = true;
      out << rec.dump() << '\n';
    }
  }
}

inline std::string serialize_events(const Session& session) {
  std::ostringstream out;
  serialize_events(session, out);
  return out.str();
}

// Rescales mouse coordinates to [0,1] by screen size, clamping out-of-window values.
[[nodiscard]] inline Trial normalize_coords(Trial trial) {
  if (trial.normalized) return trial;
  if (trial.screen_w <= 0 || trial.screen_h <= 0) throw ValidationError("screen size must be positive");
  const double w = trial.screen_w;
  const double h = trial.screen_h;
  for (RawEvent& e : trial.events) {
    if (!is_mouse_kind(e.kind)) continue;
    if (!e.x || !e.y)
      throw ValidationError("mouse event at t=" + std::to_string(e.timestamp_ms) + " missing coordinates");
    e.x = std::clamp(*e.x / w, 0.0, 1.0);
    e.y = std::clamp(*e.y / h, 0.0, 1.0);
  }
  trial.normalized = true;
  return trial;
}

[[nodiscard]] inline Session normalize_coords(Session session) {
  for (Trial& t : session.trials) t = normalize_coords(std::move(t));
  return session;
}

// Distinct canonical key values observed across a session, sorted.
inline std::vector<std::string> distinct_keys(const Session& session) {
  std::vector<std::string> keys;
  for (const Trial& t : session.trials)
    for (const RawEvent& e : t.events)
      if (e.key_value) keys.push_back(*e.key_value);
  std::sort(keys.begin(), keys.end());
  keys.erase(std::unique(keys.begin(), keys.end()), keys.end());
  return keys;
}

}  // namespace actlang
