#pragma once

#include <algorithm>
#include <array>
#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <sstream>
#include <stdexcept>
#include <string>
#include <string_view>
#include <unordered_map>
#include <variant>
#include <vector>

#include "actlang/errors.hpp"
#include "actlang/events.hpp"

namespace actlang {

enum class KeyAction { Down, Up };
enum class MouseAction { Move, Click, Down, Up };
enum class MouseCategory { Pinpoint, Redirection };
enum class Modality { Mouse, Keyboard, Joint };

inline std::string_view to_string(MouseAction a) {
  constexpr std::array<std::string_view, 4> names = {"Move", "Click", "Down", "Up"};
  return names[static_cast<int>(a)];
}
inline std::string_view to_string(MouseCategory c) {
  return c == MouseCategory::Pinpoint ? "Pinpoint" : "Redirection";
}
inline std::string_view to_string(Modality m) {
  constexpr std::array<std::string_view, 3> names = {"mouse", "keyboard", "joint"};
  return names[static_cast<int>(m)];
}
inline std::optional<Modality> modality_from_string(std::string_view s) {
  if (s == "mouse") return Modality::Mouse;
  if (s == "keyboard") return Modality::Keyboard;
  if (s == "joint") return Modality::Joint;
  return std::nullopt;
}

struct KeyToken {
  KeyAction action = KeyAction::Down;
  std::string key;
  friend bool operator==(const KeyToken&, const KeyToken&) = default;
};

struct MouseToken {
  MouseAction action = MouseAction::Move;
  MouseCategory category = MouseCategory::Pinpoint;
  int area = 0;
  friend bool operator==(const MouseToken&, const MouseToken&) = default;
};

struct EndOfTrial {
  friend bool operator==(const EndOfTrial&, const EndOfTrial&) = default;
};

using ActionToken = std::variant<KeyToken, MouseToken, EndOfTrial>;

inline constexpr std::string_view kEndOfTrialText = "<EOT>";

inline bool is_end_of_trial(const ActionToken& t) { return std::holds_alternative<EndOfTrial>(t); }

inline std::string to_text(const ActionToken& token) {
  if (const auto* k = std::get_if<KeyToken>(&token))
    return (k->action == KeyAction::Down ? "KeyDown_" : "KeyUp_") + k->key;
  if (const auto* m = std::get_if<MouseToken>(&token))
    return std::string(to_string(m->action)) + "_" + std::string(to_string(m->category)) + "_Area" +
           std::to_string(m->area);
  return std::string(kEndOfTrialText);
}

inline ActionToken token_from_text(std::string_view text) {
  if (text == kEndOfTrialText) return EndOfTrial{};
  if (text.starts_with("KeyDown_") && text.size() > 8) return KeyToken{KeyAction::Down, std::string(text.substr(8))};
  if (text.starts_with("KeyUp_") && text.size() > 6) return KeyToken{KeyAction::Up, std::string(text.substr(6))};
  const auto first = text.find('_');
  const auto second = first == std::string_view::npos ? first : text.find('_', first + 1);
  if (second != std::string_view::npos) {
    const auto action = text.substr(0, first);
    const auto category = text.substr(first + 1, second - first - 1);
    const auto area = text.substr(second + 1);
    MouseToken m;
    bool ok = true;
    if (action == "Move") m.action = MouseAction::Move;
    else if (action == "Click") m.action = MouseAction::Click;
    else if (action == "Down") m.action = MouseAction::Down;
    else if (action == "Up") m.action = MouseAction::Up;
    else ok = false;
    if (category == "Pinpoint") m.category = MouseCategory::Pinpoint;
    else if (category == "Redirection") m.category = MouseCategory::Redirection;
    else ok = false;
    if (area.size() == 5 && area.starts_with("Area") && area[4] >= '0' && area[4] <= '3') m.area = area[4] - '0';
    else ok = false;
    if (ok) return m;
  }
  throw std::invalid_argument("not a token: '" + std::string(text) + "'");
}

// Mouse actions available under a click convention.
inline std::vector<MouseAction> mouse_actions(DatasetProfile profile) {
  if (profile == DatasetProfile::BuffaloLike) return {MouseAction::Move, MouseAction::Click};
  return {MouseAction::Move, MouseAction::Down, MouseAction::Up};
}

// Ordered inventory of atomic tokens. Id 0 is always the end-of-trial marker.
class Alphabet {
 public:
  Alphabet() { add(std::string(kEndOfTrialText)); }

  explicit Alphabet(std::span<const std::string> texts) {
    if (texts.empty() || texts.front() != kEndOfTrialText)
      throw std::invalid_argument("alphabet must start with " + std::string(kEndOfTrialText));
    for (const auto& t : texts) {
      token_from_text(t);
      if (!add(t)) throw std::invalid_argument("duplicate alphabet entry '" + t + "'");
    }
  }

  static Alphabet build(DatasetProfile profile, Modality modality, std::span<const std::string> keys) {
    Alphabet a;
    if (modality != Modality::Keyboard) {
      for (MouseAction act : mouse_actions(profile))
        for (MouseCategory cat : {MouseCategory::Pinpoint, MouseCategory::Redirection})
          for (int area = 0; area < 4; ++area) a.add(to_text(MouseToken{act, cat, area}));
    }
    if (modality != Modality::Mouse) {
      std::vector<std::string> sorted(keys.begin(), keys.end());
      std::sort(sorted.begin(), sorted.end());
      sorted.erase(std::unique(sorted.begin(), sorted.end()), sorted.end());
      for (const auto& k : sorted) {
        a.add(to_text(KeyToken{KeyAction::Down, k}));
        a.add(to_text(KeyToken{KeyAction::Up, k}));
      }
    }
    return a;
  }

  std::size_t size() const { return texts_.size(); }
  // Atomic actions, excluding the end-of-trial marker.
  std::size_t atomic_size() const { return texts_.size() - 1; }
  const std::vector<std::string>& texts() const { return texts_; }
  const std::string& text(int id) const { return texts_.at(static_cast<std::size_t>(id)); }

  std::optional<int> find(std::string_view text) const {
    auto it = index_.find(std::string(text));
    if (it == index_.end()) return std::nullopt;
    return it->second;
  }

  int id_of(const ActionToken& t) const {
    const auto text = to_text(t);
    if (auto id = find(text)) return *id;
    throw EncodingError("token '" + text + "' is not in the alphabet");
  }

  std::vector<int> ids_of(std::span<const ActionToken> tokens) const {
    std::vector<int> out;
    out.reserve(tokens.size());
    for (const auto& t : tokens) out.push_back(id_of(t));
    return out;
  }

  friend bool operator==(const Alphabet& a, const Alphabet& b) { return a.texts_ == b.texts_; }

 private:
  bool add(const std::string& text) {
    if (index_.count(text)) return false;
    index_.emplace(text, static_cast<int>(texts_.size()));
    texts_.push_back(text);
    return true;
  }

  std::vector<std::string> texts_;
  std::unordered_map<std::string, int> index_;
};

struct IdtConfig {
  std::int64_t duration_threshold_ms = 100;
  double dispersion_threshold = 0.1;

  void validate() const {
    if (duration_threshold_ms <= 0 || !(dispersion_threshold > 0))
      throw std::invalid_argument("I-DT thresholds must be strictly positive");
  }
};

struct Point2 {
  double x = 0;
  double y = 0;
};

// (max x - min x) + (max y - min y)
inline double dispersion(std::span<const Point2> points) {
  if (points.empty()) throw std::invalid_argument("dispersion of an empty window");
  double min_x = points[0].x, max_x = points[0].x, min_y = points[0].y, max_y = points[0].y;
  for (const auto& p : points) {
    min_x = std::min(min_x, p.x);
    max_x = std::max(max_x, p.x);
    min_y = std::min(min_y, p.y);
    max_y = std::max(max_y, p.y);
  }
  return (max_x - min_x) + (max_y - min_y);
}

struct TimedPoint {
  std::int64_t t_ms = 0;
  double x = 0;
  double y = 0;
};

// One I-DT fixation: samples [begin, end) labelled Pinpoint together.
struct Fixation {
  std::size_t begin = 0;
  std::size_t end = 0;
};

// Dispersion-threshold identification over one time-ordered mouse stream.
//
// A window is seeded at sample i with the smallest run i..j spanning at least
// the duration threshold. Low dispersion makes the window a fixation and grows
// it one sample at a time while dispersion stays within the threshold; high
// dispersion leaves sample i outside any fixation and slides on by one.
// Samples after the last seedable window belong to no fixation. A stream too
// short to seed any window is one fixation if its dispersion is low enough.
// Two fixations may be adjacent, so a run of Pinpoint labels can span several.
inline std::vector<Fixation> idt_fixations(std::span<const TimedPoint> samples, const IdtConfig& cfg = {}) {
  cfg.validate();
  const std::size_t n = samples.size();
  std::vector<Fixation> out;
  if (n == 0) return out;

  struct Box {
    double min_x, max_x, min_y, max_y;
    void add(const TimedPoint& p) {
      min_x = std::min(min_x, p.x);
      max_x = std::max(max_x, p.x);
      min_y = std::min(min_y, p.y);
      max_y = std::max(max_y, p.y);
    }
    double extent() const { return (max_x - min_x) + (max_y - min_y); }
  };
  auto box_at = [&](std::size_t i) { return Box{samples[i].x, samples[i].x, samples[i].y, samples[i].y}; };

  if (samples.back().t_ms - samples.front().t_ms < cfg.duration_threshold_ms) {
    Box b = box_at(0);
    for (std::size_t k = 1; k < n; ++k) b.add(samples[k]);
    if (b.extent() <= cfg.dispersion_threshold) out.push_back({0, n});
    return out;
  }

  std::size_t i = 0;
  std::size_t j = 0;
  while (i < n) {
    j = std::max(j, i);
    while (j < n && samples[j].t_ms - samples[i].t_ms < cfg.duration_threshold_ms) ++j;
    if (j == n) break;
    Box b = box_at(i);
    for (std::size_t k = i + 1; k <= j; ++k) b.add(samples[k]);
    if (b.extent() <= cfg.dispersion_threshold) {
      while (j + 1 < n) {
        Box grown = b;
        grown.add(samples[j + 1]);
        if (grown.extent() > cfg.dispersion_threshold) break;
        b = grown;
        ++j;
      }
      out.push_back({i, j + 1});
      i = j + 1;
    } else {
      ++i;
    }
  }
  return out;
}

// Per-sample categories: Pinpoint inside a fixation, Redirection elsewhere.
inline std::vector<MouseCategory> idt_label(std::span<const TimedPoint> samples, const IdtConfig& cfg = {}) {
  std::vector<MouseCategory> labels(samples.size(), MouseCategory::Redirection);
  for (const auto& f : idt_fixations(samples, cfg))
    std::fill(labels.begin() + static_cast<std::ptrdiff_t>(f.begin), labels.begin() + static_cast<std::ptrdiff_t>(f.end),
              MouseCategory::Pinpoint);
  return labels;
}

// Screen quadrant of a normalised point: 0 top-left, 1 top-right, 2 bottom-left,
// 3 bottom-right. The 0.5 boundary belongs to the right/bottom half.
inline int area_of(double x, double y) {
  if (!(x >= 0.0 && x <= 1.0 && y >= 0.0 && y <= 1.0))
    throw std::invalid_argument("area_of expects coordinates in [0,1]");
  return 2 * (y >= 0.5 ? 1 : 0) + (x >= 0.5 ? 1 : 0);
}

namespace detail {

inline MouseAction mouse_action_for(EventKind kind, DatasetProfile profile) {
  switch (kind) {
    case EventKind::MouseMove:
      return MouseAction::Move;
    case EventKind::MouseClick:
      if (profile != DatasetProfile::BuffaloLike) throw ValidationError("MouseClick under EmakiLike profile");
      return MouseAction::Click;
    case EventKind::MouseDown:
    case EventKind::MouseUp:
      if (profile != DatasetProfile::EmakiLike)
        throw ValidationError(std::string(to_string(kind)) + " under BuffaloLike profile");
      return kind == EventKind::MouseDown ? MouseAction::Down : MouseAction::Up;
    default:
      throw ValidationError("not a mouse event");
  }
}

inline void require_normalized(const Trial& trial) {
  if (!trial.normalized) throw ValidationError("trial must be normalised before tokenisation");
}

}  // namespace detail

// Mouse events of a normalised trial as MouseTokens, followed by one EndOfTrial.
inline std::vector<ActionToken> tokenize_mouse(const Trial& trial, DatasetProfile profile, const IdtConfig& cfg = {}) {
  detail::require_normalized(trial);
  std::vector<TimedPoint> samples;
  std::vector<MouseAction> actions;
  for (const RawEvent& e : trial.events) {
    if (!is_mouse_kind(e.kind)) continue;
    if (!e.x || !e.y) throw ValidationError("mouse event without coordinates");
    actions.push_back(detail::mouse_action_for(e.kind, profile));
    samples.push_back({e.timestamp_ms, *e.x, *e.y});
  }
  const auto labels = idt_label(samples, cfg);
  std::vector<ActionToken> out;
  out.reserve(samples.size() + 1);
  for (std::size_t i = 0; i < samples.size(); ++i)
    out.emplace_back(MouseToken{actions[i], labels[i], area_of(samples[i].x, samples[i].y)});
  out.emplace_back(EndOfTrial{});
  return out;
}

inline std::vector<ActionToken> tokenize_keyboard(const Trial& trial) {
  std::vector<ActionToken> out;
  for (const RawEvent& e : trial.events) {
    if (!is_key_kind(e.kind)) continue;
    if (!e.key_value) throw ValidationError("key event without key_value");
    out.emplace_back(KeyToken{e.kind == EventKind::KeyDown ? KeyAction::Down : KeyAction::Up, *e.key_value});
  }
  out.emplace_back(EndOfTrial{});
  return out;
}

// Interleaves per-modality token lists by the timestamps of their source
// events. On equal timestamps the mouse token comes first.
inline std::vector<ActionToken> merge_modalities(std::span<const ActionToken> mouse, std::span<const ActionToken> keyboard,
                                                 const Trial& trial) {
  std::vector<std::int64_t> mouse_t, key_t;
  for (const RawEvent& e : trial.events) (is_mouse_kind(e.kind) ? mouse_t : key_t).push_back(e.timestamp_ms);
  auto strip = [](std::span<const ActionToken> s) {
    if (!s.empty() && is_end_of_trial(s.back())) s = s.first(s.size() - 1);
    return s;
  };
  mouse = strip(mouse);
  keyboard = strip(keyboard);
  if (mouse.size() != mouse_t.size() || keyboard.size() != key_t.size())
    throw InvariantViolation("token lists do not match the trial's events");

  std::vector<ActionToken> out;
  out.reserve(mouse.size() + keyboard.size() + 1);
  std::size_t m = 0, k = 0;
  while (m < mouse.size() || k < keyboard.size()) {
    const bool take_mouse = k == keyboard.size() || (m < mouse.size() && mouse_t[m] <= key_t[k]);
    out.push_back(take_mouse ? mouse[m++] : keyboard[k++]);
  }
  out.emplace_back(EndOfTrial{});
  return out;
}

struct TokenizedTrial {
  std::string participant_id;
  std::string task_id;
  int trial_index = 0;
  std::vector<ActionToken> tokens;  // ends with EndOfTrial
};

inline TokenizedTrial tokenize_trial(const Trial& trial, Modality modality, DatasetProfile profile,
                                     const IdtConfig& cfg = {}) {
  TokenizedTrial out{trial.participant_id, trial.task_id, trial.trial_index, {}};
  switch (modality) {
    case Modality::Mouse:
      out.tokens = tokenize_mouse(trial, profile, cfg);
      break;
    case Modality::Keyboard:
      out.tokens = tokenize_keyboard(trial);
      break;
    case Modality::Joint:
      out.tokens = merge_modalities(tokenize_mouse(trial, profile, cfg), tokenize_keyboard(trial), trial);
      break;
  }
  return out;
}

inline std::vector<TokenizedTrial> tokenize_session(const Session& session, Modality modality,
                                                    const IdtConfig& cfg = {}) {
  std::vector<TokenizedTrial> out;
  out.reserve(session.trials.size());
  for (const Trial& t : session.trials) out.push_back(tokenize_trial(t, modality, session.dataset_profile, cfg));
  return out;
}

struct WindowSample {
  std::vector<ActionToken> tokens;
  std::string participant_id;
  std::string task_id;
  int trial_index = 0;
  Modality modality = Modality::Joint;
};

// Window lengths used for each modality in the original experiments.
inline bool is_reference_window_length(Modality m, int length) {
  switch (m) {
    case Modality::Keyboard:
      return length == 10 || length == 50 || length == 100;
    case Modality::Mouse:
      return length == 20 || length == 100 || length == 200;
    case Modality::Joint:
      return length == 15 || length == 75 || length == 150;
  }
  return false;
}

// Non-overlapping windows of exactly `window_length` tokens; end-of-trial
// markers are removed first and the incomplete tail is dropped.
inline std::vector<WindowSample> segment_windows(const TokenizedTrial& trial, int window_length, Modality modality) {
  if (window_length <= 0) throw std::invalid_argument("window length must be positive");
  std::vector<ActionToken> stream;
  stream.reserve(trial.tokens.size());
  for (const auto& t : trial.tokens)
    if (!is_end_of_trial(t)) stream.push_back(t);
  std::vector<WindowSample> out;
  const auto L = static_cast<std::size_t>(window_length);
  for (std::size_t start = 0; start + L <= stream.size(); start += L) {
    WindowSample w;
    w.tokens.assign(stream.begin() + static_cast<std::ptrdiff_t>(start),
                    stream.begin() + static_cast<std::ptrdiff_t>(start + L));
    w.participant_id = trial.participant_id;
    w.task_id = trial.task_id;
    w.trial_index = trial.trial_index;
    w.modality = modality;
    out.push_back(std::move(w));
  }
  return out;
}

inline std::vector<WindowSample> segment_windows(std::span<const TokenizedTrial> trials, int window_length,
                                                 Modality modality) {
  std::vector<WindowSample> out;
  for (const auto& t : trials) {
    auto w = segment_windows(t, window_length, modality);
    out.insert(out.end(), std::make_move_iterator(w.begin()), std::make_move_iterator(w.end()));
  }
  return out;
}

inline std::string tokens_to_line(std::span<const ActionToken> tokens) {
  std::string out;
  for (std::size_t i = 0; i < tokens.size(); ++i) {
    if (i) out += ' ';
    out += to_text(tokens[i]);
  }
  return out;
}

inline std::vector<ActionToken> tokens_from_line(std::string_view line) {
  std::vector<ActionToken> out;
  std::istringstream in{std::string(line)};
  std::string word;
  while (in >> word) out.push_back(token_from_text(word));
  return out;
}

}  // namespace actlang
