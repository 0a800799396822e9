#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <random>
#include <string>
#include <utility>
#include <vector>

#include "json.hpp"

#include "actlang/errors.hpp"
#include "actlang/events.hpp"
#include "actlang/tokenizer.hpp"

namespace actlang::synth {

struct PlantedMotif {
  std::vector<std::string> tokens;  // atomic token text forms
  double rate = 0;                  // expected injections per window
};

struct TaskProfile {
  std::string task_id;
  std::vector<std::pair<std::string, double>> key_distribution;
  std::array<double, 4> mouse_area_bias{0.25, 0.25, 0.25, 0.25};
  double pinpoint_ratio = 0.5;    // share of mouse segments that are pinpoint bursts
  double keyboard_share = 0.5;    // share of segments that are key presses
  double click_probability = 0.3; // chance a pinpoint burst contains a click
  std::vector<PlantedMotif> planted_motifs;
};

struct SynthConfig {
  int participants = 12;
  int trials_per_task = 3;
  int events_per_trial = 900;
  int window_length = 150;  // window size the motif rates refer to
  std::vector<TaskProfile> profiles;
  DatasetProfile dataset_profile = DatasetProfile::EmakiLike;
  double participant_variation = 0.15;
  std::uint64_t seed = 0;

  void validate() const {
    if (participants < 1 || trials_per_task < 1 || events_per_trial < 1 || window_length < 1)
      throw ConfigError("synth counts must be >= 1");
    if (profiles.empty()) throw ConfigError("synth needs at least one task profile");
    if (!(participant_variation >= 0 && participant_variation <= 1))
      throw ConfigError("participant_variation must lie in [0,1]");
    for (const auto& p : profiles) {
      auto sum_to_one = [&](double s, const char* what) {
        if (std::abs(s - 1.0) > 1e-6) throw ConfigError(p.task_id + ": " + what + " must sum to 1");
      };
      double ks = 0;
      for (const auto& [k, w] : p.key_distribution) {
        if (w < 0) throw ConfigError(p.task_id + ": negative key probability");
        ks += w;
      }
      if (!p.key_distribution.empty()) sum_to_one(ks, "key_distribution");
      double as = 0;
      for (double w : p.mouse_area_bias) {
        if (w < 0) throw ConfigError(p.task_id + ": negative area probability");
        as += w;
      }
      sum_to_one(as, "mouse_area_bias");
      for (double r : {p.pinpoint_ratio, p.keyboard_share, p.click_probability})
        if (!(r >= 0 && r <= 1)) throw ConfigError(p.task_id + ": ratios must lie in [0,1]");
      if (p.key_distribution.empty() && p.keyboard_share > 0)
        throw ConfigError(p.task_id + ": keyboard_share > 0 needs a key distribution");
      for (const auto& m : p.planted_motifs) {
        if (m.rate < 0) throw ConfigError(p.task_id + ": negative motif rate");
        if (m.tokens.empty()) throw ConfigError(p.task_id + ": empty motif");
        for (const auto& t : m.tokens) {
          ActionToken tok;
          try {
            tok = token_from_text(t);
          } catch (const std::invalid_argument& e) {
            throw ConfigError(p.task_id + ": " + e.what());
          }
          if (is_end_of_trial(tok)) throw ConfigError(p.task_id + ": motif contains the end-of-trial marker");
          if (const auto* mt = std::get_if<MouseToken>(&tok)) {
            const auto allowed = mouse_actions(dataset_profile);
            if (std::find(allowed.begin(), allowed.end(), mt->action) == allowed.end())
              throw ConfigError(p.task_id + ": motif token " + t + " does not exist under " +
                                std::string(to_string(dataset_profile)));
          }
        }
      }
    }
  }
};

struct GroundTruth {
  std::string participant_id;
  std::string task_id;
  int trial_index = 0;
  std::vector<std::pair<std::string, int>> motifs;  // motif text, injections
};

struct SynthOutput {
  Session session;
  std::vector<GroundTruth> truth;
};

namespace detail {

inline constexpr double kQuadrantMargin = 0.02;
inline constexpr double kJitterSigma = 0.005;
inline constexpr double kJitterClip = 0.0125;   // per axis, so burst dispersion <= 0.05
inline constexpr double kJumpL1 = 0.3;
inline constexpr double kBurstClearance = 0.35;

struct Screen {
  int w, h;
};

inline double l1(const Point2& a, const Point2& b) { return std::abs(a.x - b.x) + std::abs(a.y - b.y); }

class TrialWriter {
 public:
  TrialWriter(Trial& trial, std::mt19937_64& rng, DatasetProfile profile) : trial_(trial), rng_(rng), profile_(profile) {}

  std::size_t events() const { return trial_.events.size(); }

  void key(KeyAction action, const std::string& key) {
    advance();
    RawEvent e;
    e.timestamp_ms = t_;
    e.kind = action == KeyAction::Down ? EventKind::KeyDown : EventKind::KeyUp;
    e.key_value = key;
    trial_.events.push_back(std::move(e));
  }

  void press(const std::string& k) {
    key(KeyAction::Down, k);
    key(KeyAction::Up, k);
  }

  // A stationary burst spanning at least 100 ms; optionally with a click.
  void burst(int area, bool with_click) {
    const Point2 c = burst_center(area);
    std::uniform_int_distribution<int> dur(100, 300);
    const auto start_span = dur(rng_);
    std::int64_t first = -1;
    int n = 0;
    while (first < 0 || t_ - first < start_span || n < 2) {
      advance();
      if (first < 0) first = t_;
      mouse(EventKind::MouseMove, jitter(c));
      ++n;
    }
    if (with_click) {
      if (profile_ == DatasetProfile::BuffaloLike) {
        advance();
        mouse(EventKind::MouseClick, jitter(c));
      } else {
        advance();
        mouse(EventKind::MouseDown, jitter(c));
        advance();
        mouse(EventKind::MouseUp, jitter(c));
      }
    }
    last_ = c;
  }

  void redirection(int area) {
    advance();
    const Point2 p = far_point(area, kJumpL1);
    mouse(EventKind::MouseMove, p);
    last_ = p;
    have_last_ = true;
  }

  // Emits a motif so that tokenisation reproduces it verbatim.
  void motif(const std::vector<ActionToken>& tokens) {
    std::size_t i = 0;
    while (i < tokens.size()) {
      if (const auto* k = std::get_if<KeyToken>(&tokens[i])) {
        key(k->action, k->key);
        ++i;
        continue;
      }
      const auto& m = std::get<MouseToken>(tokens[i]);
      if (m.category == MouseCategory::Redirection) {
        advance();
        const Point2 p = far_point(m.area, kJumpL1);
        mouse(kind_of(m.action), p);
        last_ = p;
        have_last_ = true;
        ++i;
        continue;
      }
      std::size_t j = i;
      while (j < tokens.size()) {
        const auto* n = std::get_if<MouseToken>(&tokens[j]);
        if (!n || n->category != MouseCategory::Pinpoint || n->area != m.area) break;
        ++j;
      }
      const auto run = j - i;
      const Point2 c = burst_center(m.area);
      const bool at_start = i == 0;
      const bool at_end = j == tokens.size();
      if (run == 1 && !at_start && !at_end)
        throw ConfigError("a single pinpoint token inside a motif cannot span the duration threshold");
      if (run == 1 && at_start) pad(c, 100);
      std::uniform_int_distribution<int> gap(10, 30);
      const int min_gap = run > 1 ? static_cast<int>(std::ceil(100.0 / static_cast<double>(run - 1))) : 10;
      for (std::size_t k = i; k < j; ++k) {
        if (k > i) t_ += std::max(gap(rng_), min_gap);
        else advance();
        mouse(kind_of(std::get<MouseToken>(tokens[k]).action), jitter(c));
      }
      last_ = c;
      have_last_ = true;
      if (run == 1 && at_end && !at_start) pad(c, 100);
      i = j;
    }
  }

 private:
  void advance() {
    std::uniform_int_distribution<int> gap(10, 30);
    t_ += gap(rng_);
  }

  // Stationary moves at `c` spanning at least `span_ms`.
  void pad(const Point2& c, int span_ms) {
    advance();
    const auto first = t_;
    mouse(EventKind::MouseMove, jitter(c));
    while (t_ - first < span_ms) {
      advance();
      mouse(EventKind::MouseMove, jitter(c));
    }
    last_ = c;
    have_last_ = true;
  }

  static EventKind kind_of(MouseAction a) {
    switch (a) {
      case MouseAction::Move:
        return EventKind::MouseMove;
      case MouseAction::Click:
        return EventKind::MouseClick;
      case MouseAction::Down:
        return EventKind::MouseDown;
      case MouseAction::Up:
        return EventKind::MouseUp;
    }
    return EventKind::MouseMove;
  }

  Point2 uniform_in(int area) {
    const double x0 = (area % 2) * 0.5 + kQuadrantMargin;
    const double y0 = (area / 2) * 0.5 + kQuadrantMargin;
    std::uniform_real_distribution<double> u(0.0, 0.5 - 2 * kQuadrantMargin);
    return {x0 + u(rng_), y0 + u(rng_)};
  }

  // A point of `area` at least `min_l1` from the previous mouse position.
  Point2 far_point(int area, double min_l1) {
    Point2 p = uniform_in(area);
    if (!have_last_) return p;
    for (int attempt = 0; attempt < 64 && l1(p, last_) < min_l1; ++attempt) p = uniform_in(area);
    if (l1(p, last_) >= min_l1) return p;
    const double x0 = (area % 2) * 0.5 + kQuadrantMargin, x1 = (area % 2) * 0.5 + 0.5 - kQuadrantMargin;
    const double y0 = (area / 2) * 0.5 + kQuadrantMargin, y1 = (area / 2) * 0.5 + 0.5 - kQuadrantMargin;
    Point2 best{x0, y0};
    for (const Point2 q : {Point2{x0, y0}, Point2{x1, y0}, Point2{x0, y1}, Point2{x1, y1}})
      if (l1(q, last_) > l1(best, last_)) best = q;
    return best;
  }

  Point2 burst_center(int area) {
    const double margin = kQuadrantMargin + kJitterClip;
    // Clear of the previous position, so I-DT cannot fuse this burst with
    // the tail of the last one.
    Point2 c = far_point(area, kBurstClearance);
    const double x0 = (area % 2) * 0.5, y0 = (area / 2) * 0.5;
    c.x = std::clamp(c.x, x0 + margin, x0 + 0.5 - margin);
    c.y = std::clamp(c.y, y0 + margin, y0 + 0.5 - margin);
    have_last_ = true;
    return c;
  }

  Point2 jitter(const Point2& c) {
    std::normal_distribution<double> n(0.0, kJitterSigma);
    auto j = [&] { return std::clamp(n(rng_), -kJitterClip, kJitterClip); };
    return {c.x + j(), c.y + j()};
  }

  void mouse(EventKind kind, const Point2& p) {
    RawEvent e;
    e.timestamp_ms = t_;
    e.kind = kind;
    e.x = std::round(std::clamp(p.x, 0.0, 1.0) * trial_.screen_w);
    e.y = std::round(std::clamp(p.y, 0.0, 1.0) * trial_.screen_h);
    trial_.events.push_back(std::move(e));
  }

  Trial& trial_;
  std::mt19937_64& rng_;
  DatasetProfile profile_;
  std::int64_t t_ = 0;
  Point2 last_{};
  bool have_last_ = false;
};

// Profile perturbed towards a random distribution by `v`, per participant.
inline TaskProfile personalise(const TaskProfile& p, double v, std::mt19937_64& rng) {
  TaskProfile out = p;
  std::uniform_real_distribution<double> u(0.0, 1.0);
  auto mix = [&](auto& weights, auto get) {
    std::vector<double> r(weights.size());
    for (auto& x : r) x = u(rng);
    const double s = std::accumulate(r.begin(), r.end(), 0.0);
    for (std::size_t i = 0; i < weights.size(); ++i) {
      auto& w = get(weights[i]);
      if (w > 0) w = (1 - v) * w + v * r[i] / s;
    }
    double total = 0;
    for (auto& w : weights) total += get(w);
    for (auto& w : weights) get(w) /= total;
  };
  mix(out.key_distribution, [](auto& kv) -> double& { return kv.second; });
  mix(out.mouse_area_bias, [](double& w) -> double& { return w; });
  std::uniform_real_distribution<double> shift(-v / 2, v / 2);
  if (p.pinpoint_ratio > 0 && p.pinpoint_ratio < 1) out.pinpoint_ratio = std::clamp(p.pinpoint_ratio + shift(rng), 0.0, 1.0);
  if (p.keyboard_share > 0 && p.keyboard_share < 1) out.keyboard_share = std::clamp(p.keyboard_share + shift(rng), 0.0, 1.0);
  return out;
}

}  // namespace detail

inline void to_json(nlohmann::json& j, const PlantedMotif& m) { j = {{"tokens", m.tokens}, {"rate", m.rate}}; }

inline void from_json(const nlohmann::json& j, PlantedMotif& m) {
  m.tokens = j.at("tokens").get<std::vector<std::string>>();
  m.rate = j.at("rate").get<double>();
}

// key_distribution is a list of [key, weight] pairs so order survives.
inline void to_json(nlohmann::json& j, const TaskProfile& p) {
  j = {{"task_id", p.task_id},
       {"key_distribution", p.key_distribution},
       {"mouse_area_bias", p.mouse_area_bias},
       {"pinpoint_ratio", p.pinpoint_ratio},
       {"keyboard_share", p.keyboard_share},
       {"click_probability", p.click_probability},
       {"planted_motifs", p.planted_motifs}};
}

inline void from_json(const nlohmann::json& j, TaskProfile& p) {
  TaskProfile d;
  p.task_id = j.at("task_id").get<std::string>();
  p.key_distribution = j.value("key_distribution", d.key_distribution);
  p.mouse_area_bias = j.value("mouse_area_bias", d.mouse_area_bias);
  p.pinpoint_ratio = j.value("pinpoint_ratio", d.pinpoint_ratio);
  p.keyboard_share = j.value("keyboard_share", d.keyboard_share);
  p.click_probability = j.value("click_probability", d.click_probability);
  p.planted_motifs = j.value("planted_motifs", d.planted_motifs);
}

inline std::string motif_text(const PlantedMotif& m) {
  std::string out;
  for (const auto& t : m.tokens) out += (out.empty() ? "" : " ") + t;
  return out;
}

// Deterministic synthetic session. Each trial is built window by window: per
// window, floor(rate) + Bernoulli(frac(rate)) copies of each motif are placed at
// random segment boundaries among background segments drawn from the profile.
inline SynthOutput generate(const SynthConfig& cfg) {
  cfg.validate();
  static constexpr std::array<detail::Screen, 3> kScreens{{{1920, 1080}, {1366, 768}, {2560, 1440}}};
  SynthOutput out;
  out.session.dataset_profile = cfg.dataset_profile;
  const int width = std::max(2, static_cast<int>(std::to_string(cfg.participants).size()));
  for (int p = 0; p < cfg.participants; ++p) {
    std::seed_seq seq{static_cast<std::uint32_t>(cfg.seed), static_cast<std::uint32_t>(cfg.seed >> 32),
                      static_cast<std::uint32_t>(p)};
    std::mt19937_64 rng(seq);
    std::string pid = std::to_string(p + 1);
    pid = "P" + std::string(static_cast<std::size_t>(width) - std::min<std::size_t>(pid.size(), width), '0') + pid;
    const auto screen = kScreens[static_cast<std::size_t>(p) % kScreens.size()];
    std::vector<TaskProfile> personal;
    for (const auto& prof : cfg.profiles) personal.push_back(detail::personalise(prof, cfg.participant_variation, rng));

    for (const auto& prof : personal) {
      std::vector<std::vector<ActionToken>> motifs;
      for (const auto& m : prof.planted_motifs) {
        std::vector<ActionToken> toks;
        for (const auto& t : m.tokens) toks.push_back(token_from_text(t));
        motifs.push_back(std::move(toks));
      }
      std::vector<std::string> keys;
      std::vector<double> key_w;
      for (const auto& [k, w] : prof.key_distribution) {
        keys.push_back(k);
        key_w.push_back(w);
      }
      std::discrete_distribution<int> key_dist(key_w.begin(), key_w.end());
      std::discrete_distribution<int> area_dist(prof.mouse_area_bias.begin(), prof.mouse_area_bias.end());
      std::uniform_real_distribution<double> u(0.0, 1.0);

      for (int trial_index = 0; trial_index < cfg.trials_per_task; ++trial_index) {
        Trial trial;
        trial.participant_id = pid;
        trial.task_id = prof.task_id;
        trial.trial_index = trial_index;
        trial.screen_w = screen.w;
        trial.screen_h = screen.h;
        GroundTruth truth{pid, prof.task_id, trial_index, {}};
        std::vector<int> injected(motifs.size(), 0);
        detail::TrialWriter writer(trial, rng, cfg.dataset_profile);

        auto background = [&] {
          if (u(rng) < prof.keyboard_share) {
            writer.press(keys[static_cast<std::size_t>(key_dist(rng))]);
          } else if (u(rng) < prof.pinpoint_ratio) {
            writer.burst(area_dist(rng), u(rng) < prof.click_probability);
          } else {
            const int hops = 1 + static_cast<int>(u(rng) * 3);
            for (int h = 0; h < hops; ++h) writer.redirection(area_dist(rng));
          }
        };

        while (writer.events() < static_cast<std::size_t>(cfg.events_per_trial)) {
          const std::size_t chunk_end = writer.events() + static_cast<std::size_t>(cfg.window_length);
          // Motifs scheduled for this chunk, as insertion points in [0, 1).
          std::vector<std::pair<double, std::size_t>> schedule;
          for (std::size_t m = 0; m < motifs.size(); ++m) {
            const double rate = prof.planted_motifs[m].rate;
            int copies = static_cast<int>(std::floor(rate));
            if (u(rng) < rate - std::floor(rate)) ++copies;
            for (int c = 0; c < copies; ++c) schedule.emplace_back(u(rng), m);
          }
          std::sort(schedule.begin(), schedule.end());
          const std::size_t chunk_start = writer.events();
          std::size_t next = 0;
          while (writer.events() < chunk_end) {
            const double progress = static_cast<double>(writer.events() - chunk_start) /
                                    static_cast<double>(cfg.window_length);
            while (next < schedule.size() && schedule[next].first <= progress) {
              writer.motif(motifs[schedule[next].second]);
              ++injected[schedule[next].second];
              ++next;
            }
            if (writer.events() >= chunk_end) break;
            background();
          }
          for (; next < schedule.size(); ++next) {
            writer.motif(motifs[schedule[next].second]);
            ++injected[schedule[next].second];
          }
        }
        for (std::size_t m = 0; m < motifs.size(); ++m)
          truth.motifs.emplace_back(motif_text(prof.planted_motifs[m]), injected[m]);
        out.session.trials.push_back(std::move(trial));
        out.truth.push_back(std::move(truth));
      }
    }
  }
  std::sort(out.session.trials.begin(), out.session.trials.end(), [](const Trial& a, const Trial& b) {
    return std::tie(a.participant_id, a.task_id, a.trial_index) < std::tie(b.participant_id, b.task_id, b.trial_index);
  });
  return out;
}

inline void write_ground_truth(const std::vector<GroundTruth>& truth, std::ostream& out) {
  for (const auto& g : truth) {
    nlohmann::ordered_json j;
    j["participant"] = g.participant_id;
    j["task"] = g.task_id;
    j["trial"] = g.trial_index;
    auto motifs = nlohmann::ordered_json::array();
    for (const auto& [text, n] : g.motifs) motifs.push_back({{"motif", text}, {"injected", n}});
    j["planted_motifs"] = std::move(motifs);
    out << j.dump() << '\n';
  }
}

// Task profiles used by the CLI and the end-to-end tests: distinct key sets,
// screen-area preferences and pinpoint ratios, each with one planted motif.
inline std::vector<TaskProfile> reference_profiles(DatasetProfile profile, int tasks = 3) {
  (void)profile;
  std::vector<TaskProfile> all;
  {
    TaskProfile p;
    p.task_id = "text";
    p.key_distribution = {{"e", 0.16}, {"t", 0.12}, {"a", 0.11}, {"o", 0.1}, {"n", 0.09}, {"i", 0.09},
                          {"s", 0.08}, {"Space", 0.15}, {"Backspace", 0.05}, {"Shift", 0.05}};
    p.mouse_area_bias = {0.55, 0.25, 0.1, 0.1};
    p.pinpoint_ratio = 0.6;
    p.keyboard_share = 0.75;
    p.click_probability = 0.2;
    p.planted_motifs = {{{"KeyDown_Shift", "KeyDown_t", "KeyUp_t", "KeyUp_Shift"}, 1.0}};
    all.push_back(std::move(p));
  }
  {
    TaskProfile p;
    p.task_id = "image";
    p.key_distribution = {{"Ctrl", 0.3}, {"z", 0.2}, {"s", 0.15}, {"c", 0.15}, {"v", 0.2}};
    p.mouse_area_bias = {0.1, 0.2, 0.2, 0.5};
    p.pinpoint_ratio = 0.8;
    p.keyboard_share = 0.2;
    p.click_probability = 0.6;
    p.planted_motifs = {{{"KeyDown_Ctrl", "KeyDown_s", "KeyUp_s", "KeyUp_Ctrl"}, 1.0}};
    all.push_back(std::move(p));
  }
  {
    TaskProfile p;
    p.task_id = "form";
    p.key_distribution = {{"Tab", 0.3}, {"1", 0.15}, {"2", 0.15}, {"3", 0.15}, {"Enter", 0.25}};
    p.mouse_area_bias = {0.2, 0.5, 0.2, 0.1};
    p.pinpoint_ratio = 0.4;
    p.keyboard_share = 0.4;
    p.click_probability = 0.4;
    p.planted_motifs = {{{"KeyDown_Tab", "KeyUp_Tab", "KeyDown_Enter", "KeyUp_Enter"}, 1.0}};
    all.push_back(std::move(p));
  }
  if (tasks < 1 || tasks > static_cast<int>(all.size())) throw ConfigError("reference profiles support 1-3 tasks");
  all.resize(static_cast<std::size_t>(tasks));
  return all;
}

}  // namespace actlang::synth
