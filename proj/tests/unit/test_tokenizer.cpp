#include "actlang/tokenizer.hpp"

#include <gtest/gtest.h>

#include <algorithm>
#include <random>
#include <string>
#include <vector>

namespace
{
using actlang::ActionToken;
using actlang::DatasetProfile;
using actlang::EventKind;
using actlang::KeyAction;
using actlang::KeyToken;
using actlang::Modality;
using actlang::MouseAction;
using actlang::MouseCategory;
using actlang::MouseToken;
using actlang::RawEvent;
using actlang::TimedPoint;
using actlang::Trial;
using P = MouseCategory;

RawEvent mouse(std::int64_t t, double x, double y, EventKind k = EventKind::MouseMove)
{
  RawEvent e;
  e.timestamp_ms = t;
  e.kind = k;
  e.x = x;
  e.y = y;
  return e;
}

RawEvent key(std::int64_t t, const std::string & k, bool down)
{
  RawEvent e;
  e.timestamp_ms = t;
  e.kind = down ? EventKind::KeyDown : EventKind::KeyUp;
  e.key_value = k;
  return e;
}

Trial normalised(std::vector<RawEvent> events)
{
  Trial t;
  t.participant_id = "p";
  t.task_id = "task";
  t.screen_w = 1;
  t.screen_h = 1;
  t.normalized = true;
  t.events = std::move(events);
  return t;
}

std::vector<std::string> texts(const std::vector<ActionToken> & tokens)
{
  std::vector<std::string> out;
  for (const auto & t : tokens) out.push_back(actlang::to_text(t));
  return out;
}

// Stationary burst, one sample midway along a 0.5 jump, stationary burst.
std::vector<TimedPoint> three_phase()
{
  std::vector<TimedPoint> s;
  for (int i = 0; i <= 12; ++i) s.push_back({i * 10, 0.2, 0.2});
  s.push_back({130, 0.45, 0.2});
  for (int i = 0; i <= 12; ++i) s.push_back({140 + i * 10, 0.7, 0.2});
  return s;
}
}  // namespace

TEST(tokenizer, dispersion_examples)
{
  const std::vector<actlang::Point2> one{{0.3, 0.4}};
  EXPECT_DOUBLE_EQ(actlang::dispersion(one), 0.0);
  const std::vector<actlang::Point2> box{{0.1, 0.2}, {0.15, 0.22}, {0.12, 0.21}};
  EXPECT_NEAR(actlang::dispersion(box), 0.07, 1e-12);
  const std::vector<actlang::Point2> corners{{0, 0}, {1, 1}};
  EXPECT_DOUBLE_EQ(actlang::dispersion(corners), 2.0);
  EXPECT_THROW(actlang::dispersion({}), std::invalid_argument);
}

TEST(tokenizer, idt_fixed_point_is_pinpoint)
{
  std::vector<TimedPoint> s;
  for (int i = 0; i < 10; ++i) s.push_back({i * 150 / 9, 0.4, 0.4});
  for (auto c : actlang::idt_label(s)) EXPECT_EQ(c, P::Pinpoint);
}

TEST(tokenizer, idt_sweep_is_redirection)
{
  std::vector<TimedPoint> s;
  for (int i = 0; i <= 15; ++i) s.push_back({i * 10, i / 15.0, 0.5});
  for (auto c : actlang::idt_label(s)) EXPECT_EQ(c, P::Redirection);
}

TEST(tokenizer, idt_three_phase_hand_trace)
{
  const auto labels = actlang::idt_label(three_phase());
  std::vector<MouseCategory> expected(13, P::Pinpoint);
  expected.push_back(P::Redirection);
  expected.insert(expected.end(), 13, P::Pinpoint);
  EXPECT_EQ(labels, expected);

  const auto fix = actlang::idt_fixations(three_phase());
  ASSERT_EQ(fix.size(), 2u);
  EXPECT_EQ(fix[0].begin, 0u);
  EXPECT_EQ(fix[0].end, 13u);
  EXPECT_EQ(fix[1].begin, 14u);
  EXPECT_EQ(fix[1].end, 27u);
}

TEST(tokenizer, idt_empty_and_thresholds)
{
  EXPECT_TRUE(actlang::idt_label({}).empty());
  EXPECT_THROW(actlang::idt_label({}, {0, 0.1}), std::invalid_argument);
  EXPECT_THROW(actlang::idt_label({}, {100, 0.0}), std::invalid_argument);
}

TEST(tokenizer, idt_samples_after_last_window_are_redirection)
{
  // Sweep first, then a stationary tail too short to seed its own window.
  std::vector<TimedPoint> s;
  for (int i = 0; i < 20; ++i) s.push_back({i * 10, i * 0.05, 0.1});
  s.push_back({200, 0.95, 0.1});
  s.push_back({210, 0.95, 0.1});
  const auto labels = actlang::idt_label(s);
  EXPECT_EQ(labels.back(), P::Redirection);
  EXPECT_EQ(labels[labels.size() - 2], P::Redirection);
}

TEST(tokenizer, property_fixations_respect_both_thresholds)
{
  std::mt19937_64 rng(7);
  std::uniform_int_distribution<int> gap(1, 40), len(1, 80);
  std::uniform_real_distribution<double> u(0, 1), small(-0.03, 0.03);
  const actlang::IdtConfig cfg;
  for (int rep = 0; rep < 300; ++rep) {
    std::vector<TimedPoint> s;
    std::int64_t t = 0;
    double x = u(rng), y = u(rng);
    const int n = len(rng);
    for (int i = 0; i < n; ++i) {
      t += gap(rng);
      if (u(rng) < 0.2) {
        x = u(rng);
        y = u(rng);
      }
      s.push_back({t, std::clamp(x + small(rng), 0.0, 1.0), std::clamp(y + small(rng), 0.0, 1.0)});
    }
    const auto labels = actlang::idt_label(s, cfg);
    ASSERT_EQ(labels.size(), s.size());
    std::vector<int> covered(s.size(), 0);
    for (const auto & f : actlang::idt_fixations(s, cfg)) {
      ASSERT_LT(f.begin, f.end);
      std::vector<actlang::Point2> pts;
      for (auto k = f.begin; k < f.end; ++k) {
        pts.push_back({s[k].x, s[k].y});
        ++covered[k];
      }
      EXPECT_LE(actlang::dispersion(pts), cfg.dispersion_threshold);
      if (s.back().t_ms - s.front().t_ms >= cfg.duration_threshold_ms) {
        EXPECT_GE(s[f.end - 1].t_ms - s[f.begin].t_ms, cfg.duration_threshold_ms);
      }
    }
    for (std::size_t k = 0; k < s.size(); ++k) {
      EXPECT_LE(covered[k], 1);
      EXPECT_EQ(labels[k] == P::Pinpoint, covered[k] == 1);
    }
  }
}

TEST(tokenizer, area_quadrants)
{
  EXPECT_EQ(actlang::area_of(0.2, 0.1), 0);
  EXPECT_EQ(actlang::area_of(0.9, 0.1), 1);
  EXPECT_EQ(actlang::area_of(0.1, 0.9), 2);
  EXPECT_EQ(actlang::area_of(0.9, 0.9), 3);
  EXPECT_EQ(actlang::area_of(0.5, 0.5), 3);
  EXPECT_THROW(actlang::area_of(1.1, 0.0), std::invalid_argument);
  EXPECT_THROW(actlang::area_of(0.0, -0.1), std::invalid_argument);
}

TEST(tokenizer, token_text_round_trip)
{
  for (const std::string s :
       {"KeyDown_a", "KeyUp_Shift", "Move_Redirection_Area0", "Click_Pinpoint_Area3", "<EOT>",
        "Down_Pinpoint_Area2", "Up_Redirection_Area1", "KeyDown__"}) {
    EXPECT_EQ(actlang::to_text(actlang::token_from_text(s)), s);
  }
  EXPECT_THROW(actlang::token_from_text("Move_Pinpoint_Area4"), std::invalid_argument);
  EXPECT_THROW(actlang::token_from_text("Hover_Pinpoint_Area0"), std::invalid_argument);
  EXPECT_THROW(actlang::token_from_text("KeyDown_"), std::invalid_argument);
}

TEST(tokenizer, single_click_under_buffalo)
{
  const auto t = normalised({mouse(0, 0.1, 0.1, EventKind::MouseClick)});
  EXPECT_EQ(
    texts(actlang::tokenize_mouse(t, DatasetProfile::BuffaloLike)),
    (std::vector<std::string>{"Click_Pinpoint_Area0", "<EOT>"}));
}

TEST(tokenizer, empty_mouse_trial_is_only_end_marker)
{
  EXPECT_EQ(
    texts(actlang::tokenize_mouse(normalised({}), DatasetProfile::EmakiLike)),
    (std::vector<std::string>{"<EOT>"}));
}

TEST(tokenizer, mouse_requires_normalised_trial_and_matching_profile)
{
  auto t = normalised({mouse(0, 0.1, 0.1, EventKind::MouseDown)});
  EXPECT_THROW(actlang::tokenize_mouse(t, DatasetProfile::BuffaloLike), actlang::ValidationError);
  t.normalized = false;
  EXPECT_THROW(actlang::tokenize_mouse(t, DatasetProfile::EmakiLike), actlang::ValidationError);
}

TEST(tokenizer, keyboard_tokens)
{
  const auto t = normalised({key(0, "a", true), key(40, "a", false)});
  EXPECT_EQ(
    texts(actlang::tokenize_keyboard(t)),
    (std::vector<std::string>{"KeyDown_a", "KeyUp_a", "<EOT>"}));
}

TEST(tokenizer, alphabet_sizes)
{
  using actlang::Alphabet;
  EXPECT_EQ(Alphabet::build(DatasetProfile::EmakiLike, Modality::Mouse, {}).atomic_size(), 24u);
  EXPECT_EQ(Alphabet::build(DatasetProfile::EmakiLike, Modality::Mouse, {}).size(), 25u);
  EXPECT_EQ(Alphabet::build(DatasetProfile::BuffaloLike, Modality::Mouse, {}).atomic_size(), 16u);
  const std::vector<std::string> three{"a", "b", "Shift"};
  EXPECT_EQ(Alphabet::build(DatasetProfile::EmakiLike, Modality::Keyboard, three).atomic_size(), 6u);
  std::vector<std::string> many;
  for (int i = 0; i < 91; ++i) many.push_back("k" + std::to_string(i));
  EXPECT_EQ(Alphabet::build(DatasetProfile::BuffaloLike, Modality::Keyboard, many).atomic_size(), 182u);
  EXPECT_EQ(
    Alphabet::build(DatasetProfile::BuffaloLike, Modality::Joint, three).atomic_size(), 16u + 6u);
}

TEST(tokenizer, alphabet_starts_with_end_marker)
{
  const auto a = actlang::Alphabet::build(DatasetProfile::EmakiLike, Modality::Joint, {});
  EXPECT_EQ(a.text(0), "<EOT>");
  EXPECT_EQ(a.id_of(actlang::EndOfTrial{}), 0);
  EXPECT_THROW(a.id_of(KeyToken{KeyAction::Down, "z"}), actlang::EncodingError);
  const std::vector<std::string> bad{"KeyDown_a"};
  EXPECT_THROW(actlang::Alphabet{bad}, std::invalid_argument);
}

TEST(tokenizer, merge_keyboard_only_is_unchanged)
{
  const auto t = normalised({key(0, "a", true), key(5, "a", false)});
  const auto kb = actlang::tokenize_keyboard(t);
  const auto mouse_tokens = actlang::tokenize_mouse(t, DatasetProfile::EmakiLike);
  EXPECT_EQ(actlang::merge_modalities(mouse_tokens, kb, t), kb);
}

TEST(tokenizer, merge_orders_by_timestamp_with_mouse_first_on_ties)
{
  const auto t = normalised({key(3, "a", true), mouse(5, 0.1, 0.1), key(5, "a", false)});
  const auto merged = actlang::merge_modalities(
    actlang::tokenize_mouse(t, DatasetProfile::EmakiLike), actlang::tokenize_keyboard(t), t);
  EXPECT_EQ(
    texts(merged),
    (std::vector<std::string>{"KeyDown_a", "Move_Pinpoint_Area0", "KeyUp_a", "<EOT>"}));
}

TEST(tokenizer, merge_detects_length_mismatch)
{
  const auto t = normalised({key(3, "a", true)});
  const std::vector<ActionToken> none{actlang::EndOfTrial{}};
  EXPECT_THROW(actlang::merge_modalities(none, none, t), actlang::InvariantViolation);
}

TEST(tokenizer, token_count_matches_event_count)
{
  const auto t = normalised(
    {mouse(0, 0.1, 0.1), key(1, "x", true), mouse(2, 0.9, 0.9, EventKind::MouseDown),
     key(3, "x", false), mouse(4, 0.9, 0.9, EventKind::MouseUp)});
  EXPECT_EQ(actlang::tokenize_mouse(t, DatasetProfile::EmakiLike).size(), 3u + 1);
  EXPECT_EQ(actlang::tokenize_keyboard(t).size(), 2u + 1);
  EXPECT_EQ(actlang::tokenize_trial(t, Modality::Joint, DatasetProfile::EmakiLike).tokens.size(), 5u + 1);
}

TEST(tokenizer, window_counts)
{
  auto make = [](std::size_t n) {
    actlang::TokenizedTrial t;
    t.participant_id = "p";
    t.task_id = "x";
    for (std::size_t i = 0; i < n; ++i) t.tokens.emplace_back(KeyToken{KeyAction::Down, "a"});
    t.tokens.emplace_back(actlang::EndOfTrial{});
    return t;
  };
  EXPECT_EQ(actlang::segment_windows(make(250), 100, Modality::Keyboard).size(), 2u);
  EXPECT_EQ(actlang::segment_windows(make(100), 100, Modality::Keyboard).size(), 1u);
  EXPECT_EQ(actlang::segment_windows(make(99), 100, Modality::Keyboard).size(), 0u);
  EXPECT_THROW(actlang::segment_windows(make(5), 0, Modality::Keyboard), std::invalid_argument);
}

TEST(tokenizer, property_windows_are_a_prefix_without_end_markers)
{
  std::mt19937_64 rng(3);
  std::uniform_int_distribution<int> len(0, 300), wl(1, 60), k(0, 9);
  for (int rep = 0; rep < 200; ++rep) {
    actlang::TokenizedTrial t;
    const int n = len(rng);
    std::vector<ActionToken> stream;
    for (int i = 0; i < n; ++i) {
      ActionToken tok = KeyToken{KeyAction::Down, std::string(1, static_cast<char>('a' + k(rng)))};
      stream.push_back(tok);
      t.tokens.push_back(tok);
      if (i % 97 == 96) t.tokens.emplace_back(actlang::EndOfTrial{});
    }
    t.tokens.emplace_back(actlang::EndOfTrial{});
    const int L = wl(rng);
    const auto windows = actlang::segment_windows(t, L, Modality::Keyboard);
    EXPECT_EQ(windows.size(), static_cast<std::size_t>(n / L));
    std::size_t pos = 0;
    for (const auto & w : windows) {
      ASSERT_EQ(w.tokens.size(), static_cast<std::size_t>(L));
      for (const auto & tok : w.tokens) {
        EXPECT_FALSE(actlang::is_end_of_trial(tok));
        EXPECT_EQ(tok, stream[pos++]);
      }
    }
  }
}

TEST(tokenizer, reference_window_lengths)
{
  EXPECT_TRUE(actlang::is_reference_window_length(Modality::Keyboard, 50));
  EXPECT_TRUE(actlang::is_reference_window_length(Modality::Mouse, 200));
  EXPECT_TRUE(actlang::is_reference_window_length(Modality::Joint, 150));
  EXPECT_FALSE(actlang::is_reference_window_length(Modality::Joint, 100));
}

TEST(tokenizer, token_lines_round_trip)
{
  const std::vector<ActionToken> tokens{
    KeyToken{KeyAction::Down, "Shift"}, MouseToken{MouseAction::Move, P::Redirection, 2},
    actlang::EndOfTrial{}};
  EXPECT_EQ(actlang::tokens_to_line(tokens), "KeyDown_Shift Move_Redirection_Area2 <EOT>");
  EXPECT_EQ(actlang::tokens_from_line(actlang::tokens_to_line(tokens)), tokens);
}
