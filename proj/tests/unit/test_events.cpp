#include "actlang/events.hpp"

#include <gtest/gtest.h>

#include <random>
#include <sstream>
#include <string>

namespace
{
using actlang::DatasetProfile;
using actlang::EventKind;
using actlang::RawEvent;
using actlang::Session;
using actlang::Trial;

std::string record(
  const std::string & kind, std::int64_t t, const std::string & extra, int trial = 0,
  const std::string & participant = "p1", const std::string & task = "write")
{
  return R"({"participant_id":")" + participant + R"(","task_id":")" + task +
         R"(","trial_index":)" + std::to_string(trial) + R"(,"timestamp_ms":)" +
         std::to_string(t) + R"(,"kind":")" + kind + R"(",)" + extra +
         R"(,"screen_w":1920,"screen_h":1080})";
}

std::string key(const std::string & kind, std::int64_t t, const std::string & k)
{
  return record(kind, t, R"("key_value":")" + k + R"(")");
}

std::string mouse(const std::string & kind, std::int64_t t, double x, double y)
{
  return record(kind, t, R"("x":)" + std::to_string(x) + R"(,"y":)" + std::to_string(y));
}

Trial trial_with(std::vector<RawEvent> events, int w = 1920, int h = 1080)
{
  Trial t;
  t.participant_id = "p";
  t.task_id = "t";
  t.screen_w = w;
  t.screen_h = h;
  t.events = std::move(events);
  return t;
}

RawEvent mouse_event(std::int64_t t, double x, double y)
{
  RawEvent e;
  e.timestamp_ms = t;
  e.kind = EventKind::MouseMove;
  e.x = x;
  e.y = y;
  return e;
}
}  // namespace

TEST(events, empty_stream_gives_empty_session)
{
  const Session s = actlang::parse_events(std::string{});
  EXPECT_TRUE(s.trials.empty());
}

TEST(events, records_are_grouped_and_time_sorted)
{
  const std::string text = key("KeyUp", 30, "a") + "\n" + key("KeyDown", 10, "a") + "\n" +
                           mouse("MouseMove", 20, 5, 5) + "\n";
  const Session s = actlang::parse_events(text);
  ASSERT_EQ(s.trials.size(), 1u);
  const auto & ev = s.trials[0].events;
  ASSERT_EQ(ev.size(), 3u);
  EXPECT_EQ(ev[0].timestamp_ms, 10);
  EXPECT_EQ(ev[1].timestamp_ms, 20);
  EXPECT_EQ(ev[2].timestamp_ms, 30);
}

TEST(events, equal_timestamps_keep_file_order)
{
  const std::string text = key("KeyDown", 5, "b") + "\n" + key("KeyDown", 5, "a") + "\n";
  const auto s = actlang::parse_events(text);
  EXPECT_EQ(*s.trials[0].events[0].key_value, "b");
  EXPECT_EQ(*s.trials[0].events[1].key_value, "a");
}

TEST(events, key_event_with_coordinates_names_the_line)
{
  const std::string text = key("KeyDown", 1, "a") + "\n" +
                           record("KeyDown", 2, R"("key_value":"a","x":1,"y":2)") + "\n";
  try {
    actlang::parse_events(text);
    FAIL() << "expected a parse error";
  } catch (const actlang::ParseError & e) {
    EXPECT_EQ(e.line(), 2u);
    EXPECT_NE(std::string(e.what()).find("line 2"), std::string::npos);
  }
}

TEST(events, malformed_records_are_rejected)
{
  EXPECT_THROW(actlang::parse_events(std::string("{not json\n")), actlang::ParseError);
  EXPECT_THROW(actlang::parse_events(mouse("MouseMove", 1, 1, 1).substr(0, 40)), actlang::ParseError);
  EXPECT_THROW(actlang::parse_events(record("MouseMove", 1, R"("x":1)")), actlang::ParseError);
  EXPECT_THROW(actlang::parse_events(record("Scroll", 1, R"("x":1,"y":1)")), actlang::ParseError);
  EXPECT_THROW(actlang::parse_events(mouse("MouseMove", -4, 1, 1)), actlang::ParseError);
  EXPECT_THROW(
    actlang::parse_events(record("MouseMove", 1, R"("x":1,"y":1,"key_value":"a")")),
    actlang::ParseError);
}

TEST(events, unknown_fields_are_ignored)
{
  const auto s = actlang::parse_events(record("KeyDown", 1, R"("key_value":"a","browser":"x")"));
  ASSERT_EQ(s.trials.size(), 1u);
}

TEST(events, mixed_click_conventions_conflict)
{
  const std::string text = mouse("MouseClick", 1, 1, 1) + "\n" + mouse("MouseDown", 2, 1, 1) + "\n";
  EXPECT_THROW(actlang::parse_events(text), actlang::ProfileConflictError);
}

TEST(events, profile_is_inferred_from_click_kinds)
{
  EXPECT_EQ(
    actlang::parse_events(mouse("MouseClick", 1, 1, 1)).dataset_profile, DatasetProfile::BuffaloLike);
  EXPECT_EQ(
    actlang::parse_events(mouse("MouseDown", 1, 1, 1)).dataset_profile, DatasetProfile::EmakiLike);
  EXPECT_THROW(
    actlang::parse_events(mouse("MouseClick", 1, 1, 1), DatasetProfile::EmakiLike),
    actlang::ProfileConflictError);
}

TEST(events, key_values_are_canonical)
{
  EXPECT_EQ(actlang::normalize_key("A"), "a");
  EXPECT_EQ(actlang::normalize_key(" "), "Space");
  EXPECT_EQ(actlang::normalize_key("shift"), "Shift");
  EXPECT_EQ(actlang::normalize_key("Control"), "Ctrl");
  EXPECT_EQ(actlang::normalize_key("BACKSPACE"), "Backspace");
}

TEST(events, normalize_midpoint_and_boundary)
{
  const auto t = actlang::normalize_coords(
    trial_with({mouse_event(0, 960, 540), mouse_event(1, 1920, 0), mouse_event(2, 2000, -3)}));
  EXPECT_DOUBLE_EQ(*t.events[0].x, 0.5);
  EXPECT_DOUBLE_EQ(*t.events[0].y, 0.5);
  EXPECT_DOUBLE_EQ(*t.events[1].x, 1.0);
  EXPECT_DOUBLE_EQ(*t.events[1].y, 0.0);
  EXPECT_DOUBLE_EQ(*t.events[2].x, 1.0);
  EXPECT_DOUBLE_EQ(*t.events[2].y, 0.0);
  EXPECT_TRUE(t.normalized);
}

TEST(events, normalize_requires_coordinates_and_positive_screen)
{
  RawEvent bad;
  bad.kind = EventKind::MouseMove;
  EXPECT_THROW(actlang::normalize_coords(trial_with({bad})), actlang::ValidationError);
  EXPECT_THROW(actlang::normalize_coords(trial_with({}, 0, 10)), actlang::ValidationError);
}

TEST(events, normalize_is_idempotent)
{
  const auto once = actlang::normalize_coords(trial_with({mouse_event(0, 300, 200)}));
  EXPECT_EQ(actlang::normalize_coords(once), once);
}

TEST(events, property_round_trip_and_normalisation_preserve_counts)
{
  std::mt19937_64 rng(42);
  std::uniform_int_distribution<int> kind(0, 3), coord(-50, 2100), gap(0, 40);
  for (int rep = 0; rep < 50; ++rep) {
    std::string text;
    std::int64_t t = 0;
    for (int i = 0; i < 60; ++i) {
      t += gap(rng);
      const int trial = i % 3;
      switch (kind(rng)) {
        case 0:
          text += record("KeyDown", t, R"("key_value":"q")", trial) + "\n";
          break;
        case 1:
          text += record("KeyUp", t, R"("key_value":"Enter")", trial) + "\n";
          break;
        case 2:
          text += record("MouseDown", t, R"("x":)" + std::to_string(coord(rng)) + R"(,"y":7)", trial) + "\n";
          break;
        default:
          text +=
            record("MouseMove", t, R"("x":3.25,"y":)" + std::to_string(coord(rng)), trial) + "\n";
      }
    }
    const Session s = actlang::parse_events(text);
    EXPECT_EQ(actlang::parse_events(actlang::serialize_events(s)), s);

    const Session n = actlang::normalize_coords(s);
    EXPECT_EQ(actlang::parse_events(actlang::serialize_events(n)), n);
    ASSERT_EQ(n.trials.size(), s.trials.size());
    for (std::size_t i = 0; i < s.trials.size(); ++i) {
      ASSERT_EQ(n.trials[i].events.size(), s.trials[i].events.size());
      for (std::size_t j = 0; j < s.trials[i].events.size(); ++j) {
        const auto & a = s.trials[i].events[j];
        const auto & b = n.trials[i].events[j];
        EXPECT_EQ(a.kind, b.kind);
        EXPECT_EQ(a.timestamp_ms, b.timestamp_ms);
        EXPECT_EQ(a.key_value, b.key_value);
        if (b.x) {
          EXPECT_GE(*b.x, 0.0);
          EXPECT_LE(*b.x, 1.0);
          EXPECT_GE(*b.y, 0.0);
          EXPECT_LE(*b.y, 1.0);
        }
      }
    }
  }
}

TEST(events, distinct_keys_are_sorted_and_unique)
{
  const std::string text =
    key("KeyDown", 1, "b") + "\n" + key("KeyDown", 2, "A") + "\n" + key("KeyUp", 3, "a") + "\n";
  const auto keys = actlang::distinct_keys(actlang::parse_events(text));
  EXPECT_EQ(keys, (std::vector<std::string>{"a", "b"}));
}
