#pragma once

#include <algorithm>
#include <cmath>
#include <map>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "actlang/errors.hpp"
#include "actlang/events.hpp"
#include "actlang/tokenizer.hpp"

namespace actlang::metrics {

struct FittsTrial {
  double d = 0;   // target distance
  double w = 0;   // target width
  double mt = 0;  // movement time, seconds
};

struct FittsFit {
  double a = 0;  // intercept, seconds
  double b = 0;  // slope, seconds per bit
};

inline double index_of_difficulty(const FittsTrial& t) { return std::log2(2.0 * t.d / t.w); }

// Least-squares fit of MT = a + b * log2(2d / w).
inline FittsFit fitts_fit(std::span<const FittsTrial> trials) {
  if (trials.size() < 2) throw std::invalid_argument("Fitts fit needs at least two trials");
  std::vector<double> x;
  x.reserve(trials.size());
  double mean_x = 0, mean_y = 0;
  for (const auto& t : trials) {
    if (!(t.d > 0 && t.w > 0 && t.mt > 0)) throw std::invalid_argument("Fitts trial values must be positive");
    x.push_back(index_of_difficulty(t));
    mean_x += x.back();
    mean_y += t.mt;
  }
  const auto n = static_cast<double>(trials.size());
  mean_x /= n;
  mean_y /= n;
  double sxx = 0, sxy = 0;
  for (std::size_t i = 0; i < trials.size(); ++i) {
    sxx += (x[i] - mean_x) * (x[i] - mean_x);
    sxy += (x[i] - mean_x) * (trials[i].mt - mean_y);
  }
  const auto [lo, hi] = std::minmax_element(x.begin(), x.end());
  if (*hi - *lo <= 1e-12 * std::max(1.0, std::abs(*hi)) || sxx == 0.0)
    throw SingularFitError("all trials share one index of difficulty");
  FittsFit fit;
  fit.b = sxy / sxx;
  fit.a = mean_y - fit.b * mean_x;
  return fit;
}

struct KeyboardProficiency {
  double mean_press_s = 0;
  double keys_per_minute = 0;
  std::size_t presses = 0;
  double span_minutes = 0;
};

// A KeyDown pairs with the next KeyUp of the same key; repeated Downs before
// that Up and Ups without an open Down are dropped. The rate divides
// completed presses by the time spanned by all given events.
inline KeyboardProficiency keyboard_proficiency(std::span<const RawEvent> events) {
  std::map<std::string, std::int64_t> open;
  double total_ms = 0;
  std::size_t presses = 0;
  std::int64_t first = 0, last = 0;
  bool any = false;
  for (const RawEvent& e : events) {
    if (!any) first = last = e.timestamp_ms;
    any = true;
    first = std::min(first, e.timestamp_ms);
    last = std::max(last, e.timestamp_ms);
    if (!is_key_kind(e.kind) || !e.key_value) continue;
    if (e.kind == EventKind::KeyDown) {
      open.try_emplace(*e.key_value, e.timestamp_ms);
    } else if (auto it = open.find(*e.key_value); it != open.end()) {
      total_ms += static_cast<double>(e.timestamp_ms - it->second);
      ++presses;
      open.erase(it);
    }
  }
  if (presses == 0) throw ValidationError("no completed key press");
  const double span_min = static_cast<double>(last - first) / 60000.0;
  if (span_min <= 0) throw ValidationError("key events span zero time");
  return {total_ms / 1000.0 / static_cast<double>(presses), static_cast<double>(presses) / span_min, presses, span_min};
}

using Trajectory = std::vector<Point2>;

// Mouse positions of a normalised trial in time order.
inline Trajectory trajectory_of(const Trial& trial) {
  Trajectory t;
  for (const RawEvent& e : trial.events)
    if (is_mouse_kind(e.kind) && e.x && e.y) t.push_back({*e.x, *e.y});
  return t;
}

// n points spaced uniformly by arc length along the polyline, endpoints kept.
inline Trajectory resample_trajectory(std::span<const Point2> traj, std::size_t n = 101) {
  if (traj.size() < 2) throw std::invalid_argument("trajectory needs at least two points");
  if (n < 2) throw std::invalid_argument("resampling needs n >= 2");
  std::vector<double> cum(traj.size(), 0.0);
  for (std::size_t i = 1; i < traj.size(); ++i)
    cum[i] = cum[i - 1] + std::hypot(traj[i].x - traj[i - 1].x, traj[i].y - traj[i - 1].y);
  const double total = cum.back();
  if (total == 0.0) return Trajectory(n, traj.front());

  Trajectory out;
  out.reserve(n);
  out.push_back(traj.front());
  std::size_t seg = 1;
  for (std::size_t i = 1; i + 1 < n; ++i) {
    const double s = total * static_cast<double>(i) / static_cast<double>(n - 1);
    while (seg + 1 < traj.size() && cum[seg] < s) ++seg;
    const double len = cum[seg] - cum[seg - 1];
    const double f = len > 0 ? std::clamp((s - cum[seg - 1]) / len, 0.0, 1.0) : 0.0;
    out.push_back({traj[seg - 1].x + f * (traj[seg].x - traj[seg - 1].x),
                   traj[seg - 1].y + f * (traj[seg].y - traj[seg - 1].y)});
  }
  out.push_back(traj.back());
  return out;
}

// Mean Euclidean distance between index-aligned points of two resampled trajectories.
inline double trajectory_distance(std::span<const Point2> a, std::span<const Point2> b, std::size_t n = 101) {
  const auto ra = resample_trajectory(a, n);
  const auto rb = resample_trajectory(b, n);
  double sum = 0;
  for (std::size_t i = 0; i < n; ++i) sum += std::hypot(ra[i].x - rb[i].x, ra[i].y - rb[i].y);
  return sum / static_cast<double>(n);
}

// Mean trajectory distance over all cross-task trial pairs.
inline double task_distance(std::span<const Trajectory> task_a, std::span<const Trajectory> task_b,
                            std::size_t n = 101) {
  if (task_a.empty() || task_b.empty()) throw std::invalid_argument("task distance needs non-empty trial sets");
  std::vector<Trajectory> ra, rb;
  for (const auto& t : task_a) ra.push_back(resample_trajectory(t, n));
  for (const auto& t : task_b) rb.push_back(resample_trajectory(t, n));
  double sum = 0;
  for (const auto& a : ra)
    for (const auto& b : rb) {
      double d = 0;
      for (std::size_t i = 0; i < n; ++i) d += std::hypot(a[i].x - b[i].x, a[i].y - b[i].y);
      sum += d / static_cast<double>(n);
    }
  return sum / static_cast<double>(ra.size() * rb.size());
}

}  // namespace actlang::metrics
