#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <span>
#include <string>
#include <tuple>
#include <vector>

#include "edi/error.hpp"

namespace edi {

struct Event {
  int x = 0;
  int y = 0;
  double t = 0.0;  // seconds
  int sigma = 1;   // +1 brighter, -1 darker

  friend bool operator==(const Event&, const Event&) = default;
};

// Stream order: time first, ties broken by (y, x, sigma).
inline bool canonical_less(const Event& a, const Event& b) noexcept {
  return std::tie(a.t, a.y, a.x, a.sigma) < std::tie(b.t, b.y, b.x, b.sigma);
}

struct EventStream {
  int width = 0;
  int height = 0;
  std::vector<Event> events;
  // Time interval the sensor was recording. Empty (t_min > t_max) when unknown.
  double t_min = std::numeric_limits<double>::infinity();
  double t_max = -std::numeric_limits<double>::infinity();

  bool covers(double begin, double end) const noexcept { return t_min <= begin && end <= t_max; }
  bool has_coverage() const noexcept { return t_min <= t_max; }
};

inline void sort_canonical(std::vector<Event>& events) {
  std::sort(events.begin(), events.end(), canonical_less);
}

// Throws on any broken stream invariant.
inline void validate(const EventStream& stream) {
  if (stream.width <= 0 || stream.height <= 0) {
    throw InvalidInput("event stream needs positive sensor dimensions");
  }
  for (std::size_t i = 0; i < stream.events.size(); ++i) {
    const Event& e = stream.events[i];
    if (e.sigma != 1 && e.sigma != -1) {
      throw InvalidInput("event " + std::to_string(i) + " has polarity " + std::to_string(e.sigma));
    }
    if (e.x < 0 || e.y < 0 || e.x >= stream.width || e.y >= stream.height) {
      throw OutOfBounds("event at (" + std::to_string(e.x) + ", " + std::to_string(e.y) + ") outside " +
                            std::to_string(stream.width) + "x" + std::to_string(stream.height) + " sensor",
                        e.x, e.y);
    }
    if (!std::isfinite(e.t)) {
      throw InvalidInput("event " + std::to_string(i) + " has a non-finite timestamp");
    }
    if (i > 0 && e.t < stream.events[i - 1].t) {
      throw InvalidInput("events are not sorted by time at index " + std::to_string(i));
    }
    if (e.t < stream.t_min || e.t > stream.t_max) {
      throw InvalidInput("event " + std::to_string(i) + " lies outside the stream coverage interval");
    }
  }
}

// Sorts, sets coverage (defaults to the event span) and validates.
inline EventStream make_stream(int width, int height, std::vector<Event> events,
                               double t_min = std::numeric_limits<double>::quiet_NaN(),
                               double t_max = std::numeric_limits<double>::quiet_NaN()) {
  sort_canonical(events);
  EventStream stream{width, height, std::move(events)};
  if (!std::isnan(t_min)) {
    stream.t_min = t_min;
  } else if (!stream.events.empty()) {
    stream.t_min = stream.events.front().t;
  }
  if (!std::isnan(t_max)) {
    stream.t_max = t_max;
  } else if (!stream.events.empty()) {
    stream.t_max = stream.events.back().t;
  }
  validate(stream);
  return stream;
}

// Event times at one pixel. After canonicalize() times are strictly
// increasing and every sigma is non-zero (merged polarities may exceed 1).
struct PixelTimeline {
  std::vector<double> times;
  std::vector<int> sigmas;

  std::size_t size() const noexcept { return times.size(); }
  bool empty() const noexcept { return times.empty(); }

  void push(double t, int sigma) {
    times.push_back(t);
    sigmas.push_back(sigma);
  }

  // Expects times sorted. Merges equal timestamps by summing polarities and
  // drops entries whose sum is zero.
  void canonicalize() {
    std::size_t out = 0;
    for (std::size_t i = 0; i < times.size();) {
      const double t = times[i];
      int sum = 0;
      for (; i < times.size() && times[i] == t; ++i) sum += sigmas[i];
      if (sum != 0) {
        times[out] = t;
        sigmas[out] = sum;
        ++out;
      }
    }
    times.resize(out);
    sigmas.resize(out);
  }

  // Sum of polarities with t_i <= t.
  int cumulative(double t) const {
    const auto end = std::upper_bound(times.begin(), times.end(), t);
    int sum = 0;
    for (auto it = sigmas.begin(); it != sigmas.begin() + (end - times.begin()); ++it) sum += *it;
    return sum;
  }

  friend bool operator==(const PixelTimeline&, const PixelTimeline&) = default;
};

class TimelineMap {
 public:
  TimelineMap() = default;
  TimelineMap(int width, int height)
      : width_(width), height_(height), timelines_(static_cast<std::size_t>(width) * static_cast<std::size_t>(height)) {}

  int width() const noexcept { return width_; }
  int height() const noexcept { return height_; }
  std::size_t pixel_count() const noexcept { return timelines_.size(); }

  const PixelTimeline& at(int x, int y) const { return timelines_[index(x, y)]; }
  PixelTimeline& at(int x, int y) { return timelines_[index(x, y)]; }
  const PixelTimeline& operator[](std::size_t i) const { return timelines_[i]; }
  PixelTimeline& operator[](std::size_t i) { return timelines_[i]; }

  std::size_t event_count() const noexcept {
    std::size_t n = 0;
    for (const auto& tl : timelines_) n += tl.size();
    return n;
  }

 private:
  std::size_t index(int x, int y) const noexcept {
    return static_cast<std::size_t>(y) * static_cast<std::size_t>(width_) + static_cast<std::size_t>(x);
  }

  int width_ = 0;
  int height_ = 0;
  std::vector<PixelTimeline> timelines_;
};

inline TimelineMap index_events(const EventStream& stream) {
  if (stream.width <= 0 || stream.height <= 0) {
    throw InvalidInput("event stream needs positive sensor dimensions");
  }
  TimelineMap map(stream.width, stream.height);
  bool sorted = true;
  double last = -std::numeric_limits<double>::infinity();
  for (const Event& e : stream.events) {
    if (e.x < 0 || e.y < 0 || e.x >= stream.width || e.y >= stream.height) {
      throw OutOfBounds("event at pixel (" + std::to_string(e.x) + ", " + std::to_string(e.y) +
                            ") outside the sensor",
                        e.x, e.y);
    }
    if (e.sigma != 1 && e.sigma != -1) {
      throw InvalidInput("event polarity must be +1 or -1");
    }
    sorted = sorted && e.t >= last;
    last = e.t;
    map.at(e.x, e.y).push(e.t, e.sigma);
  }
  for (std::size_t i = 0; i < map.pixel_count(); ++i) {
    PixelTimeline& tl = map[i];
    if (!sorted && !std::is_sorted(tl.times.begin(), tl.times.end())) {
      std::vector<std::size_t> order(tl.size());
      for (std::size_t k = 0; k < order.size(); ++k) order[k] = k;
      std::stable_sort(order.begin(), order.end(),
                       [&](std::size_t a, std::size_t b) { return tl.times[a] < tl.times[b]; });
      PixelTimeline sorted_tl;
      for (std::size_t k : order) sorted_tl.push(tl.times[k], tl.sigmas[k]);
      tl = std::move(sorted_tl);
    }
    tl.canonicalize();
  }
  return map;
}

// Piecewise-constant integer function. levels[0] holds for t < breakpoints[0],
// levels[k] on [breakpoints[k-1], breakpoints[k]), the last level afterwards.
class StepFunction {
 public:
  StepFunction() : levels_{0} {}
  StepFunction(std::vector<double> breakpoints, std::vector<int> levels)
      : breakpoints_(std::move(breakpoints)), levels_(std::move(levels)) {
    if (levels_.size() != breakpoints_.size() + 1) {
      throw InvalidInput("step function needs one more level than breakpoints");
    }
  }

  int operator()(double t) const noexcept {
    const auto it = std::upper_bound(breakpoints_.begin(), breakpoints_.end(), t);
    return levels_[static_cast<std::size_t>(it - breakpoints_.begin())];
  }

  std::span<const double> breakpoints() const noexcept { return breakpoints_; }
  std::span<const int> levels() const noexcept { return levels_; }

 private:
  std::vector<double> breakpoints_;
  std::vector<int> levels_;
};

// E(t) referenced at f: the signed event count over (f, t] for t >= f and the
// negated count over (t, f] for t < f. E(f) == 0.
inline StepFunction event_count_function(const PixelTimeline& timeline, double f) {
  std::vector<int> levels;
  levels.reserve(timeline.size() + 1);
  int level = -timeline.cumulative(f);
  levels.push_back(level);
  for (int s : timeline.sigmas) {
    level += s;
    levels.push_back(level);
  }
  return StepFunction(timeline.times, std::move(levels));
}

// Event-camera truncation of a log-intensity change d against threshold c.
inline int truncate(double d, double c) {
  require_threshold(c);
  if (d >= c) return 1;
  if (d <= -c) return -1;
  return 0;
}

}  // namespace edi
