#include <map>
#include <random>
#include <tuple>

#include <gtest/gtest.h>

#include "edi/event_core.hpp"
#include "test_support.hpp"

namespace edi {
namespace {

// Direct summation straight from the definition of E(t).
int direct_e(const std::vector<Event>& events, double f, double t) {
  int sum = 0;
  for (const Event& e : events) {
    if (t >= f && e.t > f && e.t <= t) sum += e.sigma;
    if (t < f && e.t > t && e.t <= f) sum -= e.sigma;
  }
  return sum;
}

PixelTimeline timeline_of(const std::vector<Event>& events) {
  PixelTimeline tl;
  for (const Event& e : events) tl.push(e.t, e.sigma);
  tl.canonicalize();
  return tl;
}

TEST(IndexEvents, EmptyStreamGivesEmptyTimelines) {
  const TimelineMap map = index_events(make_stream(4, 3, {}));
  EXPECT_EQ(map.pixel_count(), 12u);
  EXPECT_EQ(map.event_count(), 0u);
  for (std::size_t i = 0; i < map.pixel_count(); ++i) EXPECT_TRUE(map[i].empty());
}

TEST(IndexEvents, ThreeEventsAtOnePixel) {
  const TimelineMap map = index_events(make_stream(3, 3, {{1, 2, 0.1, 1}, {1, 2, 0.3, -1}, {1, 2, 0.2, 1}}));
  ASSERT_EQ(map.at(1, 2).size(), 3u);
  EXPECT_EQ(map.at(1, 2).times, (std::vector<double>{0.1, 0.2, 0.3}));
  EXPECT_EQ(map.at(1, 2).sigmas, (std::vector<int>{1, 1, -1}));
  EXPECT_EQ(map.event_count(), 3u);
  for (int y = 0; y < 3; ++y) {
    for (int x = 0; x < 3; ++x) {
      if (x != 1 || y != 2) EXPECT_TRUE(map.at(x, y).empty());
    }
  }
}

TEST(IndexEvents, SimultaneousOppositeEventsCancel) {
  const TimelineMap map = index_events(make_stream(2, 2, {{0, 0, 0.5, 1}, {0, 0, 0.5, -1}, {1, 1, 0.5, 1}}));
  EXPECT_TRUE(map.at(0, 0).empty());
  EXPECT_EQ(map.at(1, 1).size(), 1u);
}

TEST(IndexEvents, MatchesBruteForcePolaritySums) {
  std::mt19937_64 rng(11);
  std::uniform_int_distribution<int> coord(0, 4), tick(0, 30);
  std::bernoulli_distribution pos(0.5);
  std::vector<Event> events;
  for (int i = 0; i < 2000; ++i) events.push_back({coord(rng), coord(rng), tick(rng) * 0.01, pos(rng) ? 1 : -1});
  const TimelineMap map = index_events(make_stream(5, 5, events));

  std::map<std::tuple<int, int, double>, int> oracle;
  for (const Event& e : events) oracle[{e.x, e.y, e.t}] += e.sigma;
  std::size_t expected = 0;
  for (const auto& [key, sum] : oracle) {
    const auto& [x, y, t] = key;
    const PixelTimeline& tl = map.at(x, y);
    const auto it = std::find(tl.times.begin(), tl.times.end(), t);
    if (sum == 0) {
      EXPECT_EQ(it, tl.times.end());
    } else {
      ASSERT_NE(it, tl.times.end());
      EXPECT_EQ(tl.sigmas[static_cast<std::size_t>(it - tl.times.begin())], sum);
      ++expected;
    }
  }
  EXPECT_EQ(map.event_count(), expected);
  for (std::size_t i = 0; i < map.pixel_count(); ++i) {
    EXPECT_TRUE(std::is_sorted(map[i].times.begin(), map[i].times.end()));
    EXPECT_EQ(std::adjacent_find(map[i].times.begin(), map[i].times.end()), map[i].times.end());
  }
}

TEST(IndexEvents, OutOfBoundsReportsCoordinates) {
  EventStream s;
  s.width = 4;
  s.height = 4;
  s.events = {{1, 1, 0.0, 1}, {7, 2, 0.1, -1}};
  try {
    index_events(s);
    FAIL() << "expected OutOfBounds";
  } catch (const OutOfBounds& e) {
    EXPECT_EQ(e.x(), 7);
    EXPECT_EQ(e.y(), 2);
    EXPECT_NE(std::string(e.what()).find("(7, 2)"), std::string::npos);
  }
}

TEST(IndexEvents, UnsortedStreamIsSortedPerPixel) {
  EventStream s;
  s.width = 2;
  s.height = 1;
  s.events = {{0, 0, 0.3, 1}, {0, 0, 0.1, -1}, {1, 0, 0.2, 1}};
  const TimelineMap map = index_events(s);
  EXPECT_EQ(map.at(0, 0).times, (std::vector<double>{0.1, 0.3}));
  EXPECT_EQ(map.at(0, 0).sigmas, (std::vector<int>{-1, 1}));
}

TEST(Stream, CanonicalOrderBreaksTiesByRowColumnPolarity) {
  const EventStream s = make_stream(3, 3, {{2, 0, 0.1, 1}, {0, 1, 0.1, 1}, {0, 0, 0.1, 1}, {0, 0, 0.1, -1}});
  EXPECT_EQ(s.events[0], (Event{0, 0, 0.1, -1}));
  EXPECT_EQ(s.events[1], (Event{0, 0, 0.1, 1}));
  EXPECT_EQ(s.events[2], (Event{2, 0, 0.1, 1}));
  EXPECT_EQ(s.events[3], (Event{0, 1, 0.1, 1}));
  EXPECT_DOUBLE_EQ(s.t_min, 0.1);
  EXPECT_DOUBLE_EQ(s.t_max, 0.1);
}

TEST(Stream, ValidateRejectsBrokenInvariants) {
  EXPECT_THROW(make_stream(2, 2, {{0, 0, 0.0, 0}}), InvalidInput);
  EXPECT_THROW(make_stream(2, 2, {{2, 0, 0.0, 1}}), OutOfBounds);
  EXPECT_THROW(make_stream(2, 2, {{0, 0, 5.0, 1}}, 0.0, 1.0), InvalidInput);
  EXPECT_THROW(make_stream(0, 2, {}), InvalidInput);
  EventStream s{2, 2, {{0, 0, 0.2, 1}, {0, 0, 0.1, 1}}, 0.0, 1.0};
  EXPECT_THROW(validate(s), InvalidInput);
}

TEST(EventCount, NoEventsIsZeroEverywhere) {
  const StepFunction e = event_count_function(PixelTimeline{}, 0.5);
  for (double t : {-10.0, 0.0, 0.5, 3.0}) EXPECT_EQ(e(t), 0);
}

TEST(EventCount, NetCountAfterLastEvent) {
  const std::vector<Event> ev = {{0, 0, 0.2, 1}, {0, 0, 0.4, 1}, {0, 0, 0.6, -1}};
  const StepFunction e = event_count_function(timeline_of(ev), 0.1);
  EXPECT_EQ(e(0.7), 1);
  EXPECT_EQ(e(0.7), direct_e(ev, 0.1, 0.7));
  EXPECT_EQ(e(0.45), 2);
  EXPECT_EQ(e(0.1), 0);
}

TEST(EventCount, BackwardFromReferenceFlipsSign) {
  const std::vector<Event> ev = {{0, 0, 0.25, -1}};
  const StepFunction e = event_count_function(timeline_of(ev), 0.5);
  EXPECT_EQ(e(0.0), 1);
  EXPECT_EQ(e(0.2499), 1);
  EXPECT_EQ(e(0.25), 0);
  EXPECT_EQ(e(0.4), 0);
  EXPECT_EQ(e(0.5), 0);
}

TEST(EventCount, EventExactlyAtReferenceCountsForward) {
  const std::vector<Event> ev = {{0, 0, 0.5, 1}};
  const StepFunction e = event_count_function(timeline_of(ev), 0.5);
  EXPECT_EQ(e(0.5), 0);
  EXPECT_EQ(e(0.6), 0);
  EXPECT_EQ(e(0.4), -1);
}

TEST(EventCount, MatchesDirectSummationOnRandomTimelines) {
  std::mt19937_64 rng(5);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (int trial = 0; trial < 200; ++trial) {
    const PixelTimeline tl = test::random_timeline(rng, 1 + trial % 40, 0.0, 1.0);
    std::vector<Event> ev;
    for (std::size_t i = 0; i < tl.size(); ++i) ev.push_back({0, 0, tl.times[i], tl.sigmas[i]});
    const double f = u(rng);
    const StepFunction e = event_count_function(tl, f);
    EXPECT_EQ(e(f), 0);
    for (int k = 0; k < 50; ++k) {
      const double t = u(rng) * 1.2 - 0.1;
      ASSERT_EQ(e(t), direct_e(ev, f, t)) << "trial " << trial << " t " << t;
    }
    for (double t : tl.times) ASSERT_EQ(e(t), direct_e(ev, f, t));
    EXPECT_LE(e.breakpoints().size(), tl.size());
  }
}

TEST(EventCount, LinearityOverDisjointSets) {
  std::mt19937_64 rng(6);
  const PixelTimeline a = test::random_timeline(rng, 30, 0.0, 0.5);
  const PixelTimeline b = test::random_timeline(rng, 30, 0.5001, 1.0);
  PixelTimeline ab = a;
  for (std::size_t i = 0; i < b.size(); ++i) ab.push(b.times[i], b.sigmas[i]);
  const double f = 0.37;
  const StepFunction ea = event_count_function(a, f), eb = event_count_function(b, f),
                     eab = event_count_function(ab, f);
  for (double t = -0.05; t < 1.05; t += 0.003) EXPECT_EQ(eab(t), ea(t) + eb(t));
}

TEST(EventCount, AntisymmetryAroundReference) {
  std::mt19937_64 rng(7);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  const PixelTimeline tl = test::random_timeline(rng, 60, 0.0, 1.0);
  for (int k = 0; k < 200; ++k) {
    const double f = u(rng), t = u(rng);
    EXPECT_EQ(event_count_function(tl, f)(t), -event_count_function(tl, t)(f));
  }
}

TEST(EventCount, PolarityFlipNegates) {
  std::mt19937_64 rng(8);
  PixelTimeline tl = test::random_timeline(rng, 50, 0.0, 1.0);
  PixelTimeline flipped = tl;
  for (int& s : flipped.sigmas) s = -s;
  const StepFunction e = event_count_function(tl, 0.4), ef = event_count_function(flipped, 0.4);
  for (double t = 0.0; t < 1.0; t += 0.001) EXPECT_EQ(ef(t), -e(t));
}

TEST(Truncate, ThresholdCrossings) {
  EXPECT_EQ(truncate(0.3, 0.2), 1);
  EXPECT_EQ(truncate(-0.3, 0.2), -1);
  EXPECT_EQ(truncate(0.0, 0.2), 0);
  EXPECT_EQ(truncate(0.2, 0.2), 1);
  EXPECT_EQ(truncate(-0.2, 0.2), -1);
  EXPECT_EQ(truncate(0.19, 0.2), 0);
}

TEST(Truncate, NonPositiveThresholdThrows) {
  EXPECT_THROW(truncate(0.1, 0.0), InvalidThreshold);
  EXPECT_THROW(truncate(0.1, -1.0), InvalidThreshold);
  EXPECT_THROW(truncate(0.1, std::nan("")), InvalidThreshold);
}

}  // namespace
}  // namespace edi
