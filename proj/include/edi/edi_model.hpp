#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "edi/error.hpp"
#include "edi/event_core.hpp"
#include "edi/grid.hpp"
#include "edi/parallel.hpp"

namespace edi {

// Half an 8-bit quantization level; black pixels are floored here before log.
inline constexpr double kLogFloor = 1.0 / (2.0 * 255.0);

struct ExposureWindow {
  double start = 0.0;
  double end = 0.0;

  double midpoint() const noexcept { return 0.5 * (start + end); }
  double duration() const noexcept { return end - start; }
};

inline void require_window(const ExposureWindow& w) {
  if (!(w.end - w.start > 0.0) || !std::isfinite(w.start) || !std::isfinite(w.end)) {
    throw InvalidWindow("degenerate exposure window [" + std::to_string(w.start) + ", " + std::to_string(w.end) + "]");
  }
}

// A captured (possibly blurry) intensity frame.
struct Frame {
  Image pixels;
  double exposure_start = 0.0;
  double exposure_end = 0.0;

  ExposureWindow window() const noexcept { return {exposure_start, exposure_end}; }
  double midpoint() const noexcept { return 0.5 * (exposure_start + exposure_end); }
  double duration() const noexcept { return exposure_end - exposure_start; }
  int width() const noexcept { return pixels.width(); }
  int height() const noexcept { return pixels.height(); }
};

inline void validate(const Frame& frame) {
  require_window(frame.window());
  for (double v : frame.pixels.pixels()) {
    if (!(v >= 0.0 && v <= 1.0)) {
      throw InvalidInput("frame pixel value " + std::to_string(v) + " outside [0, 1]");
    }
  }
}

struct LatentFrame {
  Image pixels;  // clamped to [0, 1]
  Image raw;     // before clamping
  double t = 0.0;
  double c_used = 0.0;
  std::size_t saturated = 0;  // pixels whose raw value exceeded 1
};

struct LatentVideo {
  std::vector<LatentFrame> frames;
  std::size_t source_frame_id = 0;
};

inline LatentFrame make_latent(Image raw, double t, double c) {
  LatentFrame out;
  out.pixels = Image(raw.width(), raw.height());
  for (std::size_t i = 0; i < raw.size(); ++i) {
    const double v = raw[i];
    if (v > 1.0) ++out.saturated;
    out.pixels[i] = std::clamp(v, 0.0, 1.0);
  }
  out.raw = std::move(raw);
  out.t = t;
  out.c_used = c;
  return out;
}

// Total normalized time a pixel spends at one E(t) level inside the window.
struct LevelWeight {
  int level = 0;
  double weight = 0.0;
};

// Level occupancy of E(t) (referenced at f) over [start, end], weights
// normalized by the window length. Weights of repeated levels are merged.
inline std::vector<LevelWeight> level_weights(const PixelTimeline& timeline, const ExposureWindow& window, double f) {
  require_window(window);
  const double T = window.duration();
  std::vector<LevelWeight> out;
  auto add = [&out](int level, double dt) {
    if (dt <= 0.0) return;
    for (auto& lw : out) {
      if (lw.level == level) {
        lw.weight += dt;
        return;
      }
    }
    out.push_back({level, dt});
  };

  const auto& times = timeline.times;
  const auto& sigmas = timeline.sigmas;
  std::size_t i = static_cast<std::size_t>(std::upper_bound(times.begin(), times.end(), window.start) - times.begin());
  int level = timeline.cumulative(window.start) - timeline.cumulative(f);
  double cursor = window.start;
  for (; i < times.size() && times[i] < window.end; ++i) {
    add(level, times[i] - cursor);
    level += sigmas[i];
    cursor = times[i];
  }
  add(level, window.end - cursor);
  if (out.empty()) out.push_back({level, 0.0});
  std::sort(out.begin(), out.end(), [](const LevelWeight& a, const LevelWeight& b) { return a.level < b.level; });
  for (auto& lw : out) lw.weight /= T;
  return out;
}

inline double sum_exp_levels(std::span<const LevelWeight> weights, double c) {
  double sum = 0.0;
  for (const auto& lw : weights) sum += lw.weight * std::exp(c * lw.level);
  return sum;
}

// (1/T) * integral over the window of exp(c * E(t)), summed exactly over the
// intervals of the step function E.
inline double double_integral_term(const PixelTimeline& timeline, const ExposureWindow& window, double f, double c) {
  require_threshold(c);
  return sum_exp_levels(level_weights(timeline, window, f), c);
}

// Per-pixel level occupancy for one exposure window, computed once and reused
// for every c the optimizer or the tuner asks about.
class ExposureIntegrals {
 public:
  ExposureIntegrals() = default;
  ExposureIntegrals(const TimelineMap& timelines, const ExposureWindow& window, unsigned threads = 0)
      : width_(timelines.width()), height_(timelines.height()), window_(window), weights_(timelines.pixel_count()) {
    require_window(window);
    const double f = window.midpoint();
    parallel_for(
        weights_.size(), [&](std::size_t i) { weights_[i] = level_weights(timelines[i], window, f); }, threads);
  }

  int width() const noexcept { return width_; }
  int height() const noexcept { return height_; }
  const ExposureWindow& window() const noexcept { return window_; }
  std::span<const LevelWeight> weights(std::size_t pixel) const { return weights_[pixel]; }

  double term(std::size_t pixel, double c) const { return sum_exp_levels(weights_[pixel], c); }

  Image terms(double c, unsigned threads = 0) const {
    require_threshold(c);
    Image out(width_, height_);
    parallel_for(
        out.size(), [&](std::size_t i) { out[i] = term(i, c); }, threads);
    return out;
  }

 private:
  int width_ = 0;
  int height_ = 0;
  ExposureWindow window_;
  std::vector<std::vector<LevelWeight>> weights_;
};

// L(f) = max(B, floor) / double-integral term, evaluated pixelwise.
inline LatentFrame recover_latent(const Frame& blurry, const ExposureIntegrals& integrals, double c,
                                  unsigned threads = 0) {
  require_threshold(c);
  require_same_shape(blurry.pixels, Image(integrals.width(), integrals.height()), "frame vs events");
  Image raw(blurry.width(), blurry.height());
  parallel_for(
      raw.size(), [&](std::size_t i) { raw[i] = std::max(blurry.pixels[i], kLogFloor) / integrals.term(i, c); },
      threads);
  return make_latent(std::move(raw), blurry.midpoint(), c);
}

inline void require_coverage(const EventStream& stream, const ExposureWindow& window) {
  if (stream.covers(window.start, window.end)) return;
  double begin = window.start;
  double end = window.end;
  if (stream.has_coverage()) {
    if (stream.t_min > window.start) {
      end = std::min(window.end, stream.t_min);
    } else {
      begin = std::max(window.start, stream.t_max);
    }
  }
  throw CoverageError("event stream does not cover [" + std::to_string(begin) + ", " + std::to_string(end) +
                          "] of exposure window [" + std::to_string(window.start) + ", " +
                          std::to_string(window.end) + "]",
                      begin, end);
}

inline LatentFrame recover_latent(const Frame& blurry, const TimelineMap& timelines, double c, unsigned threads = 0) {
  require_threshold(c);
  require_window(blurry.window());
  return recover_latent(blurry, ExposureIntegrals(timelines, blurry.window(), threads), c, threads);
}

inline LatentFrame recover_latent(const Frame& blurry, const EventStream& stream, double c, unsigned threads = 0) {
  require_threshold(c);
  require_window(blurry.window());
  require_coverage(stream, blurry.window());
  if (stream.width != blurry.width() || stream.height != blurry.height()) {
    throw DimensionMismatch("frame is " + std::to_string(blurry.width()) + "x" + std::to_string(blurry.height()) +
                            " but events are " + std::to_string(stream.width) + "x" + std::to_string(stream.height));
  }
  return recover_latent(blurry, index_events(stream), c, threads);
}

// L(t) = L(anchor) * exp(c * E(t)) with E referenced at the anchor time.
inline LatentVideo rollout(const LatentFrame& anchor, const TimelineMap& timelines, double c,
                           std::span<const double> sample_times, std::size_t source_frame_id = 0,
                           unsigned threads = 0) {
  require_threshold(c);
  require_same_shape(anchor.raw, Image(timelines.width(), timelines.height()), "anchor vs events");
  for (std::size_t k = 1; k < sample_times.size(); ++k) {
    if (!(sample_times[k] > sample_times[k - 1])) {
      throw InvalidInput("sample times must be strictly increasing");
    }
  }
  const std::size_t n = sample_times.size();
  std::vector<Image> raws(n, Image(anchor.raw.width(), anchor.raw.height()));
  parallel_for(
      anchor.raw.size(),
      [&](std::size_t i) {
        const PixelTimeline& tl = timelines[i];
        const double base = anchor.raw[i];
        const int ref = tl.cumulative(anchor.t);
        std::size_t e = 0;
        int cum = 0;
        for (std::size_t k = 0; k < n; ++k) {
          const double t = sample_times[k];
          for (; e < tl.size() && tl.times[e] <= t; ++e) cum += tl.sigmas[e];
          const int level = cum - ref;
          raws[k][i] = level == 0 ? base : base * std::exp(c * level);
        }
      },
      threads);
  LatentVideo video;
  video.source_frame_id = source_frame_id;
  video.frames.reserve(n);
  for (std::size_t k = 0; k < n; ++k) video.frames.push_back(make_latent(std::move(raws[k]), sample_times[k], c));
  return video;
}

// One timestamp after every k-th event inside the window (counted over all
// pixels), plus the window midpoint. Sorted, no duplicates.
inline std::vector<double> default_sample_times(const EventStream& stream, const ExposureWindow& window,
                                                std::size_t events_per_frame) {
  if (events_per_frame < 1) throw InvalidInput("events_per_frame must be at least 1");
  std::vector<double> out;
  const auto first = std::lower_bound(stream.events.begin(), stream.events.end(), window.start,
                                      [](const Event& e, double t) { return e.t < t; });
  std::size_t count = 0;
  for (auto it = first; it != stream.events.end() && it->t <= window.end; ++it) {
    if (++count % events_per_frame == 0) out.push_back(it->t);
  }
  out.push_back(window.midpoint());
  std::sort(out.begin(), out.end());
  out.erase(std::unique(out.begin(), out.end()), out.end());
  return out;
}

// Index of the frame whose midpoint is nearest to t; ties go to the earlier frame.
inline std::size_t nearest_frame(std::span<const Frame> frames, double t) {
  std::size_t best = 0;
  double best_dist = std::abs(frames[0].midpoint() - t);
  for (std::size_t i = 1; i < frames.size(); ++i) {
    const double d = std::abs(frames[i].midpoint() - t);
    if (d < best_dist) {
      best = i;
      best_dist = d;
    }
  }
  return best;
}

// Each sample time is reconstructed from the recovered anchor of its nearest
// frame, so error never accumulates across frames. thresholds holds one c per frame.
inline std::vector<LatentVideo> reconstruct_sequence(std::span<const Frame> frames, const EventStream& stream,
                                                     std::span<const double> thresholds,
                                                     std::span<const double> sample_times, unsigned threads = 0) {
  if (frames.empty()) throw InvalidInput("reconstruct_sequence needs at least one frame");
  if (thresholds.size() != frames.size()) throw InvalidInput("need one threshold per frame");
  for (std::size_t i = 1; i < frames.size(); ++i) {
    if (frames[i].midpoint() < frames[i - 1].midpoint()) throw InvalidInput("frames must be sorted by midpoint");
  }
  const TimelineMap timelines = index_events(stream);
  std::vector<std::vector<double>> assigned(frames.size());
  std::vector<double> sorted(sample_times.begin(), sample_times.end());
  std::sort(sorted.begin(), sorted.end());
  sorted.erase(std::unique(sorted.begin(), sorted.end()), sorted.end());
  for (double t : sorted) assigned[nearest_frame(frames, t)].push_back(t);

  std::vector<LatentVideo> videos;
  videos.reserve(frames.size());
  for (std::size_t i = 0; i < frames.size(); ++i) {
    require_coverage(stream, frames[i].window());
    require_same_shape(frames[i].pixels, Image(stream.width, stream.height), "frame vs events");
    const LatentFrame anchor = recover_latent(frames[i], timelines, thresholds[i], threads);
    videos.push_back(rollout(anchor, timelines, thresholds[i], assigned[i], i, threads));
  }
  return videos;
}

inline std::vector<LatentVideo> reconstruct_sequence(std::span<const Frame> frames, const EventStream& stream,
                                                     std::span<const double> thresholds,
                                                     std::size_t events_per_frame, unsigned threads = 0) {
  if (frames.empty()) throw InvalidInput("reconstruct_sequence needs at least one frame");
  std::vector<double> samples;
  for (const Frame& frame : frames) {
    const auto times = default_sample_times(stream, frame.window(), events_per_frame);
    samples.insert(samples.end(), times.begin(), times.end());
  }
  return reconstruct_sequence(frames, stream, thresholds, samples, threads);
}

inline std::vector<LatentVideo> reconstruct_sequence(std::span<const Frame> frames, const EventStream& stream,
                                                     double c, std::size_t events_per_frame, unsigned threads = 0) {
  require_threshold(c);
  const std::vector<double> thresholds(frames.size(), c);
  return reconstruct_sequence(frames, stream, thresholds, events_per_frame, threads);
}

}  // namespace edi
