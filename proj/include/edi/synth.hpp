#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <random>
#include <vector>

#include "edi/edi_model.hpp"
#include "edi/error.hpp"
#include "edi/event_core.hpp"
#include "edi/grid.hpp"
#include "edi/metrics.hpp"
#include "edi/optimizer.hpp"
#include "edi/parallel.hpp"

namespace edi {

struct SharpVideo {
  std::vector<Image> frames;
  std::vector<double> timestamps;

  int width() const noexcept { return frames.empty() ? 0 : frames.front().width(); }
  int height() const noexcept { return frames.empty() ? 0 : frames.front().height(); }
  std::size_t size() const noexcept { return frames.size(); }
};

inline void validate(const SharpVideo& video) {
  if (video.frames.size() < 2) throw InvalidInput("a sharp video needs at least two frames");
  if (video.timestamps.size() != video.frames.size()) throw InvalidInput("one timestamp per frame required");
  for (std::size_t k = 0; k < video.frames.size(); ++k) {
    require_same_shape(video.frames[k], video.frames.front(), "sharp video frame");
    if (k > 0 && !(video.timestamps[k] > video.timestamps[k - 1])) {
      throw InvalidInput("sharp video timestamps must be strictly increasing");
    }
  }
}

struct SimNoise {
  std::uint64_t seed = 0;
  double threshold_sigma = 0.0;  // relative std-dev of the per-event threshold
  double jitter_sigma = 0.0;     // timestamp jitter std-dev, seconds

  bool enabled() const noexcept { return threshold_sigma > 0.0 || jitter_sigma > 0.0; }
};

struct SimConfig {
  double c_true = 0.3;
  double epsilon_log = kLogFloor;
  int blur_span = 7;
  SimNoise noise;
};

inline void validate(const SimConfig& cfg) {
  require_threshold(cfg.c_true);
  if (!(cfg.epsilon_log > 0.0)) throw InvalidInput("epsilon_log must be positive");
  if (cfg.blur_span < 1) throw InvalidInput("blur_span must be at least 1");
}

// Threshold-crossing simulator. Each pixel keeps a reference log intensity;
// every crossing of reference +- c emits an event at the time the linearly
// interpolated log intensity reaches the crossing, and moves the reference
// by exactly one threshold.
inline EventStream simulate_events(const SharpVideo& video, const SimConfig& cfg, unsigned threads = 0) {
  validate(video);
  validate(cfg);
  const int w = video.width();
  const int h = video.height();
  const std::size_t n_pixels = static_cast<std::size_t>(w) * static_cast<std::size_t>(h);
  std::vector<std::vector<Event>> per_pixel(n_pixels);

  parallel_for(
      n_pixels,
      [&](std::size_t i) {
        std::mt19937_64 rng(cfg.noise.seed ^ (0x9E3779B97F4A7C15ull * (i + 1)));
        std::normal_distribution<double> gauss(0.0, 1.0);
        auto threshold = [&] {
          if (cfg.noise.threshold_sigma <= 0.0) return cfg.c_true;
          return std::max(cfg.c_true * (1.0 + cfg.noise.threshold_sigma * gauss(rng)), 0.05 * cfg.c_true);
        };
        const int x = static_cast<int>(i % static_cast<std::size_t>(w));
        const int y = static_cast<int>(i / static_cast<std::size_t>(w));
        auto log_at = [&](std::size_t k) { return std::log(std::max(video.frames[k][i], cfg.epsilon_log)); };

        double ref = log_at(0);
        double c = threshold();
        for (std::size_t k = 1; k < video.frames.size(); ++k) {
          const double l_prev = log_at(k - 1);
          const double l_cur = log_at(k);
          const double t_prev = video.timestamps[k - 1];
          const double t_cur = video.timestamps[k];
          while (std::abs(l_cur - ref) >= c) {
            const int sigma = l_cur > ref ? 1 : -1;
            const double level = ref + sigma * c;
            const double frac = std::clamp((level - l_prev) / (l_cur - l_prev), 0.0, 1.0);
            double t = t_prev + (t_cur - t_prev) * frac;
            if (cfg.noise.jitter_sigma > 0.0) {
              t = std::clamp(t + cfg.noise.jitter_sigma * gauss(rng), video.timestamps.front(),
                             video.timestamps.back());
            }
            per_pixel[i].push_back({x, y, t, sigma});
            ref = level;
            c = threshold();
          }
        }
      },
      threads);

  std::vector<Event> events;
  std::size_t total = 0;
  for (const auto& v : per_pixel) total += v.size();
  events.reserve(total);
  for (auto& v : per_pixel) events.insert(events.end(), v.begin(), v.end());
  return make_stream(w, h, std::move(events), video.timestamps.front(), video.timestamps.back());
}

// Pixelwise mean of `span` consecutive frames starting at `first`. The
// exposure runs from the first to the last averaged timestamp; a single
// frame gets a one-microsecond exposure centred on its timestamp.
inline Frame make_blurry(const SharpVideo& video, int span, std::size_t first = 0) {
  validate(video);
  if (span < 1) throw InvalidInput("blur span must be at least 1");
  if (first + static_cast<std::size_t>(span) > video.size()) {
    throw InvalidInput("blur span of " + std::to_string(span) + " frames starting at " + std::to_string(first) +
                       " exceeds the " + std::to_string(video.size()) + " available frames");
  }
  Frame out;
  out.pixels = Image(video.width(), video.height());
  for (int k = 0; k < span; ++k) {
    const Image& f = video.frames[first + static_cast<std::size_t>(k)];
    for (std::size_t i = 0; i < f.size(); ++i) out.pixels[i] += f[i];
  }
  for (double& v : out.pixels.pixels()) v /= span;
  const double t0 = video.timestamps[first];
  const double t1 = video.timestamps[first + static_cast<std::size_t>(span) - 1];
  if (span == 1) {
    out.exposure_start = t0 - 0.5e-6;
    out.exposure_end = t0 + 0.5e-6;
  } else {
    out.exposure_start = t0;
    out.exposure_end = t1;
  }
  return out;
}

struct RoundTripReport {
  double psnr_blurry = 0.0;
  double ssim_blurry = 0.0;
  double psnr_recovered = 0.0;  // recovered with the true threshold
  double ssim_recovered = 0.0;
  double c_hat = 0.0;
  double psnr_c_hat = 0.0;  // recovered with the estimated threshold
  double ssim_c_hat = 0.0;
  std::size_t event_count = 0;
  SearchResult search;
};

// Latent image at the ground-truth timestamp, recovered at the frame midpoint
// and rolled out when the two differ.
inline Image latent_at(const Frame& blurry, const TimelineMap& timelines, double c, double t, unsigned threads = 0) {
  const LatentFrame anchor = recover_latent(blurry, timelines, c, threads);
  if (t == anchor.t) return anchor.pixels;
  const double times[] = {t};
  return rollout(anchor, timelines, c, times, 0, threads).frames.front().pixels;
}

// Simulates events and a blurry frame from the centre of the clip, then
// compares blurry, true-threshold and estimated-threshold reconstructions
// against the sharp frame at the blur midpoint.
inline RoundTripReport round_trip(const SharpVideo& video, const SimConfig& cfg, const EnergyParams& params = {},
                                  unsigned threads = 0) {
  validate(video);
  validate(cfg);
  const std::size_t span = static_cast<std::size_t>(cfg.blur_span);
  if (span > video.size()) throw InvalidInput("blur span exceeds the clip length");
  const std::size_t first = (video.size() - span) / 2;
  const std::size_t mid = first + span / 2;
  const Image& truth = video.frames[mid];
  const double t_truth = video.timestamps[mid];

  const EventStream stream = simulate_events(video, cfg, threads);
  const Frame blurry = make_blurry(video, cfg.blur_span, first);
  const TimelineMap timelines = index_events(stream);

  RoundTripReport report;
  report.event_count = stream.events.size();
  const double gt_time = span == 1 ? blurry.midpoint() : t_truth;
  const QualityReport q_blurry = quality(blurry.pixels, truth);
  report.psnr_blurry = q_blurry.psnr_db;
  report.ssim_blurry = q_blurry.ssim;

  const QualityReport q_true = quality(latent_at(blurry, timelines, cfg.c_true, gt_time, threads), truth);
  report.psnr_recovered = q_true.psnr_db;
  report.ssim_recovered = q_true.ssim;

  report.search = find_c(EnergyModel(blurry, timelines, params, threads), threads);
  report.c_hat = report.search.c_hat;
  const QualityReport q_hat = quality(latent_at(blurry, timelines, report.c_hat, gt_time, threads), truth);
  report.psnr_c_hat = q_hat.psnr_db;
  report.ssim_c_hat = q_hat.ssim;
  return report;
}

// Periodic random texture of soft-edged rectangles and discs translated by
// (vx, vy) pixels per frame; a test and demo scene with strong edges.
inline SharpVideo make_translating_texture(int width, int height, int frames, double vx, double vy,
                                           std::uint64_t seed = 1, double frame_interval = 1.0 / 240.0) {
  if (width < 1 || height < 1 || frames < 2) throw InvalidInput("texture clip needs positive size and >= 2 frames");
  const int tw = 2 * width;
  const int th = 2 * height;
  Image texture(tw, th, 0.35);
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  const int shapes = std::max(8, (tw * th) / 900);
  for (int s = 0; s < shapes; ++s) {
    const double cx = unit(rng) * tw, cy = unit(rng) * th;
    const double rx = 4.0 + unit(rng) * 18.0, ry = 4.0 + unit(rng) * 18.0;
    const double value = 0.08 + 0.84 * unit(rng);
    const bool disc = unit(rng) < 0.5;
    for (int y = 0; y < th; ++y) {
      for (int x = 0; x < tw; ++x) {
        double dx = std::abs(x - cx), dy = std::abs(y - cy);
        dx = std::min(dx, tw - dx);
        dy = std::min(dy, th - dy);
        const bool inside = disc ? (dx * dx) / (rx * rx) + (dy * dy) / (ry * ry) <= 1.0 : dx <= rx && dy <= ry;
        if (inside) texture(x, y) = value;
      }
    }
  }
  auto sample = [&](double x, double y) {
    x = std::fmod(std::fmod(x, tw) + tw, tw);
    y = std::fmod(std::fmod(y, th) + th, th);
    const int x0 = static_cast<int>(std::floor(x)), y0 = static_cast<int>(std::floor(y));
    const double fx = x - x0, fy = y - y0;
    const int x1 = (x0 + 1) % tw, y1 = (y0 + 1) % th;
    return (1 - fx) * (1 - fy) * texture(x0, y0) + fx * (1 - fy) * texture(x1, y0) + (1 - fx) * fy * texture(x0, y1) +
           fx * fy * texture(x1, y1);
  };
  SharpVideo video;
  for (int k = 0; k < frames; ++k) {
    Image img(width, height);
    for (int y = 0; y < height; ++y) {
      for (int x = 0; x < width; ++x) img(x, y) = sample(x + vx * k, y + vy * k);
    }
    video.frames.push_back(std::move(img));
    video.timestamps.push_back(k * frame_interval);
  }
  return video;
}

}  // namespace edi
