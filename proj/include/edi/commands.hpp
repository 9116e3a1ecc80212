#pragma once

// The work behind each `edi` subcommand. Every command writes its outputs
// under an output directory and returns the JSON report it wrote.

#include <algorithm>
#include <cstddef>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "edi/edi_model.hpp"
#include "edi/error.hpp"
#include "edi/event_core.hpp"
#include "edi/io/event_text.hpp"
#include "edi/io/image_io.hpp"
#include "edi/io/manifest.hpp"
#include "edi/metrics.hpp"
#include "edi/optimizer.hpp"
#include "edi/synth.hpp"

namespace edi::cli {

using nlohmann::json;

struct RunConfig {
  std::optional<double> c;  // fixed threshold; estimated per frame when absent
  EnergyParams energy;
  std::size_t events_per_frame = 60;
  std::string out_dir = "out";
  int port = 8080;
  unsigned threads = 0;
};

inline void validate(const RunConfig& cfg) {
  validate(cfg.energy);
  if (cfg.events_per_frame < 1) throw InvalidInput("events_per_frame must be at least 1");
  if (cfg.c) require_threshold(*cfg.c);
}

inline json curve_json(const std::vector<CurveSample>& curve) {
  json out = json::array();
  for (const auto& s : curve) out.push_back({{"c", s.c}, {"energy", s.energy}});
  return out;
}

inline json search_json(const SearchResult& r) {
  return {{"c_hat", r.c_hat},
          {"energy_hat", r.energy_hat},
          {"flat", r.flat},
          {"grid", curve_json(r.grid)},
          {"curve", curve_json(r.curve)}};
}

namespace detail {

inline std::filesystem::path prepare_dir(const std::string& dir) {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec || !std::filesystem::is_directory(dir)) {
    throw IoError("cannot create output directory " + dir + (ec ? ": " + ec.message() : ""));
  }
  const auto probe = std::filesystem::path(dir) / ".edi_write_probe";
  {
    std::ofstream out(probe);
    if (!out) throw IoError("output directory " + dir + " is not writable");
  }
  std::filesystem::remove(probe, ec);
  return dir;
}

inline void write_json(const std::filesystem::path& path, const json& j) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write " + path.string());
  out << j.dump(2) << '\n';
  if (!out) throw IoError("failed writing " + path.string());
}

inline std::string numbered(const char* prefix, std::size_t i, const char* ext) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%s_%06zu%s", prefix, i, ext);
  return buf;
}

inline void require_covered(const io::SequenceBundle& bundle) {
  for (std::size_t i = 0; i < bundle.frames.size(); ++i) {
    if (bundle.partial[i]) require_coverage(bundle.stream, bundle.frames[i].window());
  }
}

struct Threshold {
  double c = 0.0;
  std::optional<SearchResult> search;
};

inline Threshold choose_threshold(const Frame& frame, const TimelineMap& timelines, const RunConfig& cfg) {
  if (cfg.c) return {*cfg.c, std::nullopt};
  SearchResult r = find_c(EnergyModel(frame, timelines, cfg.energy, cfg.threads), cfg.threads);
  return {r.c_hat, std::move(r)};
}

inline std::vector<std::string> list_images(const std::string& dir) {
  if (!std::filesystem::is_directory(dir)) throw IoError(dir + " is not a directory");
  std::vector<std::string> out;
  for (const auto& entry : std::filesystem::directory_iterator(dir)) {
    if (!entry.is_regular_file()) continue;
    const std::string ext = io::detail::lower_extension(entry.path().string());
    if (ext == ".png" || ext == ".pgm") out.push_back(entry.path().string());
  }
  std::sort(out.begin(), out.end());
  return out;
}

}  // namespace detail

// Ground truth for deblur reports: `t image_path` lines, one per input frame.
inline json cli_deblur(const io::SequenceBundle& bundle, const RunConfig& cfg,
                       const std::string& ground_truth_path = {}) {
  validate(cfg);
  detail::require_covered(bundle);
  const auto out_dir = detail::prepare_dir(cfg.out_dir);
  std::vector<io::TimedImage> truth;
  if (!ground_truth_path.empty()) {
    truth = io::parse_timed_list(ground_truth_path);
    if (truth.size() != bundle.frames.size()) {
      throw InvalidInput("ground truth lists " + std::to_string(truth.size()) + " images for " +
                         std::to_string(bundle.frames.size()) + " frames");
    }
  }
  const TimelineMap timelines = index_events(bundle.stream);
  json frames = json::array();
  for (std::size_t i = 0; i < bundle.frames.size(); ++i) {
    const Frame& frame = bundle.frames[i];
    const auto threshold = detail::choose_threshold(frame, timelines, cfg);
    const LatentFrame latent = recover_latent(frame, timelines, threshold.c, cfg.threads);
    const std::string name = detail::numbered("latent", i, ".png");
    io::write_image((out_dir / name).string(), latent.pixels);
    json entry = {{"index", i},
                  {"input", bundle.image_paths[i]},
                  {"output", name},
                  {"exposure_start", frame.exposure_start},
                  {"exposure_end", frame.exposure_end},
                  {"t", latent.t},
                  {"c", threshold.c},
                  {"c_source", threshold.search ? "optimized" : "fixed"},
                  {"saturated_pixels", latent.saturated}};
    if (threshold.search) entry["search"] = search_json(*threshold.search);
    if (!truth.empty()) {
      const Image gt = io::read_image(truth[i].path);
      const Image exported = io::from_gray8(io::to_gray8(
          truth[i].t == latent.t ? latent.pixels : latent_at(frame, timelines, threshold.c, truth[i].t, cfg.threads)));
      const QualityReport qb = quality(frame.pixels, gt);
      const QualityReport ql = quality(exported, gt);
      entry["ground_truth"] = truth[i].path;
      entry["psnr_blurry"] = qb.psnr_db;
      entry["ssim_blurry"] = qb.ssim;
      entry["psnr_latent"] = ql.psnr_db;
      entry["ssim_latent"] = ql.ssim;
    }
    frames.push_back(std::move(entry));
  }
  json report = {{"command", "deblur"},
                 {"events", bundle.events_path},
                 {"frames_manifest", bundle.frames_manifest_path},
                 {"event_count", bundle.stream.events.size()},
                 {"warnings", bundle.warnings},
                 {"frames", std::move(frames)}};
  detail::write_json(out_dir / "deblur_report.json", report);
  return report;
}

inline json cli_reconstruct(const io::SequenceBundle& bundle, const RunConfig& cfg) {
  validate(cfg);
  detail::require_covered(bundle);
  const auto out_dir = detail::prepare_dir(cfg.out_dir);
  const auto frame_dir = detail::prepare_dir((out_dir / "frames").string());
  const TimelineMap timelines = index_events(bundle.stream);

  std::vector<double> thresholds;
  json per_frame = json::array();
  std::size_t in_window = 0;
  for (std::size_t i = 0; i < bundle.frames.size(); ++i) {
    const auto threshold = detail::choose_threshold(bundle.frames[i], timelines, cfg);
    thresholds.push_back(threshold.c);
    const ExposureWindow w = bundle.frames[i].window();
    const auto lo = std::lower_bound(bundle.stream.events.begin(), bundle.stream.events.end(), w.start,
                                     [](const Event& e, double t) { return e.t < t; });
    const auto hi = std::upper_bound(bundle.stream.events.begin(), bundle.stream.events.end(), w.end,
                                     [](double t, const Event& e) { return t < e.t; });
    const auto events = static_cast<std::size_t>(hi - lo);
    in_window += events;
    json entry = {{"index", i},
                  {"c", threshold.c},
                  {"c_source", threshold.search ? "optimized" : "fixed"},
                  {"events_in_window", events}};
    if (threshold.search) entry["search"] = search_json(*threshold.search);
    per_frame.push_back(std::move(entry));
  }

  std::vector<double> samples;
  for (const Frame& f : bundle.frames) {
    const auto times = default_sample_times(bundle.stream, f.window(), cfg.events_per_frame);
    samples.insert(samples.end(), times.begin(), times.end());
  }
  const auto videos = reconstruct_sequence(bundle.frames, bundle.stream, thresholds, samples, cfg.threads);

  json outputs = json::array();
  std::size_t n = 0;
  for (const LatentVideo& video : videos) {
    for (const LatentFrame& lf : video.frames) {
      const std::string name = detail::numbered("frame", n, ".png");
      io::write_image((frame_dir / name).string(), lf.pixels);
      outputs.push_back({{"index", n},
                         {"file", "frames/" + name},
                         {"t", lf.t},
                         {"anchor", video.source_frame_id},
                         {"c", lf.c_used},
                         {"saturated_pixels", lf.saturated}});
      ++n;
    }
  }
  const double multiplier = static_cast<double>(n) / static_cast<double>(bundle.frames.size());
  json report = {{"command", "reconstruct"},
                 {"events", bundle.events_path},
                 {"frames_manifest", bundle.frames_manifest_path},
                 {"events_per_frame", cfg.events_per_frame},
                 {"events_in_windows", in_window},
                 {"input_frames", bundle.frames.size()},
                 {"output_frames", n},
                 {"frame_rate_multiplier", multiplier},
                 {"input_frame_info", std::move(per_frame)},
                 {"frames", std::move(outputs)}};
  detail::write_json(out_dir / "reconstruction.json", report);
  return report;
}

// A directory of sharp frames: either `frames.txt` (`t image_path` lines) or
// PNG/PGM files in name order spaced 1/fps apart.
inline SharpVideo load_sharp_video(const std::string& dir, double fps) {
  SharpVideo video;
  const auto list = std::filesystem::path(dir) / "frames.txt";
  if (std::filesystem::exists(list)) {
    for (const auto& item : io::parse_timed_list(list.string())) {
      video.frames.push_back(io::read_image(item.path));
      video.timestamps.push_back(item.t);
    }
  } else {
    if (!(fps > 0.0)) throw InvalidInput("fps must be positive");
    const auto files = detail::list_images(dir);
    for (std::size_t i = 0; i < files.size(); ++i) {
      video.frames.push_back(io::read_image(files[i]));
      video.timestamps.push_back(static_cast<double>(i) / fps);
    }
  }
  validate(video);
  return video;
}

// Writes events.txt, blurry/ + frames.txt (one blurry frame per blur_span
// consecutive sharp frames) and gt/ + gt.txt (the sharp frame at each
// blurry midpoint).
inline json cli_synth(const SharpVideo& video, const SimConfig& sim, const std::string& out_dir_str,
                      unsigned threads = 0) {
  validate(video);
  validate(sim);
  const auto out_dir = detail::prepare_dir(out_dir_str);
  detail::prepare_dir((out_dir / "blurry").string());
  detail::prepare_dir((out_dir / "gt").string());
  const EventStream stream = simulate_events(video, sim, threads);
  io::write_events((out_dir / "events.txt").string(), stream);

  const std::size_t span = static_cast<std::size_t>(sim.blur_span);
  std::vector<Frame> blurry;
  std::vector<std::string> blurry_names;
  std::vector<io::TimedImage> truth;
  json frames = json::array();
  for (std::size_t first = 0; first + span <= video.size(); first += span) {
    const std::size_t k = blurry.size();
    Frame f = make_blurry(video, sim.blur_span, first);
    const std::size_t mid = first + span / 2;
    const std::string bname = detail::numbered("blurry/blurry", k, ".png");
    const std::string gname = detail::numbered("gt/gt", k, ".png");
    io::write_image((out_dir / bname).string(), f.pixels);
    io::write_image((out_dir / gname).string(), video.frames[mid]);
    const double gt_time = span == 1 ? f.midpoint() : video.timestamps[mid];
    frames.push_back({{"index", k},
                      {"exposure_start", f.exposure_start},
                      {"exposure_end", f.exposure_end},
                      {"midpoint", f.midpoint()},
                      {"ground_truth_t", gt_time},
                      {"sharp_frames", {first, first + span - 1}}});
    truth.push_back({gt_time, gname});
    blurry.push_back(std::move(f));
    blurry_names.push_back(bname);
  }
  if (blurry.empty()) throw InvalidInput("clip is shorter than one blur span");
  io::write_frames_manifest((out_dir / "frames.txt").string(), blurry, blurry_names);
  io::write_timed_list((out_dir / "gt.txt").string(), truth);

  json report = {{"command", "synth"},
                 {"c_true", sim.c_true},
                 {"blur_span", sim.blur_span},
                 {"epsilon_log", sim.epsilon_log},
                 {"sharp_frames", video.size()},
                 {"width", video.width()},
                 {"height", video.height()},
                 {"event_count", stream.events.size()},
                 {"frames", std::move(frames)}};
  detail::write_json(out_dir / "synth_report.json", report);
  return report;
}

struct EvalResult {
  json report;
  std::string table;
};

// Pairs images by sorted file name. An optional baseline directory (e.g. the
// blurry inputs) is scored against the same ground truth.
inline EvalResult cli_eval(const std::string& recovered_dir, const std::string& truth_dir,
                           const std::string& baseline_dir = {}, const std::string& out_dir = {}) {
  const auto recovered = detail::list_images(recovered_dir);
  const auto truth = detail::list_images(truth_dir);
  if (recovered.size() != truth.size()) {
    throw InvalidInput("image count mismatch: " + std::to_string(recovered.size()) + " recovered vs " +
                       std::to_string(truth.size()) + " ground truth");
  }
  if (recovered.empty()) throw InvalidInput("no images to evaluate in " + recovered_dir);
  std::vector<std::string> baseline;
  if (!baseline_dir.empty()) {
    baseline = detail::list_images(baseline_dir);
    if (baseline.size() != truth.size()) throw InvalidInput("baseline image count does not match ground truth");
  }

  json rows = json::array();
  std::ostringstream table;
  table << "image                              psnr_db    ssim";
  if (!baseline.empty()) table << "  base_psnr  base_ssim";
  table << '\n';
  double psnr_sum = 0.0, ssim_sum = 0.0, bpsnr_sum = 0.0, bssim_sum = 0.0;
  for (std::size_t i = 0; i < truth.size(); ++i) {
    const Image gt = io::read_image(truth[i]);
    const QualityReport q = quality(io::read_image(recovered[i]), gt);
    psnr_sum += q.psnr_db;
    ssim_sum += q.ssim;
    json row = {{"recovered", recovered[i]}, {"ground_truth", truth[i]}, {"psnr_db", q.psnr_db}, {"ssim", q.ssim}};
    char line[256];
    std::snprintf(line, sizeof line, "%-32s %9.4f %7.4f", std::filesystem::path(recovered[i]).filename().c_str(),
                  q.psnr_db, q.ssim);
    table << line;
    if (!baseline.empty()) {
      const QualityReport b = quality(io::read_image(baseline[i]), gt);
      bpsnr_sum += b.psnr_db;
      bssim_sum += b.ssim;
      row["baseline"] = baseline[i];
      row["baseline_psnr_db"] = b.psnr_db;
      row["baseline_ssim"] = b.ssim;
      std::snprintf(line, sizeof line, " %10.4f %10.4f", b.psnr_db, b.ssim);
      table << line;
    }
    table << '\n';
    rows.push_back(std::move(row));
  }
  const double n = static_cast<double>(truth.size());
  json report = {{"command", "eval"},
                 {"count", truth.size()},
                 {"mean_psnr_db", psnr_sum / n},
                 {"mean_ssim", ssim_sum / n},
                 {"images", std::move(rows)}};
  char line[256];
  std::snprintf(line, sizeof line, "%-32s %9.4f %7.4f", "mean", psnr_sum / n, ssim_sum / n);
  table << line;
  if (!baseline.empty()) {
    report["baseline_mean_psnr_db"] = bpsnr_sum / n;
    report["baseline_mean_ssim"] = bssim_sum / n;
    std::snprintf(line, sizeof line, " %10.4f %10.4f", bpsnr_sum / n, bssim_sum / n);
    table << line;
  }
  table << '\n';
  if (!out_dir.empty()) {
    const auto dir = detail::prepare_dir(out_dir);
    detail::write_json(dir / "metrics.json", report);
    std::ofstream(dir / "metrics.txt") << table.str();
  }
  return {std::move(report), table.str()};
}

}  // namespace edi::cli
