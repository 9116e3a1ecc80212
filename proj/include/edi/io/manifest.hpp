#pragma once

// Frame manifests (`exposure_start exposure_end image_path` per line) and
// timestamped image lists (`t image_path` per line). Image paths are
// relative to the manifest's directory unless absolute.

#include <cstddef>
#include <filesystem>
#include <fstream>
#include <string>
#include <utility>
#include <vector>

#include "edi/edi_model.hpp"
#include "edi/error.hpp"
#include "edi/event_core.hpp"
#include "edi/io/event_text.hpp"
#include "edi/io/image_io.hpp"

namespace edi::io {

struct FramesManifest {
  std::vector<Frame> frames;
  std::vector<std::string> image_paths;
  std::vector<std::pair<std::size_t, std::size_t>> overlaps;  // frame pairs whose exposures intersect
};

namespace detail {

inline std::string resolve(const std::filesystem::path& base, std::string_view rel) {
  std::filesystem::path p(rel);
  return (p.is_absolute() ? p : base / p).string();
}

inline std::vector<std::pair<std::size_t, std::vector<std::string_view>>> read_lines(const std::string& path,
                                                                                     std::vector<std::string>& store) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open manifest " + path);
  std::string line;
  while (std::getline(in, line)) store.push_back(line);
  std::vector<std::pair<std::size_t, std::vector<std::string_view>>> out;
  for (std::size_t i = 0; i < store.size(); ++i) {
    auto tokens = split_ws(store[i]);
    if (tokens.empty() || tokens[0].front() == '#') continue;
    out.emplace_back(i + 1, std::move(tokens));
  }
  return out;
}

}  // namespace detail

inline std::vector<std::pair<std::size_t, std::size_t>> find_overlaps(const std::vector<Frame>& frames) {
  std::vector<std::pair<std::size_t, std::size_t>> out;
  for (std::size_t i = 0; i < frames.size(); ++i) {
    for (std::size_t j = i + 1; j < frames.size(); ++j) {
      if (frames[i].exposure_start < frames[j].exposure_end && frames[j].exposure_start < frames[i].exposure_end) {
        out.emplace_back(i, j);
      }
    }
  }
  return out;
}

inline FramesManifest parse_frames_manifest(const std::string& path) {
  const std::filesystem::path base = std::filesystem::path(path).parent_path();
  std::vector<std::string> store;
  FramesManifest out;
  for (const auto& [line_no, tokens] : detail::read_lines(path, store)) {
    double start = 0.0, end = 0.0;
    if (tokens.size() != 3 || !detail::parse_number(tokens[0], start) || !detail::parse_number(tokens[1], end)) {
      throw FormatError(path + ":" + std::to_string(line_no) + ": expected `exposure_start exposure_end image_path`",
                        line_no);
    }
    if (!(start < end)) {
      throw FormatError(path + ":" + std::to_string(line_no) + ": exposure start must precede its end", line_no);
    }
    const std::string image_path = detail::resolve(base, tokens[2]);
    Frame frame{read_image(image_path), start, end};
    if (!out.frames.empty()) require_same_shape(frame.pixels, out.frames.front().pixels, "manifest frame");
    out.frames.push_back(std::move(frame));
    out.image_paths.push_back(image_path);
  }
  out.overlaps = find_overlaps(out.frames);
  return out;
}

inline void write_frames_manifest(const std::string& path, const std::vector<Frame>& frames,
                                  const std::vector<std::string>& relative_images) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write manifest " + path);
  for (std::size_t i = 0; i < frames.size(); ++i) {
    out << detail::format_double(frames[i].exposure_start) << ' ' << detail::format_double(frames[i].exposure_end)
        << ' ' << relative_images[i] << '\n';
  }
}

struct TimedImage {
  double t = 0.0;
  std::string path;
};

inline std::vector<TimedImage> parse_timed_list(const std::string& path) {
  const std::filesystem::path base = std::filesystem::path(path).parent_path();
  std::vector<std::string> store;
  std::vector<TimedImage> out;
  for (const auto& [line_no, tokens] : detail::read_lines(path, store)) {
    double t = 0.0;
    if (tokens.size() != 2 || !detail::parse_number(tokens[0], t)) {
      throw FormatError(path + ":" + std::to_string(line_no) + ": expected `timestamp image_path`", line_no);
    }
    out.push_back({t, detail::resolve(base, tokens[1])});
  }
  return out;
}

inline void write_timed_list(const std::string& path, const std::vector<TimedImage>& items) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write " + path);
  for (const auto& item : items) out << detail::format_double(item.t) << ' ' << item.path << '\n';
}

// Events plus the frames they accompany.
struct SequenceBundle {
  std::string events_path;
  std::string frames_manifest_path;
  EventStream stream;
  std::vector<Frame> frames;
  std::vector<std::string> image_paths;
  std::vector<std::pair<std::size_t, std::size_t>> overlaps;
  std::vector<bool> partial;  // exposure not fully inside the event coverage
  std::vector<std::string> warnings;
};

// An empty events_path yields a stream without events or coverage.
inline SequenceBundle load_bundle(const std::string& events_path, const std::string& frames_manifest_path) {
  SequenceBundle b;
  b.events_path = events_path;
  b.frames_manifest_path = frames_manifest_path;
  FramesManifest manifest = parse_frames_manifest(frames_manifest_path);
  if (manifest.frames.empty()) throw InvalidInput("frame manifest " + frames_manifest_path + " lists no frames");
  b.frames = std::move(manifest.frames);
  b.image_paths = std::move(manifest.image_paths);
  b.overlaps = std::move(manifest.overlaps);
  const int w = b.frames.front().width();
  const int h = b.frames.front().height();
  if (!events_path.empty()) {
    ParsedEvents parsed = parse_events(events_path);
    b.warnings = std::move(parsed.warnings);
    b.stream = std::move(parsed.stream);
    if (parsed.has_header && (b.stream.width != w || b.stream.height != h)) {
      throw DimensionMismatch("events are " + std::to_string(b.stream.width) + "x" +
                              std::to_string(b.stream.height) + " but frames are " + std::to_string(w) + "x" +
                              std::to_string(h));
    }
  }
  b.stream.width = w;
  b.stream.height = h;
  validate(b.stream);
  for (const Frame& f : b.frames) b.partial.push_back(!b.stream.covers(f.exposure_start, f.exposure_end));
  for (const auto& [i, j] : b.overlaps) {
    b.warnings.push_back("exposures of frames " + std::to_string(i) + " and " + std::to_string(j) + " overlap");
  }
  return b;
}

}  // namespace edi::io
