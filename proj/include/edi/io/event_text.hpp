#pragma once

// Text event files: one `t x y p` line per event, p in {0, 1}.
// Optional first line `width height`; optional `# coverage t_min t_max`
// comment; other lines starting with '#' are ignored.

#include <algorithm>
#include <charconv>
#include <cstddef>
#include <fstream>
#include <istream>
#include <ostream>
#include <sstream>
#include <string>
#include <string_view>
#include <system_error>
#include <vector>

#include "edi/error.hpp"
#include "edi/event_core.hpp"

namespace edi::io {

struct ParsedEvents {
  EventStream stream;
  bool has_header = false;
  std::size_t inversions = 0;  // out-of-order pairs in the file, fixed by sorting
  std::vector<std::string> warnings;
};

namespace detail {

inline std::vector<std::string_view> split_ws(std::string_view line) {
  std::vector<std::string_view> out;
  std::size_t i = 0;
  while (i < line.size()) {
    while (i < line.size() && (line[i] == ' ' || line[i] == '\t' || line[i] == '\r')) ++i;
    const std::size_t start = i;
    while (i < line.size() && line[i] != ' ' && line[i] != '\t' && line[i] != '\r') ++i;
    if (i > start) out.push_back(line.substr(start, i - start));
  }
  return out;
}

template <typename T>
bool parse_number(std::string_view s, T& out) {
  const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), out);
  return ec == std::errc{} && ptr == s.data() + s.size();
}

inline std::string format_double(double v) {
  char buf[64];
  const auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, ptr);
}

// Pairs i < j with t_i > t_j, counted during a merge sort.
inline std::size_t count_inversions(std::vector<double> v) {
  std::vector<double> tmp(v.size());
  std::size_t count = 0;
  for (std::size_t width = 1; width < v.size(); width *= 2) {
    for (std::size_t lo = 0; lo < v.size(); lo += 2 * width) {
      const std::size_t mid = std::min(lo + width, v.size());
      const std::size_t hi = std::min(lo + 2 * width, v.size());
      std::size_t i = lo, j = mid, k = lo;
      while (i < mid && j < hi) {
        if (v[j] < v[i]) {
          count += mid - i;
          tmp[k++] = v[j++];
        } else {
          tmp[k++] = v[i++];
        }
      }
      while (i < mid) tmp[k++] = v[i++];
      while (j < hi) tmp[k++] = v[j++];
    }
    v.swap(tmp);
  }
  return count;
}

}  // namespace detail

inline ParsedEvents parse_events(std::istream& in) {
  ParsedEvents out;
  std::vector<Event> events;
  std::vector<double> raw_times;
  bool coverage_set = false;
  double t_min = 0.0, t_max = 0.0;
  int width = 0, height = 0;
  bool seen_data = false;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const auto tokens = detail::split_ws(line);
    if (tokens.empty()) continue;
    if (tokens[0].front() == '#') {
      if (tokens.size() == 4 && tokens[1] == "coverage") {
        if (!detail::parse_number(tokens[2], t_min) || !detail::parse_number(tokens[3], t_max) || t_min > t_max) {
          throw FormatError("line " + std::to_string(line_no) + ": malformed coverage comment", line_no);
        }
        coverage_set = true;
      }
      continue;
    }
    if (!seen_data && !out.has_header && tokens.size() == 2) {
      if (!detail::parse_number(tokens[0], width) || !detail::parse_number(tokens[1], height) || width <= 0 ||
          height <= 0) {
        throw FormatError("line " + std::to_string(line_no) + ": malformed `width height` header", line_no);
      }
      out.has_header = true;
      continue;
    }
    seen_data = true;
    Event e;
    int p = 0;
    if (tokens.size() != 4 || !detail::parse_number(tokens[0], e.t) || !detail::parse_number(tokens[1], e.x) ||
        !detail::parse_number(tokens[2], e.y) || !detail::parse_number(tokens[3], p)) {
      throw FormatError("line " + std::to_string(line_no) + ": expected `t x y p`, got `" + line + "`", line_no);
    }
    if (p != 0 && p != 1) {
      throw FormatError("line " + std::to_string(line_no) + ": polarity must be 0 or 1, got " + std::to_string(p),
                        line_no);
    }
    if (e.x < 0 || e.y < 0) {
      throw FormatError("line " + std::to_string(line_no) + ": negative pixel coordinate", line_no);
    }
    e.sigma = p == 1 ? 1 : -1;
    raw_times.push_back(e.t);
    events.push_back(e);
  }

  if (!out.has_header) {
    for (const Event& e : events) {
      width = std::max(width, e.x + 1);
      height = std::max(height, e.y + 1);
    }
  }
  if (!std::is_sorted(raw_times.begin(), raw_times.end())) {
    out.inversions = detail::count_inversions(std::move(raw_times));
    out.warnings.push_back("events were not sorted by time (" + std::to_string(out.inversions) +
                           " inversions); re-sorted on load");
  }
  sort_canonical(events);
  EventStream& s = out.stream;
  s.width = width;
  s.height = height;
  s.events = std::move(events);
  if (coverage_set) {
    s.t_min = t_min;
    s.t_max = t_max;
  } else if (!s.events.empty()) {
    s.t_min = s.events.front().t;
    s.t_max = s.events.back().t;
  }
  if (width > 0 && height > 0) validate(s);
  return out;
}

inline ParsedEvents parse_events(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open event file " + path);
  return parse_events(in);
}

inline ParsedEvents parse_events_string(const std::string& text) {
  std::istringstream in(text);
  return parse_events(in);
}

inline void write_events(std::ostream& out, const EventStream& stream) {
  out << stream.width << ' ' << stream.height << '\n';
  if (stream.has_coverage()) {
    out << "# coverage " << detail::format_double(stream.t_min) << ' ' << detail::format_double(stream.t_max) << '\n';
  }
  std::string line;
  for (const Event& e : stream.events) {
    line.clear();
    line += detail::format_double(e.t);
    line += ' ';
    line += std::to_string(e.x);
    line += ' ';
    line += std::to_string(e.y);
    line += e.sigma > 0 ? " 1\n" : " 0\n";
    out << line;
  }
}

inline void write_events(const std::string& path, const EventStream& stream) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write event file " + path);
  write_events(out, stream);
  if (!out) throw IoError("failed writing event file " + path);
}

}  // namespace edi::io
