// Acceptance checks 1-8: one PASS/FAIL line each, nonzero exit on any FAIL.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <functional>
#include <random>
#include <sstream>
#include <string>

#include "edi/commands.hpp"
#include "edi/edi_model.hpp"
#include "edi/io/event_text.hpp"
#include "edi/metrics.hpp"
#include "edi/optimizer.hpp"
#include "edi/synth.hpp"

namespace {

using namespace edi;

struct Outcome {
  bool pass = false;
  std::string detail;
};

std::string fmt(const char* f, auto... args) {
  char buf[512];
  std::snprintf(buf, sizeof buf, f, args...);
  return buf;
}

// E(t) = C(t) - C(f) by direct summation over the timeline.
int direct_e(const PixelTimeline& tl, double t, double f) {
  int e = 0;
  for (std::size_t i = 0; i < tl.size(); ++i) {
    if (tl.times[i] <= t) e += tl.sigmas[i];
    if (tl.times[i] <= f) e -= tl.sigmas[i];
  }
  return e;
}

// Midpoint rule on n samples of exp(c E(t)); the integrand is re-evaluated
// whenever a sample passes an event.
double dense_integral(const PixelTimeline& tl, const ExposureWindow& w, double f, double c, long n) {
  const double h = w.duration() / static_cast<double>(n);
  int ref = 0;
  for (std::size_t i = 0; i < tl.size(); ++i) {
    if (tl.times[i] <= f) ref += tl.sigmas[i];
  }
  std::size_t e = 0;
  int cum = 0;
  double value = std::exp(c * (cum - ref));
  double sum = 0.0;
  for (long k = 0; k < n; ++k) {
    const double t = w.start + (static_cast<double>(k) + 0.5) * h;
    if (e < tl.size() && tl.times[e] <= t) {
      for (; e < tl.size() && tl.times[e] <= t; ++e) cum += tl.sigmas[e];
      value = std::exp(c * (cum - ref));
    }
    sum += value;
  }
  return sum / static_cast<double>(n);
}

// Event times on the 1 us sample lattice, so the midpoint rule is exact up
// to rounding; a continuous-time variant is reported alongside.
Outcome integral_oracle() {
  constexpr long kSamples = 1'000'000;
  std::mt19937_64 rng(1001);
  std::uniform_int_distribution<int> count(0, 100), tick(1, kSamples - 1);
  std::uniform_real_distribution<double> cd(0.01, 1.0), unit(0.0, 1.0);
  std::bernoulli_distribution pos(0.5);
  const ExposureWindow w{0.0, 1.0};
  double worst = 0.0, worst_continuous = 0.0;
  for (int trial = 0; trial < 1000; ++trial) {
    const int n = count(rng);
    std::vector<int> ticks(static_cast<std::size_t>(n));
    for (int& v : ticks) v = tick(rng);
    std::sort(ticks.begin(), ticks.end());
    ticks.erase(std::unique(ticks.begin(), ticks.end()), ticks.end());
    PixelTimeline tl;
    for (int v : ticks) tl.push(v * 1e-6, pos(rng) ? 1 : -1);
    const double c = cd(rng);
    const double exact = double_integral_term(tl, w, w.midpoint(), c);
    const double dense = dense_integral(tl, w, w.midpoint(), c, kSamples);
    worst = std::max(worst, std::abs(exact - dense) / dense);

    if (trial % 10 == 0) {
      std::vector<double> times(ticks.size());
      for (double& t : times) t = unit(rng);
      std::sort(times.begin(), times.end());
      PixelTimeline cont;
      for (std::size_t i = 0; i < times.size(); ++i) cont.push(times[i], tl.sigmas[i]);
      const double ex = double_integral_term(cont, w, w.midpoint(), c);
      const double de = dense_integral(cont, w, w.midpoint(), c, kSamples);
      worst_continuous = std::max(worst_continuous, std::abs(ex - de) / de);
    }
  }
  return {worst <= 1e-6, fmt("max rel err %.3g on 1000 lattice timelines (continuous-time subset: %.3g)", worst,
                             worst_continuous)};
}

Outcome zero_event_identity() {
  std::mt19937_64 rng(1002);
  std::uniform_real_distribution<double> cd(0.01, 1.0), v(kLogFloor, 1.0);
  std::uniform_int_distribution<int> byte(1, 255);
  std::size_t mismatches = 0, checked = 0;
  for (int trial = 0; trial < 50; ++trial) {
    Image b(40, 30);
    for (std::size_t i = 0; i < b.size(); ++i) b[i] = trial % 2 ? v(rng) : byte(rng) / 255.0;
    const Frame frame{b, 0.1, 0.1 + 0.01 * (trial + 1)};
    const EventStream empty = make_stream(40, 30, {}, 0.0, 1.0);
    for (double c : {0.01, 1.0, cd(rng)}) {
      const LatentFrame l = recover_latent(frame, empty, c, 1);
      for (std::size_t i = 0; i < b.size(); ++i) mismatches += l.raw[i] != b[i];
      checked += b.size();
    }
  }
  return {mismatches == 0, fmt("%zu of %zu pixels differ (inputs >= log floor %.6f)", mismatches, checked, kLogFloor)};
}

SharpVideo acceptance_clip() { return make_translating_texture(240, 180, 15, 2.0, 1.0, 7); }

Outcome synthetic_round_trip() {
  SimConfig sim;
  sim.c_true = 0.3;
  sim.blur_span = 7;
  const RoundTripReport r = round_trip(acceptance_clip(), sim, {}, 1);
  const double gain = r.psnr_recovered - r.psnr_blurry;
  return {gain >= 5.0, fmt("blurry %.2f dB -> recovered %.2f dB (gain %.2f dB, ssim %.4f -> %.4f, %zu events)",
                           r.psnr_blurry, r.psnr_recovered, gain, r.ssim_blurry, r.ssim_recovered, r.event_count)};
}

Outcome threshold_recovery() {
  const SharpVideo video = acceptance_clip();
  SimConfig sim;
  sim.c_true = 0.3;
  const std::size_t first = (video.size() - 7) / 2, mid = first + 3;
  const Frame blurry = make_blurry(video, 7, first);
  const TimelineMap map = index_events(simulate_events(video, sim));
  const EnergyModel model(blurry, map, EnergyParams{});
  const SearchResult r = find_c(model);

  std::size_t e_min = 0, p_max = 0;
  std::vector<double> psnrs;
  for (std::size_t k = 0; k < r.grid.size(); ++k) {
    psnrs.push_back(psnr(latent_at(blurry, map, r.grid[k].c, video.timestamps[mid]), video.frames[mid]));
    if (r.grid[k].energy < r.grid[e_min].energy) e_min = k;
    if (psnrs[k] > psnrs[p_max]) p_max = k;
  }
  const double rel = std::abs(r.c_hat - 0.3) / 0.3;
  const auto cells = static_cast<long>(e_min) - static_cast<long>(p_max);
  const bool pass = rel <= 0.20 && std::abs(cells) <= 1;
  return {pass, fmt("c_hat %.4f (rel err %.3f); energy min at grid %zu (c %.4f), PSNR peak at grid %zu (c %.4f, %.2f dB)",
                    r.c_hat, rel, e_min, r.grid[e_min].c, p_max, r.grid[p_max].c, psnrs[p_max])};
}

Outcome rollout_consistency() {
  std::mt19937_64 rng(1005);
  std::uniform_real_distribution<double> unit(0.0, 1.0), cd(0.01, 1.0), lv(0.01, 1.0);
  std::uniform_int_distribution<int> count(0, 100);
  double worst = 0.0;
  for (int trial = 0; trial < 100; ++trial) {
    std::vector<Event> ev;
    const int n = count(rng);
    for (int i = 0; i < n; ++i) ev.push_back({0, 0, unit(rng), unit(rng) < 0.5 ? 1 : -1});
    const TimelineMap map = index_events(make_stream(1, 1, ev, 0.0, 1.0));
    const double c = cd(rng), f = unit(rng);
    Image raw(1, 1, lv(rng));
    const LatentFrame anchor = make_latent(raw, f, c);
    std::vector<double> times(8);
    for (double& t : times) t = unit(rng);
    std::sort(times.begin(), times.end());
    const LatentVideo video = rollout(anchor, map, c, times);
    for (const LatentFrame& lf : video.frames) {
      const double back = std::exp(std::log(lf.raw[0]) - c * direct_e(map[0], lf.t, f));
      worst = std::max(worst, std::abs(back - anchor.raw[0]) / anchor.raw[0]);
    }
  }
  return {worst <= 1e-9, fmt("max rel deviation %.3g over 100 timelines x 8 samples", worst)};
}

Outcome frame_rate_contract() {
  namespace fs = std::filesystem;
  const fs::path dir = fs::temp_directory_path() / "edi_acceptance_frame_rate";
  fs::remove_all(dir);
  fs::create_directories(dir);
  std::mt19937_64 rng(1006);
  std::uniform_int_distribution<int> x(0, 31), y(0, 23);
  std::vector<Event> ev;
  for (int i = 0; i < 12000; ++i) ev.push_back({x(rng), y(rng), (i + 0.5) / 12000.0, i % 2 ? 1 : -1});
  io::write_events((dir / "events.txt").string(), make_stream(32, 24, ev, 0.0, 1.0));
  io::write_bytes((dir / "f.png").string(), io::encode_png(io::Gray8(32, 24, 128)));
  std::ofstream(dir / "frames.txt") << "0 1 f.png\n";
  const auto bundle = io::load_bundle((dir / "events.txt").string(), (dir / "frames.txt").string());
  cli::RunConfig cfg;
  cfg.c = 0.1;
  cfg.events_per_frame = 60;
  cfg.out_dir = (dir / "out").string();
  const auto report = cli::cli_reconstruct(bundle, cfg);
  fs::remove_all(dir);
  const auto n = report["output_frames"].get<std::size_t>();
  return {n >= 198 && n <= 202, fmt("%zu frames from %zu in-window events, multiplier %.1f", n,
                                    report["events_in_windows"].get<std::size_t>(),
                                    report["frame_rate_multiplier"].get<double>())};
}

Outcome metrics_pinning() {
  const double p = psnr(Image(64, 64, 0.3), Image(64, 64, 0.4));
  std::mt19937_64 rng(1007);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  bool self_one = true;
  double asym = 0.0;
  for (int trial = 0; trial < 20; ++trial) {
    Image a(48, 36), b(48, 36);
    for (std::size_t i = 0; i < a.size(); ++i) {
      a[i] = u(rng);
      b[i] = std::clamp(a[i] + 0.3 * (u(rng) - 0.5), 0.0, 1.0);
    }
    self_one = self_one && ssim(a, a) == 1.0;
    asym = std::max(asym, std::abs(ssim(a, b) - ssim(b, a)));
  }
  const bool pass = std::abs(p - 20.0) <= 1e-6 && self_one && asym <= 1e-12;
  return {pass, fmt("psnr %.9f dB, ssim(a,a)==1 %s, max |ssim(a,b)-ssim(b,a)| %.3g", p, self_one ? "yes" : "no", asym)};
}

Outcome format_round_trip() {
  std::mt19937_64 rng(1008);
  std::uniform_int_distribution<int> x(0, 345), y(0, 259);
  std::uniform_real_distribution<double> t(0.0, 30.0);
  std::vector<Event> ev;
  for (int i = 0; i < 10000; ++i) ev.push_back({x(rng), y(rng), t(rng), i % 3 ? 1 : -1});
  sort_canonical(ev);
  const EventStream s = make_stream(346, 260, ev, 0.0, 30.0);
  std::ostringstream first;
  io::write_events(first, s);
  const io::ParsedEvents p = io::parse_events_string(first.str());
  std::ostringstream second;
  io::write_events(second, p.stream);
  const bool same = p.stream.events == s.events && p.stream.width == s.width && p.stream.height == s.height &&
                    p.stream.t_min == s.t_min && p.stream.t_max == s.t_max && first.str() == second.str();
  return {same, fmt("%zu events, %zu bytes, identical %s", p.stream.events.size(), first.str().size(),
                    same ? "yes" : "no")};
}

}  // namespace

int main() {
  struct Check {
    int id;
    const char* name;
    double budget_s;  // 0 = no runtime bound
    std::function<Outcome()> run;
  };
  const Check checks[] = {
      {1, "integral oracle", 30.0, integral_oracle},
      {2, "zero-event identity", 0.0, zero_event_identity},
      {3, "synthetic round trip", 60.0, synthetic_round_trip},
      {4, "threshold recovery", 0.0, threshold_recovery},
      {5, "rollout consistency", 0.0, rollout_consistency},
      {6, "frame-rate contract", 0.0, frame_rate_contract},
      {7, "metrics pinning", 0.0, metrics_pinning},
      {8, "format round trip", 0.0, format_round_trip},
  };
  int failures = 0;
  for (const Check& check : checks) {
    const auto t0 = std::chrono::steady_clock::now();
    Outcome out;
    try {
      out = check.run();
    } catch (const std::exception& e) {
      out = {false, std::string("exception: ") + e.what()};
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    if (check.budget_s > 0.0 && secs >= check.budget_s) {
      out.pass = false;
      out.detail += fmt(" [over %.0f s budget]", check.budget_s);
    }
    failures += !out.pass;
    std::printf("%s %d %s: %s (%.2f s)\n", out.pass ? "PASS" : "FAIL", check.id, check.name, out.detail.c_str(), secs);
    std::fflush(stdout);
  }
  return failures == 0 ? 0 : 1;
}
