#pragma once

// HTTP API consumed by the browser tuner:
//   GET  /api/info
//   GET  /api/frame?frame=i&c=..&t=..   PNG of the latent at t (default: midpoint)
//   GET  /api/energy?frame=i&n=20       coarse energy curve
//   POST /api/optimize {"frame": i}     threshold search, one job per frame
//   GET  /api/edges?frame=i&t=..        PNG of the event edge map's Sobel response

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <future>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <tuple>
#include <vector>

#include <httplib.h>
#include <json.hpp>

#include "edi/commands.hpp"
#include "edi/edi_model.hpp"
#include "edi/io/image_io.hpp"
#include "edi/io/manifest.hpp"
#include "edi/optimizer.hpp"

namespace edi::service {

using nlohmann::json;

inline constexpr double kCQuantum = 1e-4;
inline constexpr double kTQuantum = 1e-6;
inline constexpr std::size_t kMaxCachedFrames = 512;

class TunerService {
 public:
  TunerService(io::SequenceBundle bundle, cli::RunConfig cfg)
      : bundle_(std::move(bundle)), cfg_(std::move(cfg)), timelines_(index_events(bundle_.stream)) {
    cli::validate(cfg_);
    models_.resize(bundle_.frames.size());
    model_once_ = std::vector<std::once_flag>(bundle_.frames.size());
    routes();
  }

  TunerService(const TunerService&) = delete;
  TunerService& operator=(const TunerService&) = delete;

  httplib::Server& server() noexcept { return server_; }

  void mount_ui(const std::string& dir) { server_.set_mount_point("/", dir); }

  // Binds to host:port (port 0 picks a free one) and returns the bound port.
  int bind(const std::string& host, int port) {
    if (port == 0) return server_.bind_to_any_port(host);
    if (!server_.bind_to_port(host, port)) throw IoError("cannot bind " + host + ":" + std::to_string(port));
    return port;
  }
  bool listen_after_bind() { return server_.listen_after_bind(); }
  void stop() { server_.stop(); }

  double default_c() const {
    if (cfg_.c) return std::clamp(*cfg_.c, cfg_.energy.c_lo, cfg_.energy.c_hi);
    return std::sqrt(cfg_.energy.c_lo * cfg_.energy.c_hi);
  }

  json info() const {
    json frames = json::array();
    for (std::size_t i = 0; i < bundle_.frames.size(); ++i) {
      const Frame& f = bundle_.frames[i];
      frames.push_back({{"index", i},
                        {"exposure_start", f.exposure_start},
                        {"exposure_end", f.exposure_end},
                        {"midpoint", f.midpoint()},
                        {"partial", static_cast<bool>(bundle_.partial[i])}});
    }
    return {{"width", bundle_.stream.width},
            {"height", bundle_.stream.height},
            {"frames", std::move(frames)},
            {"event_count", bundle_.stream.events.size()},
            {"c_lo", cfg_.energy.c_lo},
            {"c_hi", cfg_.energy.c_hi},
            {"default_c", default_c()},
            {"events_per_frame", cfg_.events_per_frame}};
  }

  // PNG bytes of the latent for anchor frame i; c and t are quantized first so
  // equal cache keys always produce equal bytes.
  std::vector<unsigned char> frame_png(std::size_t i, double c, std::optional<double> t) {
    const FrameKey key{i, std::llround(c / kCQuantum),
                       std::llround(t.value_or(bundle_.frames.at(i).midpoint()) / kTQuantum)};
    {
      std::lock_guard lock(cache_mutex_);
      if (auto it = frame_cache_.find(key); it != frame_cache_.end()) return it->second;
    }
    const double cq = static_cast<double>(std::get<1>(key)) * kCQuantum;
    const double tq = t ? static_cast<double>(std::get<2>(key)) * kTQuantum : bundle_.frames[i].midpoint();
    const EnergyModel& m = model(i);
    LatentFrame latent = m.latent(cq);
    if (tq != latent.t) {
      const double times[] = {tq};
      latent = std::move(rollout(latent, timelines_, cq, times, i, cfg_.threads).frames.front());
    }
    auto png = io::encode_png(latent.pixels);
    std::lock_guard lock(cache_mutex_);
    if (frame_cache_.size() >= kMaxCachedFrames) frame_cache_.clear();
    frame_cache_.emplace(key, png);
    return png;
  }

  std::vector<unsigned char> edges_png(std::size_t i, std::optional<double> t) {
    const Frame& f = bundle_.frames.at(i);
    if (bundle_.partial[i]) require_coverage(bundle_.stream, f.window());
    const EdgeMap edges = edge_map(timelines_, t.value_or(f.midpoint()), cfg_.energy.alpha, f.window());
    return io::encode_png(sobel(edges.values));
  }

  json energy_curve(std::size_t i, int n) {
    EnergyParams p = cfg_.energy;
    p.grid_n = n;
    validate(p);
    const EnergyModel& m = model(i);
    const auto cs = log_grid(p.c_lo, p.c_hi, n);
    std::vector<double> es(cs.size());
    parallel_for(
        cs.size(), [&](std::size_t k) { es[k] = m(cs[k]); }, cfg_.threads);
    json out = json::array();
    for (std::size_t k = 0; k < cs.size(); ++k) out.push_back({{"c", cs[k]}, {"energy", es[k]}});
    return out;
  }

  // Concurrent callers for the same frame share one search.
  SearchResult optimize(std::size_t i) {
    std::shared_future<SearchResult> job;
    {
      std::lock_guard lock(optimize_mutex_);
      auto it = optimize_jobs_.find(i);
      if (it == optimize_jobs_.end()) {
        std::packaged_task<SearchResult()> task([this, i] { return find_c(model(i), cfg_.threads); });
        job = task.get_future().share();
        optimize_jobs_.emplace(i, job);
        ++optimize_runs_;
        std::thread(std::move(task)).detach();
      } else {
        job = it->second;
      }
    }
    try {
      return job.get();
    } catch (...) {
      std::lock_guard lock(optimize_mutex_);
      optimize_jobs_.erase(i);
      throw;
    }
  }

  std::size_t optimize_runs() const {
    std::lock_guard lock(optimize_mutex_);
    return optimize_runs_;
  }

  const io::SequenceBundle& bundle() const noexcept { return bundle_; }
  const cli::RunConfig& config() const noexcept { return cfg_; }

 private:
  using FrameKey = std::tuple<std::size_t, long long, long long>;

  struct HttpError {
    int status;
    json body;
  };

  // Partial frames raise the same coverage error as the offline commands.
  const EnergyModel& model(std::size_t i) {
    if (bundle_.partial.at(i)) require_coverage(bundle_.stream, bundle_.frames[i].window());
    std::call_once(model_once_.at(i), [&] {
      models_[i] = std::make_unique<EnergyModel>(bundle_.frames[i], timelines_, cfg_.energy, cfg_.threads);
    });
    return *models_[i];
  }

  std::size_t frame_param(const httplib::Request& req) const {
    const std::string raw = req.has_param("frame") ? req.get_param_value("frame") : "0";
    std::size_t i = 0;
    if (!io::detail::parse_number(raw, i)) throw HttpError{400, {{"error", "frame must be a non-negative integer"}}};
    if (i >= bundle_.frames.size()) {
      throw HttpError{404, {{"error", "unknown frame " + raw}, {"frame_count", bundle_.frames.size()}}};
    }
    return i;
  }

  static std::optional<double> double_param(const httplib::Request& req, const char* name) {
    if (!req.has_param(name)) return std::nullopt;
    double v = 0.0;
    if (!io::detail::parse_number(req.get_param_value(name), v) || !std::isfinite(v)) {
      throw HttpError{400, {{"error", std::string(name) + " must be a finite number"}}};
    }
    return v;
  }

  double c_param(const httplib::Request& req) const {
    const double c = double_param(req, "c").value_or(default_c());
    if (c < cfg_.energy.c_lo || c > cfg_.energy.c_hi) {
      throw HttpError{400,
                      {{"error", "c outside bounds"}, {"c", c}, {"c_lo", cfg_.energy.c_lo}, {"c_hi", cfg_.energy.c_hi}}};
    }
    return c;
  }

  template <typename Handler>
  static void guarded(httplib::Response& res, Handler&& handler) {
    try {
      handler();
    } catch (const HttpError& e) {
      res.status = e.status;
      res.set_content(e.body.dump(), "application/json");
    } catch (const Error& e) {
      res.status = 422;
      res.set_content(json{{"error", e.what()}}.dump(), "application/json");
    } catch (const std::exception& e) {
      res.status = 500;
      res.set_content(json{{"error", e.what()}}.dump(), "application/json");
    }
  }

  static void send_png(httplib::Response& res, const std::vector<unsigned char>& png) {
    res.set_content(std::string(png.begin(), png.end()), "image/png");
  }

  void routes() {
    server_.Get("/api/info", [this](const httplib::Request&, httplib::Response& res) {
      res.set_content(info().dump(), "application/json");
    });
    server_.Get("/api/frame", [this](const httplib::Request& req, httplib::Response& res) {
      guarded(res, [&] {
        const std::size_t i = frame_param(req);
        const double c = c_param(req);
        send_png(res, frame_png(i, c, double_param(req, "t")));
      });
    });
    server_.Get("/api/edges", [this](const httplib::Request& req, httplib::Response& res) {
      guarded(res, [&] {
        const std::size_t i = frame_param(req);
        send_png(res, edges_png(i, double_param(req, "t")));
      });
    });
    server_.Get("/api/energy", [this](const httplib::Request& req, httplib::Response& res) {
      guarded(res, [&] {
        const std::size_t i = frame_param(req);
        int n = cfg_.energy.grid_n;
        if (req.has_param("n") && (!io::detail::parse_number(req.get_param_value("n"), n) || n < 3 || n > 400)) {
          throw HttpError{400, {{"error", "n must be an integer in [3, 400]"}}};
        }
        res.set_content(energy_curve(i, n).dump(), "application/json");
      });
    });
    server_.Post("/api/optimize", [this](const httplib::Request& req, httplib::Response& res) {
      guarded(res, [&] {
        json body = json::parse(req.body.empty() ? "{}" : req.body, nullptr, false);
        if (body.is_discarded() || !body.is_object()) throw HttpError{400, {{"error", "body must be a JSON object"}}};
        const json frame = body.value("frame", json(0));
        if (!frame.is_number_unsigned()) throw HttpError{400, {{"error", "frame must be a non-negative integer"}}};
        const auto i = frame.get<std::size_t>();
        if (i >= bundle_.frames.size()) {
          throw HttpError{404, {{"error", "unknown frame " + std::to_string(i)}, {"frame_count", bundle_.frames.size()}}};
        }
        json out = cli::search_json(optimize(i));
        out["frame"] = i;
        res.set_content(out.dump(), "application/json");
      });
    });
  }

  io::SequenceBundle bundle_;
  cli::RunConfig cfg_;
  TimelineMap timelines_;
  std::vector<std::unique_ptr<EnergyModel>> models_;
  std::vector<std::once_flag> model_once_;
  std::mutex cache_mutex_;
  std::map<FrameKey, std::vector<unsigned char>> frame_cache_;
  mutable std::mutex optimize_mutex_;
  std::map<std::size_t, std::shared_future<SearchResult>> optimize_jobs_;
  std::size_t optimize_runs_ = 0;
  httplib::Server server_;
};

}  // namespace edi::service
