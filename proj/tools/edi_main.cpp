// edi: command-line front end.
//   edi synth       --video DIR | --generate, --out DIR
//   edi deblur      --events F --frames F [--c C] --out DIR
//   edi reconstruct --events F --frames F [--c C] [--events-per-frame K] --out DIR
//   edi eval        --recovered DIR --ground-truth DIR [--baseline DIR]
//   edi serve       --events F --frames F [--port P] [--ui-dir DIR]
// Any option can also come from a key=value file given with --config
// (e.g. `lambda = -0.5`); flags on the command line win.

#include <cstdint>
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>

#include "edi/commands.hpp"
#include "edi/service.hpp"

namespace {

struct Options {
  std::string events;
  std::string frames;
  double c = 0.0;
  edi::cli::RunConfig run;
  std::string ground_truth;

  // synth
  std::string video_dir;
  double fps = 240.0;
  edi::SimConfig sim;
  bool generate = false;
  int gen_width = 240, gen_height = 180, gen_frames = 21;
  double gen_vx = 2.0, gen_vy = 1.0;
  std::uint64_t gen_seed = 7;

  // eval
  std::string recovered;
  std::string baseline;

  // serve
  std::string host = "127.0.0.1";
  std::string ui_dir;
};

edi::io::SequenceBundle load(const Options& o) {
  auto bundle = edi::io::load_bundle(o.events, o.frames);
  for (const auto& w : bundle.warnings) std::cerr << "warning: " << w << '\n';
  return bundle;
}

void require(bool present, const char* what) {
  if (!present) throw edi::InvalidInput(std::string("missing required option ") + what);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Event-based double integral deblurring and video reconstruction"};
  app.set_config("--config", "", "key=value configuration file");
  app.require_subcommand(1);
  Options o;
  // Options live on the top-level app so unsectioned config keys reach them;
  // subcommands fall through.
  app.add_option("--out", o.run.out_dir, "output directory");
  app.add_option("--threads", o.run.threads, "worker threads (0 = hardware)");
  app.add_option("--events", o.events, "text event file (t x y p)");
  app.add_option("--frames", o.frames, "frame manifest (start end image)");
  app.add_option("--c", o.c, "fixed contrast threshold; estimated per frame when omitted");
  app.add_option("--events-per-frame", o.run.events_per_frame, "events between output frames");
  app.add_option("--lambda", o.run.energy.lambda, "edge term weight (negative)");
  app.add_option("--alpha", o.run.energy.alpha, "edge map decay per exposure duration");
  app.add_option("--c-lo", o.run.energy.c_lo, "lower threshold search bound");
  app.add_option("--c-hi", o.run.energy.c_hi, "upper threshold search bound");
  app.add_option("--tol", o.run.energy.tol, "search tolerance on c");
  app.add_option("--grid-n", o.run.energy.grid_n, "coarse scan points");
  app.add_option("--ground-truth", o.ground_truth,
                 "deblur: `t image` list scored against each latent; eval: ground-truth directory");
  app.add_option("--port", o.run.port, "serve: listen port (0 picks a free port)");
  app.add_option("--host", o.host, "serve: listen address");
  app.add_option("--ui-dir", o.ui_dir, "serve: static files served at /");
  app.add_option("--video", o.video_dir, "synth: directory of sharp frames (frames.txt or sorted PNG/PGM)");
  app.add_option("--fps", o.fps, "synth: frame rate when the directory has no frames.txt");
  app.add_option("--c-true", o.sim.c_true, "synth: simulation contrast threshold");
  app.add_option("--span", o.sim.blur_span, "synth: sharp frames averaged per blurry frame");
  app.add_option("--seed", o.sim.noise.seed, "synth: noise seed");
  app.add_option("--threshold-noise", o.sim.noise.threshold_sigma, "synth: relative threshold std dev");
  app.add_option("--jitter", o.sim.noise.jitter_sigma, "synth: timestamp jitter std dev (s)");
  app.add_flag("--generate", o.generate, "synth: use a generated translating texture instead of --video");
  app.add_option("--width", o.gen_width, "synth --generate: clip width");
  app.add_option("--height", o.gen_height, "synth --generate: clip height");
  app.add_option("--clip-frames", o.gen_frames, "synth --generate: clip length");
  app.add_option("--vx", o.gen_vx, "synth --generate: motion, pixels per frame");
  app.add_option("--vy", o.gen_vy, "synth --generate: motion, pixels per frame");
  app.add_option("--texture-seed", o.gen_seed, "synth --generate: texture seed");
  app.add_option("--recovered", o.recovered, "eval: directory of recovered images");
  app.add_option("--baseline", o.baseline, "eval: optional directory scored against the same truth");

  auto* synth = app.add_subcommand("synth", "simulate events and blurry frames from a sharp clip")->fallthrough();
  auto* deblur = app.add_subcommand("deblur", "recover the sharp latent image of every frame")->fallthrough();
  auto* reconstruct = app.add_subcommand("reconstruct", "high frame rate video from frames and events")->fallthrough();
  auto* eval = app.add_subcommand("eval", "PSNR/SSIM of recovered images against ground truth")->fallthrough();
  auto* serve = app.add_subcommand("serve", "HTTP service for the browser tuner")->fallthrough();

  app.require_subcommand(1);
  CLI11_PARSE(app, argc, argv);

  try {
    if (app.count("--c") > 0) o.run.c = o.c;
    if (synth->parsed()) {
      edi::SharpVideo video;
      if (o.generate) {
        video = edi::make_translating_texture(o.gen_width, o.gen_height, o.gen_frames, o.gen_vx, o.gen_vy, o.gen_seed);
      } else if (!o.video_dir.empty()) {
        video = edi::cli::load_sharp_video(o.video_dir, o.fps);
      } else {
        throw edi::InvalidInput("synth needs --video DIR or --generate");
      }
      const auto report = edi::cli::cli_synth(video, o.sim, o.run.out_dir, o.run.threads);
      std::cout << "wrote " << report["event_count"] << " events and " << report["frames"].size()
                << " blurry frames to " << o.run.out_dir << '\n';
    } else if (deblur->parsed()) {
      require(!o.frames.empty(), "--frames");
      const auto report = edi::cli::cli_deblur(load(o), o.run, o.ground_truth);
      for (const auto& f : report["frames"]) {
        std::cout << f["output"].get<std::string>() << "  c=" << f["c"].get<double>() << " ("
                  << f["c_source"].get<std::string>() << ")";
        if (f.contains("psnr_latent")) {
          std::cout << "  psnr " << f["psnr_blurry"].get<double>() << " -> " << f["psnr_latent"].get<double>();
        }
        std::cout << '\n';
      }
    } else if (reconstruct->parsed()) {
      require(!o.frames.empty(), "--frames");
      const auto report = edi::cli::cli_reconstruct(load(o), o.run);
      std::cout << report["output_frames"] << " frames from " << report["input_frames"] << " inputs (x"
                << report["frame_rate_multiplier"] << ") in " << o.run.out_dir << '\n';
    } else if (eval->parsed()) {
      require(!o.recovered.empty(), "--recovered");
      require(!o.ground_truth.empty(), "--ground-truth");
      const auto result = edi::cli::cli_eval(o.recovered, o.ground_truth, o.baseline,
                                             app.count("--out") > 0 ? o.run.out_dir : std::string{});
      std::cout << result.table;
    } else if (serve->parsed()) {
      require(!o.frames.empty(), "--frames");
      edi::service::TunerService service(load(o), o.run);
      if (!o.ui_dir.empty()) service.mount_ui(o.ui_dir);
      const int port = service.bind(o.host, o.run.port);
      std::cout << "serving on http://" << o.host << ':' << port << std::endl;
      if (!service.listen_after_bind()) throw edi::IoError("server stopped unexpectedly");
    }
  } catch (const edi::Error& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
