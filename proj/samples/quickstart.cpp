// Simulate a blurry frame plus events from a moving texture, recover the
// sharp image, estimate the threshold, and roll out a short video.

#include <cstdio>

#include "edi/edi_model.hpp"
#include "edi/metrics.hpp"
#include "edi/optimizer.hpp"
#include "edi/synth.hpp"

int main() {
  const edi::SharpVideo video = edi::make_translating_texture(120, 90, 9, 2.0, 1.0, 3);
  edi::SimConfig sim;  // c_true 0.3, 7 sharp frames per blurry frame
  const edi::EventStream events = edi::simulate_events(video, sim);
  const edi::Frame blurry = edi::make_blurry(video, sim.blur_span, 1);
  const edi::Image& truth = video.frames[4];

  const edi::LatentFrame sharp = edi::recover_latent(blurry, events, sim.c_true);
  std::printf("%zu events\n", events.events.size());
  std::printf("blurry    psnr %.2f dB\n", edi::psnr(blurry.pixels, truth));
  std::printf("recovered psnr %.2f dB (c = %.2f)\n", edi::psnr(sharp.pixels, truth), sim.c_true);

  const edi::SearchResult search = edi::find_c(blurry, events, edi::EnergyParams{});
  std::printf("estimated c = %.4f after %zu energy evaluations\n", search.c_hat, search.curve.size());

  const auto videos = edi::reconstruct_sequence(std::span(&blurry, 1), events, sim.c_true, 60);
  std::printf("rolled out %zu frames between t = %.5f and %.5f\n", videos[0].frames.size(),
              videos[0].frames.front().t, videos[0].frames.back().t);
}
