#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <string>
#include <vector>

#include "edi/edi_model.hpp"
#include "edi/error.hpp"
#include "edi/event_core.hpp"
#include "edi/grid.hpp"
#include "edi/parallel.hpp"

namespace edi {

// Signed, exponentially time-weighted event accumulation at time t.
struct EdgeMap {
  Image values;
  double t = 0.0;
};

struct EnergyParams {
  double lambda = -0.5;  // weight of the edge term; negative so alignment lowers the energy
  double alpha = 1.0;    // decay rate per exposure duration
  double c_lo = 0.01;
  double c_hi = 1.0;
  double tol = 1e-3;
  int grid_n = 20;
};

inline void validate(const EnergyParams& p) {
  if (!(p.lambda <= 0.0)) throw InvalidInput("lambda must not be positive");
  if (!(p.alpha > 0.0)) throw InvalidInput("alpha must be positive");
  if (!(p.c_lo > 0.0 && p.c_lo < p.c_hi)) throw InvalidInput("search bounds need 0 < c_lo < c_hi");
  if (!(p.tol > 0.0)) throw InvalidInput("tolerance must be positive");
  if (p.grid_n < 3) throw InvalidInput("grid_n must be at least 3");
}

inline EdgeMap edge_map(const TimelineMap& timelines, double t, double alpha, const ExposureWindow& window) {
  require_window(window);
  if (!(alpha > 0.0)) throw InvalidInput("alpha must be positive");
  const double t_norm = window.duration();
  EdgeMap out{Image(timelines.width(), timelines.height()), t};
  for (std::size_t i = 0; i < timelines.pixel_count(); ++i) {
    const PixelTimeline& tl = timelines[i];
    double m = 0.0;
    for (std::size_t k = 0; k < tl.size(); ++k) {
      const double ti = tl.times[k];
      if (ti < window.start || ti > window.end) continue;
      m += tl.sigmas[k] * std::exp(-alpha * std::abs(t - ti) / t_norm);
    }
    out.values[i] = m;
  }
  return out;
}

// Unnormalized Sobel gradient magnitude with replicate padding.
inline Image sobel_magnitude(const Image& img) {
  if (img.width() < 3 || img.height() < 3) {
    throw InvalidInput("sobel needs at least a 3x3 image");
  }
  Image out(img.width(), img.height());
  for (int y = 0; y < img.height(); ++y) {
    for (int x = 0; x < img.width(); ++x) {
      const double tl = img.clamped(x - 1, y - 1), tc = img.clamped(x, y - 1), tr = img.clamped(x + 1, y - 1);
      const double ml = img.clamped(x - 1, y), mr = img.clamped(x + 1, y);
      const double bl = img.clamped(x - 1, y + 1), bc = img.clamped(x, y + 1), br = img.clamped(x + 1, y + 1);
      const double gx = (tr + 2.0 * mr + br) - (tl + 2.0 * ml + bl);
      const double gy = (bl + 2.0 * bc + br) - (tl + 2.0 * tc + tr);
      out(x, y) = std::sqrt(gx * gx + gy * gy);
    }
  }
  return out;
}

// Sobel magnitude scaled so the maximum is 1 (all zeros if flat).
inline Image sobel(const Image& img) {
  Image out = sobel_magnitude(img);
  double peak = 0.0;
  for (double v : out.pixels()) peak = std::max(peak, v);
  if (peak > 0.0) {
    for (double& v : out.pixels()) v /= peak;
  } else {
    std::fill(out.pixels().begin(), out.pixels().end(), 0.0);
  }
  return out;
}

inline double cross_correlation(const Image& a, const Image& b) {
  require_same_shape(a, b, "cross-correlation");
  double sum = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) sum += a[i] * b[i];
  return sum;
}

inline double phi_edge(const Image& latent, const EdgeMap& edges) {
  require_same_shape(latent, edges.values, "phi_edge");
  return cross_correlation(sobel(latent), sobel(edges.values));
}

inline double phi_edge(const LatentFrame& latent, const EdgeMap& edges) { return phi_edge(latent.pixels, edges); }

// Anisotropic L1 total variation with forward differences.
inline double phi_tv(const Image& img) {
  double sum = 0.0;
  for (int y = 0; y < img.height(); ++y) {
    for (int x = 0; x < img.width(); ++x) {
      const double v = img(x, y);
      if (x + 1 < img.width()) sum += std::abs(img(x + 1, y) - v);
      if (y + 1 < img.height()) sum += std::abs(img(x, y + 1) - v);
    }
  }
  return sum;
}

inline double phi_tv(const LatentFrame& latent) { return phi_tv(latent.pixels); }

// Per-frame state for repeated energy evaluation: the level occupancy of
// every pixel and the Sobel map of the event edge image at the midpoint.
class EnergyModel {
 public:
  EnergyModel(Frame blurry, const TimelineMap& timelines, EnergyParams params, unsigned threads = 0)
      : blurry_(std::move(blurry)),
        params_(params),
        threads_(threads),
        integrals_(timelines, blurry_.window(), threads),
        edges_(edge_map(timelines, blurry_.midpoint(), params.alpha, blurry_.window())),
        edge_sobel_(sobel(edges_.values)) {
    validate(params_);
    require_same_shape(blurry_.pixels, Image(timelines.width(), timelines.height()), "frame vs events");
  }

  const EnergyParams& params() const noexcept { return params_; }
  const Frame& blurry() const noexcept { return blurry_; }
  const ExposureIntegrals& integrals() const noexcept { return integrals_; }
  const EdgeMap& edges() const noexcept { return edges_; }
  const Image& edge_sobel() const noexcept { return edge_sobel_; }

  LatentFrame latent(double c) const { return recover_latent(blurry_, integrals_, c, threads_); }

  double operator()(double c) const {
    if (!(c >= params_.c_lo && c <= params_.c_hi)) {
      throw InvalidInput("c = " + std::to_string(c) + " outside [" + std::to_string(params_.c_lo) + ", " +
                         std::to_string(params_.c_hi) + "]");
    }
    const LatentFrame l = latent(c);
    const double n = static_cast<double>(l.pixels.size());
    const double tv = phi_tv(l.pixels) / n;
    if (params_.lambda == 0.0) return tv;
    return tv + params_.lambda * cross_correlation(sobel(l.pixels), edge_sobel_) / n;
  }

 private:
  Frame blurry_;
  EnergyParams params_;
  unsigned threads_;
  ExposureIntegrals integrals_;
  EdgeMap edges_;
  Image edge_sobel_;
};

// TV + lambda * edge correlation of the latent recovered at c, both terms
// divided by the pixel count.
inline double energy(double c, const Frame& blurry, const EventStream& stream, const EnergyParams& params) {
  require_coverage(stream, blurry.window());
  return EnergyModel(blurry, index_events(stream), params)(c);
}

struct CurveSample {
  double c = 0.0;
  double energy = 0.0;
};

struct SearchResult {
  double c_hat = 0.0;
  double energy_hat = 0.0;
  std::vector<CurveSample> grid;     // coarse log-spaced scan
  std::vector<CurveSample> curve;    // every evaluation, scan first
  std::vector<double> bracket_widths;  // golden-section bracket after each step
  bool flat = false;
};

inline std::vector<double> log_grid(double lo, double hi, int n) {
  std::vector<double> out(static_cast<std::size_t>(n));
  const double ratio = std::log(hi / lo);
  for (int k = 0; k < n; ++k) out[static_cast<std::size_t>(k)] = lo * std::exp(ratio * k / (n - 1));
  out.front() = lo;
  out.back() = hi;
  for (double& c : out) c = std::clamp(c, lo, hi);
  return out;
}

// Coarse log-spaced scan over [c_lo, c_hi], then golden-section refinement
// between the neighbours of the best grid point until the bracket is <= tol.
template <typename EnergyFn>
SearchResult minimize_threshold(EnergyFn&& fn, const EnergyParams& params, unsigned threads = 0) {
  validate(params);
  SearchResult result;
  const auto cs = log_grid(params.c_lo, params.c_hi, params.grid_n);
  std::vector<double> es(cs.size());
  parallel_for(
      cs.size(), [&](std::size_t k) { es[k] = fn(cs[k]); }, threads);

  constexpr double inf = std::numeric_limits<double>::infinity();
  std::size_t best = cs.size();
  double lo_e = inf, hi_e = -inf;
  for (std::size_t k = 0; k < cs.size(); ++k) {
    result.grid.push_back({cs[k], es[k]});
    if (!std::isfinite(es[k])) continue;
    if (best == cs.size() || es[k] < es[best]) best = k;
    lo_e = std::min(lo_e, es[k]);
    hi_e = std::max(hi_e, es[k]);
  }
  result.curve = result.grid;
  if (best == cs.size()) {
    throw OptimizationFailure("energy is non-finite at every grid point");
  }
  if (hi_e - lo_e <= 1e-12) {
    result.flat = true;
    result.c_hat = cs.front();
    result.energy_hat = es.front();
    return result;
  }

  double a = cs[best == 0 ? 0 : best - 1];
  double b = cs[std::min(best + 1, cs.size() - 1)];
  result.c_hat = cs[best];
  result.energy_hat = es[best];
  auto eval = [&](double c) {
    c = std::clamp(c, params.c_lo, params.c_hi);
    double e = fn(c);
    if (!std::isfinite(e)) e = inf;
    result.curve.push_back({c, e});
    if (e < result.energy_hat) {
      result.energy_hat = e;
      result.c_hat = c;
    }
    return e;
  };

  const double inv_phi = (std::sqrt(5.0) - 1.0) / 2.0;
  double x1 = b - inv_phi * (b - a);
  double x2 = a + inv_phi * (b - a);
  double f1 = eval(x1);
  double f2 = eval(x2);
  while (b - a > params.tol) {
    if (f1 <= f2) {
      b = x2;
      x2 = x1;
      f2 = f1;
      x1 = b - inv_phi * (b - a);
      f1 = eval(x1);
    } else {
      a = x1;
      x1 = x2;
      f1 = f2;
      x2 = a + inv_phi * (b - a);
      f2 = eval(x2);
    }
    result.bracket_widths.push_back(b - a);
  }
  return result;
}

inline SearchResult find_c(const EnergyModel& model, unsigned threads = 0) {
  return minimize_threshold([&model](double c) { return model(c); }, model.params(), threads);
}

inline SearchResult find_c(const Frame& blurry, const EventStream& stream, const EnergyParams& params,
                           unsigned threads = 0) {
  validate(params);
  require_coverage(stream, blurry.window());
  return find_c(EnergyModel(blurry, index_events(stream), params, threads), threads);
}

}  // namespace edi
