#pragma once

#include <array>
#include <cmath>
#include <cstddef>

#include "edi/error.hpp"
#include "edi/grid.hpp"

namespace edi {

inline constexpr double kPsnrCapDb = 100.0;

struct QualityReport {
  double psnr_db = 0.0;
  double ssim = 0.0;
};

inline double mse(const Image& a, const Image& b) {
  require_same_shape(a, b, "mse");
  if (a.empty()) throw InvalidInput("mse of empty images");
  double sum = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double d = a[i] - b[i];
    sum += d * d;
  }
  return sum / static_cast<double>(a.size());
}

// 10 log10(peak^2 / MSE), capped at 100 dB for identical inputs.
inline double psnr(const Image& a, const Image& b, double peak = 1.0) {
  const double err = mse(a, b);
  if (err == 0.0) return kPsnrCapDb;
  return std::min(kPsnrCapDb, 10.0 * std::log10(peak * peak / err));
}

namespace detail {
inline constexpr int kSsimWindow = 11;

inline std::array<double, kSsimWindow * kSsimWindow> ssim_kernel() {
  constexpr double sigma = 1.5;
  constexpr int r = kSsimWindow / 2;
  std::array<double, kSsimWindow * kSsimWindow> w{};
  double total = 0.0;
  for (int dy = -r; dy <= r; ++dy) {
    for (int dx = -r; dx <= r; ++dx) {
      const double v = std::exp(-(dx * dx + dy * dy) / (2.0 * sigma * sigma));
      w[static_cast<std::size_t>((dy + r) * kSsimWindow + dx + r)] = v;
      total += v;
    }
  }
  for (double& v : w) v /= total;
  return w;
}
}  // namespace detail

// Single-scale SSIM with an 11x11 Gaussian window (sigma 1.5), K1 = 0.01,
// K2 = 0.03, dynamic range 1, averaged over window positions fully inside the image.
inline double ssim(const Image& a, const Image& b) {
  require_same_shape(a, b, "ssim");
  constexpr int n = detail::kSsimWindow;
  if (a.width() < n || a.height() < n) {
    throw InvalidInput("ssim needs images of at least 11x11");
  }
  static const auto kernel = detail::ssim_kernel();
  constexpr double c1 = (0.01 * 1.0) * (0.01 * 1.0);
  constexpr double c2 = (0.03 * 1.0) * (0.03 * 1.0);

  double total = 0.0;
  std::size_t count = 0;
  for (int y0 = 0; y0 + n <= a.height(); ++y0) {
    for (int x0 = 0; x0 + n <= a.width(); ++x0) {
      double mu_a = 0.0, mu_b = 0.0, aa = 0.0, bb = 0.0, ab = 0.0;
      for (int dy = 0; dy < n; ++dy) {
        for (int dx = 0; dx < n; ++dx) {
          const double w = kernel[static_cast<std::size_t>(dy * n + dx)];
          const double va = a(x0 + dx, y0 + dy);
          const double vb = b(x0 + dx, y0 + dy);
          mu_a += w * va;
          mu_b += w * vb;
          aa += w * (va * va);
          bb += w * (vb * vb);
          ab += w * (va * vb);
        }
      }
      const double var_a = aa - mu_a * mu_a;
      const double var_b = bb - mu_b * mu_b;
      const double cov = ab - mu_a * mu_b;
      const double num = (2.0 * mu_a * mu_b + c1) * (2.0 * cov + c2);
      const double den = (mu_a * mu_a + mu_b * mu_b + c1) * (var_a + var_b + c2);
      total += num / den;
      ++count;
    }
  }
  return total / static_cast<double>(count);
}

inline QualityReport quality(const Image& estimate, const Image& reference) {
  return {psnr(estimate, reference), ssim(estimate, reference)};
}

}  // namespace edi
