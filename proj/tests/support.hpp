#pragma once

// Test-only oracles and helpers. Nothing here calls into the code paths it
// is used to check.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <numbers>
#include <random>
#include <string>
#include <vector>

#include "pathdyn/field.hpp"

namespace pathdyn::test {

/// Pearson correlation over indices where both inputs are finite.
inline double pearson(const std::vector<double>& a, const std::vector<double>& b) {
  double sa = 0, sb = 0, n = 0;
  for (std::size_t i = 0; i < a.size(); ++i)
    if (std::isfinite(a[i]) && std::isfinite(b[i])) sa += a[i], sb += b[i], n += 1;
  const double ma = sa / n, mb = sb / n;
  double c = 0, va = 0, vb = 0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    if (!std::isfinite(a[i]) || !std::isfinite(b[i])) continue;
    c += (a[i] - ma) * (b[i] - mb);
    va += (a[i] - ma) * (a[i] - ma);
    vb += (b[i] - mb) * (b[i] - mb);
  }
  return c / std::sqrt(va * vb);
}

/// Percentile by full sort and linear interpolation between order statistics.
inline double sorted_percentile(std::vector<double> v, double q) {
  std::sort(v.begin(), v.end());
  const double pos = q / 100.0 * static_cast<double>(v.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(pos));
  const auto hi = std::min(lo + 1, v.size() - 1);
  const double frac = pos - std::floor(pos);
  return frac == 0.0 ? v[lo] : v[lo] + frac * (v[hi] - v[lo]);
}

/// Bins values by hand: equal-width bins on [lo, hi], outliers to the edges.
inline std::vector<double> hand_bin(const std::vector<double>& values, double lo, double hi,
                                    std::size_t n) {
  std::vector<double> counts(n, 0.0);
  const double width = (hi - lo) / static_cast<double>(n);
  for (double v : values) {
    std::size_t k = 0;
    while (k + 1 < n && v >= lo + width * static_cast<double>(k + 1)) ++k;
    counts[k] += 1.0;
  }
  return counts;
}

/// JSD written directly from its definition with the mixture distribution.
inline double jsd_by_definition(const std::vector<double>& p, const std::vector<double>& q) {
  double kl_p = 0.0, kl_q = 0.0;
  for (std::size_t i = 0; i < p.size(); ++i) {
    const double m = (p[i] + q[i]) / 2.0;
    if (p[i] > 0) kl_p += p[i] * std::log(p[i] / m);
    if (q[i] > 0) kl_q += q[i] * std::log(q[i] / m);
  }
  return 0.5 * kl_p + 0.5 * kl_q;
}

/// Incompressible random flow from a streamfunction made of a few Fourier
/// modes; velocity = (dpsi/dy, -dpsi/dx).
inline FlowFunction random_smooth_flow(std::uint32_t seed) {
  std::mt19937 rng(seed);
  std::uniform_real_distribution<double> amp(-0.3, 0.3), phase(0.0, 2.0 * std::numbers::pi);
  struct Mode {
    double a, kx, ky, px, py;
  };
  std::vector<Mode> modes;
  for (int kx = 1; kx <= 2; ++kx)
    for (int ky = 1; ky <= 2; ++ky) modes.push_back({amp(rng), double(kx), double(ky), phase(rng), phase(rng)});
  return [modes](Vec2 p, double) {
    Vec2 v{};
    for (const auto& m : modes) {
      const double sx = std::sin(m.kx * p.x + m.px), cx = std::cos(m.kx * p.x + m.px);
      const double sy = std::sin(m.ky * p.y + m.py), cy = std::cos(m.ky * p.y + m.py);
      v.x += m.a * sx * m.ky * cy;   // dpsi/dy
      v.y -= m.a * m.kx * cx * sy;   // -dpsi/dx
    }
    return v;
  };
}

/// Unique scratch directory under the system temp dir, removed on scope exit.
class TempDir {
 public:
  explicit TempDir(const std::string& tag) {
    std::random_device rd;
    path_ = std::filesystem::temp_directory_path() /
            ("pathdyn-" + tag + "-" + std::to_string(rd()) + std::to_string(rd()));
    std::filesystem::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;

  std::filesystem::path operator/(const std::string& name) const { return path_ / name; }
  const std::filesystem::path& path() const { return path_; }

 private:
  std::filesystem::path path_;
};

inline std::vector<std::uint8_t> read_bytes(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

}  // namespace pathdyn::test
