#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <span>
#include <string_view>
#include <vector>

#include "pathdyn/distribution.hpp"
#include "pathdyn/store.hpp"

namespace pathdyn {

/// Everything needed to re-run a similarity query.
struct QueryProvenance {
  Region region;
  BinningPolicy policy;
  IntegrationParams params;
  Fingerprint field_fingerprint{};

  friend bool operator==(const QueryProvenance&, const QueryProvenance&) = default;
};

/// Per-seed JSD(xi_p, xi_R) / ln 2 in [0, 1]; NaN where a seed has no valid
/// sample.
struct DivergenceField {
  GridSpec spec;  // seed layout
  std::vector<double> values;
  QueryProvenance query;

  /// Seed with the largest finite value, or values.size() if none.
  std::size_t argmax() const;
};

struct SimilarityTiming {
  double reference_ms = 0.0;
  double field_ms = 0.0;
};

/// Builds xi_R once, then evaluates every seed against it in parallel.
/// Only reads the records; no velocity data is involved.
DivergenceField similarity_field(std::span<const DynamicsView> records, const GridSpec& seeds,
                                 const Region& region, const BinningPolicy& policy,
                                 SimilarityTiming* timing = nullptr);
DivergenceField similarity_field(const DynamicsCache& cache, const Region& region,
                                 const BinningPolicy& policy, SimilarityTiming* timing = nullptr);

// ---------------------------------------------------------------------------
// Images
//
// Rows run top to bottom from the largest y index, so the image shows the
// domain with y pointing up. Non-finite values use kMaskColor.

enum class Colormap { viridis, grayscale, diverging };

Colormap parse_colormap(std::string_view name);
std::string_view to_string(Colormap cmap);

struct Rgb {
  std::uint8_t r = 0, g = 0, b = 0;
  friend bool operator==(Rgb, Rgb) = default;
};

inline constexpr Rgb kMaskColor{255, 0, 255};

/// Maps v in [lo, hi] linearly onto the colormap (clamped outside).
Rgb map_color(Colormap cmap, double v, double lo = 0.0, double hi = 1.0);

struct RgbImage {
  std::size_t width = 0;
  std::size_t height = 0;
  std::vector<Rgb> pixels;  // row-major, top row first
  Rgb at(std::size_t col, std::size_t row) const { return pixels[row * width + col]; }
};

RgbImage colorize(std::span<const double> values, std::size_t nx, std::size_t ny, Colormap cmap,
                  double lo = 0.0, double hi = 1.0);
std::vector<std::uint8_t> encode_png(const RgbImage& image);
RgbImage decode_png(std::span<const std::uint8_t> bytes);
RgbImage read_png(const std::filesystem::path& path);
void write_png(const RgbImage& image, const std::filesystem::path& path);

/// Writes the divergence field as a PNG using the [0, 1] scale.
void render(const DivergenceField& field, Colormap cmap, const std::filesystem::path& out);

// ---------------------------------------------------------------------------
// Scalar field files
//
// "SF2D", u32 version = 1, u32 nx, u32 ny, then nx * ny little-endian f32
// values, y-major and x-minor; NaN marks masked seeds.

inline constexpr std::uint32_t kScalarFieldVersion = 1;

struct ScalarGrid {
  std::uint32_t nx = 0;
  std::uint32_t ny = 0;
  std::vector<float> values;
};

void write_scalar_field(const std::filesystem::path& path, std::uint32_t nx, std::uint32_t ny,
                        std::span<const double> values);
ScalarGrid read_scalar_field(const std::filesystem::path& path);

/// Sidecar path holding the JSON provenance of an exported field.
std::filesystem::path provenance_path(const std::filesystem::path& field_path);

/// Writes the SF2D grid and a JSON sidecar with the seed layout and query.
void export_field(const DivergenceField& field, const std::filesystem::path& out);
QueryProvenance read_provenance(const std::filesystem::path& field_path);

}  // namespace pathdyn
