#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "pathdyn/linalg.hpp"

namespace pathdyn {

/// SHA-256 digest identifying the content a field was built from.
using Fingerprint = std::array<std::uint8_t, 32>;

std::string to_hex(const Fingerprint& fp);
Fingerprint sha256(std::span<const std::uint8_t> bytes);

/// Regular space-time grid. Node (i, j) sits at origin + (i, j) * spacing;
/// frame k sits at t_min + k * (t_max - t_min) / (nt - 1).
struct GridSpec {
  Vec2 origin;
  Vec2 spacing{1.0, 1.0};
  std::uint32_t nx = 2;
  std::uint32_t ny = 2;
  double t_min = 0.0;
  double t_max = 1.0;
  std::uint32_t nt = 2;

  /// Throws std::invalid_argument when an invariant is violated.
  void validate() const;

  Vec2 extent_min() const { return origin; }
  Vec2 extent_max() const {
    return {origin.x + spacing.x * (nx - 1.0), origin.y + spacing.y * (ny - 1.0)};
  }
  Vec2 node(std::size_t i, std::size_t j) const {
    return {origin.x + spacing.x * static_cast<double>(i),
            origin.y + spacing.y * static_cast<double>(j)};
  }
  double frame_time(std::size_t k) const;
  double time_step() const { return (t_max - t_min) / (nt - 1.0); }
  std::size_t node_count() const { return static_cast<std::size_t>(nx) * ny; }

  bool contains_point(Vec2 x) const;
  bool contains_time(double t) const;

  /// Grid spanning [lo, hi] with n nodes per axis.
  static GridSpec from_extent(Vec2 lo, Vec2 hi, std::uint32_t nx, std::uint32_t ny,
                              double t_min, double t_max, std::uint32_t nt);

  friend bool operator==(const GridSpec&, const GridSpec&) = default;
};

struct VelocitySample {
  Vec2 velocity;
  Mat2 gradient;  // grad v, rows are components: [[du/dx, du/dy], [dv/dx, dv/dy]]
  bool inside = false;
};

/// Time-dependent velocity field on a GridSpec. Immutable after construction.
///
/// Velocities are stored as f32, interleaved (u, v), in t-major, y-major,
/// x-minor order; all interpolation arithmetic is f64.
class VectorField2D {
 public:
  VectorField2D(GridSpec spec, std::vector<float> data, Fingerprint fingerprint);

  const GridSpec& spec() const { return spec_; }
  std::span<const float> data() const { return data_; }
  const Fingerprint& fingerprint() const { return fingerprint_; }

  Vec2 node_velocity(std::size_t k, std::size_t i, std::size_t j) const {
    const std::size_t idx = 2 * ((k * spec_.ny + j) * spec_.nx + i);
    return {data_[idx], data_[idx + 1]};
  }
  /// Finite-difference gradient at a node: central inside, one-sided
  /// second order on the boundary (first order when an axis has two nodes).
  Mat2 node_gradient(std::size_t k, std::size_t i, std::size_t j) const;

  /// Bilinear in space, linear in time. Gradients are interpolated the same way.
  VelocitySample sample(Vec2 x, double t) const;

  /// Velocity only; returns false when (x, t) is outside the domain.
  bool velocity(Vec2 x, double t, Vec2& out) const;

 private:
  struct Stencil {
    std::size_t i0, j0, k0, k1;
    double fx, fy, ft;
  };
  bool locate(Vec2 x, double t, Stencil& s) const;

  GridSpec spec_;
  std::vector<float> data_;
  Fingerprint fingerprint_;
};

inline VelocitySample sample(const VectorField2D& field, Vec2 x, double t) {
  return field.sample(x, t);
}

// ---------------------------------------------------------------------------
// Dataset files

enum class DatasetErrc {
  io,
  bad_magic,
  unsupported_version,
  malformed_header,
  size_mismatch,
  non_finite,
};

std::string_view to_string(DatasetErrc code);

class DatasetError : public std::runtime_error {
 public:
  DatasetError(DatasetErrc code, const std::string& what)
      : std::runtime_error(std::string(to_string(code)) + ": " + what), code_(code) {}
  DatasetErrc code() const { return code_; }

 private:
  DatasetErrc code_;
};

inline constexpr std::uint32_t kDatasetVersion = 1;
inline constexpr std::size_t kDatasetHeaderBytes = 4 + 4 + 3 * 4 + 6 * 8;

/// Header of a VF2D file. Does not allocate the payload.
GridSpec parse_dataset_header(std::span<const std::uint8_t> header);
std::vector<std::uint8_t> encode_dataset_header(const GridSpec& spec);
/// Payload size in bytes declared by a header, computed in 64-bit.
std::uint64_t dataset_payload_bytes(const GridSpec& spec);

VectorField2D load_dataset(const std::filesystem::path& path);
void save_dataset(const VectorField2D& field, const std::filesystem::path& path);

// ---------------------------------------------------------------------------
// Analytic flows
//
//   constant        v = (1, 0)
//   rigid_rotation  v = (-y, x)
//   saddle          v = (x, -y)
//   double_gyre     u = -pi A sin(pi f) cos(pi y),  v = pi A cos(pi f) sin(pi y) df/dx,
//                   f = a x^2 + b x,  a = eps sin(w t),  b = 1 - 2 eps sin(w t),
//                   A = 0.1, w = 2 pi / 10, eps = 0.25 (domain [0,2] x [0,1])

using FlowFunction = std::function<Vec2(Vec2, double)>;

/// Throws std::invalid_argument for names outside the list above.
FlowFunction analytic_flow(std::string_view name);
VectorField2D make_analytic(std::string_view name, const GridSpec& spec);

/// Two-population test flow: rigid rotation about the centre of the left half
/// and a vertical-axis saddle v = (-(x - cx), y - cy) about the centre of the
/// right half, blended linearly across a band of the given width at the
/// domain's mid-x.
FlowFunction two_population_flow(const GridSpec& spec, double blend_width);
VectorField2D make_two_population(const GridSpec& spec, double blend_width);

/// Rasterizes fn onto spec; the fingerprint hashes tag together with the spec.
VectorField2D rasterize(const GridSpec& spec, const FlowFunction& fn, std::string_view tag);

// ---------------------------------------------------------------------------
// Instrumentation

/// Total field evaluations (sample() and velocity()) across all threads
/// since the last reset.
std::uint64_t field_sample_count();
void reset_field_sample_count();

}  // namespace pathdyn
