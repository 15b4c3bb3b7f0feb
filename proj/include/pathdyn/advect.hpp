#pragma once

#include <cstddef>
#include <vector>

#include "pathdyn/field.hpp"

namespace pathdyn {

struct IntegrationParams {
  double t0 = 0.0;
  double tau = 1.0;        // signed; negative integrates backward in time
  double dt_sample = 0.01; // spacing of the emitted samples, > 0
  double rk_tol = 1e-6;

  /// N = round(|tau| / dt_sample).
  std::size_t sample_count() const;
  /// sign(tau) * dt_sample.
  double signed_step() const { return tau < 0.0 ? -dt_sample : dt_sample; }
  double direction() const { return tau < 0.0 ? -1.0 : 1.0; }
  /// Time of sample i.
  double sample_time(std::size_t i) const { return t0 + static_cast<double>(i) * signed_step(); }

  /// Throws std::invalid_argument unless the parameters are usable on spec.
  void validate(const GridSpec& spec) const;

  friend bool operator==(const IntegrationParams&, const IntegrationParams&) = default;
};

struct PathlineSamples {
  Vec2 seed;
  std::vector<double> times;   // N + 1 instants
  std::vector<Vec2> positions; // N + 1 positions; frozen at the last inside sample after exit
  std::size_t valid_count = 0; // samples before leaving the domain
};

/// Dormand-Prince 5(4) with adaptive steps and dense output; samples land
/// exactly on t0 + i * sign(tau) * dt_sample.
PathlineSamples integrate_pathline(const VectorField2D& field, Vec2 seed,
                                   const IntegrationParams& params);

/// Grid of every stride-th node of spec (row-major, x fastest).
std::vector<Vec2> seed_grid(const GridSpec& spec, std::size_t stride);

/// The layout of seed_grid(spec, stride) as a GridSpec. Axes may collapse to
/// a single node, so the result is not validated against nx, ny >= 2.
GridSpec seed_spec(const GridSpec& spec, std::size_t stride);

/// Seed positions of a seed layout.
std::vector<Vec2> seeds_of(const GridSpec& seeds);

}  // namespace pathdyn
