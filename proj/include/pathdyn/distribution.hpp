#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <stdexcept>
#include <vector>

#include "pathdyn/dynamics.hpp"
#include "pathdyn/linalg.hpp"

namespace pathdyn {

/// Shared binning of the alpha and beta progressions. Every histogram that
/// is compared must use the same policy.
struct BinningPolicy {
  std::size_t n = 2;  // bins per invariant, 2n in total
  double alpha_lo = 0.0;
  double alpha_hi = 1.0;
  double beta_lo = 0.0;
  double beta_hi = 1.0;
  double clamp_lo_percentile = 0.5;
  double clamp_hi_percentile = 99.5;

  void validate() const;
  std::size_t total_bins() const { return 2 * n; }
  /// Values outside [lo, hi] land in the edge bins.
  std::size_t alpha_bin(double v) const { return bin_of(v, alpha_lo, alpha_hi); }
  std::size_t beta_bin(double v) const { return bin_of(v, beta_lo, beta_hi); }
  BinningPolicy with_bins(std::size_t bins) const {
    BinningPolicy p = *this;
    p.n = bins;
    p.validate();
    return p;
  }

  friend bool operator==(const BinningPolicy&, const BinningPolicy&) = default;

 private:
  std::size_t bin_of(double v, double lo, double hi) const {
    const double pos = (v - lo) * (static_cast<double>(n) / (hi - lo));
    if (!(pos > 0.0)) return 0;
    const auto idx = static_cast<std::size_t>(pos);
    return idx < n ? idx : n - 1;
  }
};

/// Rule of thumb n = round(sqrt(N)), at least 2.
std::size_t auto_bin_count(std::size_t samples_per_pathline);

/// Exact percentile (0..100) with linear interpolation between order
/// statistics, over the concatenation of the given chunks. NaNs are ignored.
std::vector<double> percentiles(std::span<const std::span<const float>> chunks,
                                std::span<const double> qs);
double percentile(std::span<const float> values, double q);

class DistributionError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Bins: bins = round(sqrt(N)) when empty. Ranges are the clamp percentiles
/// of the pooled valid alpha and beta values. Throws DistributionError when
/// no record has a valid sample.
BinningPolicy fit_binning(std::span<const DynamicsView> records,
                          std::optional<std::size_t> bins = std::nullopt);

/// Raw per-bin counts of one or more pathlines.
struct BinCounts {
  std::vector<std::uint64_t> alpha;
  std::vector<std::uint64_t> beta;
  std::uint64_t alpha_total = 0;
  std::uint64_t beta_total = 0;

  explicit BinCounts(std::size_t n = 0) : alpha(n, 0), beta(n, 0) {}
  void add(const DynamicsView& record, const BinningPolicy& policy);
  void merge(const BinCounts& other);
};

/// Normalized concatenated histogram: bins[0, n) alpha, bins[n, 2n) beta.
/// Each half carries mass 1/2.
struct DynHistogram {
  BinningPolicy policy;
  std::vector<double> bins;
  std::size_t sample_count = 0;  // valid values per invariant
};

/// Throws DistributionError if counts are empty.
DynHistogram normalize(const BinCounts& counts, const BinningPolicy& policy);
/// Writes the normalized histogram into out (length 2n) without allocating.
void normalize_into(const BinCounts& counts, std::span<double> out);

/// Throws DistributionError when the record has no valid samples.
DynHistogram histogram(const DynamicsView& record, const BinningPolicy& policy);
inline DynHistogram histogram(const DynamicsRecord& record, const BinningPolicy& policy) {
  return histogram(view(record), policy);
}

// ---------------------------------------------------------------------------
// Regions

inline constexpr std::size_t kMaxPolygonVertices = 256;

struct Region {
  enum class Kind { circle, ellipse, polygon };

  Kind kind = Kind::circle;
  Vec2 center;
  double radius = 0.0;        // circle
  Vec2 radii;                 // ellipse, axis-aligned
  std::vector<Vec2> vertices; // polygon

  static Region circle(Vec2 center, double radius);
  static Region ellipse(Vec2 center, Vec2 radii);
  static Region polygon(std::vector<Vec2> vertices);

  /// Throws std::invalid_argument for degenerate shapes.
  void validate() const;
  /// Boundary points count as inside.
  bool contains(Vec2 p) const;

  friend bool operator==(const Region&, const Region&) = default;
};

const char* to_string(Region::Kind kind);

/// Indices of the records whose seed lies in the region.
std::vector<std::size_t> select_seeds(std::span<const DynamicsView> records, const Region& region);

/// Sums the raw counts of all member pathlines and normalizes the sum.
/// Throws DistributionError when the region selects no seed.
DynHistogram reference_distribution(std::span<const DynamicsView> records, const Region& region,
                                    const BinningPolicy& policy);

// ---------------------------------------------------------------------------
// Divergences (natural logarithm)

/// KL(p | q). Throws DistributionError when q(x) = 0 but p(x) > 0.
double kl_divergence(std::span<const double> p, std::span<const double> q);
/// Jensen-Shannon divergence clamped to [0, ln 2]. Exactly symmetric.
double jsd(std::span<const double> p, std::span<const double> q);

double kl_divergence(const DynHistogram& p, const DynHistogram& q);
double jsd(const DynHistogram& p, const DynHistogram& q);

}  // namespace pathdyn
