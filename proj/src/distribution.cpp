#include "pathdyn/distribution.hpp"

#include <algorithm>
#include <array>
#include <bit>
#include <cmath>
#include <map>
#include <numbers>
#include <string>

namespace pathdyn {

// --- binning ---------------------------------------------------------------

void BinningPolicy::validate() const {
  if (n < 2) throw std::invalid_argument("BinningPolicy: n must be at least 2");
  if (!(alpha_lo < alpha_hi) || !std::isfinite(alpha_lo) || !std::isfinite(alpha_hi))
    throw std::invalid_argument("BinningPolicy: alpha range must satisfy lo < hi");
  if (!(beta_lo < beta_hi) || !std::isfinite(beta_lo) || !std::isfinite(beta_hi))
    throw std::invalid_argument("BinningPolicy: beta range must satisfy lo < hi");
}

std::size_t auto_bin_count(std::size_t samples_per_pathline) {
  const auto n = static_cast<std::size_t>(std::llround(std::sqrt(static_cast<double>(samples_per_pathline))));
  return std::max<std::size_t>(n, 2);
}

// --- percentiles -------------------------------------------------------------
//
// Exact order statistics by a two-level radix select on order-preserving
// 32-bit float keys: the high 16 bits locate the bucket, a second pass over
// that bucket's low 16 bits pins the exact key.

namespace {

constexpr std::size_t kBuckets = 1u << 16;

std::uint32_t float_key(float v) {
  const auto u = std::bit_cast<std::uint32_t>(v);
  return (u & 0x80000000u) ? ~u : (u | 0x80000000u);
}

float key_float(std::uint32_t key) {
  const std::uint32_t u = (key & 0x80000000u) ? (key & 0x7FFFFFFFu) : ~key;
  return std::bit_cast<float>(u);
}

template <class Fn>
void for_each_value(std::span<const std::span<const float>> chunks, Fn&& fn) {
  for (const auto& chunk : chunks)
    for (float v : chunk)
      if (!std::isnan(v)) fn(v);
}

}  // namespace

std::vector<double> percentiles(std::span<const std::span<const float>> chunks,
                                std::span<const double> qs) {
  std::vector<std::uint64_t> high(kBuckets, 0);
  std::uint64_t count = 0;
  for_each_value(chunks, [&](float v) {
    ++high[float_key(v) >> 16];
    ++count;
  });
  if (count == 0) throw DistributionError("percentile of an empty set");

  // Ranks needed: floor and ceil of q/100 * (count - 1) for every q.
  std::vector<std::uint64_t> ranks;
  for (double q : qs) {
    if (!(q >= 0.0 && q <= 100.0)) throw std::invalid_argument("percentile outside [0, 100]");
    const double pos = q / 100.0 * static_cast<double>(count - 1);
    const auto lo = static_cast<std::uint64_t>(std::floor(pos));
    ranks.push_back(lo);
    ranks.push_back(std::min(lo + 1, count - 1));
  }

  // Locate each rank's high bucket and its rank within the bucket.
  struct Target {
    std::uint32_t bucket;
    std::uint64_t within;
  };
  std::vector<Target> targets;
  std::vector<std::uint64_t> prefix(kBuckets + 1, 0);
  for (std::size_t b = 0; b < kBuckets; ++b) prefix[b + 1] = prefix[b] + high[b];
  for (std::uint64_t r : ranks) {
    const auto it = std::upper_bound(prefix.begin(), prefix.end(), r);
    const auto b = static_cast<std::uint32_t>(std::distance(prefix.begin(), it) - 1);
    targets.push_back({b, r - prefix[b]});
  }

  std::map<std::uint32_t, std::vector<std::uint64_t>> low;
  for (const auto& t : targets) low.try_emplace(t.bucket, kBuckets, 0);
  for_each_value(chunks, [&](float v) {
    const std::uint32_t key = float_key(v);
    const auto it = low.find(key >> 16);
    if (it != low.end()) ++it->second[key & 0xFFFFu];
  });

  std::vector<double> order_stats;
  for (const auto& t : targets) {
    const auto& hist = low.at(t.bucket);
    std::uint64_t seen = 0;
    std::uint32_t lo_bits = 0;
    for (; lo_bits < kBuckets; ++lo_bits) {
      seen += hist[lo_bits];
      if (seen > t.within) break;
    }
    order_stats.push_back(key_float((t.bucket << 16) | lo_bits));
  }

  std::vector<double> out;
  for (std::size_t i = 0; i < qs.size(); ++i) {
    const double pos = qs[i] / 100.0 * static_cast<double>(count - 1);
    const double frac = pos - std::floor(pos);
    const double a = order_stats[2 * i];
    const double b = order_stats[2 * i + 1];
    out.push_back(frac == 0.0 ? a : a + frac * (b - a));
  }
  return out;
}

double percentile(std::span<const float> values, double q) {
  const std::array<std::span<const float>, 1> chunks{values};
  const std::array<double, 1> qs{q};
  return percentiles(chunks, qs).front();
}

constexpr double kConstantRangeFraction = 1e-4;

BinningPolicy fit_binning(std::span<const DynamicsView> records, std::optional<std::size_t> bins) {
  std::vector<std::span<const float>> alphas;
  std::vector<std::span<const float>> betas;
  std::size_t longest = 0;
  for (const auto& r : records) {
    longest = std::max(longest, r.alphas.size());
    if (r.valid_count == 0) continue;
    alphas.push_back(r.alphas.first(r.valid_count));
    betas.push_back(r.betas.first(r.valid_count));
  }
  if (alphas.empty()) throw DistributionError("fit_binning: no record has a valid sample");

  BinningPolicy policy;
  policy.n = bins.value_or(auto_bin_count(longest));
  const std::array<double, 2> qs{policy.clamp_lo_percentile, policy.clamp_hi_percentile};

  const auto pa = percentiles(alphas, qs);
  const auto pb = percentiles(betas, qs);
  // alpha and beta share the scale (dt |grad v|)^2. A range narrower than a
  // small fraction of it is f32 rounding of a constant, not structure.
  const double scale = std::max({std::abs(pa[0]), std::abs(pa[1]), std::abs(pb[0]), std::abs(pb[1])});
  auto range = [&](const std::vector<double>& p, double& lo, double& hi) {
    lo = p[0];
    hi = p[1];
    if (hi - lo > kConstantRangeFraction * scale) return;
    if (lo == hi) {
      const double c = lo;
      const double delta = std::max(std::abs(c), 1.0) * 1e-9;
      lo = c - delta;
      hi = c + delta;
      return;
    }
    // Noisy constant: centre it in the middle bin, which is made several
    // times wider than the noise so every sample shares that bin.
    const double c = 0.5 * (lo + hi);
    const auto n = static_cast<double>(policy.n);
    const double width = std::max(2e-9 * std::max(std::abs(c), 1.0) / n, 4.0 * (hi - lo));
    lo = c - (std::floor(n / 2) + 0.5) * width;
    hi = lo + n * width;
  };
  range(pa, policy.alpha_lo, policy.alpha_hi);
  range(pb, policy.beta_lo, policy.beta_hi);
  policy.validate();
  return policy;
}

// --- histograms --------------------------------------------------------------

void BinCounts::add(const DynamicsView& record, const BinningPolicy& policy) {
  for (std::size_t i = 0; i < record.valid_count; ++i) {
    ++alpha[policy.alpha_bin(record.alphas[i])];
    ++beta[policy.beta_bin(record.betas[i])];
  }
  alpha_total += record.valid_count;
  beta_total += record.valid_count;
}

void BinCounts::merge(const BinCounts& other) {
  for (std::size_t i = 0; i < alpha.size(); ++i) alpha[i] += other.alpha[i];
  for (std::size_t i = 0; i < beta.size(); ++i) beta[i] += other.beta[i];
  alpha_total += other.alpha_total;
  beta_total += other.beta_total;
}

void normalize_into(const BinCounts& counts, std::span<double> out) {
  if (counts.alpha_total == 0 || counts.beta_total == 0)
    throw DistributionError("histogram has no valid samples");
  const std::size_t n = counts.alpha.size();
  const double wa = 0.5 / static_cast<double>(counts.alpha_total);
  const double wb = 0.5 / static_cast<double>(counts.beta_total);
  for (std::size_t i = 0; i < n; ++i) {
    out[i] = static_cast<double>(counts.alpha[i]) * wa;
    out[n + i] = static_cast<double>(counts.beta[i]) * wb;
  }
}

DynHistogram normalize(const BinCounts& counts, const BinningPolicy& policy) {
  DynHistogram h;
  h.policy = policy;
  h.bins.resize(policy.total_bins());
  normalize_into(counts, h.bins);
  h.sample_count = counts.alpha_total;
  return h;
}

DynHistogram histogram(const DynamicsView& record, const BinningPolicy& policy) {
  if (record.valid_count == 0) throw DistributionError("histogram: record has no valid samples");
  BinCounts counts(policy.n);
  counts.add(record, policy);
  return normalize(counts, policy);
}

// --- regions -----------------------------------------------------------------

Region Region::circle(Vec2 center, double radius) {
  Region r;
  r.kind = Kind::circle;
  r.center = center;
  r.radius = radius;
  r.validate();
  return r;
}

Region Region::ellipse(Vec2 center, Vec2 radii) {
  Region r;
  r.kind = Kind::ellipse;
  r.center = center;
  r.radii = radii;
  r.validate();
  return r;
}

Region Region::polygon(std::vector<Vec2> vertices) {
  Region r;
  r.kind = Kind::polygon;
  r.vertices = std::move(vertices);
  r.validate();
  return r;
}

const char* to_string(Region::Kind kind) {
  switch (kind) {
    case Region::Kind::circle: return "circle";
    case Region::Kind::ellipse: return "ellipse";
    case Region::Kind::polygon: return "polygon";
  }
  return "unknown";
}

namespace {

double signed_area(std::span<const Vec2> v) {
  double a = 0.0;
  for (std::size_t i = 0; i < v.size(); ++i) {
    const Vec2 p = v[i];
    const Vec2 q = v[(i + 1) % v.size()];
    a += p.x * q.y - q.x * p.y;
  }
  return 0.5 * a;
}

bool on_segment(Vec2 p, Vec2 a, Vec2 b) {
  const double cross = (b.x - a.x) * (p.y - a.y) - (b.y - a.y) * (p.x - a.x);
  const double scale = std::max({std::abs(b.x - a.x), std::abs(b.y - a.y), 1.0});
  if (std::abs(cross) > 1e-12 * scale * scale) return false;
  return p.x >= std::min(a.x, b.x) && p.x <= std::max(a.x, b.x) && p.y >= std::min(a.y, b.y) &&
         p.y <= std::max(a.y, b.y);
}

}  // namespace

void Region::validate() const {
  auto finite = [](Vec2 v) { return std::isfinite(v.x) && std::isfinite(v.y); };
  switch (kind) {
    case Kind::circle:
      if (!finite(center) || !(radius > 0.0) || !std::isfinite(radius))
        throw std::invalid_argument("circle region needs a finite center and positive radius");
      return;
    case Kind::ellipse:
      if (!finite(center) || !(radii.x > 0.0) || !(radii.y > 0.0) || !finite(radii))
        throw std::invalid_argument("ellipse region needs a finite center and positive radii");
      return;
    case Kind::polygon:
      if (vertices.size() < 3)
        throw std::invalid_argument("polygon region needs at least 3 vertices");
      if (vertices.size() > kMaxPolygonVertices)
        throw std::invalid_argument("polygon region has more than " +
                                    std::to_string(kMaxPolygonVertices) + " vertices");
      if (!std::all_of(vertices.begin(), vertices.end(), finite))
        throw std::invalid_argument("polygon vertices must be finite");
      if (signed_area(vertices) == 0.0)
        throw std::invalid_argument("polygon region has zero area");
      return;
  }
}

bool Region::contains(Vec2 p) const {
  switch (kind) {
    case Kind::circle: {
      const Vec2 d = p - center;
      return d.x * d.x + d.y * d.y <= radius * radius;
    }
    case Kind::ellipse: {
      const double u = (p.x - center.x) / radii.x;
      const double v = (p.y - center.y) / radii.y;
      return u * u + v * v <= 1.0;
    }
    case Kind::polygon: {
      bool inside = false;
      const std::size_t n = vertices.size();
      for (std::size_t i = 0, j = n - 1; i < n; j = i++) {
        const Vec2 a = vertices[i];
        const Vec2 b = vertices[j];
        if (on_segment(p, a, b)) return true;
        if ((a.y > p.y) != (b.y > p.y)) {
          const double x_cross = a.x + (p.y - a.y) * (b.x - a.x) / (b.y - a.y);
          if (p.x < x_cross) inside = !inside;
        }
      }
      return inside;
    }
  }
  return false;
}

std::vector<std::size_t> select_seeds(std::span<const DynamicsView> records, const Region& region) {
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < records.size(); ++i)
    if (region.contains(records[i].seed)) out.push_back(i);
  return out;
}

DynHistogram reference_distribution(std::span<const DynamicsView> records, const Region& region,
                                    const BinningPolicy& policy) {
  region.validate();
  const auto members = select_seeds(records, region);
  if (members.empty()) throw DistributionError("reference region selects no seeds");
  BinCounts counts(policy.n);
  for (std::size_t i : members) counts.add(records[i], policy);
  if (counts.alpha_total == 0)
    throw DistributionError("reference region contains no valid pathline samples");
  return normalize(counts, policy);
}

// --- divergences -------------------------------------------------------------

double kl_divergence(std::span<const double> p, std::span<const double> q) {
  if (p.size() != q.size()) throw std::invalid_argument("kl_divergence: size mismatch");
  double sum = 0.0;
  for (std::size_t i = 0; i < p.size(); ++i) {
    if (p[i] == 0.0) continue;
    if (q[i] == 0.0)
      throw DistributionError("kl_divergence: absolute continuity violated at bin " +
                              std::to_string(i));
    sum += p[i] * std::log(p[i] / q[i]);
  }
  return sum;
}

double jsd(std::span<const double> p, std::span<const double> q) {
  if (p.size() != q.size()) throw std::invalid_argument("jsd: size mismatch");
  auto term = [](double a, double m) { return a == 0.0 ? 0.0 : a * std::log(a / m); };
  double sum = 0.0;
  for (std::size_t i = 0; i < p.size(); ++i) {
    const double m = 0.5 * p[i] + 0.5 * q[i];
    // Each bin's contribution is a commutative sum of the two sides.
    sum += term(p[i], m) + term(q[i], m);
  }
  return std::clamp(0.5 * sum, 0.0, std::numbers::ln2);
}

namespace {
void require_same_policy(const DynHistogram& p, const DynHistogram& q) {
  if (!(p.policy == q.policy))
    throw std::invalid_argument("histograms were built with different binning policies");
}
}  // namespace

double kl_divergence(const DynHistogram& p, const DynHistogram& q) {
  require_same_policy(p, q);
  return kl_divergence(std::span<const double>(p.bins), std::span<const double>(q.bins));
}

double jsd(const DynHistogram& p, const DynHistogram& q) {
  require_same_policy(p, q);
  return jsd(std::span<const double>(p.bins), std::span<const double>(q.bins));
}

}  // namespace pathdyn
