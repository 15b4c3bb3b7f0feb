#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "pathdyn/advect.hpp"
#include "pathdyn/dynamics.hpp"
#include "pathdyn/field.hpp"

namespace pathdyn {

struct CacheHeader {
  Fingerprint field_fingerprint{};
  IntegrationParams params;
  GridSpec seeds;         // seed layout; time fields copied from the source field
  std::uint64_t n = 0;    // samples per pathline

  std::uint64_t seed_count() const { return seeds.node_count(); }
  friend bool operator==(const CacheHeader&, const CacheHeader&) = default;
};

/// Size of the encoded cache header in bytes.
inline constexpr std::size_t kCacheHeaderBytes =
    4 + 4 + 32 + 4 * 8 + 4 + 4 + 3 * 4 + 6 * 8 + 4 + 8;
inline constexpr std::uint32_t kCacheVersion = 1;

/// Persisted alpha/beta progressions of every seed. Write-once; safe for
/// concurrent readers afterwards.
///
/// Both payloads are seed-major M x N f32 arrays. Entries past a seed's valid
/// count are NaN, which is how valid counts survive a round trip without
/// adding bytes.
class DynamicsCache {
 public:
  DynamicsCache(CacheHeader header, std::vector<float> alphas, std::vector<float> betas);

  const CacheHeader& header() const { return header_; }
  std::size_t seed_count() const { return static_cast<std::size_t>(header_.seed_count()); }
  std::size_t samples_per_seed() const { return static_cast<std::size_t>(header_.n); }

  std::span<const float> alphas() const { return alphas_; }
  std::span<const float> betas() const { return betas_; }
  std::size_t valid_count(std::size_t seed) const { return valid_counts_[seed]; }
  Vec2 seed_position(std::size_t seed) const {
    return header_.seeds.node(seed % header_.seeds.nx, seed / header_.seeds.nx);
  }

  DynamicsView record(std::size_t seed) const;
  /// Views of every seed, in seed order.
  const std::vector<DynamicsView>& records() const { return views_; }

  /// 2 * M * N * 4 + header bytes; equals the saved file size.
  std::uint64_t byte_size() const;

 private:
  CacheHeader header_;
  std::vector<float> alphas_;
  std::vector<float> betas_;
  std::vector<std::uint32_t> valid_counts_;
  std::vector<DynamicsView> views_;
};

struct BuildStats {
  double wall_seconds = 0.0;
  std::uint64_t byte_size = 0;
  int workers = 0;
};

/// Integrates every seed and records its dynamics, data-parallel over seeds.
DynamicsCache build_cache(const VectorField2D& field, const IntegrationParams& params,
                          const GridSpec& seeds, BuildStats* stats = nullptr);

enum class CacheErrc {
  io,
  bad_magic,
  version_mismatch,
  malformed_header,
  truncated,
  fingerprint_mismatch,
  corrupt_payload,  // NaN padding is not a common suffix of a seed's alpha and beta rows
};

std::string_view to_string(CacheErrc code);

class CacheError : public std::runtime_error {
 public:
  CacheError(CacheErrc code, const std::string& what)
      : std::runtime_error(std::string(to_string(code)) + ": " + what), code_(code) {}
  CacheErrc code() const { return code_; }

 private:
  CacheErrc code_;
};

std::vector<std::uint8_t> encode_cache_header(const CacheHeader& header);
CacheHeader decode_cache_header(std::span<const std::uint8_t> bytes);

void save_cache(const DynamicsCache& cache, const std::filesystem::path& path);
/// When expected is given, a cache built from a different field is rejected.
DynamicsCache load_cache(const std::filesystem::path& path,
                         const std::optional<Fingerprint>& expected = std::nullopt);
/// Reads only the header.
CacheHeader read_cache_header(const std::filesystem::path& path);

}  // namespace pathdyn
