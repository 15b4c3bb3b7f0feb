#include "pathdyn/store.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <fstream>
#include <limits>

#include "bytes.hpp"
#include "pathdyn/parallel.hpp"

namespace pathdyn {

namespace {

constexpr std::array<char, 4> kCacheMagic{'D', 'Y', 'N', 'C'};

// Length of the non-NaN prefix, or -1 when a NaN is followed by a number.
std::int64_t valid_prefix(std::span<const float> values) {
  const auto first_nan = std::find_if(values.begin(), values.end(), [](float v) { return std::isnan(v); });
  if (std::any_of(first_nan, values.end(), [](float v) { return !std::isnan(v); })) return -1;
  return first_nan - values.begin();
}

}  // namespace

std::string_view to_string(CacheErrc code) {
  switch (code) {
    case CacheErrc::io: return "io";
    case CacheErrc::bad_magic: return "bad_magic";
    case CacheErrc::version_mismatch: return "version_mismatch";
    case CacheErrc::malformed_header: return "malformed_header";
    case CacheErrc::truncated: return "truncated";
    case CacheErrc::fingerprint_mismatch: return "fingerprint_mismatch";
    case CacheErrc::corrupt_payload: return "corrupt_payload";
  }
  return "unknown";
}

DynamicsCache::DynamicsCache(CacheHeader header, std::vector<float> alphas, std::vector<float> betas)
    : header_(header), alphas_(std::move(alphas)), betas_(std::move(betas)) {
  const std::size_t m = seed_count();
  const std::size_t n = samples_per_seed();
  if (alphas_.size() != m * n || betas_.size() != m * n)
    throw std::invalid_argument("DynamicsCache: payload size must be M * N per invariant");
  valid_counts_.resize(m);
  views_.resize(m);
  for (std::size_t s = 0; s < m; ++s) {
    const std::span<const float> a(alphas_.data() + s * n, n);
    const std::span<const float> b(betas_.data() + s * n, n);
    const std::int64_t va = valid_prefix(a);
    if (va < 0 || va != valid_prefix(b))
      throw CacheError(CacheErrc::corrupt_payload,
                       "seed " + std::to_string(s) + ": NaN padding is not a common suffix");
    valid_counts_[s] = static_cast<std::uint32_t>(va);
    views_[s] = DynamicsView{seed_position(s), a, b, valid_counts_[s]};
  }
}

DynamicsView DynamicsCache::record(std::size_t seed) const { return views_.at(seed); }

std::uint64_t DynamicsCache::byte_size() const {
  return 2 * header_.seed_count() * header_.n * sizeof(float) + kCacheHeaderBytes;
}

DynamicsCache build_cache(const VectorField2D& field, const IntegrationParams& params,
                          const GridSpec& seeds, BuildStats* stats) {
  const auto start = std::chrono::steady_clock::now();
  params.validate(field.spec());
  const auto positions = seeds_of(seeds);
  if (positions.empty()) throw std::invalid_argument("build_cache: no seeds");

  CacheHeader header;
  header.field_fingerprint = field.fingerprint();
  header.params = params;
  header.seeds = seeds;
  header.seeds.t_min = field.spec().t_min;
  header.seeds.t_max = field.spec().t_max;
  header.seeds.nt = field.spec().nt;
  header.n = params.sample_count();

  const std::size_t n = static_cast<std::size_t>(header.n);
  std::vector<float> alphas(positions.size() * n);
  std::vector<float> betas(positions.size() * n);
  parallel_for(positions.size(), [&](std::size_t s) {
    const PathlineSamples p = integrate_pathline(field, positions[s], params);
    compute_dynamics_into(field, p, params, std::span<float>(alphas.data() + s * n, n),
                          std::span<float>(betas.data() + s * n, n));
  });

  DynamicsCache cache(header, std::move(alphas), std::move(betas));
  if (stats != nullptr) {
    stats->wall_seconds =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    stats->byte_size = cache.byte_size();
    stats->workers = worker_count();
  }
  return cache;
}

std::vector<std::uint8_t> encode_cache_header(const CacheHeader& h) {
  detail::ByteWriter w;
  for (char c : kCacheMagic) w.put(static_cast<std::uint8_t>(c));
  w.put(kCacheVersion);
  w.put_bytes(h.field_fingerprint);
  w.put(h.params.t0);
  w.put(h.params.tau);
  w.put(h.params.dt_sample);
  w.put(h.params.rk_tol);
  w.put(static_cast<std::int32_t>(h.params.tau < 0.0 ? -1 : 1));
  w.put(std::uint32_t{0});
  w.put(h.seeds.nx);
  w.put(h.seeds.ny);
  w.put(h.seeds.nt);
  w.put(h.seeds.origin.x);
  w.put(h.seeds.origin.y);
  w.put(h.seeds.spacing.x);
  w.put(h.seeds.spacing.y);
  w.put(h.seeds.t_min);
  w.put(h.seeds.t_max);
  w.put(std::uint32_t{0});
  w.put(h.n);
  return w.take();
}

CacheHeader decode_cache_header(std::span<const std::uint8_t> bytes) {
  if (bytes.size() < kCacheHeaderBytes)
    throw CacheError(CacheErrc::truncated, "file shorter than the cache header");
  detail::ByteReader r(bytes);
  for (char c : kCacheMagic)
    if (r.get<std::uint8_t>() != static_cast<std::uint8_t>(c))
      throw CacheError(CacheErrc::bad_magic, "expected DYNC");
  const auto version = r.get<std::uint32_t>();
  if (version != kCacheVersion)
    throw CacheError(CacheErrc::version_mismatch, "version " + std::to_string(version) +
                                                      ", supported " + std::to_string(kCacheVersion));
  CacheHeader h;
  r.get_bytes(h.field_fingerprint);
  h.params.t0 = r.get<double>();
  h.params.tau = r.get<double>();
  h.params.dt_sample = r.get<double>();
  h.params.rk_tol = r.get<double>();
  const auto direction = r.get<std::int32_t>();
  r.get<std::uint32_t>();
  h.seeds.nx = r.get<std::uint32_t>();
  h.seeds.ny = r.get<std::uint32_t>();
  h.seeds.nt = r.get<std::uint32_t>();
  h.seeds.origin.x = r.get<double>();
  h.seeds.origin.y = r.get<double>();
  h.seeds.spacing.x = r.get<double>();
  h.seeds.spacing.y = r.get<double>();
  h.seeds.t_min = r.get<double>();
  h.seeds.t_max = r.get<double>();
  r.get<std::uint32_t>();
  h.n = r.get<std::uint64_t>();

  const bool direction_ok = (direction == -1 && h.params.tau < 0.0) ||
                            (direction == 1 && h.params.tau >= 0.0);
  if (!direction_ok || h.seeds.nx == 0 || h.seeds.ny == 0 || h.n == 0 ||
      !(h.params.dt_sample > 0.0) || h.n != h.params.sample_count())
    throw CacheError(CacheErrc::malformed_header, "inconsistent cache header fields");
  return h;
}

void save_cache(const DynamicsCache& cache, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw CacheError(CacheErrc::io, "cannot create " + path.string());
  const auto header = encode_cache_header(cache.header());
  out.write(reinterpret_cast<const char*>(header.data()), static_cast<std::streamsize>(header.size()));
  for (auto payload : {cache.alphas(), cache.betas()}) {
    out.write(reinterpret_cast<const char*>(payload.data()),
              static_cast<std::streamsize>(payload.size() * sizeof(float)));
  }
  if (!out) throw CacheError(CacheErrc::io, "write failed for " + path.string());
}

CacheHeader read_cache_header(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw CacheError(CacheErrc::io, "cannot open " + path.string());
  std::vector<std::uint8_t> bytes(kCacheHeaderBytes);
  in.read(reinterpret_cast<char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  bytes.resize(static_cast<std::size_t>(in.gcount()));
  return decode_cache_header(bytes);
}

DynamicsCache load_cache(const std::filesystem::path& path, const std::optional<Fingerprint>& expected) {
  const CacheHeader header = read_cache_header(path);
  if (expected && *expected != header.field_fingerprint) {
    throw CacheError(CacheErrc::fingerprint_mismatch,
                     "cache was built from field " + to_hex(header.field_fingerprint) +
                         ", expected " + to_hex(*expected));
  }

  const std::uint64_t m = header.seed_count();
  if (header.n > std::numeric_limits<std::uint64_t>::max() / 8 / m)
    throw CacheError(CacheErrc::malformed_header, "payload size overflows");
  const std::uint64_t values = m * header.n;
  const std::uint64_t expected_bytes = kCacheHeaderBytes + 2 * values * sizeof(float);
  std::error_code ec;
  const std::uint64_t file_bytes = std::filesystem::file_size(path, ec);
  if (ec) throw CacheError(CacheErrc::io, "cannot stat " + path.string());
  if (file_bytes < expected_bytes)
    throw CacheError(CacheErrc::truncated, "expected " + std::to_string(expected_bytes) +
                                               " bytes, file has " + std::to_string(file_bytes));
  if (file_bytes > expected_bytes)
    throw CacheError(CacheErrc::malformed_header, "trailing bytes after payload");

  std::ifstream in(path, std::ios::binary);
  in.seekg(static_cast<std::streamoff>(kCacheHeaderBytes));
  std::vector<float> alphas(values);
  std::vector<float> betas(values);
  for (auto* payload : {&alphas, &betas}) {
    const auto bytes = static_cast<std::streamsize>(values * sizeof(float));
    in.read(reinterpret_cast<char*>(payload->data()), bytes);
    if (in.gcount() != bytes) throw CacheError(CacheErrc::truncated, "payload truncated");
  }
  return DynamicsCache(header, std::move(alphas), std::move(betas));
}

}  // namespace pathdyn
