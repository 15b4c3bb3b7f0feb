#include <cstring>
#include <fstream>

#include "doctest.h"
#include "pathdyn/parallel.hpp"
#include "pathdyn/store.hpp"
#include "support.hpp"

using namespace pathdyn;

namespace {

bool same_bits(std::span<const float> a, std::span<const float> b) {
  return a.size() == b.size() && std::memcmp(a.data(), b.data(), a.size_bytes()) == 0;
}

void write_bytes(const std::filesystem::path& p, const std::vector<std::uint8_t>& bytes) {
  std::ofstream out(p, std::ios::binary);
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
}

struct Fixture {
  GridSpec spec = GridSpec::from_extent({0, 0}, {2, 1}, 81, 41, 0, 10, 51);
  VectorField2D field = make_analytic("double_gyre", spec);
  IntegrationParams params{.t0 = 0.0, .tau = 2.0, .dt_sample = 0.05};
  GridSpec seeds = seed_spec(spec, 4);
};

}  // namespace

TEST_SUITE("store") {

TEST_CASE("footprint is two f32 per seed and sample plus the header") {
  const auto spec = GridSpec::from_extent({-1, -1}, {2, 2}, 31, 31, 0, 1, 2);
  const auto field = make_analytic("saddle", spec);
  const IntegrationParams p{.t0 = 0, .tau = 1.0, .dt_sample = 0.01};
  const auto seeds = GridSpec::from_extent({0, 0}, {1, 1}, 100, 100, 0, 1, 2);
  BuildStats stats;
  const auto cache = build_cache(field, p, seeds, &stats);
  CHECK(cache.seed_count() == 10000);
  CHECK(cache.samples_per_seed() == 100);
  CHECK(cache.byte_size() == 2ull * 10000 * 100 * 4 + kCacheHeaderBytes);
  CHECK(stats.byte_size == cache.byte_size());
  CHECK(stats.workers >= 1);
  CHECK(cache.alphas().size() == 10000 * 100);

  test::TempDir dir("store");
  save_cache(cache, dir / "c.dync");
  CHECK(std::filesystem::file_size(dir / "c.dync") == cache.byte_size());
}

TEST_CASE("each cached record equals the direct computation") {
  Fixture fx;
  const auto cache = build_cache(fx.field, fx.params, fx.seeds);
  const auto positions = seeds_of(fx.seeds);
  REQUIRE(cache.seed_count() == positions.size());
  for (std::size_t s = 0; s < positions.size(); s += 7) {
    CHECK(cache.seed_position(s) == positions[s]);
    const auto rec = compute_dynamics(fx.field, integrate_pathline(fx.field, positions[s], fx.params), fx.params);
    const auto v = cache.record(s);
    CHECK(v.valid_count == rec.valid_count);
    CHECK(same_bits(v.alphas, rec.alphas));
    CHECK(same_bits(v.betas, rec.betas));
  }
}

TEST_CASE("builds are deterministic across worker counts") {
  Fixture fx;
  set_worker_count(1);
  const auto one = build_cache(fx.field, fx.params, fx.seeds);
  for (int workers : {4, 16}) {
    set_worker_count(workers);
    const auto other = build_cache(fx.field, fx.params, fx.seeds);
    CHECK(same_bits(one.alphas(), other.alphas()));
    CHECK(same_bits(one.betas(), other.betas()));
  }
  set_worker_count(0);
}

TEST_CASE("save, load and save again is byte identical") {
  // The saddle half of this flow pushes pathlines out through the top and
  // bottom walls, so some records are partial.
  Fixture fx;
  fx.field = make_two_population(fx.spec, 0.3);
  fx.params = {.t0 = 10.0, .tau = -3.0, .dt_sample = 0.05};
  const auto cache = build_cache(fx.field, fx.params, fx.seeds);
  test::TempDir dir("store-rt");
  save_cache(cache, dir / "a.dync");
  const auto loaded = load_cache(dir / "a.dync", fx.field.fingerprint());
  save_cache(loaded, dir / "b.dync");
  CHECK(test::read_bytes(dir / "a.dync") == test::read_bytes(dir / "b.dync"));

  CHECK(loaded.header() == cache.header());
  CHECK(same_bits(loaded.alphas(), cache.alphas()));
  std::size_t partial = 0;
  for (std::size_t s = 0; s < cache.seed_count(); ++s) {
    CHECK(loaded.valid_count(s) == cache.valid_count(s));
    partial += cache.valid_count(s) < cache.samples_per_seed();
  }
  CHECK(partial > 0);
  CHECK(read_cache_header(dir / "a.dync") == cache.header());
}

TEST_CASE("header encoding round trip") {
  Fixture fx;
  CacheHeader h;
  h.field_fingerprint = fx.field.fingerprint();
  h.params = {.t0 = 15.0, .tau = -15.0, .dt_sample = 0.01, .rk_tol = 1e-7};
  h.seeds = GridSpec::from_extent({-0.5, -0.5}, {7.5, 0.5}, 640, 80, 0, 15, 1501);
  h.n = 1500;
  const auto bytes = encode_cache_header(h);
  CHECK(bytes.size() == kCacheHeaderBytes);
  CHECK(decode_cache_header(bytes) == h);
}

TEST_CASE("load errors") {
  Fixture fx;
  const auto cache = build_cache(fx.field, fx.params, fx.seeds);
  test::TempDir dir("store-err");
  save_cache(cache, dir / "ok.dync");
  const auto bytes = test::read_bytes(dir / "ok.dync");
  auto code_of = [](const std::filesystem::path& p, std::optional<Fingerprint> fp = std::nullopt) {
    try {
      load_cache(p, fp);
    } catch (const CacheError& e) {
      return e.code();
    }
    FAIL("no error");
    return CacheErrc::io;
  };

  Fingerprint other = fx.field.fingerprint();
  other[0] ^= 0xff;
  CHECK(code_of(dir / "ok.dync", other) == CacheErrc::fingerprint_mismatch);
  CHECK_NOTHROW(load_cache(dir / "ok.dync", fx.field.fingerprint()));

  auto cut = bytes;
  cut.resize(bytes.size() - 4);
  write_bytes(dir / "cut.dync", cut);
  CHECK(code_of(dir / "cut.dync") == CacheErrc::truncated);

  auto longer = bytes;
  longer.push_back(0);
  write_bytes(dir / "long.dync", longer);
  CHECK(code_of(dir / "long.dync") == CacheErrc::malformed_header);

  auto magic = bytes;
  magic[1] = 'Z';
  write_bytes(dir / "magic.dync", magic);
  CHECK(code_of(dir / "magic.dync") == CacheErrc::bad_magic);

  auto version = bytes;
  version[4] = 7;
  write_bytes(dir / "version.dync", version);
  CHECK(code_of(dir / "version.dync") == CacheErrc::version_mismatch);

  write_bytes(dir / "short.dync", {bytes.begin(), bytes.begin() + 20});
  CHECK(code_of(dir / "short.dync") == CacheErrc::truncated);

  CHECK(code_of(dir / "missing.dync") == CacheErrc::io);
}

TEST_CASE("a NaN inside the valid prefix is rejected") {
  Fixture fx;
  const auto cache = build_cache(fx.field, fx.params, fx.seeds);
  std::vector<float> alphas(cache.alphas().begin(), cache.alphas().end());
  std::vector<float> betas(cache.betas().begin(), cache.betas().end());
  REQUIRE(cache.valid_count(0) > 2);
  auto code_of = [&](std::vector<float> a, std::vector<float> b) {
    try {
      DynamicsCache(cache.header(), std::move(a), std::move(b));
    } catch (const CacheError& e) {
      return e.code();
    }
    FAIL("no error");
    return CacheErrc::io;
  };
  auto holed = alphas;
  holed[1] = std::nanf("");
  CHECK(code_of(holed, betas) == CacheErrc::corrupt_payload);
  auto unpaired = betas;
  unpaired[cache.valid_count(0) - 1] = std::nanf("");
  CHECK(code_of(alphas, unpaired) == CacheErrc::corrupt_payload);
}

}  // TEST_SUITE
