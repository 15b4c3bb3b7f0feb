#include <cmath>
#include <cstring>
#include <fstream>
#include <random>

#include "doctest.h"
#include "pathdyn/field.hpp"
#include "support.hpp"

using namespace pathdyn;

TEST_SUITE("field") {

TEST_CASE("constant field samples to unit velocity and zero gradient") {
  const auto spec = GridSpec::from_extent({0, 0}, {1, 1}, 5, 5, 0, 1, 3);
  const auto f = make_analytic("constant", spec);
  for (Vec2 p : {Vec2{0.13, 0.71}, Vec2{0.5, 0.5}, Vec2{1.0, 0.0}}) {
    const auto s = sample(f, p, 0.37);
    REQUIRE(s.inside);
    CHECK(s.velocity == Vec2{1.0, 0.0});
    CHECK(s.gradient == Mat2{});
  }
}

TEST_CASE("central differences recover the gradient of a linear field at interior nodes") {
  const auto spec = GridSpec::from_extent({-1, -1}, {1, 1}, 9, 9, 0, 1, 2);
  const auto f = rasterize(spec, [](Vec2 p, double) { return Vec2{p.y, -p.x}; }, "linear");
  for (std::size_t j = 1; j + 1 < spec.ny; ++j) {
    for (std::size_t i = 1; i + 1 < spec.nx; ++i) {
      const auto s = sample(f, spec.node(i, j), 0.0);
      CHECK(s.gradient.xx == doctest::Approx(0.0).epsilon(1e-6));
      CHECK(s.gradient.xy == doctest::Approx(1.0).epsilon(1e-6));
      CHECK(s.gradient.yx == doctest::Approx(-1.0).epsilon(1e-6));
      CHECK(s.gradient.yy == doctest::Approx(0.0).epsilon(1e-6));
    }
  }
}

TEST_CASE("one-sided boundary differences are exact for linear fields") {
  const auto spec = GridSpec::from_extent({0, 0}, {2, 1}, 6, 4, 0, 1, 2);
  const auto f = make_analytic("saddle", spec);
  for (std::size_t j : {std::size_t{0}, std::size_t{3}}) {
    for (std::size_t i : {std::size_t{0}, std::size_t{5}}) {
      const Mat2 g = f.node_gradient(0, i, j);
      CHECK(g.xx == doctest::Approx(1.0).epsilon(1e-6));
      CHECK(g.yy == doctest::Approx(-1.0).epsilon(1e-6));
      CHECK(std::abs(g.xy) < 1e-6);
      CHECK(std::abs(g.yx) < 1e-6);
    }
  }
}

TEST_CASE("sampling at nodes and frame times reproduces stored values bit for bit") {
  const auto spec = GridSpec::from_extent({-0.3, 0.1}, {0.7, 0.9}, 11, 7, 0.0, 3.0, 4);
  const auto f = rasterize(spec, test::random_smooth_flow(3), "random");
  for (std::size_t k = 0; k < spec.nt; ++k) {
    for (std::size_t j = 0; j < spec.ny; ++j) {
      for (std::size_t i = 0; i < spec.nx; ++i) {
        const auto s = sample(f, spec.node(i, j), spec.frame_time(k));
        REQUIRE(s.inside);
        CHECK(s.velocity == f.node_velocity(k, i, j));
      }
    }
  }
}

TEST_CASE("interpolation is linear: midpoints average their neighbours") {
  const auto spec = GridSpec::from_extent({0, 0}, {1, 1}, 8, 8, 0, 1, 3);
  const auto f = rasterize(spec, test::random_smooth_flow(11), "random");
  std::mt19937 rng(5);
  std::uniform_int_distribution<std::size_t> pick(0, 6);
  for (int trial = 0; trial < 50; ++trial) {
    const std::size_t i = pick(rng), j = pick(rng);
    const double t = spec.frame_time(1);
    const Vec2 a = spec.node(i, j), b = spec.node(i + 1, j);
    const auto mid = sample(f, 0.5 * (a + b), t).velocity;
    const Vec2 avg = 0.5 * (f.node_velocity(1, i, j) + f.node_velocity(1, i + 1, j));
    CHECK(mid.x == doctest::Approx(avg.x).epsilon(1e-12));
    CHECK(mid.y == doctest::Approx(avg.y).epsilon(1e-12));
    // Halfway between frames.
    const double tm = 0.5 * (spec.frame_time(0) + spec.frame_time(1));
    const auto tmid = sample(f, a, tm).velocity;
    const Vec2 tavg = 0.5 * (f.node_velocity(0, i, j) + f.node_velocity(1, i, j));
    CHECK(tmid.x == doctest::Approx(tavg.x).epsilon(1e-12));
  }
}

TEST_CASE("double gyre rasterization converges at second order") {
  const auto exact = analytic_flow("double_gyre");
  auto max_error = [&](std::uint32_t nx, std::uint32_t ny) {
    const auto spec = GridSpec::from_extent({0, 0}, {2, 1}, nx, ny, 0, 10, 101);
    const auto f = make_analytic("double_gyre", spec);
    std::mt19937 rng(7);
    std::uniform_real_distribution<double> ux(0, 2), uy(0, 1);
    double err = 0.0;
    for (int n = 0; n < 2000; ++n) {
      const Vec2 p{ux(rng), uy(rng)};
      const double t = 2.0;  // a frame time, so only spatial error remains
      err = std::max(err, norm(sample(f, p, t).velocity - exact(p, t)));
    }
    return err;
  };
  const double coarse = max_error(256, 128);
  const double fine = max_error(512, 256);
  MESSAGE("max |v - v_exact|: 256x128 " << coarse << ", 512x256 " << fine);
  const double h = 2.0 / 511.0;
  CHECK(fine < 2.0 * h * h);
  CHECK(coarse / fine > 3.0);  // ~4 for O(h^2)
}

TEST_CASE("inside flag covers the closed domain and time interval") {
  const auto spec = GridSpec::from_extent({0, 0}, {1, 2}, 3, 3, 1, 2, 2);
  const auto f = make_analytic("constant", spec);
  CHECK(sample(f, {0, 0}, 1).inside);
  CHECK(sample(f, {1, 2}, 2).inside);
  CHECK_FALSE(sample(f, {1.0001, 1}, 1.5).inside);
  CHECK_FALSE(sample(f, {0.5, -1e-9}, 1.5).inside);
  CHECK_FALSE(sample(f, {0.5, 0.5}, 0.9).inside);
  CHECK_FALSE(sample(f, {0.5, 0.5}, 2.1).inside);
  // Spatial membership does not depend on the frame.
  for (std::size_t k = 0; k < spec.nt; ++k) CHECK(sample(f, {0.25, 1.5}, spec.frame_time(k)).inside);
}

TEST_CASE("analytic flows match their closed forms") {
  const auto spec = GridSpec::from_extent({-2, -2}, {2, 2}, 9, 9, 0, 1, 2);
  const auto saddle = make_analytic("saddle", spec);
  const auto rot = make_analytic("rigid_rotation", spec);
  CHECK(saddle.node_velocity(0, 5, 1) == Vec2{0.5, 1.5});
  CHECK(rot.node_velocity(0, 5, 1) == Vec2{1.5, 0.5});
  const auto s = sample(saddle, {0.3, 0.7}, 0.5);
  CHECK(s.gradient.xx == doctest::Approx(1.0));
  CHECK(s.gradient.yy == doctest::Approx(-1.0));
  CHECK_THROWS_AS(make_analytic("vortex_street", spec), std::invalid_argument);
}

TEST_CASE("GridSpec validation") {
  GridSpec g;
  CHECK_NOTHROW(g.validate());
  g.nx = 1;
  CHECK_THROWS_AS(g.validate(), std::invalid_argument);
  g = GridSpec{};
  g.spacing.y = 0.0;
  CHECK_THROWS_AS(g.validate(), std::invalid_argument);
  g = GridSpec{};
  g.t_max = g.t_min;
  CHECK_THROWS_AS(g.validate(), std::invalid_argument);
  const auto e = GridSpec::from_extent({-0.5, -0.5}, {7.5, 0.5}, 640, 80, 0, 15, 1501);
  CHECK(e.extent_max().x == doctest::Approx(7.5).epsilon(1e-14));
  CHECK(e.extent_max().y == doctest::Approx(0.5).epsilon(1e-14));
}

TEST_CASE("dataset round trip and fingerprint of file bytes") {
  test::TempDir dir("field");
  const auto spec = GridSpec::from_extent({0, 0}, {1, 1}, 4, 4, 0, 1, 2);
  const auto f = rasterize(spec, test::random_smooth_flow(1), "r");
  save_dataset(f, dir / "a.vf2d");
  const auto g = load_dataset(dir / "a.vf2d");
  CHECK(g.spec() == spec);
  REQUIRE(g.data().size() == 2 * 16 * 2);
  CHECK(std::equal(g.data().begin(), g.data().end(), f.data().begin()));
  CHECK(g.fingerprint() == sha256(test::read_bytes(dir / "a.vf2d")));
}

TEST_CASE("dataset loader reports distinct errors") {
  test::TempDir dir("field-err");
  const auto spec = GridSpec::from_extent({0, 0}, {1, 1}, 4, 4, 0, 1, 2);
  const auto f = make_analytic("constant", spec);
  save_dataset(f, dir / "ok.vf2d");
  auto bytes = test::read_bytes(dir / "ok.vf2d");
  auto write = [&](const std::string& name, const std::vector<std::uint8_t>& b) {
    std::ofstream out(dir / name, std::ios::binary);
    out.write(reinterpret_cast<const char*>(b.data()), static_cast<std::streamsize>(b.size()));
    return dir / name;
  };
  auto code_of = [](const std::filesystem::path& p) {
    try {
      load_dataset(p);
    } catch (const DatasetError& e) {
      return e.code();
    }
    FAIL("no error");
    return DatasetErrc::io;
  };

  auto truncated = bytes;
  truncated.resize(bytes.size() - 8);
  CHECK(code_of(write("trunc.vf2d", truncated)) == DatasetErrc::size_mismatch);

  auto magic = bytes;
  magic[0] = 'X';
  CHECK(code_of(write("magic.vf2d", magic)) == DatasetErrc::bad_magic);

  auto version = bytes;
  version[4] = 9;
  CHECK(code_of(write("version.vf2d", version)) == DatasetErrc::unsupported_version);

  auto header = bytes;
  header[8] = 1;  // nx = 1
  header[9] = header[10] = header[11] = 0;
  CHECK(code_of(write("header.vf2d", header)) == DatasetErrc::malformed_header);

  auto nan = bytes;
  const float q = std::nanf("");
  std::memcpy(nan.data() + kDatasetHeaderBytes + 12, &q, 4);
  CHECK(code_of(write("nan.vf2d", nan)) == DatasetErrc::non_finite);

  CHECK(code_of(dir / "missing.vf2d") == DatasetErrc::io);
}

TEST_CASE("headers for the large reference datasets are accepted without overflow") {
  auto check = [](std::uint32_t nx, std::uint32_t ny, std::uint32_t nt, double t1, std::uint64_t bytes) {
    const auto spec = GridSpec::from_extent({-0.5, -0.5}, {0.5, 2.5}, nx, ny, 0, t1, nt);
    const auto header = encode_dataset_header(spec);
    const GridSpec parsed = parse_dataset_header(header);
    CHECK(parsed == spec);
    CHECK(dataset_payload_bytes(parsed) == bytes);
  };
  // 640 x 80 x 1501 and 150 x 450 x 2001 frames of (u, v) f32.
  check(640, 80, 1501, 15, 614'809'600ull);
  check(150, 450, 2001, 20, 1'080'540'000ull);

  // A header declaring the full size over a tiny file is a size mismatch,
  // detected before the payload is allocated.
  test::TempDir dir("big");
  const auto spec = GridSpec::from_extent({-0.5, -0.5}, {7.5, 0.5}, 640, 80, 0, 15, 1501);
  const auto header = encode_dataset_header(spec);
  {
    std::ofstream out(dir / "big.vf2d", std::ios::binary);
    out.write(reinterpret_cast<const char*>(header.data()), static_cast<std::streamsize>(header.size()));
    const std::vector<char> some(1024, 0);
    out.write(some.data(), 1024);
  }
  try {
    load_dataset(dir / "big.vf2d");
    FAIL("expected size mismatch");
  } catch (const DatasetError& e) {
    CHECK(e.code() == DatasetErrc::size_mismatch);
  }
}

TEST_CASE("field sample counter counts every evaluation") {
  const auto spec = GridSpec::from_extent({0, 0}, {1, 1}, 4, 4, 0, 1, 2);
  const auto f = make_analytic("constant", spec);
  reset_field_sample_count();
  for (int i = 0; i < 10; ++i) sample(f, {0.5, 0.5}, 0.5);
  Vec2 v;
  f.velocity({0.5, 0.5}, 0.5, v);
  CHECK(field_sample_count() == 11);
  reset_field_sample_count();
  CHECK(field_sample_count() == 0);
}

}  // TEST_SUITE
