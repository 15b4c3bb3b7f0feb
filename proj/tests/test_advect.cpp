#include <cmath>
#include <numbers>

#include "doctest.h"
#include "pathdyn/advect.hpp"
#include "support.hpp"

using namespace pathdyn;

namespace {

GridSpec box(double half, std::uint32_t n, double t1) {
  return GridSpec::from_extent({-half, -half}, {half, half}, n, n, 0.0, t1, 11);
}

}  // namespace

TEST_SUITE("advect") {

TEST_CASE("constant field advances x by t") {
  const auto spec = GridSpec::from_extent({0, 0}, {4, 1}, 9, 5, 0, 2, 3);
  const auto f = make_analytic("constant", spec);
  const IntegrationParams p{.t0 = 0.0, .tau = 2.0, .dt_sample = 0.1};
  const auto path = integrate_pathline(f, {0.5, 0.5}, p);
  REQUIRE(path.positions.size() == 21);
  REQUIRE(path.valid_count == 21);
  for (std::size_t i = 0; i <= 20; ++i) {
    CHECK(path.times[i] == p.sample_time(i));
    CHECK(path.positions[i].x == doctest::Approx(0.5 + 0.1 * i).epsilon(1e-12));
    CHECK(path.positions[i].y == doctest::Approx(0.5).epsilon(1e-12));
  }
}

TEST_CASE("rigid rotation carries (1,0) to (0,1) in a quarter turn") {
  const auto f = make_analytic("rigid_rotation", box(2.0, 41, 2.0));
  const IntegrationParams p{.t0 = 0.0, .tau = std::numbers::pi / 2, .dt_sample = std::numbers::pi / 200};
  REQUIRE(p.sample_count() == 100);
  const auto path = integrate_pathline(f, {1.0, 0.0}, p);
  REQUIRE(path.valid_count == 101);
  const Vec2 end = path.positions.back();
  CHECK(norm(end - Vec2{0.0, 1.0}) <= 10 * p.rk_tol);
  // Every intermediate sample sits on the unit circle at angle t.
  for (std::size_t i = 0; i <= 100; ++i) {
    const double t = path.times[i];
    CHECK(norm(path.positions[i] - Vec2{std::cos(t), std::sin(t)}) <= 10 * p.rk_tol);
  }
}

TEST_CASE("saddle carries (1,1) to (e, 1/e) at tau = 1") {
  const auto f = make_analytic("saddle", box(3.0, 61, 1.0));
  const IntegrationParams p{.t0 = 0.0, .tau = 1.0, .dt_sample = 0.01};
  const auto path = integrate_pathline(f, {1.0, 1.0}, p);
  REQUIRE(path.valid_count == 101);
  CHECK(std::abs(path.positions.back().x - std::numbers::e) <= 1e-5);
  CHECK(std::abs(path.positions.back().y - 1.0 / std::numbers::e) <= 1e-5);
}

TEST_CASE("tightening the tolerance does not increase the error") {
  const auto f = make_analytic("rigid_rotation", box(2.0, 41, 2.0));
  double previous = INFINITY;
  for (double tol : {1e-3, 5e-4, 2.5e-4, 1.25e-4, 6.25e-5, 1e-5, 1e-6, 1e-7, 1e-8}) {
    const IntegrationParams p{.t0 = 0.0, .tau = 1.5, .dt_sample = 0.01, .rk_tol = tol};
    const auto path = integrate_pathline(f, {1.0, 0.0}, p);
    const double err = norm(path.positions.back() - Vec2{std::cos(1.5), std::sin(1.5)});
    CHECK(err <= previous * (1 + 1e-9) + 1e-12);
    previous = err;
  }
  // On a saddle the error also tracks the tolerance.
  const auto s = make_analytic("saddle", box(3.0, 61, 1.0));
  previous = INFINITY;
  for (double tol : {1e-3, 1e-4, 1e-5, 1e-6, 1e-7}) {
    const IntegrationParams p{.t0 = 0.0, .tau = 1.0, .dt_sample = 0.01, .rk_tol = tol};
    const auto path = integrate_pathline(s, {1.0, 1.0}, p);
    const double err = norm(path.positions.back() - Vec2{std::numbers::e, 1.0 / std::numbers::e});
    CHECK(err <= previous * (1 + 1e-9) + 1e-12);
    previous = err;
  }
}

TEST_CASE("forward then backward advection returns to the seed") {
  auto round_trip = [](const VectorField2D& f, Vec2 seed, double t0, double tau) {
    const IntegrationParams fwd{.t0 = t0, .tau = tau, .dt_sample = 0.05};
    const auto out = integrate_pathline(f, seed, fwd);
    REQUIRE(out.valid_count == out.positions.size());
    const IntegrationParams back{.t0 = t0 + tau, .tau = -tau, .dt_sample = 0.05};
    const auto ret = integrate_pathline(f, out.positions.back(), back);
    REQUIRE(ret.valid_count == ret.positions.size());
    CHECK(ret.times.back() == doctest::Approx(t0).epsilon(1e-12));
    return norm(ret.positions.back() - seed);
  };
  std::mt19937 rng(17);
  std::uniform_real_distribution<double> ur(-1, 1);

  const auto rot = make_analytic("rigid_rotation", box(2.0, 41, 10.0));
  const auto saddle = make_analytic("saddle", box(3.0, 61, 10.0));
  for (int n = 0; n < 10; ++n) {
    CHECK(round_trip(rot, {ur(rng), ur(rng)}, 0.0, 5.0) <= 10 * 1e-6);
    CHECK(round_trip(saddle, {0.1 * ur(rng), ur(rng)}, 2.0, 1.0) <= 10 * 1e-6);
  }
}

TEST_CASE("backward samples run toward t0 + tau") {
  const auto spec = GridSpec::from_extent({0, 0}, {4, 1}, 9, 5, 0, 2, 3);
  const auto f = make_analytic("constant", spec);
  const IntegrationParams p{.t0 = 2.0, .tau = -2.0, .dt_sample = 0.25};
  const auto path = integrate_pathline(f, {3.0, 0.5}, p);
  REQUIRE(path.times.size() == 9);
  CHECK(path.times.front() == 2.0);
  CHECK(path.times.back() == doctest::Approx(0.0));
  CHECK(path.positions.back().x == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("leaving the domain truncates and freezes the pathline") {
  const auto spec = GridSpec::from_extent({0, 0}, {1, 1}, 5, 5, 0, 2, 3);
  const auto f = make_analytic("constant", spec);
  const IntegrationParams p{.t0 = 0.0, .tau = 2.0, .dt_sample = 0.1};
  const auto path = integrate_pathline(f, {0.05, 0.5}, p);
  REQUIRE(path.positions.size() == 21);
  // x = 0.05 + 0.1 i stays inside through i = 9.
  CHECK(path.valid_count == 10);
  const Vec2 last = path.positions[path.valid_count - 1];
  CHECK(last.x == doctest::Approx(0.95).epsilon(1e-9));
  for (std::size_t i = path.valid_count; i < path.positions.size(); ++i) CHECK(path.positions[i] == last);
}

TEST_CASE("seed outside the domain yields no valid samples") {
  const auto spec = GridSpec::from_extent({0, 0}, {1, 1}, 5, 5, 0, 2, 3);
  const auto f = make_analytic("constant", spec);
  const auto path = integrate_pathline(f, {1.5, 0.5}, {.t0 = 0, .tau = 1, .dt_sample = 0.1});
  CHECK(path.valid_count == 0);
}

TEST_CASE("parameter validation") {
  const auto spec = GridSpec::from_extent({0, 0}, {1, 1}, 5, 5, 0, 2, 3);
  const auto f = make_analytic("constant", spec);
  auto bad = [&](IntegrationParams p) { CHECK_THROWS_AS(integrate_pathline(f, {0.5, 0.5}, p), std::invalid_argument); };
  bad({.t0 = 0, .tau = 1, .dt_sample = 0});
  bad({.t0 = 0, .tau = 1, .dt_sample = -0.1});
  bad({.t0 = 0, .tau = 0.05, .dt_sample = 0.1});
  bad({.t0 = 0, .tau = 3, .dt_sample = 0.1});
  bad({.t0 = -1, .tau = 1, .dt_sample = 0.1});
  bad({.t0 = 1, .tau = -1.5, .dt_sample = 0.1});
  bad({.t0 = 0, .tau = 1, .dt_sample = 0.1, .rk_tol = 0});
  CHECK(IntegrationParams{.tau = 10, .dt_sample = 0.01}.sample_count() == 1000);
  CHECK(IntegrationParams{.tau = -20, .dt_sample = 0.01}.sample_count() == 2000);
}

TEST_CASE("seed grids") {
  const auto a = GridSpec::from_extent({0, 0}, {1, 1}, 4, 4, 0, 1, 2);
  CHECK(seed_grid(a, 1).size() == 16);
  CHECK(seed_grid(a, 2).size() == 4);
  const auto b = GridSpec::from_extent({0, 0}, {2, 1}, 640, 80, 0, 1, 2);
  CHECK(seed_grid(b, 1).size() == 51200);
  CHECK_THROWS_AS(seed_grid(a, 0), std::invalid_argument);

  const auto s = seed_spec(a, 2);
  CHECK(s.nx == 2);
  CHECK(s.ny == 2);
  const auto pts = seed_grid(a, 2);
  CHECK(pts == seeds_of(s));
  CHECK(pts[1] == a.node(2, 0));
  CHECK(pts[2] == a.node(0, 2));
}

}  // TEST_SUITE
