#include "pathdyn/advect.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>

namespace pathdyn {

namespace {

// Dormand-Prince 5(4) tableau.
constexpr double c2 = 1.0 / 5.0, c3 = 3.0 / 10.0, c4 = 4.0 / 5.0, c5 = 8.0 / 9.0;
constexpr double a21 = 1.0 / 5.0;
constexpr double a31 = 3.0 / 40.0, a32 = 9.0 / 40.0;
constexpr double a41 = 44.0 / 45.0, a42 = -56.0 / 15.0, a43 = 32.0 / 9.0;
constexpr double a51 = 19372.0 / 6561.0, a52 = -25360.0 / 2187.0, a53 = 64448.0 / 6561.0,
                 a54 = -212.0 / 729.0;
constexpr double a61 = 9017.0 / 3168.0, a62 = -355.0 / 33.0, a63 = 46732.0 / 5247.0,
                 a64 = 49.0 / 176.0, a65 = -5103.0 / 18656.0;
constexpr double a71 = 35.0 / 384.0, a73 = 500.0 / 1113.0, a74 = 125.0 / 192.0,
                 a75 = -2187.0 / 6784.0, a76 = 11.0 / 84.0;
// Error weights (5th minus 4th order solution).
constexpr double e1 = 71.0 / 57600.0, e3 = -71.0 / 16695.0, e4 = 71.0 / 1920.0,
                 e5 = -17253.0 / 339200.0, e6 = 22.0 / 525.0, e7 = -1.0 / 40.0;
// Dense output.
constexpr double d1 = -12715105075.0 / 11282082432.0, d3 = 87487479700.0 / 32700410799.0,
                 d4 = -10690763975.0 / 1880347072.0, d5 = 701980252875.0 / 199316789632.0,
                 d6 = -1453857185.0 / 822651844.0, d7 = 69997945.0 / 29380423.0;

constexpr double kSafety = 0.9;
constexpr double kMinShrink = 0.2;
constexpr double kMaxGrow = 10.0;
constexpr std::size_t kMaxSteps = 1'000'000;

struct DenseStep {
  Vec2 r1, r2, r3, r4, r5;
  double t = 0.0;
  double h = 0.0;

  Vec2 at(double time) const {
    const double theta = (time - t) / h;
    const double theta1 = 1.0 - theta;
    return r1 + theta * (r2 + theta1 * (r3 + theta * (r4 + theta1 * r5)));
  }
};

}  // namespace

std::size_t IntegrationParams::sample_count() const {
  return static_cast<std::size_t>(std::llround(std::abs(tau) / dt_sample));
}

void IntegrationParams::validate(const GridSpec& spec) const {
  auto fail = [](const std::string& msg) {
    throw std::invalid_argument("IntegrationParams: " + msg);
  };
  if (!(dt_sample > 0.0) || !std::isfinite(dt_sample)) fail("dt_sample must be positive");
  if (!std::isfinite(tau) || !std::isfinite(t0)) fail("t0 and tau must be finite");
  if (!(rk_tol > 0.0)) fail("rk_tol must be positive");
  if (std::abs(tau) / dt_sample < 1.0 - 1e-9) fail("|tau| / dt_sample must be at least 1");
  if (!spec.contains_time(t0)) fail("t0 outside the field's time bounds");
  if (!spec.contains_time(sample_time(sample_count())))
    fail("t0 + tau outside the field's time bounds");
}

PathlineSamples integrate_pathline(const VectorField2D& field, Vec2 seed,
                                   const IntegrationParams& params) {
  params.validate(field.spec());
  const GridSpec& spec = field.spec();
  const std::size_t n = params.sample_count();
  const double dir = params.direction();
  const double t_end = params.sample_time(n);

  PathlineSamples out;
  out.seed = seed;
  out.times.resize(n + 1);
  out.positions.assign(n + 1, seed);
  for (std::size_t i = 0; i <= n; ++i) out.times[i] = params.sample_time(i);

  Vec2 k1;
  if (!field.velocity(seed, params.t0, k1)) return out;  // seed outside: no valid samples
  out.valid_count = 1;

  const double span = std::abs(t_end - params.t0);
  const double h_min = 1e-12 * std::max(1.0, span);
  const double tol = params.rk_tol;

  Vec2 y = seed;
  double t = params.t0;
  double h = dir * std::min(params.dt_sample, span);
  std::size_t next = 1;
  bool rejected = false;

  auto freeze = [&] {
    const Vec2 last = out.positions[out.valid_count - 1];
    std::fill(out.positions.begin() + static_cast<std::ptrdiff_t>(out.valid_count),
              out.positions.end(), last);
  };

  // Frame times are kinks of the time interpolation; steps end on them
  // rather than straddle them.
  const double frame_dt = spec.time_step();
  auto next_frame = [&](double from) {
    const double r = (from - spec.t_min) / frame_dt;
    const double k = dir > 0.0 ? std::floor(r + 1e-9) + 1.0 : std::ceil(r - 1e-9) - 1.0;
    return spec.t_min + k * frame_dt;
  };

  for (std::size_t step = 0; step < kMaxSteps && next <= n; ++step) {
    if (dir * (t + h - t_end) > 0.0) h = t_end - t;
    const double h_free = h;
    const double frame = next_frame(t);
    if (dir * (t + h - frame) > 0.0) h = frame - t;

    Vec2 k2, k3, k4, k5, k6, k7;
    const bool staged =
        field.velocity(y + h * (a21 * k1), t + c2 * h, k2) &&
        field.velocity(y + h * (a31 * k1 + a32 * k2), t + c3 * h, k3) &&
        field.velocity(y + h * (a41 * k1 + a42 * k2 + a43 * k3), t + c4 * h, k4) &&
        field.velocity(y + h * (a51 * k1 + a52 * k2 + a53 * k3 + a54 * k4), t + c5 * h, k5) &&
        field.velocity(y + h * (a61 * k1 + a62 * k2 + a63 * k3 + a64 * k4 + a65 * k5), t + h, k6);
    const Vec2 y_new = y + h * (a71 * k1 + a73 * k3 + a74 * k4 + a75 * k5 + a76 * k6);
    const bool finished = staged && field.velocity(y_new, t + h, k7);

    if (!finished) {
      // A stage left the domain: shrink until the step fits or the pathline
      // has effectively reached the boundary.
      h *= 0.5;
      rejected = true;
      if (std::abs(h) < h_min) break;
      continue;
    }

    const Vec2 err_vec = h * (e1 * k1 + e3 * k3 + e4 * k4 + e5 * k5 + e6 * k6 + e7 * k7);
    const double sx = tol + tol * std::max(std::abs(y.x), std::abs(y_new.x));
    const double sy = tol + tol * std::max(std::abs(y.y), std::abs(y_new.y));
    const double err = std::sqrt(0.5 * ((err_vec.x / sx) * (err_vec.x / sx) +
                                        (err_vec.y / sy) * (err_vec.y / sy)));

    if (err > 1.0) {
      h *= std::max(kMinShrink, kSafety * std::pow(err, -0.2));
      rejected = true;
      if (std::abs(h) < h_min) break;
      continue;
    }

    DenseStep dense;
    dense.t = t;
    dense.h = h;
    dense.r1 = y;
    dense.r2 = y_new - y;
    dense.r3 = h * k1 - dense.r2;
    dense.r4 = dense.r2 - h * k7 - dense.r3;
    dense.r5 = h * (d1 * k1 + d3 * k3 + d4 * k4 + d5 * k5 + d6 * k6 + d7 * k7);

    const double t_new = (t + h == t_end || std::abs(t_end - (t + h)) < h_min) ? t_end : t + h;
    bool exited = false;
    while (next <= n && dir * (out.times[next] - t_new) <= 0.0) {
      const Vec2 p = next == n && t_new == t_end ? y_new : dense.at(out.times[next]);
      if (!spec.contains_point(p)) {
        exited = true;
        break;
      }
      out.positions[next] = p;
      ++next;
      out.valid_count = next;
    }
    if (exited) break;

    double grow = err > 0.0 ? kSafety * std::pow(err, -0.2) : kMaxGrow;
    grow = std::clamp(grow, kMinShrink, kMaxGrow);
    if (rejected) grow = std::min(grow, 1.0);
    rejected = false;

    y = y_new;
    t = t_new;
    k1 = k7;
    h = (h == h_free ? h : std::max(std::abs(h), std::abs(h_free)) * dir) * grow;
  }

  freeze();
  return out;
}

std::vector<Vec2> seed_grid(const GridSpec& spec, std::size_t stride) {
  return seeds_of(seed_spec(spec, stride));
}

GridSpec seed_spec(const GridSpec& spec, std::size_t stride) {
  if (stride == 0) throw std::invalid_argument("seed stride must be at least 1");
  GridSpec s = spec;
  s.spacing = {spec.spacing.x * static_cast<double>(stride),
               spec.spacing.y * static_cast<double>(stride)};
  s.nx = static_cast<std::uint32_t>((spec.nx - 1) / stride + 1);
  s.ny = static_cast<std::uint32_t>((spec.ny - 1) / stride + 1);
  return s;
}

std::vector<Vec2> seeds_of(const GridSpec& seeds) {
  std::vector<Vec2> out;
  out.reserve(seeds.node_count());
  for (std::size_t j = 0; j < seeds.ny; ++j)
    for (std::size_t i = 0; i < seeds.nx; ++i) out.push_back(seeds.node(i, j));
  return out;
}

}  // namespace pathdyn
