#include "pathdyn/dynamics.hpp"

#include <cmath>
#include <limits>
#include <stdexcept>

#include "pathdyn/parallel.hpp"

namespace pathdyn {

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();
constexpr float kPad = std::numeric_limits<float>::quiet_NaN();

double stretch_rate(double lambda_max_c, double time) {
  return 0.5 * std::log(lambda_max_c) / time;
}

}  // namespace

StrainRotationStep strain_rotation_step(const Mat2& grad, double h) {
  const Mat2 gt = transpose(grad);
  StrainRotationStep s;
  s.eps = (0.5 * h) * (grad + gt);
  s.omega = (0.5 * h) * (grad - gt);
  // Exact symmetry / antisymmetry regardless of rounding in the sums above.
  s.eps.yx = s.eps.xy;
  s.omega.yx = -s.omega.xy;
  s.omega.xx = 0.0;
  s.omega.yy = 0.0;
  s.alpha = det(s.eps);
  s.beta = s.omega.xy * s.omega.xy;
  return s;
}

std::size_t compute_dynamics_into(const VectorField2D& field, const PathlineSamples& pathline,
                                  const IntegrationParams& params, std::span<float> alphas,
                                  std::span<float> betas, Mat2* strain_sum) {
  const std::size_t n = params.sample_count();
  if (alphas.size() != n || betas.size() != n)
    throw std::invalid_argument("compute_dynamics: output length must equal N");
  if (pathline.positions.size() != n + 1)
    throw std::invalid_argument("compute_dynamics: pathline was integrated with other params");

  const double h = params.signed_step();
  const std::size_t limit = std::min(pathline.valid_count, n);
  std::size_t valid = 0;
  Mat2 sum{};
  for (; valid < limit; ++valid) {
    const VelocitySample s = field.sample(pathline.positions[valid], pathline.times[valid]);
    if (!s.inside) break;
    const StrainRotationStep step = strain_rotation_step(s.gradient, h);
    alphas[valid] = static_cast<float>(step.alpha);
    betas[valid] = static_cast<float>(step.beta);
    sum = sum + step.eps;
  }
  for (std::size_t i = valid; i < n; ++i) {
    alphas[i] = kPad;
    betas[i] = kPad;
  }
  if (strain_sum != nullptr) *strain_sum = sum;
  return valid;
}

DynamicsRecord compute_dynamics(const VectorField2D& field, const PathlineSamples& pathline,
                                const IntegrationParams& params, bool keep_strains) {
  const std::size_t n = params.sample_count();
  DynamicsRecord r;
  r.seed = pathline.seed;
  r.alphas.resize(n);
  r.betas.resize(n);
  r.valid_count = compute_dynamics_into(field, pathline, params, r.alphas, r.betas);
  if (keep_strains) {
    const double h = params.signed_step();
    r.strains.reserve(r.valid_count);
    for (std::size_t i = 0; i < r.valid_count; ++i) {
      const VelocitySample s = field.sample(pathline.positions[i], pathline.times[i]);
      r.strains.push_back(strain_rotation_step(s.gradient, h).eps);
    }
  }
  return r;
}

double ftle_localized(const VectorField2D& field, const PathlineSamples& pathline,
                      const IntegrationParams& params) {
  const std::size_t n = params.sample_count();
  const std::size_t limit = std::min(pathline.valid_count, n);
  const double h = params.signed_step();
  Mat2 psi = Mat2::identity();
  std::size_t steps = 0;
  for (; steps < limit; ++steps) {
    const VelocitySample s = field.sample(pathline.positions[steps], pathline.times[steps]);
    if (!s.inside) break;
    // Later steps multiply from the left.
    psi = expm(h * s.gradient) * psi;
  }
  if (steps == 0) return kNaN;
  return stretch_rate(max_eigenvalue_sym(transpose(psi) * psi),
                      static_cast<double>(steps) * params.dt_sample);
}

double ftle_from_strain_sum(const Mat2& e, double tau, StrainSumMapping mapping) {
  const double time = std::abs(tau);
  if (!(time > 0.0)) return kNaN;
  if (mapping == StrainSumMapping::hencky) return max_eigenvalue_sym(e) / time;
  const double lambda = max_eigenvalue_sym(2.0 * e + Mat2::identity());
  if (!(lambda > 0.0)) return kNaN;
  return stretch_rate(lambda, time);
}

double ftle_strain_sum(const DynamicsRecord& record, const IntegrationParams& params,
                       StrainSumMapping mapping) {
  if (record.strains.size() < record.valid_count)
    throw std::invalid_argument("ftle_strain_sum: record has no retained strain tensors");
  if (record.valid_count == 0) return kNaN;
  Mat2 sum{};
  for (std::size_t i = 0; i < record.valid_count; ++i) sum = sum + record.strains[i];
  return ftle_from_strain_sum(sum, static_cast<double>(record.valid_count) * params.dt_sample,
                              mapping);
}

FtleField ftle_flow_map(const VectorField2D& field, const IntegrationParams& params,
                        const GridSpec& seeds) {
  params.validate(field.spec());
  const std::size_t nx = seeds.nx;
  const std::size_t ny = seeds.ny;
  const std::size_t n = params.sample_count();
  const auto positions = seeds_of(seeds);

  std::vector<Vec2> mapped(positions.size());
  std::vector<char> complete(positions.size(), 0);
  parallel_for(positions.size(), [&](std::size_t s) {
    const PathlineSamples p = integrate_pathline(field, positions[s], params);
    mapped[s] = p.positions.back();
    complete[s] = p.valid_count == n + 1;
  });

  FtleField out;
  out.spec = seeds;
  out.method = FtleMethod::flow_map;
  out.values.assign(positions.size(), kNaN);
  const double time = static_cast<double>(n) * params.dt_sample;
  for (std::size_t j = 1; j + 1 < ny; ++j) {
    for (std::size_t i = 1; i + 1 < nx; ++i) {
      const std::size_t c = j * nx + i;
      const std::size_t l = c - 1, r = c + 1, d = c - nx, u = c + nx;
      if (!complete[c] || !complete[l] || !complete[r] || !complete[d] || !complete[u]) continue;
      const Vec2 dx = (1.0 / (2.0 * seeds.spacing.x)) * (mapped[r] - mapped[l]);
      const Vec2 dy = (1.0 / (2.0 * seeds.spacing.y)) * (mapped[u] - mapped[d]);
      const Mat2 f{dx.x, dy.x, dx.y, dy.y};
      out.values[c] = stretch_rate(max_eigenvalue_sym(transpose(f) * f), time);
    }
  }
  return out;
}

FtleField ftle_field(const VectorField2D& field, const IntegrationParams& params,
                     const GridSpec& seeds, FtleMethod method, StrainSumMapping mapping) {
  if (method == FtleMethod::flow_map) return ftle_flow_map(field, params, seeds);
  params.validate(field.spec());
  const std::size_t n = params.sample_count();
  const auto positions = seeds_of(seeds);

  FtleField out;
  out.spec = seeds;
  out.method = method;
  out.values.assign(positions.size(), kNaN);
  parallel_for(positions.size(), [&](std::size_t s) {
    const PathlineSamples p = integrate_pathline(field, positions[s], params);
    if (p.valid_count != n + 1) return;
    if (method == FtleMethod::localized) {
      out.values[s] = ftle_localized(field, p, params);
      return;
    }
    std::vector<float> alphas(n), betas(n);
    Mat2 sum{};
    const std::size_t valid = compute_dynamics_into(field, p, params, alphas, betas, &sum);
    if (valid == n)
      out.values[s] = ftle_from_strain_sum(sum, static_cast<double>(n) * params.dt_sample, mapping);
  });
  return out;
}

}  // namespace pathdyn
