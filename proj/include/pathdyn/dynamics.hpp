#pragma once

#include <cstddef>
#include <optional>
#include <span>
#include <vector>

#include "pathdyn/advect.hpp"
#include "pathdyn/field.hpp"

namespace pathdyn {

/// Infinitesimal strain and rotation of one sample step.
struct StrainRotationStep {
  Mat2 eps;      // symmetric part of h * grad v
  Mat2 omega;    // antisymmetric part of h * grad v
  double alpha;  // det(eps)
  double beta;   // det(omega), never negative
};

/// eps = (h/2)(G + G^T), omega = (h/2)(G - G^T). h may be negative for
/// backward runs; alpha and beta do not depend on its sign.
StrainRotationStep strain_rotation_step(const Mat2& grad, double h);

/// alpha/beta progression of one pathline. Entries at index >= valid_count
/// are NaN padding.
struct DynamicsRecord {
  Vec2 seed;
  std::vector<float> alphas;
  std::vector<float> betas;
  std::size_t valid_count = 0;
  /// Per-step strain tensors; filled only when requested.
  std::vector<Mat2> strains;
};

/// Non-owning view of a record, used by histogramming and the cache.
struct DynamicsView {
  Vec2 seed;
  std::span<const float> alphas;
  std::span<const float> betas;
  std::size_t valid_count = 0;
};

inline DynamicsView view(const DynamicsRecord& r) {
  return {r.seed, r.alphas, r.betas, r.valid_count};
}

/// Evaluates grad v at samples 0..N-1 of the pathline and records
/// alpha_i, beta_i. Set keep_strains to also retain eps_i.
DynamicsRecord compute_dynamics(const VectorField2D& field, const PathlineSamples& pathline,
                                const IntegrationParams& params, bool keep_strains = false);

/// Writes alpha/beta for one seed straight into caller-provided storage of
/// length N and returns the valid count. Optionally accumulates sum(eps_i).
std::size_t compute_dynamics_into(const VectorField2D& field, const PathlineSamples& pathline,
                                  const IntegrationParams& params, std::span<float> alphas,
                                  std::span<float> betas, Mat2* strain_sum = nullptr);

// ---------------------------------------------------------------------------
// FTLE estimators

enum class FtleMethod { flow_map, localized, strain_sum };

/// How sum(eps_i) is turned into a principal stretch.
///  hencky:         stretch = exp(lambda_max(E_sum))   (E_sum read as a log strain)
///  green_lagrange: stretch = sqrt(lambda_max(2 E_sum + I))
enum class StrainSumMapping { hencky, green_lagrange };

struct FtleField {
  GridSpec spec;              // seed layout
  std::vector<double> values; // NaN where undefined
  FtleMethod method = FtleMethod::flow_map;
};

/// Flow-map FTLE: central differences of advected seed positions, C = F^T F,
/// (1/|tau|) ln sqrt(lambda_max(C)). Boundary seeds and seeds whose
/// stencil left the domain are NaN.
FtleField ftle_flow_map(const VectorField2D& field, const IntegrationParams& params,
                        const GridSpec& seeds);

/// Psi = exp(G_{N-1} h) ... exp(G_1 h) exp(G_0 h) along the pathline;
/// returns (1/|tau|) ln sqrt(lambda_max(Psi^T Psi)). NaN if the pathline
/// has no valid step.
double ftle_localized(const VectorField2D& field, const PathlineSamples& pathline,
                      const IntegrationParams& params);

/// Reconstruction from the summed infinitesimal strain. Uses
/// record.strains, which must have been retained. NaN when the mapping is
/// undefined (green_lagrange with lambda_max(2E+I) <= 0) or nothing is valid.
double ftle_strain_sum(const DynamicsRecord& record, const IntegrationParams& params,
                       StrainSumMapping mapping = StrainSumMapping::hencky);
double ftle_from_strain_sum(const Mat2& strain_sum, double tau,
                            StrainSumMapping mapping = StrainSumMapping::hencky);

/// Per-seed localized or strain-sum FTLE over a seed layout (flow_map
/// delegates to ftle_flow_map).
FtleField ftle_field(const VectorField2D& field, const IntegrationParams& params,
                     const GridSpec& seeds, FtleMethod method,
                     StrainSumMapping mapping = StrainSumMapping::hencky);

}  // namespace pathdyn
