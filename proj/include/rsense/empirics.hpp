#pragma once

#include <functional>
#include <optional>
#include <utility>

#include "rsense/common.hpp"
#include "rsense/core_model.hpp"
#include "rsense/losses.hpp"

namespace rsense {

/// Sampling controls shared by the constant estimators.
///
/// Low-rank test matrices come from random_low_rank_symmetric. Noise
/// directions are uniform on the sphere with log-uniform magnitudes in
/// [noise_min, noise_max]; noise_max defaults to ||b||. Matrix scales are
/// log-uniform in [1e-2, 1] * matrix_scale, matrix_scale defaulting to
/// max(||b||, 1).
struct EstimatorOptions {
  int rank = 2;
  double noise_min = 1e-3;
  std::optional<double> noise_max;
  std::optional<double> matrix_scale;
  /// Pair separation for estimate_rho, log-uniform in [separation_min, 1]
  /// relative to the matrix scale. Zero forces M' = M.
  double separation_min = 1e-3;
  double separation_max = 1.0;
  /// Optional center for the sampled matrices in estimate_rho.
  std::optional<Matrix> center;
};

/// A sampled supremum. It is a lower bound on the true constant.
struct SupEstimate {
  double value = 0.0;
  int used = 0;
  int skipped = 0;  // samples whose denominator fell below 1e-12
};

/// sup |<grad_M L(M, w) - grad_M L(M, 0), K>| / ||w||, M = M_base + low-rank, K unit low-rank.
/// L(M, w) is the loss with measurements b + w.
SupEstimate estimate_zeta1(const LossSpec& spec, const SensingOperator& op, const Vector& b,
                           const Matrix& M_base, int samples, Seed seed,
                           const EstimatorOptions& opts = {});

/// sup |[Hess L(M, w) - Hess L(M, 0)](K, L)| / ||w||, bilinear form by polarization.
SupEstimate estimate_zeta2(const LossSpec& spec, const SensingOperator& op, const Vector& b,
                           const Matrix& M_base, int samples, Seed seed,
                           const EstimatorOptions& opts = {});

/// sup ||grad_M L(M) - grad_M L(M')||_F / ||M - M'||_F over rank-<= r pairs.
/// Throws when every sampled pair is degenerate.
SupEstimate estimate_rho(const LossSpec& spec, const SensingOperator& op, const Vector& b, int samples,
                         Seed seed, const EstimatorOptions& opts = {});

struct Lambda12 {
  SupEstimate lambda1;  // gradient Lipschitz constant in w
  SupEstimate lambda2;  // Hessian-form Lipschitz constant in w
};

Lambda12 estimate_lambda12(const LossSpec& spec, const SensingOperator& op, const Vector& b, const Matrix& M,
                           int samples, Seed seed, const EstimatorOptions& opts = {});

struct ResidualConstants {
  double g_min = 1.0;  // min_i (1/m) sum_j exp(-(r_j - r_i)^2 / h^2)
  double b_max = 0.0;  // max_{i,j} |r_j - r_i|
};

ResidualConstants residual_constants(const Vector& r, double h);

/// sup over unit low-rank K of |<K, Hess L(M)[K]>|.
SupEstimate estimate_hessian_scale(const LossSpec& spec, const SensingOperator& op, const Vector& b,
                                   const Matrix& M, int samples, Seed seed, const EstimatorOptions& opts = {});

struct FiniteDiffReport {
  double max_rel_err = 0.0;
  double grad_norm = 0.0;
  bool vacuous = false;  // analytic gradient below 1e-10; nothing to compare
  bool pass = false;
};

using GradientFn = std::function<Matrix(const LossSpec&, const SensingOperator&, const Vector&, const Matrix&)>;

/// Compares grad_X (or `gradient`, when given) with central differences of
/// the loss. Relative error is max-abs difference over max-abs entry.
FiniteDiffReport finite_diff_check(const LossSpec& spec, const SensingOperator& op, const Vector& b,
                                   const Matrix& X, double tol, const GradientFn& gradient = {});

struct ConstantEstimates {
  double zeta1 = 0.0;
  double zeta2 = 0.0;
  double rho = 0.0;
  double lambda1 = 0.0;
  double lambda2 = 0.0;
  double g_min = 1.0;
  double b_max = 0.0;
  double l1 = 0.0;  // 2(1 + delta)
  double l2 = 0.0;  // zero for a linear sensing map
  int samples = 0;
  Seed seed = 0;
};

/// All constants at M_base. G_min and B come from the residuals at M_base,
/// L1 = 2(1 + delta) from the supplied RIP estimate.
ConstantEstimates estimate_constants(const LossSpec& spec, const SensingOperator& op, const Vector& b,
                                     const Matrix& M_base, double delta, int samples, Seed seed,
                                     const EstimatorOptions& opts = {});

}  // namespace rsense
