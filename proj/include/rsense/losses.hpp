#pragma once

#include <string>

#include "rsense/common.hpp"
#include "rsense/core_model.hpp"

namespace rsense {

enum class LossKind { mse, kernel, combined };

/// Normalization of the squared-residual loss.
///   half_sum: (1/2) sum r_i^2
///   mean:     (1/m) sum r_i^2
///   sum:      sum r_i^2
/// The combined loss always uses `mean` for its quadratic part.
enum class MseNorm { half_sum, mean, sum };

std::string to_string(LossKind kind);
std::string to_string(MseNorm norm);
LossKind loss_kind_from_string(const std::string& name);
MseNorm mse_norm_from_string(const std::string& name);

struct LossSpec {
  LossKind kind = LossKind::mse;
  double h = 1.0;           // bandwidth (kernel, combined)
  double lambda_mix = 0.5;  // weight of the quadratic part (combined)
  MseNorm mse_norm = MseNorm::half_sum;

  static LossSpec mse(MseNorm norm = MseNorm::half_sum) { return {LossKind::mse, 1.0, 0.5, norm}; }
  static LossSpec kernel(double h) { return {LossKind::kernel, h, 0.5, MseNorm::half_sum}; }
  static LossSpec combined(double lambda_mix, double h) {
    return {LossKind::combined, h, lambda_mix, MseNorm::mean};
  }

  void validate() const;
};

/// r = b - A(X X^T).
Vector residuals(const SensingOperator& op, const Vector& b, const Matrix& X);
/// r = b - A(M).
Vector residuals_of_matrix(const SensingOperator& op, const Vector& b, const Matrix& M);

double loss_value(const LossSpec& spec, const Vector& r);

/// Kernel loss (1/m) sum_i -log((1/m) sum_j exp(-(r_j - r_i)^2 / h^2)).
double kernel_loss(const Vector& r, double h);

/// Exact gradient of kernel_loss with respect to r:
///   g_k = 2/(m^2 h^2) sum_j K_kj (r_k - r_j) (1/G_j + 1/G_k),
/// where K_kj is the kernel weight and G_k the row average.
Vector kernel_grad_residual(const Vector& r, double h);

/// Kernel-weighted mean of the residuals around r_i.
double weighted_residual_mean(const Vector& r, double h, int i);

/// dL/dr for any loss kind.
Vector grad_residual(const LossSpec& spec, const Vector& r);

/// dL/dw; the noise enters the residual with unit coefficient, so this equals dL/dr.
Vector grad_w(const LossSpec& spec, const Vector& r);

/// grad_M L = -A^*(dL/dr), symmetric.
Matrix grad_M(const LossSpec& spec, const SensingOperator& op, const Vector& b, const Matrix& M);

/// grad_X L = 2 grad_M(X X^T) X.
Matrix grad_X(const LossSpec& spec, const SensingOperator& op, const Vector& b, const Matrix& X);

/// Loss and factor gradient in one pass; the solver's hot path.
struct ValueAndGrad {
  double value = 0.0;
  Matrix grad;
};
ValueAndGrad value_and_grad_X(const LossSpec& spec, const SensingOperator& op, const Vector& b,
                              const Matrix& X);

/// Step used for central differences of gradients: cbrt(machine eps) * (1 + scale).
double fd_gradient_step(double scale);

/// <K, Hess L(M)[K]>. Quadratic parts are analytic; the kernel part is a
/// second-order central difference of the loss along M + tK.
double hessian_quadratic_form(const LossSpec& spec, const SensingOperator& op, const Vector& b,
                              const Matrix& M, const Matrix& K);

/// Hess L(M)[K]: analytic for the quadratic part, central difference of grad_M otherwise.
Matrix hessian_vector_product(const LossSpec& spec, const SensingOperator& op, const Vector& b,
                              const Matrix& M, const Matrix& K);

struct EigenEstimate {
  double value = 0.0;
  int iterations = 0;
  bool converged = false;
};

/// Smallest eigenvalue of the Hessian over symmetric directions.
///
/// Shifted power iteration: a power iteration on H first gives the dominant
/// magnitude s, then a power iteration on (s I - H) gives s - lambda_min.
/// Each stage stops when successive Rayleigh quotients differ by < 1e-8.
EigenEstimate lambda_min_hessian(const LossSpec& spec, const SensingOperator& op, const Vector& b,
                                 const Matrix& M, int iters, Seed seed);

}  // namespace rsense
