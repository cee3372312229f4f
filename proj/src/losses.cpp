#include "rsense/losses.hpp"

#include <cmath>
#include <limits>

namespace rsense {

std::string to_string(LossKind kind) {
  switch (kind) {
    case LossKind::mse:
      return "mse";
    case LossKind::kernel:
      return "kernel";
    case LossKind::combined:
      return "combined";
  }
  return "unknown";
}

std::string to_string(MseNorm norm) {
  switch (norm) {
    case MseNorm::half_sum:
      return "half_sum";
    case MseNorm::mean:
      return "mean";
    case MseNorm::sum:
      return "sum";
  }
  return "unknown";
}

LossKind loss_kind_from_string(const std::string& name) {
  if (name == "mse") return LossKind::mse;
  if (name == "kernel") return LossKind::kernel;
  if (name == "combined") return LossKind::combined;
  throw InvalidArgument("unknown loss '" + name + "' (expected mse, kernel or combined)");
}

MseNorm mse_norm_from_string(const std::string& name) {
  if (name == "half_sum") return MseNorm::half_sum;
  if (name == "mean") return MseNorm::mean;
  if (name == "sum") return MseNorm::sum;
  throw InvalidArgument("unknown mse norm '" + name + "' (expected half_sum, mean or sum)");
}

void LossSpec::validate() const {
  if (kind != LossKind::mse) require(h > 0.0 && std::isfinite(h), "loss: bandwidth h must be > 0");
  if (kind == LossKind::combined)
    require(lambda_mix >= 0.0 && lambda_mix <= 1.0, "loss: lambda_mix must lie in [0, 1]");
}

Vector residuals(const SensingOperator& op, const Vector& b, const Matrix& X) {
  require(X.rows() == op.n(), "residuals: X must have n rows");
  return residuals_of_matrix(op, b, X * X.transpose());
}

Vector residuals_of_matrix(const SensingOperator& op, const Vector& b, const Matrix& M) {
  require(b.size() == op.m(), "residuals: measurement vector must have length m");
  return b - op.apply(M);
}

namespace {

/// Kernel weights K_ij = exp(-(r_i - r_j)^2 / h^2) and row averages G_i.
struct KernelTerms {
  Matrix weights;
  Vector row_mean;
};

KernelTerms kernel_terms(const Vector& r, double h) {
  const Eigen::Index m = r.size();
  const double inv_h2 = 1.0 / (h * h);
  KernelTerms t;
  // Only the lower triangle is filled; products go through selfadjointView.
  t.weights.resize(m, m);
  for (Eigen::Index j = 0; j < m; ++j)
    t.weights.col(j).tail(m - j) = (-(r.tail(m - j).array() - r(j)).square() * inv_h2).exp();
  t.row_mean = (t.weights.selfadjointView<Eigen::Lower>() * Vector::Ones(m)) / static_cast<double>(m);
  return t;
}

double kernel_value_from(const KernelTerms& t) { return -t.row_mean.array().log().mean(); }

Vector kernel_grad_from(const KernelTerms& t, const Vector& r, double h) {
  const Eigen::Index m = r.size();
  const Vector inv_g = t.row_mean.cwiseInverse();
  // sum_j K_kj (r_k - r_j)(1/G_j + 1/G_k), accumulated pairwise. Each pair
  // term is antisymmetric, so it adds to g_k and subtracts from g_j; equal
  // residuals contribute exactly zero and tiny weights are not cancelled.
  Vector g = Vector::Zero(m);
  for (Eigen::Index j = 0; j < m; ++j) {
    const Eigen::Index len = m - j - 1;
    if (len == 0) break;
    const Eigen::ArrayXd term = t.weights.col(j).tail(len).array() * (r.tail(len).array() - r(j)) *
                                (inv_g.tail(len).array() + inv_g(j));
    g.tail(len).array() += term;
    g(j) -= term.sum();
  }
  const double md = static_cast<double>(m);
  return (2.0 / (md * md * h * h)) * g;
}

double quadratic_coefficient(const LossSpec& spec, Eigen::Index m) {
  const double md = static_cast<double>(m);
  switch (spec.kind) {
    case LossKind::mse:
      switch (spec.mse_norm) {
        case MseNorm::half_sum:
          return 0.5;
        case MseNorm::mean:
          return 1.0 / md;
        case MseNorm::sum:
          return 1.0;
      }
      break;
    case LossKind::combined:
      return spec.lambda_mix / md;
    case LossKind::kernel:
      return 0.0;
  }
  return 0.0;
}

double kernel_weight(const LossSpec& spec) {
  switch (spec.kind) {
    case LossKind::kernel:
      return 1.0;
    case LossKind::combined:
      return 1.0 - spec.lambda_mix;
    case LossKind::mse:
      return 0.0;
  }
  return 0.0;
}

struct ResidualValueAndGrad {
  double value = 0.0;
  Vector grad;
};

ResidualValueAndGrad residual_value_and_grad(const LossSpec& spec, const Vector& r) {
  spec.validate();
  const double cq = quadratic_coefficient(spec, r.size());
  const double ck = kernel_weight(spec);
  ResidualValueAndGrad out;
  out.value = cq * r.squaredNorm();
  out.grad = (2.0 * cq) * r;
  if (ck > 0.0) {
    const KernelTerms t = kernel_terms(r, spec.h);
    out.value += ck * kernel_value_from(t);
    out.grad += ck * kernel_grad_from(t, r, spec.h);
  }
  return out;
}

}  // namespace

double kernel_loss(const Vector& r, double h) {
  require(h > 0.0, "kernel_loss: bandwidth must be > 0");
  require(r.size() >= 1, "kernel_loss: empty residual vector");
  return kernel_value_from(kernel_terms(r, h));
}

Vector kernel_grad_residual(const Vector& r, double h) {
  require(h > 0.0, "kernel_grad_residual: bandwidth must be > 0");
  require(r.size() >= 1, "kernel_grad_residual: empty residual vector");
  return kernel_grad_from(kernel_terms(r, h), r, h);
}

double weighted_residual_mean(const Vector& r, double h, int i) {
  require(h > 0.0, "weighted_residual_mean: bandwidth must be > 0");
  require(i >= 0 && i < r.size(), "weighted_residual_mean: index out of range");
  const Eigen::ArrayXd w = (-(r.array() - r(i)).square() / (h * h)).exp();
  return (w * r.array()).sum() / w.sum();
}

double loss_value(const LossSpec& spec, const Vector& r) {
  spec.validate();
  require(r.size() >= 1, "loss_value: empty residual vector");
  double value = quadratic_coefficient(spec, r.size()) * r.squaredNorm();
  const double ck = kernel_weight(spec);
  if (ck > 0.0) value += ck * kernel_loss(r, spec.h);
  return value;
}

Vector grad_residual(const LossSpec& spec, const Vector& r) {
  require(r.size() >= 1, "grad_residual: empty residual vector");
  return residual_value_and_grad(spec, r).grad;
}

Vector grad_w(const LossSpec& spec, const Vector& r) { return grad_residual(spec, r); }

Matrix grad_M(const LossSpec& spec, const SensingOperator& op, const Vector& b, const Matrix& M) {
  return -op.adjoint(grad_residual(spec, residuals_of_matrix(op, b, M)));
}

Matrix grad_X(const LossSpec& spec, const SensingOperator& op, const Vector& b, const Matrix& X) {
  return value_and_grad_X(spec, op, b, X).grad;
}

ValueAndGrad value_and_grad_X(const LossSpec& spec, const SensingOperator& op, const Vector& b,
                              const Matrix& X) {
  const Vector r = residuals(op, b, X);
  const ResidualValueAndGrad rv = residual_value_and_grad(spec, r);
  ValueAndGrad out;
  out.value = rv.value;
  out.grad = -2.0 * (op.adjoint(rv.grad) * X);
  return out;
}

double fd_gradient_step(double scale) {
  return std::cbrt(std::numeric_limits<double>::epsilon()) * (1.0 + scale);
}

double hessian_quadratic_form(const LossSpec& spec, const SensingOperator& op, const Vector& b,
                              const Matrix& M, const Matrix& K) {
  spec.validate();
  const double knorm = K.norm();
  require(knorm > 0.0, "hessian_quadratic_form: direction K must be nonzero");
  const Vector d = op.apply(K);
  double value = 2.0 * quadratic_coefficient(spec, op.m()) * d.squaredNorm();
  const double ck = kernel_weight(spec);
  if (ck > 0.0) {
    const Vector r0 = residuals_of_matrix(op, b, M);
    // Second differences lose half the digits, hence the fourth root.
    const double t = std::pow(std::numeric_limits<double>::epsilon(), 0.25) * (1.0 + M.norm()) / knorm;
    const double fp = kernel_loss(r0 - t * d, spec.h);
    const double f0 = kernel_loss(r0, spec.h);
    const double fm = kernel_loss(r0 + t * d, spec.h);
    value += ck * (fp - 2.0 * f0 + fm) / (t * t);
  }
  return value;
}

Matrix hessian_vector_product(const LossSpec& spec, const SensingOperator& op, const Vector& b,
                              const Matrix& M, const Matrix& K) {
  spec.validate();
  const Vector d = op.apply(K);
  Vector hv_r = (2.0 * quadratic_coefficient(spec, op.m())) * d;
  const double ck = kernel_weight(spec);
  const double knorm = K.norm();
  if (ck > 0.0 && knorm > 0.0) {
    const Vector r0 = residuals_of_matrix(op, b, M);
    const double t = fd_gradient_step(M.norm()) / knorm;
    // grad_M(M + tK) = -A^*(g(r0 - t d)), and the two minus signs give A^* H_r A.
    hv_r += ck * (kernel_grad_residual(r0 + t * d, spec.h) - kernel_grad_residual(r0 - t * d, spec.h)) /
            (2.0 * t);
  }
  return symmetrize(op.adjoint(hv_r));
}

namespace {

struct PowerResult {
  double rayleigh = 0.0;
  double norm = 0.0;
  int iterations = 0;
  bool converged = false;
};

template <class Apply>
PowerResult power_iteration(Apply&& apply, Matrix k, int iters) {
  PowerResult res;
  k /= k.norm();
  double previous = std::numeric_limits<double>::quiet_NaN();
  for (int it = 1; it <= iters; ++it) {
    const Matrix hk = apply(k);
    res.rayleigh = (k.array() * hk.array()).sum();
    res.norm = hk.norm();
    res.iterations = it;
    if (!std::isfinite(res.rayleigh)) return res;
    if (std::abs(res.rayleigh - previous) < 1e-8) {
      res.converged = true;
      return res;
    }
    if (res.norm == 0.0) {
      res.converged = true;
      return res;
    }
    previous = res.rayleigh;
    k = hk / res.norm;
  }
  return res;
}

}  // namespace

EigenEstimate lambda_min_hessian(const LossSpec& spec, const SensingOperator& op, const Vector& b,
                                 const Matrix& M, int iters, Seed seed) {
  require(iters >= 1, "lambda_min_hessian: iters must be >= 1");
  require(M.rows() == op.n() && M.cols() == op.n(), "lambda_min_hessian: dimension mismatch");
  Rng rng(seed);
  const Matrix start = symmetrize(gaussian_matrix(op.n(), op.n(), rng));
  auto hvp = [&](const Matrix& k) { return hessian_vector_product(spec, op, b, M, k); };

  const PowerResult top = power_iteration(hvp, start, iters);
  const double shift = top.norm;
  EigenEstimate est;
  if (shift == 0.0) {
    est.value = 0.0;
    est.iterations = top.iterations;
    est.converged = top.converged;
    return est;
  }
  // The shifted operator annihilates everything when H = shift * I.
  auto shifted = [&](const Matrix& k) -> Matrix {
    Matrix out = shift * k - hvp(k);
    if (out.norm() <= 1e-14 * shift) out.setZero();
    return out;
  };
  const PowerResult bottom = power_iteration(shifted, start, iters);
  est.value = shift - bottom.rayleigh;
  est.iterations = top.iterations + bottom.iterations;
  est.converged = top.converged && bottom.converged;
  return est;
}

}  // namespace rsense
