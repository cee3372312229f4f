#include "rsense/empirics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace rsense {

namespace {

constexpr double kGuard = 1e-12;

double log_uniform(Rng& rng, double lo, double hi) {
  if (hi <= 0.0) return 0.0;
  if (lo >= hi) return hi;
  std::uniform_real_distribution<double> u(std::log(lo), std::log(hi));
  return std::exp(u(rng));
}

Vector random_direction(int m, Rng& rng) {
  Vector v = gaussian_vector(m, rng);
  return v / v.norm();
}

double noise_max(const EstimatorOptions& opts, const Vector& b) {
  return opts.noise_max.value_or(b.norm());
}

double matrix_scale(const EstimatorOptions& opts, const Vector& b) {
  return opts.matrix_scale.value_or(std::max(b.norm(), 1.0));
}

int test_rank(const EstimatorOptions& opts, int n) { return std::clamp(opts.rank, 1, n); }

Vector sample_noise_vector(const EstimatorOptions& opts, const Vector& b, Rng& rng) {
  const double magnitude = log_uniform(rng, opts.noise_min, noise_max(opts, b));
  return magnitude * random_direction(static_cast<int>(b.size()), rng);
}

void record(SupEstimate& est, double numerator, double denominator) {
  if (!(denominator >= kGuard)) {
    ++est.skipped;
    return;
  }
  ++est.used;
  est.value = std::max(est.value, numerator / denominator);
}

Matrix sample_perturbed(const Matrix& base, int rank, double scale, Rng& rng) {
  const double s = log_uniform(rng, 1e-2 * scale, scale);
  return base + s * random_low_rank_symmetric(static_cast<int>(base.rows()), rank, rng);
}

}  // namespace

SupEstimate estimate_zeta1(const LossSpec& spec, const SensingOperator& op, const Vector& b,
                           const Matrix& M_base, int samples, Seed seed, const EstimatorOptions& opts) {
  require(samples >= 1, "estimate_zeta1: samples must be >= 1");
  const int rank = test_rank(opts, op.n());
  SupEstimate est;
  for (int s = 0; s < samples; ++s) {
    Rng rng(derive_seed(seed, {static_cast<std::uint64_t>(s)}));
    const Matrix M = sample_perturbed(M_base, rank, matrix_scale(opts, b), rng);
    const Vector w = sample_noise_vector(opts, b, rng);
    const Matrix K = random_low_rank_symmetric(op.n(), rank, rng);
    const double wn = w.norm();
    if (wn < kGuard) {
      ++est.skipped;
      continue;
    }
    const Matrix diff = grad_M(spec, op, b + w, M) - grad_M(spec, op, b, M);
    record(est, std::abs((diff.array() * K.array()).sum()), wn);
  }
  return est;
}

namespace {

/// Bilinear Hessian form via polarization of quadratic forms.
double hessian_bilinear(const LossSpec& spec, const SensingOperator& op, const Vector& b, const Matrix& M,
                        const Matrix& K, const Matrix& L) {
  return 0.25 * (hessian_quadratic_form(spec, op, b, M, K + L) - hessian_quadratic_form(spec, op, b, M, K - L));
}

}  // namespace

SupEstimate estimate_zeta2(const LossSpec& spec, const SensingOperator& op, const Vector& b,
                           const Matrix& M_base, int samples, Seed seed, const EstimatorOptions& opts) {
  require(samples >= 1, "estimate_zeta2: samples must be >= 1");
  const int rank = test_rank(opts, op.n());
  SupEstimate est;
  for (int s = 0; s < samples; ++s) {
    Rng rng(derive_seed(seed, {static_cast<std::uint64_t>(s)}));
    const Matrix M = sample_perturbed(M_base, rank, matrix_scale(opts, b), rng);
    const Vector w = sample_noise_vector(opts, b, rng);
    const Matrix K = random_low_rank_symmetric(op.n(), rank, rng);
    Matrix L = random_low_rank_symmetric(op.n(), rank, rng);
    const double wn = w.norm();
    if (wn < kGuard) {
      ++est.skipped;
      continue;
    }
    // K - L must stay nonzero for the polarization identity.
    if ((K - L).norm() < kGuard) L = -L;
    const double diff = hessian_bilinear(spec, op, b + w, M, K, L) - hessian_bilinear(spec, op, b, M, K, L);
    record(est, std::abs(diff), wn);
  }
  return est;
}

SupEstimate estimate_rho(const LossSpec& spec, const SensingOperator& op, const Vector& b, int samples,
                         Seed seed, const EstimatorOptions& opts) {
  require(samples >= 1, "estimate_rho: samples must be >= 1");
  const int n = op.n();
  const int rank = test_rank(opts, n);
  const double scale = matrix_scale(opts, b);
  const Matrix center = opts.center.value_or(Matrix::Zero(n, n));
  SupEstimate est;
  for (int s = 0; s < samples; ++s) {
    Rng rng(derive_seed(seed, {static_cast<std::uint64_t>(s)}));
    // M = F S F^T and M' = F' S F'^T with F' = F + t E keep both at rank <= r.
    const Matrix F = gaussian_matrix(n, rank, rng);
    const Matrix E = gaussian_matrix(n, rank, rng);
    Vector signs(rank);
    for (int k = 0; k < rank; ++k) signs(k) = (k % 2 == 0) ? 1.0 : -1.0;
    const double size = log_uniform(rng, 1e-2 * scale, scale);
    const double t = opts.separation_max <= 0.0 ? 0.0 : log_uniform(rng, opts.separation_min, opts.separation_max);
    const Matrix Fp = F + t * (F.norm() / E.norm()) * E;
    Matrix M = F * signs.asDiagonal() * F.transpose();
    Matrix Mp = Fp * signs.asDiagonal() * Fp.transpose();
    const double norm = M.norm();
    M = center + (size / norm) * symmetrize(M);
    Mp = center + (size / norm) * symmetrize(Mp);
    const double denom = (M - Mp).norm();
    if (denom < kGuard) {
      ++est.skipped;
      continue;
    }
    record(est, (grad_M(spec, op, b, M) - grad_M(spec, op, b, Mp)).norm(), denom);
  }
  if (est.used == 0)
    throw InvalidArgument("estimate_rho: every sampled pair had M' = M (division guard)");
  return est;
}

Lambda12 estimate_lambda12(const LossSpec& spec, const SensingOperator& op, const Vector& b, const Matrix& M,
                           int samples, Seed seed, const EstimatorOptions& opts) {
  require(samples >= 1, "estimate_lambda12: samples must be >= 1");
  const int rank = test_rank(opts, op.n());
  Lambda12 out;
  for (int s = 0; s < samples; ++s) {
    Rng rng(derive_seed(seed, {static_cast<std::uint64_t>(s)}));
    const Vector w1 = sample_noise_vector(opts, b, rng);
    const Vector delta = sample_noise_vector(opts, b, rng);
    const Matrix K = random_low_rank_symmetric(op.n(), rank, rng);
    const Vector w2 = w1 + delta;
    const double denom = (w1 - w2).norm();
    if (denom < kGuard) {
      ++out.lambda1.skipped;
      ++out.lambda2.skipped;
      continue;
    }
    const Vector b1 = b + w1;
    const Vector b2 = b + w2;
    record(out.lambda1, (grad_M(spec, op, b1, M) - grad_M(spec, op, b2, M)).norm(), denom);
    record(out.lambda2,
           std::abs(hessian_quadratic_form(spec, op, b1, M, K) - hessian_quadratic_form(spec, op, b2, M, K)),
           denom);
  }
  return out;
}

ResidualConstants residual_constants(const Vector& r, double h) {
  require(h > 0.0, "residual_constants: bandwidth must be > 0");
  require(r.size() >= 1, "residual_constants: empty residual vector");
  const Eigen::Index m = r.size();
  ResidualConstants rc;
  rc.b_max = r.maxCoeff() - r.minCoeff();
  rc.g_min = std::numeric_limits<double>::infinity();
  for (Eigen::Index i = 0; i < m; ++i) {
    const double g = (-(r.array() - r(i)).square() / (h * h)).exp().mean();
    rc.g_min = std::min(rc.g_min, g);
  }
  return rc;
}

SupEstimate estimate_hessian_scale(const LossSpec& spec, const SensingOperator& op, const Vector& b,
                                   const Matrix& M, int samples, Seed seed, const EstimatorOptions& opts) {
  require(samples >= 1, "estimate_hessian_scale: samples must be >= 1");
  const int rank = test_rank(opts, op.n());
  SupEstimate est;
  for (int s = 0; s < samples; ++s) {
    Rng rng(derive_seed(seed, {static_cast<std::uint64_t>(s)}));
    const Matrix K = random_low_rank_symmetric(op.n(), rank, rng);
    record(est, std::abs(hessian_quadratic_form(spec, op, b, M, K)), 1.0);
  }
  return est;
}

FiniteDiffReport finite_diff_check(const LossSpec& spec, const SensingOperator& op, const Vector& b,
                                   const Matrix& X, double tol, const GradientFn& gradient) {
  require(tol > 0.0, "finite_diff_check: tol must be > 0");
  const Matrix g = gradient ? gradient(spec, op, b, X) : grad_X(spec, op, b, X);
  FiniteDiffReport rep;
  rep.grad_norm = g.norm();
  if (rep.grad_norm < 1e-10) {
    rep.vacuous = true;
    rep.pass = true;
    return rep;
  }
  Matrix fd(X.rows(), X.cols());
  Matrix probe = X;
  for (Eigen::Index j = 0; j < X.cols(); ++j)
    for (Eigen::Index i = 0; i < X.rows(); ++i) {
      const double step = fd_gradient_step(std::abs(X(i, j)));
      probe(i, j) = X(i, j) + step;
      const double fp = loss_value(spec, residuals(op, b, probe));
      probe(i, j) = X(i, j) - step;
      const double fm = loss_value(spec, residuals(op, b, probe));
      probe(i, j) = X(i, j);
      fd(i, j) = (fp - fm) / (2.0 * step);
    }
  const double scale = std::max(g.cwiseAbs().maxCoeff(), fd.cwiseAbs().maxCoeff());
  rep.max_rel_err = (g - fd).cwiseAbs().maxCoeff() / scale;
  rep.pass = rep.max_rel_err < tol;
  return rep;
}

ConstantEstimates estimate_constants(const LossSpec& spec, const SensingOperator& op, const Vector& b,
                                     const Matrix& M_base, double delta, int samples, Seed seed,
                                     const EstimatorOptions& opts) {
  ConstantEstimates c;
  c.samples = samples;
  c.seed = seed;
  c.zeta1 = estimate_zeta1(spec, op, b, M_base, samples, derive_seed(seed, {1}), opts).value;
  c.zeta2 = estimate_zeta2(spec, op, b, M_base, samples, derive_seed(seed, {2}), opts).value;
  c.rho = estimate_rho(spec, op, b, samples, derive_seed(seed, {3}), opts).value;
  const Lambda12 l12 = estimate_lambda12(spec, op, b, M_base, samples, derive_seed(seed, {4}), opts);
  c.lambda1 = l12.lambda1.value;
  c.lambda2 = l12.lambda2.value;
  const ResidualConstants rc = residual_constants(residuals_of_matrix(op, b, M_base), spec.h);
  c.g_min = rc.g_min;
  c.b_max = rc.b_max;
  c.l1 = 2.0 * (1.0 + delta);
  c.l2 = 0.0;
  return c;
}

}  // namespace rsense
