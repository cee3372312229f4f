#include <gtest/gtest.h>

#include <cmath>
#include <sstream>
#include <vector>

#include "rsense/core_model.hpp"
#include "rsense/optimizer.hpp"

using namespace rsense;

namespace {

ProblemInstance make(int n, int r, int m, double sigma, Seed seed) {
  InstanceSpec spec;
  spec.n = n;
  spec.r = r;
  spec.m = m;
  spec.seed = seed;
  spec.spectrum.assign(r, 1.0);
  spec.noise = NoiseModel{noise::Gaussian{sigma}, false};
  return make_instance(spec);
}

Matrix random_orthogonal(int r, Rng& rng) {
  Eigen::HouseholderQR<Matrix> qr(gaussian_matrix(r, r, rng));
  return qr.householderQ() * Matrix::Identity(r, r);
}

}  // namespace

TEST(StepSize, SpotValueAndRatio) {
  ConvergenceBoundInputs in;
  in.rho = 1.0;
  in.r = 1;
  in.h = 1.0;
  const double expected = 1.0 / (12.0 * 2.0 * (std::sqrt(2.0) - 1.0));
  EXPECT_NEAR(step_size_bound(LossKind::mse, in), expected, 1e-15);
  EXPECT_NEAR(step_size_bound(LossKind::kernel, in), expected, 1e-15);
  EXPECT_NEAR(expected, 0.100594, 1e-5);

  in.rho = 3.7;
  in.r = 4;
  in.delta = 0.2;
  in.zeta2 = 0.5;
  in.eps = 0.3;
  in.norm_Mw = 2.0;
  in.h = 0.6;
  EXPECT_DOUBLE_EQ(step_size_bound(LossKind::kernel, in) / step_size_bound(LossKind::mse, in), 0.36);
}

TEST(StepSize, MonotoneAndRejects) {
  ConvergenceBoundInputs in;
  in.rho = 1.0;
  in.r = 2;
  in.delta = 0.1;
  const double base = step_size_bound(LossKind::mse, in);
  ConvergenceBoundInputs more_rho = in;
  more_rho.rho = 2.0;
  EXPECT_LT(step_size_bound(LossKind::mse, more_rho), base);
  ConvergenceBoundInputs more_norm = in;
  more_norm.norm_Mw = 1.0;
  EXPECT_LT(step_size_bound(LossKind::mse, more_norm), base);

  in.delta = 0.8;
  in.zeta2 = 1.0;
  in.eps = 0.2;
  EXPECT_THROW(step_size_bound(LossKind::mse, in), InvalidArgument);
}

TEST(StepSize, ShorthandAndCw) {
  EXPECT_DOUBLE_EQ(step_size_shorthand(4.0, 1.0, 1.0), 1.0 / 24.0);
  ConvergenceBoundInputs in;
  in.sigma_r_Mw = 2.0;
  EXPECT_NEAR(in.C_w(), std::sqrt(2.0 * (std::sqrt(2.0) - 1.0)) * 2.0, 1e-15);
}

TEST(GradientDescent, StartsAtCriticalPoint) {
  const ProblemInstance inst = make(5, 2, 40, 0.0, 1);
  for (const LossSpec& spec : {LossSpec::mse(), LossSpec::kernel(1.0), LossSpec::combined(0.5, 1.0)}) {
    SolverConfig cfg;
    cfg.init = init::Explicit{inst.truth.factor};
    const SolveResult res = gradient_descent(inst, spec, cfg);
    EXPECT_EQ(res.iterations_run, 0);
    EXPECT_EQ(res.termination, Termination::grad_tol);
    EXPECT_EQ(res.loss_trace.size(), 1u);
  }
}

TEST(GradientDescent, NoiselessMseRecovery) {
  const ProblemInstance inst = make(12, 2, 300, 0.0, 3);
  SolverConfig cfg;
  cfg.max_iters = 5000;
  cfg.step_fraction = 3.0;
  const SolveResult res = gradient_descent(inst, LossSpec::mse(), cfg);
  EXPECT_NE(res.termination, Termination::non_finite);
  EXPECT_LT(error_frobenius(res.X, inst.truth.matrix) / inst.truth.matrix.norm(), 1e-3);
  EXPECT_EQ(res.loss_trace.size(), static_cast<std::size_t>(res.iterations_run + 1));
  EXPECT_EQ(res.error_trace.size(), res.loss_trace.size());
}

TEST(GradientDescent, MonotoneBelowStepBound) {
  const ProblemInstance inst = make(6, 2, 50, 0.1, 4);
  for (const LossSpec& spec : {LossSpec::mse(), LossSpec::kernel(1.0), LossSpec::combined(0.5, 1.0)}) {
    SolverConfig cfg;
    cfg.step_mode = spec.kind == LossKind::kernel ? StepMode::auto_kernel : StepMode::auto_mse;
    cfg.step_fraction = 0.5;
    cfg.max_iters = 300;
    cfg.grad_tol = 0.0;
    cfg.init = init::GroundTruthPerturbed{0.3};
    const SolveResult res = gradient_descent(inst, spec, cfg);
    for (std::size_t t = 1; t < res.loss_trace.size(); ++t)
      ASSERT_LE(res.loss_trace[t], res.loss_trace[t - 1] + 1e-10) << to_string(spec.kind) << " step " << t;
  }
}

TEST(GradientDescent, DeterministicAndDivergent) {
  const ProblemInstance inst = make(5, 1, 40, 0.05, 5);
  SolverConfig cfg;
  cfg.max_iters = 50;
  cfg.init = init::GroundTruthPerturbed{0.2};
  cfg.seed = 9;
  const SolveResult a = gradient_descent(inst, LossSpec::mse(), cfg);
  const SolveResult b = gradient_descent(inst, LossSpec::mse(), cfg);
  EXPECT_EQ(a.X, b.X);
  EXPECT_EQ(a.loss_trace, b.loss_trace);

  cfg.step_mode = StepMode::explicit_value;
  cfg.step_size = 50.0;
  cfg.max_iters = 500;
  const SolveResult bad = gradient_descent(inst, LossSpec::mse(), cfg);
  EXPECT_EQ(bad.termination, Termination::non_finite);
  EXPECT_FALSE(bad.loss_trace.empty());
}

TEST(GradientDescent, RejectsBadConfig) {
  const ProblemInstance inst = make(4, 1, 20, 0.0, 6);
  SolverConfig cfg;
  cfg.max_iters = 0;
  EXPECT_THROW(gradient_descent(inst, LossSpec::mse(), cfg), InvalidArgument);
  cfg.max_iters = 10;
  cfg.step_mode = StepMode::explicit_value;
  cfg.step_size = -1.0;
  cfg.init = init::GroundTruthPerturbed{0.5};
  EXPECT_THROW(gradient_descent(inst, LossSpec::mse(), cfg), InvalidArgument);
}

TEST(Projection, Cases) {
  Rng rng(2);
  const Matrix X = gaussian_matrix(5, 2, rng);
  const Matrix M = X * X.transpose();
  EXPECT_LT((project_rank_r(M, 2) - M).norm(), 1e-12);

  Matrix d = Matrix::Zero(2, 2);
  d.diagonal() << 3.0, 1.0;
  Matrix e = Matrix::Zero(2, 2);
  e(0, 0) = 3.0;
  EXPECT_LT((project_rank_r(d, 1) - e).norm(), 1e-14);

  d.diagonal() << 1.0, -5.0;
  e(0, 0) = 1.0;
  EXPECT_LT((project_rank_r(d, 1) - e).norm(), 1e-14);
}

TEST(Projection, NearestAmongRandomCandidates) {
  Rng rng(3);
  const Matrix M = symmetrize(gaussian_matrix(6, 6, rng));
  const Matrix P = project_rank_r(M, 2);
  Eigen::SelfAdjointEigenSolver<Matrix> es(P);
  EXPECT_GE(es.eigenvalues().minCoeff(), -1e-12);
  EXPECT_LE((es.eigenvalues().array() > 1e-10).count(), 2);
  const double best = (P - M).norm();
  for (int k = 0; k < 100; ++k) {
    const Matrix Y = gaussian_matrix(6, 2, rng);
    EXPECT_LE(best, (Y * Y.transpose() - M).norm() + 1e-12);
  }
}

TEST(DistFactor, ZeroAndRotationInvariance) {
  Rng rng(4);
  const Matrix X = gaussian_matrix(6, 3, rng);
  const Matrix M = X * X.transpose();
  EXPECT_LT(dist_factor(X, M), 1e-10);

  const Matrix Y = gaussian_matrix(6, 3, rng);
  const Matrix R = random_orthogonal(3, rng);
  EXPECT_NEAR(dist_factor(Y * R, M), dist_factor(Y, M), 1e-10);
}

TEST(DistFactor, RankOneSignEnumeration) {
  Rng rng(5);
  for (int k = 0; k < 10; ++k) {
    const Vector u = gaussian_vector(4, rng);
    const Matrix M = u * u.transpose();
    const Matrix X = gaussian_matrix(4, 1, rng);
    const double brute = std::min((X.col(0) - u).norm(), (X.col(0) + u).norm());
    EXPECT_NEAR(dist_factor(X, M), brute, 1e-10);
  }
}

TEST(DistFactor, SandwichAndRejection) {
  Rng rng(6);
  for (int k = 0; k < 20; ++k) {
    const Matrix Z = gaussian_matrix(5, 2, rng);
    const Matrix M = Z * Z.transpose();
    const Matrix X = Z + 0.5 * gaussian_matrix(5, 2, rng);
    Eigen::SelfAdjointEigenSolver<Matrix> es(M);
    const double sigma_r = es.eigenvalues()(3);
    const double d = dist_factor(X, M);
    EXPECT_LE(d * d, (X * X.transpose() - M).squaredNorm() / (2.0 * (std::sqrt(2.0) - 1.0) * sigma_r) + 1e-10);
  }
  const Matrix full = Matrix::Identity(4, 4);
  EXPECT_THROW(dist_factor(gaussian_matrix(4, 2, rng), full), InvalidArgument);
}

TEST(ErrorFrobenius, Identities) {
  Rng rng(7);
  const Matrix Xs = gaussian_matrix(5, 2, rng);
  const Matrix M = Xs * Xs.transpose();
  EXPECT_EQ(error_frobenius(Xs, M), 0.0);
  EXPECT_DOUBLE_EQ(error_frobenius(Matrix::Zero(5, 2), M), M.norm());
  const Matrix X = gaussian_matrix(5, 2, rng);
  const Matrix XtX = X.transpose() * X, XtXs = X.transpose() * Xs, XstXs = Xs.transpose() * Xs;
  const double expanded = (XtX * XtX).trace() - 2.0 * (XtXs * XtXs.transpose()).trace() + (XstXs * XstXs).trace();
  EXPECT_NEAR(error_frobenius(X, M), std::sqrt(expanded), 1e-10);
  EXPECT_THROW(error_frobenius(X, Matrix::Zero(4, 4)), InvalidArgument);
}

TEST(TraceCsv, Format) {
  std::ostringstream out;
  write_trace_csv(out, "loss", {1.0, 0.1});
  EXPECT_EQ(out.str(), "iteration,loss\n0,1\n1,0.10000000000000001\n");
}
