#include <gtest/gtest.h>

#include <cmath>

#include "rsense/core_model.hpp"
#include "rsense/empirics.hpp"
#include "rsense/losses.hpp"

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

EstimatorOptions zero_noise() {
  EstimatorOptions opts;
  opts.noise_min = 1e-14;
  opts.noise_max = 1e-14;
  return opts;
}

}  // namespace

TEST(Zeta1, MseMatchesAnalyticBound) {
  const ProblemInstance inst = make(5, 1, 200, 0.05, 1);
  const double delta = estimate_rip(inst.op, 2, 200, 2).delta_hat;
  const SupEstimate z = estimate_zeta1(LossSpec::mse(MseNorm::sum), inst.op, inst.measurements, inst.truth.matrix,
                                       500, 3);
  EXPECT_GT(z.value, 0.0);
  // The gradient difference is -2 A*(w); its inner product with a unit
  // rank-2 K is at most 2 ||A(K)|| ||w||.
  EXPECT_LE(z.value, 2.0 * std::sqrt(1.0 + delta) * 1.05);
}

TEST(Zeta1, ZeroNoiseAndNesting) {
  const ProblemInstance inst = make(4, 1, 60, 0.05, 2);
  const LossSpec spec = LossSpec::kernel(1.0);
  const auto& b = inst.measurements;
  EXPECT_EQ(estimate_zeta1(spec, inst.op, b, inst.truth.matrix, 20, 1, zero_noise()).value, 0.0);
  EXPECT_LE(estimate_zeta1(spec, inst.op, b, inst.truth.matrix, 100, 4).value,
            estimate_zeta1(spec, inst.op, b, inst.truth.matrix, 500, 4).value);
}

TEST(Zeta2, MseIsZero) {
  const ProblemInstance inst = make(5, 2, 80, 0.05, 3);
  const SupEstimate z = estimate_zeta2(LossSpec::mse(MseNorm::sum), inst.op, inst.measurements, inst.truth.matrix,
                                       50, 1);
  EXPECT_LT(z.value, 1e-6);
  EXPECT_EQ(estimate_zeta2(LossSpec::kernel(1.0), inst.op, inst.measurements, inst.truth.matrix, 5, 1, zero_noise())
                .value,
            0.0);
}

TEST(Zeta2, KernelReproducibleAcrossSeeds) {
  const ProblemInstance inst = make(4, 1, 40, 0.01, 4);
  EstimatorOptions opts;
  opts.matrix_scale = 0.05;
  opts.noise_max = 0.05;
  const LossSpec spec = LossSpec::kernel(1.0);
  const double a = estimate_zeta2(spec, inst.op, inst.measurements, inst.truth.matrix, 200, 1, opts).value;
  const double b = estimate_zeta2(spec, inst.op, inst.measurements, inst.truth.matrix, 200, 2, opts).value;
  ASSERT_TRUE(std::isfinite(a));
  ASSERT_GT(a, 0.0);
  EXPECT_LT(std::abs(a - b) / std::max(a, b), 0.2);
}

TEST(Rho, BasisOperatorMseIsTwo) {
  const SensingOperator op = make_basis_operator(5);
  const SupEstimate rho = estimate_rho(LossSpec::mse(MseNorm::sum), op, Vector::Zero(25), 50, 1);
  EXPECT_NEAR(rho.value, 2.0, 1e-9);
  EXPECT_EQ(rho.used, 50);
}

TEST(Rho, DegeneratePairsRejected) {
  const SensingOperator op = make_basis_operator(3);
  EstimatorOptions opts;
  opts.separation_max = 0.0;
  EXPECT_THROW(estimate_rho(LossSpec::mse(), op, Vector::Zero(9), 10, 1, opts), InvalidArgument);
}

TEST(Rho, KernelScalesWithBandwidth) {
  const ProblemInstance inst = make(4, 1, 40, 0.1, 5);
  EstimatorOptions opts;
  opts.matrix_scale = 0.05;
  opts.center = inst.truth.matrix;
  opts.rank = 1;
  const double r1 = estimate_rho(LossSpec::kernel(1.0), inst.op, inst.measurements, 200, 3, opts).value;
  const double r05 = estimate_rho(LossSpec::kernel(0.5), inst.op, inst.measurements, 200, 3, opts).value;
  const double ratio = r05 / r1;
  EXPECT_GE(ratio, 2.0);
  EXPECT_LE(ratio, 8.0);
}

TEST(Lambda12, MseAndKernel) {
  const ProblemInstance inst = make(5, 2, 80, 0.05, 6);
  const Lambda12 mse = estimate_lambda12(LossSpec::mse(MseNorm::sum), inst.op, inst.measurements, inst.truth.matrix,
                                         50, 1);
  EXPECT_LT(mse.lambda2.value, 1e-6);
  EXPECT_GT(mse.lambda1.value, 0.0);

  EstimatorOptions opts;
  opts.noise_max = 0.1;
  const LossSpec spec = LossSpec::kernel(1.0);
  const double a = estimate_lambda12(spec, inst.op, inst.measurements, inst.truth.matrix, 200, 1, opts).lambda1.value;
  const double b = estimate_lambda12(spec, inst.op, inst.measurements, inst.truth.matrix, 200, 2, opts).lambda1.value;
  ASSERT_TRUE(std::isfinite(a));
  EXPECT_LT(std::abs(a - b) / std::max(a, b), 0.2);
}

TEST(ResidualConstants, Cases) {
  const ResidualConstants flat = residual_constants(Vector::Constant(6, 0.4), 1.0);
  EXPECT_EQ(flat.g_min, 1.0);
  EXPECT_EQ(flat.b_max, 0.0);

  Vector r(2);
  r << 0.0, 1.0;
  const ResidualConstants two = residual_constants(r, 1.0);
  EXPECT_DOUBLE_EQ(two.b_max, 1.0);
  EXPECT_NEAR(two.g_min, (1.0 + std::exp(-1.0)) / 2.0, 1e-15);
  EXPECT_NEAR(two.g_min, 0.683940, 1e-6);

  Rng rng(3);
  for (int k = 0; k < 50; ++k) {
    const Vector v = gaussian_vector(12, rng);
    const ResidualConstants c = residual_constants(v, 0.8);
    EXPECT_LE(std::exp(-c.b_max * c.b_max / 0.64), c.g_min + 1e-15);
    EXPECT_LE(c.g_min, 1.0);
  }
}

TEST(FiniteDiff, PassesAndVacuous) {
  const ProblemInstance inst = make(5, 2, 40, 0.2, 7);
  Rng rng(1);
  const Matrix X = inst.truth.factor + 0.2 * gaussian_matrix(5, 2, rng);
  EXPECT_TRUE(finite_diff_check(LossSpec::mse(), inst.op, inst.measurements, X, 1e-6).pass);
  EXPECT_TRUE(finite_diff_check(LossSpec::kernel(1.0), inst.op, inst.measurements, X, 1e-6).pass);

  const ProblemInstance clean = make(5, 2, 40, 0.0, 7);
  const FiniteDiffReport rep =
      finite_diff_check(LossSpec::kernel(1.0), clean.op, clean.measurements, clean.truth.factor, 1e-6);
  EXPECT_TRUE(rep.vacuous);
  EXPECT_TRUE(rep.pass);
  EXPECT_LT(rep.grad_norm, 1e-10);

  const GradientFn flipped = [](const LossSpec& s, const SensingOperator& op, const Vector& b, const Matrix& Y) {
    return Matrix(-grad_X(s, op, b, Y));
  };
  EXPECT_FALSE(finite_diff_check(LossSpec::mse(), inst.op, inst.measurements, X, 1e-6, flipped).pass);
}

TEST(HessianScale, MseBasis) {
  const SensingOperator op = make_basis_operator(4);
  const SupEstimate s =
      estimate_hessian_scale(LossSpec::mse(MseNorm::sum), op, Vector::Zero(16), Matrix::Zero(4, 4), 20, 1);
  EXPECT_NEAR(s.value, 2.0, 1e-12);
}

TEST(Constants, StructuralValues) {
  const ProblemInstance inst = make(4, 1, 60, 0.05, 8);
  const ConstantEstimates c =
      estimate_constants(LossSpec::mse(MseNorm::sum), inst.op, inst.measurements, inst.truth.matrix, 0.2, 10, 5);
  EXPECT_DOUBLE_EQ(c.l1, 2.0 * 1.2);
  EXPECT_EQ(c.l2, 0.0);
  EXPECT_EQ(c.samples, 10);
  EXPECT_EQ(c.seed, 5u);
  EXPECT_LT(c.zeta2, 1e-6);
  EXPECT_LT(c.lambda2, 1e-6);
  const ResidualConstants rc = residual_constants(inst.noise, 1.0);
  EXPECT_NEAR(c.b_max, rc.b_max, 1e-12);
  EXPECT_NEAR(c.g_min, rc.g_min, 1e-12);

  const ConstantEstimates again =
      estimate_constants(LossSpec::mse(MseNorm::sum), inst.op, inst.measurements, inst.truth.matrix, 0.2, 10, 5);
  EXPECT_EQ(c.rho, again.rho);
  EXPECT_EQ(c.zeta1, again.zeta1);
}
