#include <gtest/gtest.h>

#include <cmath>
#include <vector>

#include "rsense/core_model.hpp"
#include "rsense/empirics.hpp"
#include "rsense/losses.hpp"

using namespace rsense;

namespace {

ProblemInstance small_instance(int n, int r, int m, double sigma, Seed seed) {
  InstanceSpec spec;
  spec.n = n;
  spec.r = r;
  spec.m = m;
  spec.seed = seed;
  spec.spectrum.assign(r, 1.0);
  spec.noise = NoiseModel{noise::Gaussian{sigma}, false};
  return make_instance(spec);
}

std::vector<LossSpec> all_specs() {
  return {LossSpec::mse(MseNorm::half_sum), LossSpec::mse(MseNorm::mean), LossSpec::mse(MseNorm::sum),
          LossSpec::kernel(1.0), LossSpec::combined(0.5, 1.0)};
}

// Central difference of loss_value along the entries of M.
Matrix fd_grad_M(const LossSpec& spec, const SensingOperator& op, const Vector& b, const Matrix& M) {
  const int n = op.n();
  const double step = 1e-6;
  Matrix g(n, n);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) {
      Matrix E = Matrix::Zero(n, n);
      E(i, j) = step;
      const double fp = loss_value(spec, residuals_of_matrix(op, b, M + E));
      const double fm = loss_value(spec, residuals_of_matrix(op, b, M - E));
      g(i, j) = (fp - fm) / (2 * step);
    }
  return g;
}

}  // namespace

TEST(Residuals, ZeroAtTruthAndNoiseOtherwise) {
  const ProblemInstance clean = small_instance(5, 2, 30, 0.0, 1);
  EXPECT_LT(residuals(clean.op, clean.measurements, clean.truth.factor).cwiseAbs().maxCoeff(), 1e-12);

  const ProblemInstance noisy = small_instance(5, 2, 30, 0.3, 1);
  EXPECT_LT((residuals(noisy.op, noisy.measurements, noisy.truth.factor) - noisy.noise).cwiseAbs().maxCoeff(),
            1e-12);
}

TEST(Residuals, EntrywiseEvaluationAgrees) {
  const ProblemInstance inst = small_instance(5, 2, 30, 0.1, 2);
  Rng rng(4);
  const Matrix X = gaussian_matrix(5, 2, rng);
  const Vector r = residuals(inst.op, inst.measurements, X);
  const Matrix M = X * X.transpose();
  for (int i = 0; i < inst.op.m(); ++i) {
    const double direct = inst.measurements(i) - (inst.op.sensing_matrix(i).array() * M.array()).sum();
    EXPECT_NEAR(r(i), direct, 1e-12);
  }
}

TEST(LossValue, KernelSpotValues) {
  EXPECT_EQ(kernel_loss(Vector::Zero(7), 0.3), 0.0);
  EXPECT_EQ(kernel_loss(Vector::Constant(7, -2.5), 1.0), 0.0);
  const double h = 0.8;
  Vector r(2);
  r << 0.0, h;
  EXPECT_NEAR(kernel_loss(r, h), -std::log((1.0 + std::exp(-1.0)) / 2.0), 1e-15);
  EXPECT_NEAR(kernel_loss(r, h), 0.379885, 1e-6);
}

TEST(LossValue, MseNormalizations) {
  Vector r(2);
  r << 1.0, -1.0;
  EXPECT_DOUBLE_EQ(loss_value(LossSpec::mse(MseNorm::mean), r), 1.0);
  EXPECT_DOUBLE_EQ(loss_value(LossSpec::mse(MseNorm::half_sum), r), 1.0);
  EXPECT_DOUBLE_EQ(loss_value(LossSpec::mse(MseNorm::sum), r), 2.0);
}

TEST(LossValue, CombinedInterpolates) {
  Rng rng(8);
  const Vector r = gaussian_vector(20, rng);
  const double mean_sq = loss_value(LossSpec::mse(MseNorm::mean), r);
  const double kern = kernel_loss(r, 0.7);
  EXPECT_EQ(loss_value(LossSpec::combined(1.0, 0.7), r), mean_sq);
  EXPECT_EQ(loss_value(LossSpec::combined(0.0, 0.7), r), kern);
  EXPECT_NEAR(loss_value(LossSpec::combined(0.3, 0.7), r), 0.3 * mean_sq + 0.7 * kern, 1e-14);
}

TEST(LossValue, TranslationInvariance) {
  Rng rng(3);
  for (int k = 0; k < 50; ++k) {
    const Vector r = gaussian_vector(15, rng);
    const double c = 3.0 * gaussian_vector(1, rng)(0);
    const Vector shifted = (r.array() + c).matrix();
    EXPECT_NEAR(kernel_loss(shifted, 1.0), kernel_loss(r, 1.0), 1e-12);
    EXPECT_NE(loss_value(LossSpec::mse(), shifted), loss_value(LossSpec::mse(), r));
    EXPECT_GE(kernel_loss(r, 1.0), 0.0);
  }
}

TEST(LossSpec, Validation) {
  EXPECT_THROW(LossSpec::kernel(0.0).validate(), InvalidArgument);
  EXPECT_THROW(LossSpec::combined(1.5, 1.0).validate(), InvalidArgument);
  EXPECT_NO_THROW(LossSpec::combined(0.0, 1.0).validate());
  EXPECT_EQ(loss_kind_from_string("combined"), LossKind::combined);
  EXPECT_EQ(mse_norm_from_string(to_string(MseNorm::sum)), MseNorm::sum);
  EXPECT_THROW(loss_kind_from_string("huber"), InvalidArgument);
}

TEST(KernelGrad, ConstantResidualsGiveZero) {
  EXPECT_EQ(kernel_grad_residual(Vector::Constant(9, 1.3), 1.0), Vector::Zero(9));
}

TEST(KernelGrad, TwoPointAntisymmetry) {
  Vector r(2);
  r << 0.0, 0.7;
  const Vector g = kernel_grad_residual(r, 0.5);
  EXPECT_NEAR(g(0), -g(1), 1e-15);
  EXPECT_NE(g(0), 0.0);
}

TEST(KernelGrad, MatchesFiniteDifference) {
  Vector r(2);
  r << 0.0, 1.0;
  const Vector g = kernel_grad_residual(r, 1.0);
  const double step = 1e-6;
  for (int i = 0; i < 2; ++i) {
    Vector rp = r, rm = r;
    rp(i) += step;
    rm(i) -= step;
    const double fd = (kernel_loss(rp, 1.0) - kernel_loss(rm, 1.0)) / (2 * step);
    EXPECT_NEAR(g(i), fd, 1e-7 * std::abs(fd));
  }

  Rng rng(12);
  const Vector big = gaussian_vector(25, rng);
  const Vector gb = kernel_grad_residual(big, 0.6);
  EXPECT_NEAR(gb.sum(), 0.0, 1e-10);
  for (int i = 0; i < 25; ++i) {
    Vector rp = big, rm = big;
    rp(i) += step;
    rm(i) -= step;
    const double fd = (kernel_loss(rp, 0.6) - kernel_loss(rm, 0.6)) / (2 * step);
    EXPECT_NEAR(gb(i), fd, 1e-6 * gb.cwiseAbs().maxCoeff());
  }
}

TEST(WeightedResidualMean, Cases) {
  EXPECT_DOUBLE_EQ(weighted_residual_mean(Vector::Constant(4, 2.5), 1.0, 2), 2.5);

  Vector sym(3);
  sym << -0.4, 0.0, 0.4;
  EXPECT_NEAR(weighted_residual_mean(sym, 1.0, 1), 0.0, 1e-15);

  Vector r(3);
  r << 0.0, 1.0, 2.0;
  const double e1 = std::exp(-1.0), e4 = std::exp(-4.0);
  const double expected = (e1 + 2 * e4) / (1 + e1 + e4);
  const double rbar = weighted_residual_mean(r, 1.0, 0);
  EXPECT_NEAR(rbar, expected, 1e-15);
  // Pulled toward the others, so the loss falls as r_0 rises.
  EXPECT_LT(r(0) - rbar, 0.0);
  EXPECT_LT(kernel_grad_residual(r, 1.0)(0), 0.0);
}

TEST(GradW, MseMeanAndKernel) {
  Vector r(2);
  r << 1.0, 0.0;
  const Vector g = grad_w(LossSpec::mse(MseNorm::mean), r);
  EXPECT_DOUBLE_EQ(g(0), 1.0);
  EXPECT_DOUBLE_EQ(g(1), 0.0);
  EXPECT_EQ(grad_w(LossSpec::kernel(1.0), Vector::Constant(5, 4.0)), Vector::Zero(5));

  Vector s1(2), s3(2);
  s1 << -1.0, 1.0;
  s3 << -3.0, 3.0;
  EXPECT_LT(grad_w(LossSpec::kernel(1.0), s3).norm(), grad_w(LossSpec::kernel(1.0), s1).norm());
}

TEST(GradM, ZeroResidualKernel) {
  const ProblemInstance inst = small_instance(4, 2, 25, 0.0, 5);
  const Matrix g = grad_M(LossSpec::kernel(1.0), inst.op, inst.measurements, inst.truth.matrix);
  EXPECT_LT(g.cwiseAbs().maxCoeff(), 1e-12);
}

TEST(GradM, MatchesFiniteDifference) {
  const ProblemInstance inst = small_instance(4, 2, 25, 0.2, 6);
  Rng rng(2);
  const Matrix M = symmetrize(gaussian_matrix(4, 4, rng));
  for (const LossSpec& spec : all_specs()) {
    const Matrix g = grad_M(spec, inst.op, inst.measurements, M);
    EXPECT_LT((g - g.transpose()).cwiseAbs().maxCoeff(), 1e-15);
    const Matrix fd = fd_grad_M(spec, inst.op, inst.measurements, M);
    EXPECT_LT((g - fd).cwiseAbs().maxCoeff(), 1e-7 * std::max(1.0, g.cwiseAbs().maxCoeff())) << to_string(spec.kind);
  }
  const Matrix mse = grad_M(LossSpec::mse(), inst.op, inst.measurements, M);
  EXPECT_LT((mse + inst.op.adjoint(residuals_of_matrix(inst.op, inst.measurements, M))).cwiseAbs().maxCoeff(),
            1e-12);
}

TEST(GradM, CombinedEndpoints) {
  const ProblemInstance inst = small_instance(4, 2, 25, 0.2, 6);
  Rng rng(7);
  const Matrix M = symmetrize(gaussian_matrix(4, 4, rng));
  const auto& op = inst.op;
  const auto& b = inst.measurements;
  EXPECT_LT((grad_M(LossSpec::combined(1.0, 0.9), op, b, M) - grad_M(LossSpec::mse(MseNorm::mean), op, b, M))
                .cwiseAbs()
                .maxCoeff(),
            1e-12);
  EXPECT_LT((grad_M(LossSpec::combined(0.0, 0.9), op, b, M) - grad_M(LossSpec::kernel(0.9), op, b, M))
                .cwiseAbs()
                .maxCoeff(),
            1e-12);
}

TEST(GradX, ZeroAtNoiselessTruth) {
  const ProblemInstance inst = small_instance(6, 2, 30, 0.0, 9);
  for (const LossSpec& spec : all_specs())
    EXPECT_LT(grad_X(spec, inst.op, inst.measurements, inst.truth.factor).cwiseAbs().maxCoeff(), 1e-12);

  // Scaling the operator and data together keeps X* a zero of the gradient.
  std::vector<Matrix> mats;
  for (int i = 0; i < inst.op.m(); ++i) mats.push_back(3.0 * inst.op.sensing_matrix(i));
  const SensingOperator scaled(6, mats);
  EXPECT_LT(grad_X(LossSpec::kernel(1.0), scaled, 3.0 * inst.measurements, inst.truth.factor).cwiseAbs().maxCoeff(),
            1e-11);
}

TEST(GradX, MatchesFiniteDifference) {
  const ProblemInstance inst = small_instance(6, 2, 30, 0.3, 10);
  Rng rng(1);
  const Matrix X = inst.truth.factor + 0.3 * gaussian_matrix(6, 2, rng);
  for (const LossSpec& spec : all_specs()) {
    const FiniteDiffReport rep = finite_diff_check(spec, inst.op, inst.measurements, X, 1e-6);
    EXPECT_TRUE(rep.pass) << to_string(spec.kind) << " max_rel_err " << rep.max_rel_err;
    const ValueAndGrad vg = value_and_grad_X(spec, inst.op, inst.measurements, X);
    EXPECT_LT((vg.grad - grad_X(spec, inst.op, inst.measurements, X)).cwiseAbs().maxCoeff(), 1e-12);
    EXPECT_NEAR(vg.value, loss_value(spec, residuals(inst.op, inst.measurements, X)), 1e-12);
  }
}

TEST(Hessian, MseOnBasisOperator) {
  const SensingOperator op = make_basis_operator(4);
  const Vector b = Vector::Zero(16);
  Rng rng(3);
  const Matrix K = symmetrize(gaussian_matrix(4, 4, rng));
  const Matrix M = symmetrize(gaussian_matrix(4, 4, rng));
  EXPECT_NEAR(hessian_quadratic_form(LossSpec::mse(MseNorm::sum), op, b, M, K), 2.0 * K.squaredNorm(), 1e-12);
  EXPECT_NEAR(hessian_quadratic_form(LossSpec::mse(MseNorm::half_sum), op, b, M, K), K.squaredNorm(), 1e-12);
}

TEST(Hessian, MseIndependentOfM) {
  const ProblemInstance inst = small_instance(5, 2, 40, 0.2, 11);
  Rng rng(5);
  const Matrix K = symmetrize(gaussian_matrix(5, 5, rng));
  const Matrix M1 = symmetrize(gaussian_matrix(5, 5, rng));
  const Matrix M2 = symmetrize(gaussian_matrix(5, 5, rng));
  const LossSpec spec = LossSpec::mse(MseNorm::sum);
  EXPECT_NEAR(hessian_quadratic_form(spec, inst.op, inst.measurements, M1, K),
              hessian_quadratic_form(spec, inst.op, inst.measurements, M2, K), 1e-9);
}

TEST(Hessian, KernelFormMatchesProductDifference) {
  const ProblemInstance inst = small_instance(4, 2, 30, 0.3, 12);
  Rng rng(6);
  const Matrix K = symmetrize(gaussian_matrix(4, 4, rng));
  const Matrix M = inst.truth.matrix + 0.1 * symmetrize(gaussian_matrix(4, 4, rng));
  const LossSpec spec = LossSpec::kernel(1.0);
  const double q = hessian_quadratic_form(spec, inst.op, inst.measurements, M, K);
  const double via_hvp = (K.array() * hessian_vector_product(spec, inst.op, inst.measurements, M, K).array()).sum();
  EXPECT_NEAR(q, via_hvp, 1e-4 * std::abs(via_hvp));
}

TEST(Hessian, DenseEigenOracle) {
  // lambda_min against the smallest eigenvalue of the Hessian assembled
  // on an orthonormal basis of symmetric matrices.
  const ProblemInstance inst = small_instance(3, 1, 20, 0.2, 13);
  const int n = 3;
  std::vector<Matrix> basis;
  for (int a = 0; a < n; ++a)
    for (int b = a; b < n; ++b) {
      Matrix E = Matrix::Zero(n, n);
      if (a == b) {
        E(a, a) = 1.0;
      } else {
        E(a, b) = E(b, a) = 1.0 / std::sqrt(2.0);
      }
      basis.push_back(E);
    }
  const int d = static_cast<int>(basis.size());
  for (const LossSpec& spec : {LossSpec::mse(MseNorm::sum), LossSpec::kernel(1.0)}) {
    Matrix H(d, d);
    for (int j = 0; j < d; ++j) {
      const Matrix col = hessian_vector_product(spec, inst.op, inst.measurements, inst.truth.matrix, basis[j]);
      for (int i = 0; i < d; ++i) H(i, j) = (basis[i].array() * col.array()).sum();
    }
    H = symmetrize(H);
    const double exact = Eigen::SelfAdjointEigenSolver<Matrix>(H).eigenvalues()(0);
    const EigenEstimate est = lambda_min_hessian(spec, inst.op, inst.measurements, inst.truth.matrix, 5000, 3);
    EXPECT_TRUE(est.converged);
    EXPECT_NEAR(est.value, exact, 1e-4 * std::max(1.0, std::abs(exact))) << to_string(spec.kind);
  }
}

TEST(Hessian, LambdaMinFacts) {
  const SensingOperator basis = make_basis_operator(3);
  EXPECT_NEAR(lambda_min_hessian(LossSpec::mse(MseNorm::sum), basis, Vector::Zero(9), Matrix::Zero(3, 3), 2000, 1).value,
              2.0, 1e-6);

  const ProblemInstance clean = small_instance(4, 2, 40, 0.0, 14);
  const double lam =
      lambda_min_hessian(LossSpec::kernel(1.0), clean.op, clean.measurements, clean.truth.matrix, 3000, 2).value;
  EXPECT_GE(lam, -1e-6);
}
