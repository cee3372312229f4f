#pragma once

#include <optional>
#include <span>
#include <string>
#include <variant>
#include <vector>

#include "rsense/common.hpp"

namespace rsense {

/// Rank-r PSD ground truth M* = X* X*^T.
struct GroundTruth {
  int n = 0;
  int r = 0;
  Matrix factor;    // X*, n x r
  Matrix matrix;    // M*, n x n
  Vector spectrum;  // nonzero eigenvalues of M*, descending

  double sigma_r() const { return spectrum.minCoeff(); }
};

/// X* = Q diag(sqrt(spectrum)) with Q Haar-distributed on the n x r Stiefel manifold.
GroundTruth gen_ground_truth(int n, int r, std::span<const double> spectrum, Seed seed);

/// Linear map from symmetric n x n matrices to R^m, A(M)_i = <A_i, M>.
///
/// The sensing matrices are kept as the rows of an m x n^2 design matrix
/// (row i is vec(A_i), column-major), so apply and adjoint are single
/// matrix-vector products.
class SensingOperator {
 public:
  SensingOperator() = default;
  /// Every entry of `mats` must be n x n and symmetric to 1e-12.
  SensingOperator(int n, const std::vector<Matrix>& mats);

  int n() const { return n_; }
  int m() const { return static_cast<int>(design_.rows()); }
  const Matrix& design() const { return design_; }
  Matrix sensing_matrix(int i) const;

  Vector apply(const Matrix& M) const;
  Matrix adjoint(const Vector& v) const;

 private:
  int n_ = 0;
  Matrix design_;
};

/// A_i = sym(G_i) / sqrt(m); E ||A(M)||^2 = ||M||_F^2 for symmetric M.
SensingOperator gen_gaussian_operator(int n, int m, Seed seed);

/// m = n^2 operator with A_(a,b) = sym(e_a e_b^T); an exact isometry on
/// symmetric matrices (delta = 0).
SensingOperator make_basis_operator(int n);

struct RipEstimate {
  double delta_hat = 0.0;  // sampled lower bound on the true constant
  int rank_tested = 0;
  int trials = 0;
  Seed seed = 0;
};

/// Random symmetric test matrix G G^T - H H^T of rank <= `rank`, unit Frobenius norm.
Matrix random_low_rank_symmetric(int n, int rank, Rng& rng);

/// max over `trials` random rank-`rank` symmetric X of | ||A(X)||^2 / ||X||_F^2 - 1 |.
/// Trial i draws from derive_seed(seed, {i}), so a smaller trial count is
/// always a prefix of a larger one.
RipEstimate estimate_rip(const SensingOperator& op, int rank, int trials, Seed seed);

namespace noise {
struct Gaussian {
  double sigma = 1.0;
};
/// Per-entry standard deviation sigma0 / sqrt(m).
struct SubGaussianScaled {
  double sigma0 = 0.05;
};
struct Uniform {
  double a = 0.0;
  double b = 1.0;
};
struct Laplace {
  double scale = 1.0;
};
struct StudentT {
  double dof = 3.0;
  double scale = 1.0;
};
}  // namespace noise

struct NoiseModel {
  using Kind = std::variant<noise::Gaussian, noise::SubGaussianScaled, noise::Uniform,
                            noise::Laplace, noise::StudentT>;
  Kind kind = noise::Gaussian{};
  bool centered = false;  // subtract the empirical mean after sampling

  std::string kind_name() const;
  std::vector<double> params() const;
  static NoiseModel from_name(const std::string& kind, std::span<const double> params,
                              bool centered);
  void validate() const;
};

Vector sample_noise(const NoiseModel& model, int m, Seed seed);

/// max(0, 1 - 2 exp(-eps^2 / (16 m sigma^2))): lower bound on P(||w||_2 <= eps)
/// for a sigma-sub-Gaussian vector in R^m.
double prob_norm_bound(double eps, int m, double sigma);

/// Everything needed to regenerate a ProblemInstance bit-exactly.
struct InstanceSpec {
  int n = 0;
  int r = 0;
  int m = 0;
  Seed seed = 0;
  std::vector<double> spectrum;
  NoiseModel noise;
  /// When set, the sampled noise is rescaled to exactly this Euclidean norm.
  std::optional<double> noise_norm;
};

struct ProblemInstance {
  GroundTruth truth;
  SensingOperator op;
  Vector noise;
  Vector measurements;  // A(M*) + w
  Seed seed = 0;
};

/// Builds truth, operator and noise from child seeds of spec.seed.
ProblemInstance make_instance(const InstanceSpec& spec);

/// Same truth and operator, different noise vector.
ProblemInstance with_noise(const ProblemInstance& base, Vector noise);

}  // namespace rsense
