#include "rsense/optimizer.hpp"

#include <algorithm>
#include <cmath>
#include <ostream>

#include "rsense/empirics.hpp"
#include "rsense/format.hpp"

namespace rsense {

double ConvergenceBoundInputs::C_w() const { return std::sqrt(2.0 * (std::sqrt(2.0) - 1.0)) * sigma_r_Mw; }

double step_size_bound(LossKind kind, const ConvergenceBoundInputs& in) {
  require(in.rho > 0.0, "step_size_bound: rho must be > 0");
  require(in.r >= 1, "step_size_bound: rank must be >= 1");
  require(in.delta >= 0.0 && in.zeta2 >= 0.0 && in.eps >= 0.0 && in.norm_Mw >= 0.0,
          "step_size_bound: inputs must be nonnegative");
  const double q = in.delta + in.zeta2 * in.eps;
  require(q < 1.0, "step_size_bound: requires delta + zeta2 * eps < 1");
  const double inner = 2.0 * (std::sqrt(2.0) - 1.0) * std::sqrt(1.0 - q * q) + in.norm_Mw;
  const double mse = 1.0 / (12.0 * in.rho * std::sqrt(static_cast<double>(in.r)) * inner);
  if (kind == LossKind::kernel) {
    require(in.h > 0.0, "step_size_bound: bandwidth must be > 0");
    return in.h * in.h * mse;
  }
  return mse;
}

double step_size_shorthand(double rho, double C0, double h) {
  require(rho > 0.0 && C0 > 0.0 && h > 0.0, "step_size_shorthand: inputs must be > 0");
  return h * h / (12.0 * std::sqrt(rho) * C0);
}

std::string to_string(Termination t) {
  switch (t) {
    case Termination::grad_tol:
      return "grad_tol";
    case Termination::max_iters:
      return "max_iters";
    case Termination::non_finite:
      return "non_finite";
  }
  return "unknown";
}

Matrix initial_point(const ProblemInstance& instance, const InitPolicy& policy, Seed seed) {
  const int n = instance.truth.n;
  const int r = instance.truth.r;
  if (std::holds_alternative<init::Spectral>(policy)) {
    const Matrix s = symmetrize(instance.op.adjoint(instance.measurements));
    Eigen::SelfAdjointEigenSolver<Matrix> es(s);
    Matrix X(n, r);
    for (int k = 0; k < r; ++k) {
      const int idx = n - 1 - k;
      X.col(k) = es.eigenvectors().col(idx) * std::sqrt(std::max(es.eigenvalues()(idx), 0.0));
    }
    return X;
  }
  if (const auto* p = std::get_if<init::GroundTruthPerturbed>(&policy)) {
    require(p->scale >= 0.0, "initial_point: perturbation scale must be >= 0");
    const Matrix& xs = instance.truth.factor;
    if (p->scale == 0.0) return xs;
    Rng rng(seed);
    const Matrix g = gaussian_matrix(n, r, rng);
    return xs + (p->scale * xs.norm() / g.norm()) * g;
  }
  const Matrix& x0 = std::get<init::Explicit>(policy).X0;
  require(x0.rows() == n && x0.cols() == r, "initial_point: explicit X0 must be n x r");
  return x0;
}

ConvergenceBoundInputs auto_step_inputs(const ProblemInstance& instance, const LossSpec& spec, const Matrix& X0,
                                        const SolverConfig& config) {
  const int n = instance.truth.n;
  const int r = static_cast<int>(X0.cols());
  const Matrix M0 = X0 * X0.transpose();
  EstimatorOptions opts;
  opts.rank = r;
  opts.center = M0;
  ConvergenceBoundInputs in;
  in.rho = estimate_rho(spec, instance.op, instance.measurements, config.rho_samples,
                        derive_seed(config.seed, {1}), opts)
               .value;
  in.r = r;
  in.delta = estimate_rip(instance.op, std::min(2 * r, n), 20, derive_seed(config.seed, {2})).delta_hat;
  in.zeta2 = config.zeta2;
  in.eps = instance.noise.norm();
  in.h = spec.h;
  in.norm_Mw = M0.norm();
  return in;
}

double select_step_size(const ProblemInstance& instance, const LossSpec& spec, const Matrix& X0,
                        const SolverConfig& config) {
  if (config.step_mode == StepMode::explicit_value) {
    require(config.step_size > 0.0 && std::isfinite(config.step_size), "solver: step size must be > 0");
    return config.step_size;
  }
  require(config.step_fraction > 0.0, "solver: step_fraction must be > 0");
  const ConvergenceBoundInputs in = auto_step_inputs(instance, spec, X0, config);
  const LossKind rule = config.step_mode == StepMode::auto_kernel ? LossKind::kernel : LossKind::mse;
  return config.step_fraction * step_size_bound(rule, in);
}

SolveResult gradient_descent(const ProblemInstance& instance, const LossSpec& spec, const SolverConfig& config) {
  spec.validate();
  require(config.max_iters >= 1, "solver: max_iters must be >= 1");
  require(config.grad_tol >= 0.0, "solver: grad_tol must be >= 0");

  SolveResult res;
  Matrix X = initial_point(instance, config.init, derive_seed(config.seed, {0}));
  const Matrix& truth = instance.truth.matrix;
  bool step_ready = false;

  for (int t = 0;; ++t) {
    const ValueAndGrad vg = value_and_grad_X(spec, instance.op, instance.measurements, X);
    res.loss_trace.push_back(vg.value);
    res.error_trace.push_back(error_frobenius(X, truth));
    res.iterations_run = t;
    res.final_grad_norm = vg.grad.norm();
    if (!std::isfinite(vg.value) || !std::isfinite(res.final_grad_norm) || !X.allFinite()) {
      res.termination = Termination::non_finite;
      break;
    }
    if (res.final_grad_norm <= config.grad_tol) {
      res.termination = Termination::grad_tol;
      break;
    }
    if (t == config.max_iters) {
      res.termination = Termination::max_iters;
      break;
    }
    if (!step_ready) {
      res.step_size = select_step_size(instance, spec, X, config);
      step_ready = true;
    }
    X -= res.step_size * vg.grad;
  }
  res.X = std::move(X);
  return res;
}

Matrix project_rank_r(const Matrix& M, int r) {
  require(M.rows() == M.cols(), "project_rank_r: matrix must be square");
  require(r >= 0, "project_rank_r: rank must be >= 0");
  const Eigen::Index n = M.rows();
  Eigen::SelfAdjointEigenSolver<Matrix> es(symmetrize(M));
  Matrix out = Matrix::Zero(n, n);
  for (Eigen::Index k = 0; k < std::min<Eigen::Index>(r, n); ++k) {
    const Eigen::Index idx = n - 1 - k;
    const double lam = es.eigenvalues()(idx);
    if (lam <= 0.0) break;
    const auto u = es.eigenvectors().col(idx);
    out.noalias() += lam * u * u.transpose();
  }
  return out;
}

double dist_factor(const Matrix& X, const Matrix& M) {
  const Eigen::Index n = X.rows();
  const Eigen::Index r = X.cols();
  require(M.rows() == n && M.cols() == n, "dist_factor: dimension mismatch");
  Eigen::SelfAdjointEigenSolver<Matrix> es(symmetrize(M));
  const Vector& lam = es.eigenvalues();
  const double tol = 1e-10 * std::max(1.0, lam.cwiseAbs().maxCoeff());
  int rank = 0;
  for (Eigen::Index k = 0; k < n; ++k)
    if (lam(k) > tol) ++rank;
  require(rank <= r, "dist_factor: rank(M) exceeds the factor width");
  require(lam.minCoeff() >= -tol, "dist_factor: M must be PSD");
  Matrix Z0 = Matrix::Zero(n, r);
  for (Eigen::Index k = 0; k < std::min(r, n); ++k) {
    const Eigen::Index idx = n - 1 - k;
    Z0.col(k) = es.eigenvectors().col(idx) * std::sqrt(std::max(lam(idx), 0.0));
  }
  Eigen::JacobiSVD<Matrix> svd(Z0.transpose() * X, Eigen::ComputeFullU | Eigen::ComputeFullV);
  const Matrix Q = svd.matrixU() * svd.matrixV().transpose();
  return (X - Z0 * Q).norm();
}

double error_frobenius(const Matrix& X, const Matrix& M_star) {
  require(M_star.rows() == X.rows() && M_star.cols() == X.rows(), "error_frobenius: dimension mismatch");
  return (X * X.transpose() - M_star).norm();
}

void write_trace_csv(std::ostream& out, const std::string& value_column, const std::vector<double>& trace) {
  out << "iteration," << value_column << '\n';
  for (std::size_t i = 0; i < trace.size(); ++i) out << i << ',' << format_double(trace[i]) << '\n';
}

}  // namespace rsense
