#include "rsense/pipeline.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "rsense/empirics.hpp"

namespace rsense {

namespace {

double min_pairwise_sq(const Vector& r) {
  Vector s = r;
  std::sort(s.data(), s.data() + s.size());
  double best = std::numeric_limits<double>::infinity();
  for (Eigen::Index i = 1; i < s.size(); ++i) best = std::min(best, (s(i) - s(i - 1)) * (s(i) - s(i - 1)));
  return best;
}

}  // namespace

InstanceBounds bound_inputs_from_instance(const ProblemInstance& instance, const SolveResult& solved, double h,
                                          double lambda_mix, int samples, Seed seed) {
  const int n = instance.truth.n;
  const int r = instance.truth.r;
  const Matrix M_hat = solved.X * solved.X.transpose();
  const LossSpec kernel = LossSpec::kernel(h);
  const double delta = estimate_rip(instance.op, std::min(2 * r, n), 20, derive_seed(seed, {0})).delta_hat;

  InstanceBounds out;
  BoundInputs& in = out.inputs;
  in.delta = delta;
  in.eps = instance.noise.norm();
  in.h = h;
  EstimatorOptions opts;
  opts.rank = r;
  opts.center = M_hat;
  in.consts = estimate_constants(kernel, instance.op, instance.measurements, M_hat, delta, samples,
                                 derive_seed(seed, {1}), opts);
  in.sigma_r = instance.truth.sigma_r();
  in.G = grad_M(kernel, instance.op, instance.measurements, M_hat).norm();
  in.L = in.consts.rho;
  in.lambda_min =
      lambda_min_hessian(kernel, instance.op, instance.measurements, instance.truth.matrix, 200, derive_seed(seed, {2}))
          .value;
  in.C = 0.0;
  in.n_meas = instance.op.m();

  ReportParams& p = out.params;
  p.rank = r;
  p.lambda_mix = lambda_mix;
  p.norm_Mw = M_hat.norm();
  const LossSpec combined = LossSpec::combined(lambda_mix, h);
  p.L_star = loss_value(combined, residuals(instance.op, instance.measurements, solved.X));

  Rng rng(derive_seed(seed, {3}));
  Matrix U = gaussian_matrix(n, r, rng);
  U /= U.norm();
  const Matrix Q = solved.X * U.transpose() + U * solved.X.transpose();
  Eigen::SelfAdjointEigenSolver<Matrix> es(symmetrize(M_hat));
  HighDeltaInputs hd;
  hd.lambda_rstar = es.eigenvalues()(n - r);
  hd.norm_Q = Q.norm();
  const Vector res = residuals(instance.op, instance.measurements, solved.X);
  hd.gamma_min = residual_constants(res, h).g_min;
  hd.u_min_sq = min_pairwise_sq(res);
  p.high_delta = hd;
  return out;
}

}  // namespace rsense
