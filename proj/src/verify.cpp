#include "rsense/verify.hpp"

#include <cmath>
#include <functional>

#include "rsense/bounds.hpp"
#include "rsense/empirics.hpp"
#include "rsense/format.hpp"
#include "rsense/io.hpp"
#include "rsense/optimizer.hpp"

namespace rsense {

namespace {

InstanceSpec small_spec(Seed seed, double noise_norm) {
  InstanceSpec s;
  s.n = 6;
  s.r = 2;
  s.m = 40;
  s.seed = seed;
  s.spectrum = {2.0, 1.0};
  s.noise_norm = noise_norm;
  return s;
}

InvariantResult check(const std::string& name, const std::function<InvariantResult()>& body) {
  try {
    InvariantResult r = body();
    r.name = name;
    return r;
  } catch (const std::exception& e) {
    return {name, false, std::string("threw: ") + e.what()};
  }
}

InvariantResult within(double value, double target, double tol) {
  const double err = std::abs(value - target);
  return {"", err <= tol, "value=" + format_double(value) + " target=" + format_double(target)};
}

}  // namespace

std::vector<InvariantResult> run_verification(const VerifyOptions& options) {
  const ProblemInstance inst = make_instance(small_spec(derive_seed(options.seed, {0}), 0.1));
  const int n = inst.truth.n;
  const int r = inst.truth.r;
  Rng rng(derive_seed(options.seed, {1}));
  const Matrix X = inst.truth.factor + 0.3 * gaussian_matrix(n, r, rng);

  std::vector<InvariantResult> out;

  out.push_back(check("operator_adjoint_identity", [&] {
    Rng g(derive_seed(options.seed, {2}));
    const Matrix M = symmetrize(gaussian_matrix(n, n, g));
    const Vector v = gaussian_vector(inst.op.m(), g);
    const double lhs = inst.op.apply(M).dot(v);
    const double rhs = (M.array() * inst.op.adjoint(v).array()).sum();
    return within(lhs, rhs, 1e-10 * (1.0 + std::abs(lhs)));
  }));

  out.push_back(check("basis_operator_isometry", [&] {
    const SensingOperator basis = make_basis_operator(n);
    Rng g(derive_seed(options.seed, {3}));
    const Matrix M = symmetrize(gaussian_matrix(n, n, g));
    return within(basis.apply(M).norm(), M.norm(), 1e-12 * M.norm());
  }));

  out.push_back(check("ground_truth_psd_rank_r", [&] {
    Eigen::SelfAdjointEigenSolver<Matrix> es(inst.truth.matrix);
    const Vector lam = es.eigenvalues();
    int rank = 0;
    for (Eigen::Index i = 0; i < lam.size(); ++i)
      if (lam(i) > 1e-10) ++rank;
    const bool ok = lam.minCoeff() > -1e-10 && rank == r && std::abs(lam(n - 1) - 2.0) < 1e-10;
    return InvariantResult{"", ok, "rank=" + std::to_string(rank) + " top=" + format_double(lam(n - 1))};
  }));

  out.push_back(check("instance_regeneration_bit_exact", [&] {
    const InstanceSpec spec = small_spec(derive_seed(options.seed, {0}), 0.1);
    const ProblemInstance again = make_instance(instance_from_json(Json::parse(instance_to_json(spec).dump())));
    const bool ok = again.truth.matrix == inst.truth.matrix && again.op.design() == inst.op.design() &&
                    again.measurements == inst.measurements;
    return InvariantResult{"", ok, ok ? "identical" : "regenerated instance differs"};
  }));

  out.push_back(check("kernel_loss_zero_on_constant_residuals", [&] {
    const Vector c = Vector::Constant(17, 3.25);
    return within(kernel_loss(c, 0.7), 0.0, 0.0);
  }));

  out.push_back(check("kernel_loss_translation_invariant", [&] {
    Rng g(derive_seed(options.seed, {4}));
    const Vector res = gaussian_vector(25, g);
    const double a = kernel_loss(res, 1.0);
    const double b = kernel_loss((res.array() + 4.0).matrix(), 1.0);
    return within(a, b, 1e-12);
  }));

  out.push_back(check("kernel_gradient_sums_to_zero", [&] {
    Rng g(derive_seed(options.seed, {5}));
    const Vector res = gaussian_vector(25, g);
    return within(kernel_grad_residual(res, 0.8).sum(), 0.0, 1e-10);
  }));

  for (const LossSpec& spec : {LossSpec::mse(), LossSpec::kernel(1.0), LossSpec::combined(0.5, 1.0)}) {
    out.push_back(check("finite_diff_gradient_" + to_string(spec.kind), [&] {
      GradientFn fn;
      if (options.inject_grad_sign_flip) {
        fn = [](const LossSpec& s, const SensingOperator& op, const Vector& b, const Matrix& x) -> Matrix {
          return -grad_X(s, op, b, x);
        };
      }
      const FiniteDiffReport rep = finite_diff_check(spec, inst.op, inst.measurements, X, 1e-5, fn);
      return InvariantResult{"", rep.pass && !rep.vacuous, "max_rel_err=" + format_double(rep.max_rel_err)};
    }));
  }

  out.push_back(check("mse_hessian_basis_lambda_min_is_two", [&] {
    const SensingOperator basis = make_basis_operator(4);
    const Vector b = Vector::Zero(basis.m());
    const EigenEstimate e =
        lambda_min_hessian(LossSpec::mse(MseNorm::sum), basis, b, Matrix::Zero(4, 4), 500, options.seed);
    return within(e.value, 2.0, 1e-6);
  }));

  out.push_back(check("dist_factor_rotation_invariant", [&] {
    Rng g(derive_seed(options.seed, {6}));
    const Eigen::HouseholderQR<Matrix> qr(gaussian_matrix(r, r, g));
    const Matrix Q = qr.householderQ();
    const Matrix& Xs = inst.truth.factor;
    return within(dist_factor(Xs * Q, inst.truth.matrix), 0.0, 1e-8);
  }));

  out.push_back(check("rank_projection_idempotent", [&] {
    Rng g(derive_seed(options.seed, {7}));
    const Matrix P = project_rank_r(symmetrize(gaussian_matrix(n, n, g)), r);
    return within((project_rank_r(P, r) - P).norm(), 0.0, 1e-10 * (1.0 + P.norm()));
  }));

  out.push_back(check("solver_stops_at_critical_point", [&] {
    const ProblemInstance clean = make_instance(small_spec(derive_seed(options.seed, {0}), 0.0));
    SolverConfig c;
    c.init = init::Explicit{clean.truth.factor};
    c.step_mode = StepMode::explicit_value;
    c.step_size = 0.01;
    const SolveResult res = gradient_descent(clean, LossSpec::mse(), c);
    const bool ok = res.iterations_run == 0 && res.termination == Termination::grad_tol;
    return InvariantResult{"", ok, "iterations=" + std::to_string(res.iterations_run)};
  }));

  out.push_back(check("kernel_step_is_h2_times_mse_step", [&] {
    ConvergenceBoundInputs in;
    in.rho = 1.7;
    in.r = 2;
    in.delta = 0.2;
    in.h = 0.6;
    in.norm_Mw = 2.0;
    return within(step_size_bound(LossKind::kernel, in), 0.36 * step_size_bound(LossKind::mse, in), 1e-15);
  }));

  out.push_back(check("turning_point_peak", [&] {
    const TurningPoint tp = turning_point(1.0);
    return within(tp.peak_val, std::exp(-0.5) / std::sqrt(2.0), 1e-8);
  }));

  out.push_back(check("prob_norm_bound_spot_value", [&] {
    return within(prob_norm_bound(4.0, 100, 0.05), 1.0 - 2.0 * std::exp(-4.0), 1e-12);
  }));

  out.push_back(check("rho_on_basis_operator_is_two", [&] {
    const SensingOperator basis = make_basis_operator(4);
    const Vector b = Vector::Zero(basis.m());
    EstimatorOptions opts;
    opts.rank = 2;
    const SupEstimate est = estimate_rho(LossSpec::mse(MseNorm::sum), basis, b, 10, options.seed, opts);
    return within(est.value, 2.0, 1e-9);
  }));

  out.push_back(check("mse_zeta2_vanishes", [&] {
    const SupEstimate est = estimate_zeta2(LossSpec::mse(MseNorm::sum), inst.op, inst.measurements,
                                           inst.truth.matrix, 10, options.seed);
    return InvariantResult{"", est.value < 1e-6, "zeta2=" + format_double(est.value)};
  }));

  return out;
}

}  // namespace rsense
