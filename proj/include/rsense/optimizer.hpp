#pragma once

#include <iosfwd>
#include <string>
#include <variant>
#include <vector>

#include "rsense/common.hpp"
#include "rsense/core_model.hpp"
#include "rsense/losses.hpp"

namespace rsense {

/// Constants feeding the fixed step-size rule of vanilla gradient descent.
struct ConvergenceBoundInputs {
  double rho = 0.0;      // restricted gradient-Lipschitz constant
  int r = 1;             // rank
  double delta = 0.0;    // RIP constant
  double zeta2 = 0.0;    // Hessian-noise coupling
  double eps = 0.0;      // noise norm bound (q in the convergence analysis)
  double h = 1.0;        // bandwidth
  double norm_Mw = 0.0;  // ||M^w||_F, approximated by a long solve
  double sigma_r_Mw = 0.0;
  double D_r = 0.0;  // ||M^w - P_r(M^w)||_F

  /// sqrt(2(sqrt(2) - 1)) * sigma_r(M^w)
  double C_w() const;
};

/// Full-form step bound:
///   mse:    (12 rho sqrt(r) (2(sqrt2 - 1) sqrt(1 - (delta + zeta2 eps)^2) + ||M^w||_F))^-1
///   kernel: h^2 times the same expression.
/// The combined loss uses the mse form. Throws when delta + zeta2 eps >= 1.
double step_size_bound(LossKind kind, const ConvergenceBoundInputs& in);

/// Summary-table shorthand h^2 / (12 sqrt(rho) C0); pass h = 1 for the mse row.
double step_size_shorthand(double rho, double C0, double h);

namespace init {
struct Spectral {};
/// X0 = X* + scale * ||X*||_F * G / ||G||_F with G standard normal.
struct GroundTruthPerturbed {
  double scale = 0.1;
};
struct Explicit {
  Matrix X0;
};
}  // namespace init

using InitPolicy = std::variant<init::Spectral, init::GroundTruthPerturbed, init::Explicit>;

enum class StepMode { explicit_value, auto_mse, auto_kernel };

struct SolverConfig {
  StepMode step_mode = StepMode::auto_mse;
  double step_size = 0.0;  // used when step_mode == explicit_value
  /// Multiplier applied to an automatically selected step.
  double step_fraction = 1.0;
  int max_iters = 1000;
  double grad_tol = 1e-10;
  InitPolicy init = init::Spectral{};
  Seed seed = 0;
  /// zeta2 plugged into the automatic step rule.
  double zeta2 = 0.0;
  int rho_samples = 20;
};

enum class Termination { grad_tol, max_iters, non_finite };
std::string to_string(Termination t);

struct SolveResult {
  Matrix X;
  std::vector<double> loss_trace;   // length iterations_run + 1
  std::vector<double> error_trace;  // ||X_t X_t^T - M*||_F
  int iterations_run = 0;
  Termination termination = Termination::max_iters;
  double step_size = 0.0;
  double final_grad_norm = 0.0;
};

Matrix initial_point(const ProblemInstance& instance, const InitPolicy& policy, Seed seed);

/// Inputs for the automatic step rule on this instance: rho from
/// estimate_rho, delta from a rank-2r RIP estimate, ||M^w||_F from the
/// initial iterate, eps = ||w||.
ConvergenceBoundInputs auto_step_inputs(const ProblemInstance& instance, const LossSpec& spec,
                                        const Matrix& X0, const SolverConfig& config);

double select_step_size(const ProblemInstance& instance, const LossSpec& spec, const Matrix& X0,
                        const SolverConfig& config);

/// X_{t+1} = X_t - eta grad_X L(X_t).
SolveResult gradient_descent(const ProblemInstance& instance, const LossSpec& spec,
                             const SolverConfig& config);

/// Nearest (Frobenius) PSD matrix of rank <= r.
Matrix project_rank_r(const Matrix& M, int r);

/// min over Z with Z Z^T = M of ||X - Z||_F (orthogonal Procrustes alignment).
double dist_factor(const Matrix& X, const Matrix& M);

/// ||X X^T - M*||_F
double error_frobenius(const Matrix& X, const Matrix& M_star);

/// Two-column CSV, 17 significant digits, LF line endings.
void write_trace_csv(std::ostream& out, const std::string& value_column, const std::vector<double>& trace);

}  // namespace rsense
