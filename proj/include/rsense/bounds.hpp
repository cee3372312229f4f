#pragma once

#include <optional>
#include <string>
#include <vector>

#include "rsense/empirics.hpp"
#include "rsense/losses.hpp"

namespace rsense {

// Closed-form error, curvature and step bounds for the kernel and mse losses.
//
// Bounds stated only up to O(.) are evaluated with implied constant 1.
// They are order bounds, useful for trends and crossings, not certified
// envelopes.

struct BoundInputs {
  double delta = 0.0;  // RIP constant, in [0, 1)
  double eps = 0.0;    // noise norm bound
  double h = 1.0;      // bandwidth
  ConstantEstimates consts;
  double sigma_r = 1.0;     // sigma_r(M*)
  double G = 0.0;           // residual-gradient scale
  double L = 0.0;           // smoothness constant of the lower bounds
  double lambda_min = 0.0;  // Hessian floor at M*
  double C = 0.0;           // additive constant of the kernel Lipschitz bound
  double tau = 0.5;         // spectral-neighborhood parameter
  int n_meas = 1;           // measurement count
  /// Use exp(-eps^2 / h^2) wherever the printed formulas have exp(-eps^2).
  bool dimensional_exponent = false;
};

struct HighDeltaInputs {
  double lambda_rstar = 0.0;  // lambda_{r*}(X X^T)
  double norm_Q = 0.0;        // ||X U^T + U X^T||
  double gamma_min = 0.0;     // uniform lower bound on the kernel row averages
  double u_min_sq = 0.0;      // minimum pairwise squared residual
};

/// sqrt(1 + delta) eps / delta. Throws for delta <= 0.
double mse_error_upper(const BoundInputs& in);

/// 2/(G_min h^2) (L1^2 (1 + 2B^2/h^2) + B L2) + 4/(G_min^2 h^4) B^2 L1^2
double kernel_lambda_min_floor(const BoundInputs& in);

/// max{ sqrt(2 / lambda_min), 2(1 + delta) R / (1 - delta - lambda_min) } with
/// R = eps exp(-eps^2) / h^2. The second term is 0 when its denominator is
/// not positive.
double kernel_error_upper(const BoundInputs& in);

struct TurningPoint {
  std::optional<double> eps_star;  // smallest eps with eps exp(-eps^2) = h^2
  double peak_eps = 0.0;           // 1 / sqrt(2)
  double peak_val = 0.0;           // exp(-1/2) / sqrt(2)
};

TurningPoint turning_point(double h);

/// kernel: 8(1 + delta) eps exp(-eps^2) / h^4 + C;  mse: 2 sqrt(1 + delta).
double lipschitz_lambda(LossKind kind, const BoundInputs& in);

enum class DeltaMode { explicit_bandwidth, conservative, noise_aware };

struct DeltaCondition {
  double value = 0.0;  // NaN when the radicand is negative
  bool feasible = false;
};

/// Admissible RIP threshold. Negative or NaN values are returned raw and
/// flagged infeasible.
///   explicit_bandwidth: sqrt(B^2/(4(G_min + 2)) (2 - G/sigma_r - L2/B)) - 1
///   conservative:       B / sqrt(2(G_min + 2)) - 1
///   noise_aware:        sqrt(h^4 (2 - G/sigma_r - 2 eps L2 e^(eps^2/h^2) / h^2)
///                            / (8 e^(eps^2/h^2) (h^2 + 2 eps^2 + 2 eps^2 e^(eps^2/h^2)))) - 1
DeltaCondition delta_condition(const BoundInputs& in, DeltaMode mode);

/// Bandwidth h = sqrt(2) B / sqrt(G_min) that the explicit condition assumes.
double recommended_bandwidth(double b_max, double g_min);

/// Coefficient B of the large-delta bound (named b_coef here to avoid the
/// clash with the residual spread).
double high_delta_coefficient(const BoundInputs& in, const HighDeltaInputs& hd);

/// Positive root (-a + sqrt(a^2 + 8 c zeta1 zeta2 (1 - delta))) / (4 zeta2)
/// with a = zeta1 (1 + delta) - c zeta2 and c = b_coef * eps^2.
double high_delta_root(double zeta1, double zeta2, double delta, double b_coef_eps2);

double high_delta_upper(const BoundInputs& in, const HighDeltaInputs& hd);

/// Simplified large-delta shape -(1 - c) + sqrt((1 - c)^2 + c), c = b_coef eps^2.
double high_delta_shape(double b_coef_eps2);

/// eps (1 + eps) / sqrt(1 - eps). Throws for eps >= 1.
double mse_high_delta_upper(const BoundInputs& in);

/// mse:    4 sqrt(1 + delta) eps / (L - 2(1 + delta)), requires L > 2(1 + delta)
/// kernel: 2 L (1 + delta) exp(-eps^2) / ((1 - delta) h^2)
double lower_bound(LossKind kind, const BoundInputs& in);

/// (1 / sqrt(1 - delta)) sqrt(L* / lambda + eps^2 / n_meas)
double combined_bound(double L_star, double lambda_mix, const BoundInputs& in);

/// 2 zeta1 eps / (1 - 3(delta + zeta2 eps)), requires delta + zeta2 eps < 1/3.
double general_loss_bound(double zeta1, double zeta2, double delta, double eps);
double general_loss_bound(const BoundInputs& in);

/// mse: eps / m;  kernel: eps exp(-eps^2 / h^2) / (m h^2).
double noise_sensitivity_orders(LossKind kind, double eps, double h, int m);

/// Extra inputs for the report rows that need more than BoundInputs.
struct ReportParams {
  std::optional<HighDeltaInputs> high_delta;
  double L_star = 0.0;
  double lambda_mix = 0.5;
  int rank = 1;
  double norm_Mw = 0.0;
};

struct BoundEntry {
  std::string name;
  double value = 0.0;  // NaN when the calculator rejected its inputs
  std::string error;
};

struct BoundReport {
  BoundInputs inputs;
  ReportParams params;
  TurningPoint turning;
  std::vector<BoundEntry> entries;

  const BoundEntry& at(const std::string& name) const;
};

BoundReport make_bound_report(const BoundInputs& in, const ReportParams& params = {});

/// Column names of the CSV row, in order.
std::vector<std::string> bound_report_columns();
std::string bound_report_csv_header();
std::string bound_report_csv_row(const BoundReport& report);

/// Two-column rendering of the six kernel-vs-mse comparison rows.
std::string render_comparison_table(const BoundReport& report);

}  // namespace rsense
