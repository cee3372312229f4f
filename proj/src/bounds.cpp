#include "rsense/bounds.hpp"

#include <cmath>
#include <functional>
#include <limits>
#include <sstream>

#include "rsense/format.hpp"
#include "rsense/optimizer.hpp"

namespace rsense {

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

/// exp(-eps^2), or exp(-eps^2 / h^2) under the dimensional flag.
double noise_decay(const BoundInputs& in) {
  const double e2 = in.eps * in.eps;
  return std::exp(in.dimensional_exponent ? -e2 / (in.h * in.h) : -e2);
}

void require_common(const BoundInputs& in) {
  require(in.eps >= 0.0, "bounds: eps must be >= 0");
  require(in.h > 0.0, "bounds: bandwidth h must be > 0");
}

}  // namespace

double mse_error_upper(const BoundInputs& in) {
  require_common(in);
  require(in.delta > 0.0, "mse_error_upper: requires delta > 0 (formula is singular at delta = 0)");
  return std::sqrt(1.0 + in.delta) * in.eps / in.delta;
}

double kernel_lambda_min_floor(const BoundInputs& in) {
  require_common(in);
  const double g = in.consts.g_min;
  const double b = in.consts.b_max;
  const double l1 = in.consts.l1;
  const double l2 = in.consts.l2;
  require(g > 0.0, "kernel_lambda_min_floor: requires G_min > 0");
  const double h2 = in.h * in.h;
  return 2.0 / (g * h2) * (l1 * l1 * (1.0 + 2.0 * b * b / h2) + b * l2) + 4.0 / (g * g * h2 * h2) * b * b * l1 * l1;
}

double kernel_error_upper(const BoundInputs& in) {
  require_common(in);
  require(in.lambda_min > 0.0, "kernel_error_upper: requires lambda_min > 0");
  const double constant_term = std::sqrt(2.0 / in.lambda_min);
  const double r_term = in.eps * noise_decay(in) / (in.h * in.h);
  const double denom = 1.0 - in.delta - in.lambda_min;
  const double noise_term = denom > 0.0 ? 2.0 * (1.0 + in.delta) * r_term / denom : 0.0;
  return std::max(constant_term, noise_term);
}

TurningPoint turning_point(double h) {
  require(h > 0.0, "turning_point: bandwidth must be > 0");
  TurningPoint tp;
  tp.peak_eps = 1.0 / std::sqrt(2.0);
  tp.peak_val = tp.peak_eps * std::exp(-0.5);
  const double target = h * h;
  constexpr double kUlps = 4.0 * std::numeric_limits<double>::epsilon();
  if (target > tp.peak_val * (1.0 + kUlps)) return tp;
  // Within rounding of the maximum the root is the peak itself.
  if (target >= tp.peak_val * (1.0 - kUlps)) {
    tp.eps_star = tp.peak_eps;
    return tp;
  }
  // eps exp(-eps^2) is increasing on [0, 1/sqrt(2)].
  double lo = 0.0;
  double hi = tp.peak_eps;
  while (hi - lo > 1e-13) {
    const double mid = 0.5 * (lo + hi);
    if (mid * std::exp(-mid * mid) < target)
      lo = mid;
    else
      hi = mid;
  }
  tp.eps_star = 0.5 * (lo + hi);
  return tp;
}

double lipschitz_lambda(LossKind kind, const BoundInputs& in) {
  require_common(in);
  require(in.delta >= 0.0, "lipschitz_lambda: delta must be >= 0");
  if (kind == LossKind::mse) return 2.0 * std::sqrt(1.0 + in.delta);
  const double h4 = std::pow(in.h, 4);
  return 8.0 * (1.0 + in.delta) * in.eps * noise_decay(in) / h4 + in.C;
}

DeltaCondition delta_condition(const BoundInputs& in, DeltaMode mode) {
  require_common(in);
  require(in.sigma_r > 0.0, "delta_condition: sigma_r must be > 0");
  const double b = in.consts.b_max;
  const double g = in.consts.g_min;
  const double l2 = in.consts.l2;
  DeltaCondition out;
  switch (mode) {
    case DeltaMode::explicit_bandwidth: {
      require(b > 0.0, "delta_condition: explicit mode requires B > 0");
      const double radicand = b * b / (4.0 * (g + 2.0)) * (2.0 - in.G / in.sigma_r - l2 / b);
      out.value = radicand >= 0.0 ? std::sqrt(radicand) - 1.0 : kNaN;
      break;
    }
    case DeltaMode::conservative:
      require(b > 0.0, "delta_condition: conservative mode requires B > 0");
      out.value = b / std::sqrt(2.0 * (g + 2.0)) - 1.0;
      break;
    case DeltaMode::noise_aware: {
      const double h2 = in.h * in.h;
      const double e2 = in.eps * in.eps;
      const double grow = std::exp(e2 / h2);
      const double num = h2 * h2 * (2.0 - in.G / in.sigma_r - 2.0 * in.eps * l2 * grow / h2);
      const double den = 8.0 * grow * (h2 + 2.0 * e2 + 2.0 * e2 * grow);
      const double radicand = num / den;
      out.value = radicand >= 0.0 ? std::sqrt(radicand) - 1.0 : kNaN;
      break;
    }
  }
  out.feasible = std::isfinite(out.value) && out.value >= 0.0;
  return out;
}

double recommended_bandwidth(double b_max, double g_min) {
  require(b_max > 0.0 && g_min > 0.0, "recommended_bandwidth: requires B > 0 and G_min > 0");
  return std::sqrt(2.0) * b_max / std::sqrt(g_min);
}

double high_delta_coefficient(const BoundInputs& in, const HighDeltaInputs& hd) {
  require_common(in);
  require(hd.lambda_rstar > 0.0 && hd.norm_Q > 0.0 && hd.gamma_min > 0.0 && hd.u_min_sq > 0.0,
          "high_delta_upper: lambda_r*, ||Q||, Gamma_min and u_min^2 must all be > 0");
  const double h2 = in.h * in.h;
  const double l1 = in.consts.l1;
  const double l2 = in.consts.l2;
  const double gm = hd.gamma_min;
  const double bracket = l1 * l1 * in.delta * in.delta / (h2 * h2 * gm * gm) * std::exp(-2.0 * hd.u_min_sq / h2) +
                         l2 * in.delta / (h2 * gm) * std::exp(-hd.u_min_sq / h2);
  return std::sqrt(2.0 * hd.lambda_rstar) / hd.norm_Q * bracket;
}

double high_delta_root(double zeta1, double zeta2, double delta, double b_coef_eps2) {
  require(zeta2 > 0.0, "high_delta_upper: requires zeta2 > 0 (use mse_error_upper when zeta2 = 0)");
  const double a = zeta1 * (1.0 + delta) - b_coef_eps2 * zeta2;
  const double disc = a * a + 8.0 * b_coef_eps2 * zeta1 * zeta2 * (1.0 - delta);
  require(disc >= 0.0, "high_delta_upper: negative discriminant");
  return (-a + std::sqrt(disc)) / (4.0 * zeta2);
}

double high_delta_upper(const BoundInputs& in, const HighDeltaInputs& hd) {
  const double coef = high_delta_coefficient(in, hd);
  return high_delta_root(in.consts.zeta1, in.consts.zeta2, in.delta, coef * in.eps * in.eps);
}

double high_delta_shape(double b_coef_eps2) {
  const double a = 1.0 - b_coef_eps2;
  return -a + std::sqrt(a * a + b_coef_eps2);
}

double mse_high_delta_upper(const BoundInputs& in) {
  require(in.eps >= 0.0, "mse_high_delta_upper: eps must be >= 0");
  require(in.eps < 1.0, "mse_high_delta_upper: requires eps < 1");
  return in.eps * (1.0 + in.eps) / std::sqrt(1.0 - in.eps);
}

double lower_bound(LossKind kind, const BoundInputs& in) {
  require_common(in);
  if (kind == LossKind::mse) {
    require(in.L > 2.0 * (1.0 + in.delta), "lower_bound(mse): requires L > 2(1 + delta)");
    return 4.0 * std::sqrt(1.0 + in.delta) * in.eps / (in.L - 2.0 * (1.0 + in.delta));
  }
  require(in.delta < 1.0, "lower_bound(kernel): requires delta < 1");
  return 2.0 * in.L * (1.0 + in.delta) * noise_decay(in) / ((1.0 - in.delta) * in.h * in.h);
}

double combined_bound(double L_star, double lambda_mix, const BoundInputs& in) {
  require(in.delta < 1.0, "combined_bound: requires delta < 1");
  require(lambda_mix > 0.0 && lambda_mix <= 1.0, "combined_bound: requires lambda_mix in (0, 1]");
  require(L_star >= 0.0, "combined_bound: L* must be >= 0");
  require(in.n_meas >= 1, "combined_bound: n_meas must be >= 1");
  require(in.eps >= 0.0, "combined_bound: eps must be >= 0");
  return std::sqrt(L_star / lambda_mix + in.eps * in.eps / in.n_meas) / std::sqrt(1.0 - in.delta);
}

double general_loss_bound(double zeta1, double zeta2, double delta, double eps) {
  require(eps >= 0.0, "general_loss_bound: eps must be >= 0");
  const double q = delta + zeta2 * eps;
  require(q < 1.0 / 3.0, "general_loss_bound: requires delta + zeta2 * eps < 1/3");
  return 2.0 * zeta1 * eps / (1.0 - 3.0 * q);
}

double general_loss_bound(const BoundInputs& in) {
  return general_loss_bound(in.consts.zeta1, in.consts.zeta2, in.delta, in.eps);
}

double noise_sensitivity_orders(LossKind kind, double eps, double h, int m) {
  require(m >= 1, "noise_sensitivity_orders: m must be >= 1");
  require(eps >= 0.0, "noise_sensitivity_orders: eps must be >= 0");
  if (kind == LossKind::mse) return eps / m;
  require(h > 0.0, "noise_sensitivity_orders: bandwidth must be > 0");
  return eps * std::exp(-eps * eps / (h * h)) / (m * h * h);
}

const BoundEntry& BoundReport::at(const std::string& name) const {
  for (const auto& e : entries)
    if (e.name == name) return e;
  throw InvalidArgument("bound report has no entry '" + name + "'");
}

namespace {

BoundEntry evaluate(const std::string& name, const std::function<double()>& fn) {
  BoundEntry e;
  e.name = name;
  try {
    e.value = fn();
  } catch (const InvalidArgument& ex) {
    e.value = kNaN;
    e.error = ex.what();
  }
  return e;
}

ConvergenceBoundInputs convergence_inputs(const BoundInputs& in, const ReportParams& p) {
  ConvergenceBoundInputs c;
  c.rho = in.consts.rho;
  c.r = p.rank;
  c.delta = in.delta;
  c.zeta2 = in.consts.zeta2;
  c.eps = in.eps;
  c.h = in.h;
  c.norm_Mw = p.norm_Mw;
  return c;
}

}  // namespace

BoundReport make_bound_report(const BoundInputs& in, const ReportParams& params) {
  BoundReport rep;
  rep.inputs = in;
  rep.params = params;
  rep.turning = turning_point(in.h);
  auto& e = rep.entries;

  // The kernel error bound uses the supplied Hessian floor, or the
  // closed-form floor when none is given.
  BoundInputs kin = in;
  if (!(kin.lambda_min > 0.0)) {
    try {
      kin.lambda_min = kernel_lambda_min_floor(in);
    } catch (const InvalidArgument&) {
    }
  }

  e.push_back(evaluate("noise_sensitivity_kernel", [&] { return noise_sensitivity_orders(LossKind::kernel, in.eps, in.h, in.n_meas); }));
  e.push_back(evaluate("noise_sensitivity_mse", [&] { return noise_sensitivity_orders(LossKind::mse, in.eps, in.h, in.n_meas); }));
  e.push_back(evaluate("kernel_lambda_min_floor", [&] { return kernel_lambda_min_floor(in); }));
  e.push_back(evaluate("kernel_error_upper", [&] { return kernel_error_upper(kin); }));
  e.push_back(evaluate("mse_error_upper", [&] { return mse_error_upper(in); }));
  e.push_back(evaluate("turning_point_eps_star", [&] { return rep.turning.eps_star.value_or(kNaN); }));
  e.push_back(evaluate("turning_point_peak_eps", [&] { return rep.turning.peak_eps; }));
  e.push_back(evaluate("turning_point_peak_val", [&] { return rep.turning.peak_val; }));
  e.push_back(evaluate("lipschitz_lambda_kernel", [&] { return lipschitz_lambda(LossKind::kernel, in); }));
  e.push_back(evaluate("lipschitz_lambda_mse", [&] { return lipschitz_lambda(LossKind::mse, in); }));
  e.push_back(evaluate("delta_explicit", [&] { return delta_condition(in, DeltaMode::explicit_bandwidth).value; }));
  e.push_back(evaluate("delta_conservative", [&] { return delta_condition(in, DeltaMode::conservative).value; }));
  e.push_back(evaluate("delta_noise_aware", [&] { return delta_condition(in, DeltaMode::noise_aware).value; }));
  e.push_back(evaluate("high_delta_upper", [&] {
    require(params.high_delta.has_value(), "high_delta_upper: no large-delta inputs supplied");
    return high_delta_upper(in, *params.high_delta);
  }));
  e.push_back(evaluate("high_delta_shape", [&] {
    require(params.high_delta.has_value(), "high_delta_shape: no large-delta inputs supplied");
    return high_delta_shape(high_delta_coefficient(in, *params.high_delta) * in.eps * in.eps);
  }));
  e.push_back(evaluate("mse_high_delta_upper", [&] { return mse_high_delta_upper(in); }));
  e.push_back(evaluate("lower_bound_kernel", [&] { return lower_bound(LossKind::kernel, in); }));
  e.push_back(evaluate("lower_bound_mse", [&] { return lower_bound(LossKind::mse, in); }));
  e.push_back(evaluate("combined_bound", [&] { return combined_bound(params.L_star, params.lambda_mix, in); }));
  e.push_back(evaluate("general_loss_bound", [&] { return general_loss_bound(in); }));
  e.push_back(evaluate("step_size_kernel", [&] { return step_size_bound(LossKind::kernel, convergence_inputs(in, params)); }));
  e.push_back(evaluate("step_size_mse", [&] { return step_size_bound(LossKind::mse, convergence_inputs(in, params)); }));
  return rep;
}

std::vector<std::string> bound_report_columns() {
  std::vector<std::string> cols;
  for (const auto& e : make_bound_report(BoundInputs{}).entries) cols.push_back(e.name);
  return cols;
}

std::string bound_report_csv_header() {
  std::string out = "delta,eps,h";
  for (const auto& c : bound_report_columns()) out += "," + c;
  return out;
}

std::string bound_report_csv_row(const BoundReport& report) {
  std::string out =
      format_double(report.inputs.delta) + "," + format_double(report.inputs.eps) + "," + format_double(report.inputs.h);
  for (const auto& e : report.entries) out += "," + format_double(e.value);
  return out;
}

std::string render_comparison_table(const BoundReport& report) {
  struct Row {
    const char* property;
    const char* kernel;
    const char* mse;
  };
  const Row rows[] = {
      {"Loss behavior (noise sensitivity)", "noise_sensitivity_kernel", "noise_sensitivity_mse"},
      {"Optimization landscape", "kernel_error_upper", "mse_error_upper"},
      {"Continuity (Lipschitz lambda)", "lipschitz_lambda_kernel", "lipschitz_lambda_mse"},
      {"Large delta", "high_delta_shape", "mse_high_delta_upper"},
      {"Lower bound", "lower_bound_kernel", "lower_bound_mse"},
      {"Convergence (max step size)", "step_size_kernel", "step_size_mse"},
  };
  auto cell = [&](const char* name) {
    const BoundEntry& e = report.at(name);
    return e.error.empty() ? format_double(e.value) : std::string("n/a");
  };
  std::ostringstream os;
  char line[256];
  std::snprintf(line, sizeof line, "%-36s %-26s %-26s\n", "Property", "Kernel loss", "MSE loss");
  os << line;
  for (const auto& row : rows) {
    std::snprintf(line, sizeof line, "%-36s %-26s %-26s\n", row.property, cell(row.kernel).c_str(),
                  cell(row.mse).c_str());
    os << line;
  }
  return os.str();
}

}  // namespace rsense
