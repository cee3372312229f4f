#include "rsense/sweep.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <limits>
#include <ostream>
#include <thread>

#include "rsense/bounds.hpp"
#include "rsense/empirics.hpp"
#include "rsense/format.hpp"
#include "rsense/optimizer.hpp"

namespace rsense {

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

struct Cell {
  double real_error = 0.0;
  double bound_error = 0.0;
  double lipschitz_L = 0.0;
  double hessian_H = 0.0;
  double delta_hat = 0.0;
  std::vector<std::string> flags;
};

/// Per-entry sub-Gaussian scale of the noise model, when it has one.
std::optional<double> sub_gaussian_scale(const NoiseModel& model, int m) {
  if (const auto* g = std::get_if<noise::Gaussian>(&model.kind)) return g->sigma;
  if (const auto* g = std::get_if<noise::SubGaussianScaled>(&model.kind)) return g->sigma0 / std::sqrt(m);
  if (const auto* u = std::get_if<noise::Uniform>(&model.kind)) return 0.5 * (u->b - u->a);
  return std::nullopt;
}

LossSpec loss_spec(LossKind kind, const SweepConfig& c) {
  switch (kind) {
    case LossKind::mse:
      return LossSpec::mse();
    case LossKind::kernel:
      return LossSpec::kernel(c.h);
    case LossKind::combined:
      return LossSpec::combined(c.lambda_mix, c.h);
  }
  return LossSpec::mse();
}

void add_flag(std::vector<std::string>& flags, const std::string& f) {
  if (std::find(flags.begin(), flags.end(), f) == flags.end()) flags.push_back(f);
}

double bound_for(LossKind kind, const ProblemInstance& inst, const LossSpec& spec, double delta, double eps,
                 double final_loss) {
  BoundInputs in;
  in.delta = delta;
  in.eps = eps;
  in.h = spec.h;
  in.n_meas = inst.op.m();
  switch (kind) {
    case LossKind::mse:
      return mse_error_upper(in);
    case LossKind::kernel: {
      // At M* the residuals are the noise itself.
      const ResidualConstants rc = residual_constants(inst.noise, spec.h);
      in.consts.g_min = rc.g_min;
      in.consts.b_max = rc.b_max;
      in.consts.l1 = 2.0 * (1.0 + delta);
      in.consts.l2 = 0.0;
      in.lambda_min = kernel_lambda_min_floor(in);
      return kernel_error_upper(in);
    }
    case LossKind::combined:
      return combined_bound(final_loss, spec.lambda_mix, in);
  }
  return kNaN;
}

/// All losses for one (trial, eps) pair.
std::vector<Cell> run_cell(const SweepConfig& c, int trial, int eps_index) {
  const double eps = c.eps_grid[eps_index];
  const Seed trial_seed = derive_seed(c.seed, {static_cast<std::uint64_t>(trial)});
  InstanceSpec is;
  is.n = c.n;
  is.r = c.r;
  is.m = c.measurement_count();
  is.seed = trial_seed;
  is.spectrum.assign(c.r, 1.0);
  is.noise = c.noise;
  is.noise_norm = eps;
  const ProblemInstance inst = make_instance(is);
  const double delta =
      estimate_rip(inst.op, std::min(2 * c.r, c.n), c.rip_trials, derive_seed(trial_seed, {3})).delta_hat;
  const Seed cell_seed = derive_seed(trial_seed, {4, static_cast<std::uint64_t>(eps_index)});

  std::vector<Cell> cells;
  for (LossKind kind : c.losses) {
    const LossSpec spec = loss_spec(kind, c);
    Cell cell;
    cell.delta_hat = delta;
    if (c.regime == DeltaRegime::low && delta >= 1.0 / 3.0) add_flag(cell.flags, "delta_above_regime");
    if (c.regime == DeltaRegime::high && delta <= 1.0 / 3.0) add_flag(cell.flags, "delta_below_regime");

    SolverConfig sc;
    sc.init = init::GroundTruthPerturbed{c.init_scale};
    sc.max_iters = c.max_iters;
    sc.seed = cell_seed;
    if (c.eta) {
      sc.step_mode = StepMode::explicit_value;
      sc.step_size = *c.eta;
    } else {
      sc.step_mode = kind == LossKind::kernel ? StepMode::auto_kernel : StepMode::auto_mse;
      sc.step_fraction = c.step_fraction;
    }
    const SolveResult res = gradient_descent(inst, spec, sc);
    if (res.termination == Termination::non_finite) {
      add_flag(cell.flags, "non_finite");
      cell.real_error = cell.bound_error = cell.lipschitz_L = cell.hessian_H = kNaN;
      cells.push_back(std::move(cell));
      continue;
    }
    cell.real_error = res.error_trace.back();
    try {
      cell.bound_error = bound_for(kind, inst, spec, delta, eps, res.loss_trace.back());
    } catch (const InvalidArgument&) {
      cell.bound_error = kNaN;
      add_flag(cell.flags, "bound_rejected");
    }
    const Matrix M_hat = res.X * res.X.transpose();
    EstimatorOptions opts;
    opts.rank = c.r;
    opts.center = M_hat;
    const Seed est_seed = derive_seed(cell_seed, {static_cast<std::uint64_t>(kind)});
    cell.lipschitz_L =
        estimate_rho(spec, inst.op, inst.measurements, c.estimator_samples, derive_seed(est_seed, {1}), opts).value;
    cell.hessian_H = estimate_hessian_scale(spec, inst.op, inst.measurements, M_hat, c.estimator_samples,
                                            derive_seed(est_seed, {2}), opts)
                         .value;
    cells.push_back(std::move(cell));
  }
  return cells;
}

std::string join_flags(const std::vector<std::string>& flags) {
  std::string out;
  for (const auto& f : flags) out += (out.empty() ? "" : "|") + f;
  return out;
}

std::vector<const SweepRow*> rows_of(const std::vector<SweepRow>& rows, LossKind loss) {
  std::vector<const SweepRow*> out;
  for (const auto& r : rows)
    if (r.loss == loss) out.push_back(&r);
  return out;
}

}  // namespace

std::string to_string(DeltaRegime regime) { return regime == DeltaRegime::low ? "low" : "high"; }

DeltaRegime delta_regime_from_string(const std::string& name) {
  if (name == "low") return DeltaRegime::low;
  if (name == "high") return DeltaRegime::high;
  throw InvalidArgument("unknown delta regime '" + name + "' (expected low or high)");
}

int SweepConfig::measurement_count() const {
  if (m > 0) return m;
  return (regime == DeltaRegime::low ? 10 : 2) * n * r;
}

void SweepConfig::validate() const {
  require(n >= 1 && r >= 1 && r <= n, "sweep: need 1 <= r <= n");
  require(m >= 0, "sweep: m must be >= 0");
  require(!losses.empty(), "sweep: loss list is empty");
  require(h > 0.0, "sweep: bandwidth must be > 0");
  require(lambda_mix > 0.0 && lambda_mix <= 1.0, "sweep: lambda_mix must be in (0, 1]");
  require(!eps_grid.empty(), "sweep: eps grid is empty");
  require(eps_grid.front() >= 0.0, "sweep: eps values must be >= 0");
  for (std::size_t i = 1; i < eps_grid.size(); ++i)
    require(eps_grid[i] > eps_grid[i - 1], "sweep: eps grid must be strictly increasing");
  require(trials >= 1, "sweep: trials must be >= 1");
  require(max_iters >= 1, "sweep: max_iters must be >= 1");
  require(!eta || *eta > 0.0, "sweep: eta must be > 0");
  require(step_fraction > 0.0, "sweep: step_fraction must be > 0");
  require(init_scale >= 0.0, "sweep: init_scale must be >= 0");
  require(estimator_samples >= 1 && rip_trials >= 1, "sweep: sample counts must be >= 1");
  require(threads >= 1, "sweep: threads must be >= 1");
  noise.validate();
}

std::vector<SweepRow> run_sweep(const SweepConfig& config) {
  config.validate();
  const int n_eps = static_cast<int>(config.eps_grid.size());
  const int n_tasks = config.trials * n_eps;
  std::vector<std::vector<Cell>> results(n_tasks);
  std::vector<std::exception_ptr> errors(n_tasks);

  std::atomic<int> next{0};
  auto worker = [&] {
    for (int task = next++; task < n_tasks; task = next++) {
      try {
        results[task] = run_cell(config, task / n_eps, task % n_eps);
      } catch (...) {
        errors[task] = std::current_exception();
      }
    }
  };
  const int n_threads = std::min(config.threads, n_tasks);
  if (n_threads <= 1) {
    worker();
  } else {
    std::vector<std::jthread> pool;
    for (int i = 0; i < n_threads; ++i) pool.emplace_back(worker);
  }
  for (const auto& e : errors)
    if (e) std::rethrow_exception(e);

  const int m = config.measurement_count();
  const std::optional<double> sigma = sub_gaussian_scale(config.noise, m);
  std::vector<SweepRow> rows;
  for (std::size_t li = 0; li < config.losses.size(); ++li) {
    for (int k = 0; k < n_eps; ++k) {
      SweepRow row;
      row.loss = config.losses[li];
      row.epsilon = config.eps_grid[k];
      row.prob_lower_bound = sigma && *sigma > 0.0 ? prob_norm_bound(row.epsilon, m, *sigma) : kNaN;
      std::vector<std::string> flags;
      for (int t = 0; t < config.trials; ++t) {
        const Cell& cell = results[t * n_eps + k][li];
        row.real_error += cell.real_error;
        row.bound_error += cell.bound_error;
        row.lipschitz_L += cell.lipschitz_L;
        row.hessian_H += cell.hessian_H;
        row.delta_hat += cell.delta_hat;
        for (const auto& f : cell.flags) add_flag(flags, f);
      }
      const double inv = 1.0 / config.trials;
      row.real_error *= inv;
      row.bound_error *= inv;
      row.lipschitz_L *= inv;
      row.hessian_H *= inv;
      row.delta_hat *= inv;
      row.flags = join_flags(flags);
      rows.push_back(std::move(row));
    }
  }
  return rows;
}

void write_sweep_csv(std::ostream& out, const std::vector<SweepRow>& rows) {
  out << kSweepCsvHeader << '\n';
  for (const auto& r : rows) {
    out << to_string(r.loss) << ',' << format_double(r.epsilon) << ',' << format_double(r.real_error) << ','
        << format_double(r.bound_error) << ',' << format_double(r.lipschitz_L) << ',' << format_double(r.hessian_H)
        << ',' << r.flags << '\n';
  }
}

TrendCheck check_bound_increasing(const std::vector<SweepRow>& rows, LossKind loss) {
  TrendCheck c{to_string(loss) + "_bound_strictly_increasing", false, ""};
  const auto sel = rows_of(rows, loss);
  if (sel.size() < 2) {
    c.detail = "fewer than two rows";
    return c;
  }
  c.pass = true;
  for (std::size_t i = 1; i < sel.size(); ++i) {
    if (!(sel[i]->bound_error > sel[i - 1]->bound_error)) {
      c.pass = false;
      c.detail = "not increasing at eps=" + format_double(sel[i]->epsilon);
      return c;
    }
  }
  c.detail = format_double(sel.front()->bound_error) + " -> " + format_double(sel.back()->bound_error);
  return c;
}

TrendCheck check_bound_flat(const std::vector<SweepRow>& rows, LossKind loss, double max_ratio) {
  TrendCheck c{to_string(loss) + "_bound_flat", false, ""};
  const auto sel = rows_of(rows, loss);
  if (sel.empty()) {
    c.detail = "no rows";
    return c;
  }
  double lo = std::numeric_limits<double>::infinity();
  double hi = -lo;
  for (const auto* r : sel) {
    lo = std::min(lo, r->bound_error);
    hi = std::max(hi, r->bound_error);
  }
  const double ratio = hi / lo;
  c.pass = lo > 0.0 && std::isfinite(ratio) && ratio < max_ratio;
  c.detail = "max/min=" + format_double(ratio) + " limit=" + format_double(max_ratio);
  return c;
}

TrendCheck check_real_below_bound(const std::vector<SweepRow>& rows, LossKind loss, int min_rows) {
  TrendCheck c{to_string(loss) + "_real_below_bound", false, ""};
  int count = 0;
  const auto sel = rows_of(rows, loss);
  for (const auto* r : sel)
    if (r->real_error <= r->bound_error) ++count;
  c.pass = !sel.empty() && count >= min_rows;
  c.detail = std::to_string(count) + "/" + std::to_string(sel.size()) + " rows, need " + std::to_string(min_rows);
  return c;
}

TrendCheck check_combined_not_worse(const std::vector<SweepRow>& rows) {
  TrendCheck c{"combined_not_worse_than_mse_at_max_eps", false, ""};
  const auto comb = rows_of(rows, LossKind::combined);
  const auto mse = rows_of(rows, LossKind::mse);
  if (comb.empty() || mse.empty()) {
    c.detail = "needs both combined and mse rows";
    return c;
  }
  const double a = comb.back()->real_error;
  const double b = mse.back()->real_error;
  c.pass = a <= b;
  c.detail = "combined=" + format_double(a) + " mse=" + format_double(b);
  return c;
}

std::vector<TrendCheck> sweep_trend_checks(const std::vector<SweepRow>& rows) {
  const int kernel_rows = static_cast<int>(rows_of(rows, LossKind::kernel).size());
  return {check_bound_increasing(rows, LossKind::mse), check_bound_flat(rows, LossKind::kernel, 1.5),
          check_real_below_bound(rows, LossKind::kernel, std::max(kernel_rows - 1, 1)),
          check_combined_not_worse(rows)};
}

}  // namespace rsense
