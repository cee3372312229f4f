#pragma once

#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "rsense/core_model.hpp"
#include "rsense/losses.hpp"

namespace rsense {

enum class DeltaRegime { low, high };
std::string to_string(DeltaRegime regime);
DeltaRegime delta_regime_from_string(const std::string& name);

/// Noise sweep over a grid of noise norms.
///
/// For every trial t the truth and sensing operator come from
/// derive_seed(seed, {t}); the noise direction is shared across the grid
/// and rescaled to norm exactly eps. All losses in a trial start from the
/// same perturbed ground truth.
struct SweepConfig {
  int n = 40;
  int r = 5;
  int m = 0;  // 0: 10 n r in the low regime, 2 n r in the high regime
  std::vector<LossKind> losses{LossKind::mse, LossKind::kernel, LossKind::combined};
  double h = 1.0;
  double lambda_mix = 0.5;
  std::vector<double> eps_grid{0.5, 0.6, 0.7, 0.8, 0.9};
  int trials = 3;
  NoiseModel noise{noise::SubGaussianScaled{0.05}, false};
  DeltaRegime regime = DeltaRegime::low;
  Seed seed = 0;
  std::string out;

  int max_iters = 300;
  std::optional<double> eta;  // explicit step; otherwise the automatic rule
  double step_fraction = 3.0;
  double init_scale = 0.1;
  int estimator_samples = 10;
  int rip_trials = 20;
  int threads = 1;

  int measurement_count() const;
  void validate() const;
};

struct SweepRow {
  LossKind loss = LossKind::mse;
  double epsilon = 0.0;
  double real_error = 0.0;   // ||X X^T - M*||_F, mean over trials
  double bound_error = 0.0;  // matching upper bound, mean over trials
  double lipschitz_L = 0.0;
  double hessian_H = 0.0;
  double delta_hat = 0.0;
  double prob_lower_bound = 0.0;  // NaN when the noise model is not sub-Gaussian
  std::string flags;              // '|'-separated, empty when clean
};

/// One row per (loss, eps), losses in config order, eps ascending.
std::vector<SweepRow> run_sweep(const SweepConfig& config);

inline constexpr const char* kSweepCsvHeader = "loss,epsilon,real_error,bound_error,lipschitz_L,hessian_H,flags";

void write_sweep_csv(std::ostream& out, const std::vector<SweepRow>& rows);

struct TrendCheck {
  std::string name;
  bool pass = false;
  std::string detail;
};

/// bound_error strictly increasing in eps for `loss`.
TrendCheck check_bound_increasing(const std::vector<SweepRow>& rows, LossKind loss);
/// max / min of bound_error below `max_ratio` for `loss`.
TrendCheck check_bound_flat(const std::vector<SweepRow>& rows, LossKind loss, double max_ratio);
/// real_error <= bound_error in at least `min_rows` rows of `loss`.
TrendCheck check_real_below_bound(const std::vector<SweepRow>& rows, LossKind loss, int min_rows);
/// Combined real_error at the largest eps <= mse real_error there.
TrendCheck check_combined_not_worse(const std::vector<SweepRow>& rows);

/// The four checks above with thresholds 1.5 and all-but-one rows.
std::vector<TrendCheck> sweep_trend_checks(const std::vector<SweepRow>& rows);

}  // namespace rsense
