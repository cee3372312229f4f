// rsense: instance generation, solving, noise sweeps, bound reports and
// invariant checks for low-rank matrix sensing.

#include <cmath>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "rsense/bounds.hpp"
#include "rsense/io.hpp"
#include "rsense/optimizer.hpp"
#include "rsense/pipeline.hpp"
#include "rsense/sweep.hpp"
#include "rsense/verify.hpp"

using namespace rsense;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitBadArgs = 2;
constexpr int kExitNonFinite = 3;
constexpr int kExitVerifyFailed = 4;

struct CommonArgs {
  std::optional<int> n;
  std::optional<int> rank;
  std::optional<int> m;
  std::optional<std::string> loss;
  std::optional<double> h;
  std::optional<double> lambda_mix;
  std::vector<double> eps;
  std::optional<Seed> seed;
  std::string out;
  std::string config;
  std::optional<int> trials;
  std::optional<int> max_iters;
  std::optional<std::string> eta;
};

void add_common(CLI::App* cmd, CommonArgs& a) {
  cmd->add_option("--n", a.n, "Matrix dimension")->check(CLI::PositiveNumber);
  cmd->add_option("--rank", a.rank, "Rank r")->check(CLI::PositiveNumber);
  cmd->add_option("--m", a.m, "Measurement count")->check(CLI::PositiveNumber);
  cmd->add_option("--loss", a.loss, "mse | kernel | combined")
      ->check(CLI::IsMember({"mse", "kernel", "combined"}));
  cmd->add_option("--h", a.h, "Kernel bandwidth")->check(CLI::PositiveNumber);
  cmd->add_option("--lambda-mix", a.lambda_mix, "Weight of the quadratic part of the combined loss");
  cmd->add_option("--eps", a.eps, "Noise norm (a comma-separated grid for sweep)")->delimiter(',');
  cmd->add_option("--seed", a.seed, "Base seed");
  cmd->add_option("--out", a.out, "Output path");
  cmd->add_option("--config", a.config, "JSON config file; flags override its values")->check(CLI::ExistingFile);
  cmd->add_option("--trials", a.trials, "Trials per grid point")->check(CLI::PositiveNumber);
  cmd->add_option("--max-iters", a.max_iters, "Iteration cap")->check(CLI::PositiveNumber);
  cmd->add_option("--eta", a.eta, "Step size: auto or a positive number");
}

/// nullopt means the automatic rule.
std::optional<double> parse_eta(const std::string& text) {
  if (text == "auto") return std::nullopt;
  double v = 0.0;
  std::istringstream is(text);
  is >> v;
  require(is && is.eof() && v > 0.0 && std::isfinite(v), "--eta must be 'auto' or a positive number");
  return v;
}

LossSpec make_loss(const std::string& kind, double h, double lambda_mix, const std::string& mse_norm) {
  switch (loss_kind_from_string(kind)) {
    case LossKind::mse:
      return LossSpec::mse(mse_norm_from_string(mse_norm));
    case LossKind::kernel:
      return LossSpec::kernel(h);
    case LossKind::combined:
      return LossSpec::combined(lambda_mix, h);
  }
  return {};
}

void emit(const std::string& path, const std::string& text) {
  if (path.empty() || path == "-")
    std::cout << text;
  else
    write_text_file(path, text);
}

// ---- gen -------------------------------------------------------------------

struct GenArgs {
  std::vector<double> spectrum;
  std::string noise_kind = "gaussian";
  std::vector<double> noise_params;
  bool centered = false;
  int rip_trials = 50;
};

InstanceSpec instance_from_args(const CommonArgs& a, const GenArgs& g) {
  InstanceSpec s;
  if (!a.config.empty()) s = instance_from_json(read_json_file(a.config));
  if (a.n) s.n = *a.n;
  if (a.rank) s.r = *a.rank;
  if (a.m) s.m = *a.m;
  if (a.seed) s.seed = *a.seed;
  if (s.n == 0) s.n = 8;
  if (s.r == 0) s.r = std::min(2, s.n);
  if (s.m == 0) s.m = 10 * s.n * s.r;
  if (!g.spectrum.empty())
    s.spectrum = g.spectrum;
  else if (static_cast<int>(s.spectrum.size()) != s.r)
    s.spectrum.assign(s.r, 1.0);
  if (a.config.empty() || !g.noise_params.empty() || g.noise_kind != "gaussian") {
    std::vector<double> params = g.noise_params;
    // Unparameterized gaussian noise: noiseless, or unit scale when --eps rescales it.
    if (params.empty() && g.noise_kind == "gaussian") params = {a.eps.empty() ? 0.0 : 1.0};
    require(!params.empty(), "--noise-params is required for noise kind '" + g.noise_kind + "'");
    s.noise = NoiseModel::from_name(g.noise_kind, params, g.centered);
  }
  if (!a.eps.empty()) {
    require(a.eps.size() == 1, "--eps takes a single value here");
    s.noise_norm = a.eps.front();
  }
  return s;
}

void add_gen_options(CLI::App* cmd, GenArgs& g) {
  cmd->add_option("--spectrum", g.spectrum, "Nonzero eigenvalues of M*")->delimiter(',');
  cmd->add_option("--noise", g.noise_kind, "gaussian | sub_gaussian_scaled | uniform | laplace | student_t");
  cmd->add_option("--noise-params", g.noise_params, "Noise model parameters")->delimiter(',');
  cmd->add_flag("--centered", g.centered, "Subtract the empirical noise mean");
}

int run_gen(const CommonArgs& a, const GenArgs& g) {
  const InstanceSpec spec = instance_from_args(a, g);
  const ProblemInstance inst = make_instance(spec);
  const RipEstimate rip =
      estimate_rip(inst.op, std::min(2 * spec.r, spec.n), g.rip_trials, derive_seed(spec.seed, {99}));
  emit(a.out.empty() ? "instance.json" : a.out, dump(instance_to_json(spec)));
  std::cout << "delta_hat " << rip.delta_hat << " (rank " << rip.rank_tested << ", " << rip.trials << " trials)\n";
  return kExitOk;
}

// ---- solve -----------------------------------------------------------------

struct SolveArgs {
  std::string instance;
  std::string init = "spectral";
  double init_scale = 0.1;
  std::string mse_norm = "half_sum";
  double grad_tol = 1e-10;
  double step_fraction = 1.0;
};

int run_solve(const CommonArgs& a, const GenArgs& g, const SolveArgs& s) {
  InstanceSpec spec;
  if (!s.instance.empty()) {
    spec = instance_from_json(read_json_file(s.instance));
    if (!a.eps.empty()) {
      require(a.eps.size() == 1, "--eps takes a single value here");
      spec.noise_norm = a.eps.front();
    }
  } else {
    spec = instance_from_args(a, g);
  }
  const ProblemInstance inst = make_instance(spec);
  const LossSpec loss = make_loss(a.loss.value_or("mse"), a.h.value_or(1.0), a.lambda_mix.value_or(0.5), s.mse_norm);

  SolverConfig c;
  c.max_iters = a.max_iters.value_or(1000);
  c.grad_tol = s.grad_tol;
  c.seed = a.seed.value_or(spec.seed);
  if (s.init == "spectral")
    c.init = init::Spectral{};
  else if (s.init == "perturbed")
    c.init = init::GroundTruthPerturbed{s.init_scale};
  else
    throw InvalidArgument("--init must be spectral or perturbed");
  const std::optional<double> eta = parse_eta(a.eta.value_or("auto"));
  if (eta) {
    c.step_mode = StepMode::explicit_value;
    c.step_size = *eta;
  } else {
    c.step_mode = loss.kind == LossKind::kernel ? StepMode::auto_kernel : StepMode::auto_mse;
    c.step_fraction = s.step_fraction;
  }

  const SolveResult res = gradient_descent(inst, loss, c);
  const std::string prefix = a.out.empty() ? "solve" : a.out;
  {
    std::ostringstream os;
    write_trace_csv(os, "loss", res.loss_trace);
    write_text_file(prefix + "_loss.csv", os.str());
  }
  {
    std::ostringstream os;
    write_trace_csv(os, "error", res.error_trace);
    write_text_file(prefix + "_error.csv", os.str());
  }
  const std::string summary = dump(solve_summary_to_json(res, inst, loss));
  write_text_file(prefix + "_summary.json", summary);
  std::cout << summary;
  return res.termination == Termination::non_finite ? kExitNonFinite : kExitOk;
}

// ---- sweep -----------------------------------------------------------------

struct SweepArgs {
  std::vector<std::string> losses;
  std::optional<std::string> regime;
  std::optional<int> threads;
  bool check = false;
};

int run_sweep_cmd(const CommonArgs& a, const SweepArgs& s) {
  SweepConfig c;
  if (!a.config.empty()) c = sweep_config_from_json(read_json_file(a.config));
  if (a.n) c.n = *a.n;
  if (a.rank) c.r = *a.rank;
  if (a.m) c.m = *a.m;
  if (a.h) c.h = *a.h;
  if (a.lambda_mix) c.lambda_mix = *a.lambda_mix;
  if (!a.eps.empty()) c.eps_grid = a.eps;
  if (a.seed) c.seed = *a.seed;
  if (!a.out.empty()) c.out = a.out;
  if (a.trials) c.trials = *a.trials;
  if (a.max_iters) c.max_iters = *a.max_iters;
  if (a.eta) c.eta = parse_eta(*a.eta);
  if (a.loss) c.losses = {loss_kind_from_string(*a.loss)};
  if (!s.losses.empty()) {
    c.losses.clear();
    for (const auto& l : s.losses) c.losses.push_back(loss_kind_from_string(l));
  }
  if (s.regime) c.regime = delta_regime_from_string(*s.regime);
  if (s.threads) c.threads = *s.threads;

  const std::vector<SweepRow> rows = run_sweep(c);
  std::ostringstream csv;
  write_sweep_csv(csv, rows);
  emit(c.out, csv.str());

  const std::vector<TrendCheck> checks = sweep_trend_checks(rows);
  bool all_pass = true;
  Json checks_json = Json::array();
  for (const auto& t : checks) {
    all_pass = all_pass && t.pass;
    checks_json.push_back({{"name", t.name}, {"pass", t.pass}, {"detail", t.detail}});
    std::cerr << (t.pass ? "PASS " : "FAIL ") << t.name << "  " << t.detail << '\n';
  }
  if (!c.out.empty() && c.out != "-") {
    Json doc;
    doc["config"] = sweep_config_to_json(c);
    doc["rows"] = sweep_rows_to_json(rows);
    doc["trend_checks"] = checks_json;
    write_text_file(c.out + ".json", dump(doc));
  }
  return s.check && !all_pass ? kExitVerifyFailed : kExitOk;
}

// ---- bounds ----------------------------------------------------------------

struct BoundsArgs {
  std::optional<double> delta;
  std::optional<double> lambda_min;
  std::optional<double> L;
  std::string instance;
  bool dimensional = false;
  int samples = 10;
};

int run_bounds(const CommonArgs& a, const BoundsArgs& b) {
  BoundInputs in;
  ReportParams params;
  if (!b.instance.empty()) {
    InstanceSpec spec = instance_from_json(read_json_file(b.instance));
    if (!a.eps.empty()) spec.noise_norm = a.eps.front();
    const ProblemInstance inst = make_instance(spec);
    SolverConfig c;
    c.init = init::GroundTruthPerturbed{0.1};
    c.max_iters = a.max_iters.value_or(1000);
    c.seed = a.seed.value_or(spec.seed);
    c.step_mode = StepMode::auto_kernel;
    const double h = a.h.value_or(1.0);
    const SolveResult res = gradient_descent(inst, LossSpec::kernel(h), c);
    if (res.termination == Termination::non_finite) {
      std::cerr << "solver produced a non-finite value\n";
      return kExitNonFinite;
    }
    const InstanceBounds ib = bound_inputs_from_instance(inst, res, h, a.lambda_mix.value_or(0.5), b.samples, c.seed);
    in = ib.inputs;
    params = ib.params;
  } else if (!a.config.empty()) {
    const Json doc = read_json_file(a.config);
    in = bound_inputs_from_json(doc);
    if (doc.contains("L_star")) params.L_star = doc.at("L_star").get<double>();
    if (doc.contains("lambda_mix")) params.lambda_mix = doc.at("lambda_mix").get<double>();
    if (doc.contains("rank")) params.rank = doc.at("rank").get<int>();
    if (doc.contains("norm_Mw")) params.norm_Mw = doc.at("norm_Mw").get<double>();
    if (doc.contains("high_delta")) {
      const Json& hd = doc.at("high_delta");
      params.high_delta = HighDeltaInputs{hd.at("lambda_rstar").get<double>(), hd.at("norm_Q").get<double>(),
                                          hd.at("gamma_min").get<double>(), hd.at("u_min_sq").get<double>()};
    }
  }
  if (!a.eps.empty()) in.eps = a.eps.front();
  if (a.h) in.h = *a.h;
  if (a.m) in.n_meas = *a.m;
  if (a.rank) params.rank = *a.rank;
  if (a.lambda_mix) params.lambda_mix = *a.lambda_mix;
  if (b.delta) in.delta = *b.delta;
  if (b.lambda_min) in.lambda_min = *b.lambda_min;
  if (b.L) in.L = *b.L;
  if (b.dimensional) in.dimensional_exponent = true;

  const BoundReport report = make_bound_report(in, params);
  const std::string json = dump(bound_report_to_json(report));
  if (a.out.empty()) {
    std::cout << json;
  } else {
    write_text_file(a.out, json);
    write_text_file(a.out + ".csv", bound_report_csv_header() + "\n" + bound_report_csv_row(report) + "\n");
  }
  std::cout << render_comparison_table(report);
  for (const auto& e : report.entries)
    if (!e.error.empty()) std::cerr << e.name << ": " << e.error << '\n';
  return kExitOk;
}

// ---- verify ----------------------------------------------------------------

int run_verify(const CommonArgs& a, bool inject) {
  VerifyOptions opts;
  opts.seed = a.seed.value_or(1);
  opts.inject_grad_sign_flip = inject;
  const std::vector<InvariantResult> results = run_verification(opts);
  bool all_pass = true;
  Json doc = Json::array();
  for (const auto& r : results) {
    all_pass = all_pass && r.pass;
    std::cout << (r.pass ? "PASS " : "FAIL ") << r.name << "  " << r.detail << '\n';
    doc.push_back({{"name", r.name}, {"pass", r.pass}, {"detail", r.detail}});
  }
  if (!a.out.empty()) write_text_file(a.out, dump(doc));
  std::cout << results.size() << " invariants, " << (all_pass ? "all passed" : "failures present") << '\n';
  return all_pass ? kExitOk : kExitVerifyFailed;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Low-rank matrix sensing with kernel, mse and combined losses"};
  // -h is taken by the bandwidth flag.
  app.set_help_flag("--help", "Print this help message and exit");
  app.require_subcommand(1);

  CommonArgs gen_a, solve_a, sweep_a, bounds_a, verify_a;
  GenArgs gen_g, solve_g;
  SolveArgs solve_s;
  SweepArgs sweep_s;
  BoundsArgs bounds_b;
  bool inject = false;

  CLI::App* gen = app.add_subcommand("gen", "Write an instance document");
  add_common(gen, gen_a);
  add_gen_options(gen, gen_g);
  gen->add_option("--rip-trials", gen_g.rip_trials, "Trials for the reported RIP estimate")
      ->check(CLI::PositiveNumber);

  CLI::App* solve = app.add_subcommand("solve", "Run gradient descent on an instance");
  add_common(solve, solve_a);
  add_gen_options(solve, solve_g);
  solve->add_option("--instance", solve_s.instance, "Instance document from gen")->check(CLI::ExistingFile);
  solve->add_option("--init", solve_s.init, "spectral | perturbed");
  solve->add_option("--init-scale", solve_s.init_scale, "Relative perturbation of the perturbed init");
  solve->add_option("--mse-norm", solve_s.mse_norm, "half_sum | mean | sum");
  solve->add_option("--grad-tol", solve_s.grad_tol, "Stop when ||grad_X||_F falls below this");
  solve->add_option("--step-fraction", solve_s.step_fraction, "Multiplier on the automatic step");

  CLI::App* sweep = app.add_subcommand("sweep", "Noise sweep; writes one CSV row per (loss, eps)");
  add_common(sweep, sweep_a);
  sweep->add_option("--losses", sweep_s.losses, "Subset of mse,kernel,combined")->delimiter(',');
  sweep->add_option("--regime", sweep_s.regime, "low | high")->check(CLI::IsMember({"low", "high"}));
  sweep->add_option("--threads", sweep_s.threads, "Worker threads")->check(CLI::PositiveNumber);
  sweep->add_flag("--check", sweep_s.check, "Exit 4 when a trend check fails");

  CLI::App* bounds = app.add_subcommand("bounds", "Evaluate every bound calculator");
  add_common(bounds, bounds_a);
  bounds->add_option("--delta", bounds_b.delta, "RIP constant");
  bounds->add_option("--lambda-min", bounds_b.lambda_min, "Hessian floor at M*");
  bounds->add_option("--L", bounds_b.L, "Smoothness constant of the lower bounds");
  bounds->add_option("--instance", bounds_b.instance, "Derive inputs by solving this instance")
      ->check(CLI::ExistingFile);
  bounds->add_option("--samples", bounds_b.samples, "Samples per constant estimate")->check(CLI::PositiveNumber);
  bounds->add_flag("--dimensional-exponent", bounds_b.dimensional, "Use exp(-eps^2/h^2) in the kernel formulas");

  CLI::App* verify = app.add_subcommand("verify", "Run the invariant suite");
  add_common(verify, verify_a);
  verify->add_flag("--inject-grad-sign-flip", inject, "Test hook: flip the gradient sign");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kExitOk : kExitBadArgs;
  }

  try {
    if (*gen) return run_gen(gen_a, gen_g);
    if (*solve) return run_solve(solve_a, solve_g, solve_s);
    if (*sweep) return run_sweep_cmd(sweep_a, sweep_s);
    if (*bounds) return run_bounds(bounds_a, bounds_b);
    if (*verify) return run_verify(verify_a, inject);
  } catch (const InvalidArgument& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitBadArgs;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return kExitOk;
}
