#include "rsense/io.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>

namespace rsense {

namespace {

Json number_or_null(double v) { return std::isfinite(v) ? Json(v) : Json(nullptr); }

template <typename T>
void read_if(const Json& doc, const char* key, T& out) {
  if (doc.contains(key) && !doc.at(key).is_null()) out = doc.at(key).get<T>();
}

}  // namespace

Json instance_to_json(const InstanceSpec& spec) {
  Json doc;
  doc["n"] = spec.n;
  doc["r"] = spec.r;
  doc["m"] = spec.m;
  doc["seed"] = spec.seed;
  doc["spectrum"] = spec.spectrum;
  doc["noise"] = {{"kind", spec.noise.kind_name()}, {"params", spec.noise.params()}, {"centered", spec.noise.centered}};
  if (spec.noise_norm) doc["noise_norm"] = *spec.noise_norm;
  return doc;
}

InstanceSpec instance_from_json(const Json& doc) {
  try {
    InstanceSpec spec;
    spec.n = doc.at("n").get<int>();
    spec.r = doc.at("r").get<int>();
    spec.m = doc.at("m").get<int>();
    spec.seed = doc.at("seed").get<Seed>();
    spec.spectrum = doc.at("spectrum").get<std::vector<double>>();
    const Json& nz = doc.at("noise");
    const auto params = nz.at("params").get<std::vector<double>>();
    spec.noise = NoiseModel::from_name(nz.at("kind").get<std::string>(), params, nz.at("centered").get<bool>());
    if (doc.contains("noise_norm")) spec.noise_norm = doc.at("noise_norm").get<double>();
    return spec;
  } catch (const nlohmann::json::exception& e) {
    throw InvalidArgument(std::string("instance document: ") + e.what());
  }
}

Json constants_to_json(const ConstantEstimates& c) {
  Json doc;
  doc["zeta1"] = c.zeta1;
  doc["zeta2"] = c.zeta2;
  doc["rho"] = c.rho;
  doc["lambda1"] = c.lambda1;
  doc["lambda2"] = c.lambda2;
  doc["g_min"] = c.g_min;
  doc["b_max"] = c.b_max;
  doc["l1"] = c.l1;
  doc["l2"] = c.l2;
  doc["samples"] = c.samples;
  doc["seed"] = c.seed;
  return doc;
}

ConstantEstimates constants_from_json(const Json& doc) {
  try {
    ConstantEstimates c;
    c.zeta1 = doc.at("zeta1").get<double>();
    c.zeta2 = doc.at("zeta2").get<double>();
    c.rho = doc.at("rho").get<double>();
    c.lambda1 = doc.at("lambda1").get<double>();
    c.lambda2 = doc.at("lambda2").get<double>();
    c.g_min = doc.at("g_min").get<double>();
    c.b_max = doc.at("b_max").get<double>();
    c.l1 = doc.at("l1").get<double>();
    c.l2 = doc.at("l2").get<double>();
    c.samples = doc.at("samples").get<int>();
    c.seed = doc.at("seed").get<Seed>();
    return c;
  } catch (const nlohmann::json::exception& e) {
    throw InvalidArgument(std::string("constants document: ") + e.what());
  }
}

Json bound_report_to_json(const BoundReport& report) {
  const BoundInputs& in = report.inputs;
  Json doc;
  doc["inputs"] = {{"delta", in.delta},
                   {"eps", in.eps},
                   {"h", in.h},
                   {"constants", constants_to_json(in.consts)},
                   {"sigma_r", in.sigma_r},
                   {"G", in.G},
                   {"L", in.L},
                   {"lambda_min", in.lambda_min},
                   {"C", in.C},
                   {"tau", in.tau},
                   {"n_meas", in.n_meas},
                   {"dimensional_exponent", in.dimensional_exponent},
                   {"L_star", report.params.L_star},
                   {"lambda_mix", report.params.lambda_mix},
                   {"rank", report.params.rank},
                   {"norm_Mw", report.params.norm_Mw}};
  if (const auto& hd = report.params.high_delta) {
    doc["inputs"]["high_delta"] = {{"lambda_rstar", hd->lambda_rstar},
                                   {"norm_Q", hd->norm_Q},
                                   {"gamma_min", hd->gamma_min},
                                   {"u_min_sq", hd->u_min_sq}};
  }
  Json bounds = Json::object();
  Json errors = Json::object();
  for (const auto& e : report.entries) {
    bounds[e.name] = number_or_null(e.value);
    if (!e.error.empty()) errors[e.name] = e.error;
  }
  doc["bounds"] = std::move(bounds);
  doc["errors"] = std::move(errors);
  doc["turning_point"] = {{"eps_star", report.turning.eps_star ? Json(*report.turning.eps_star) : Json(nullptr)},
                          {"peak_eps", report.turning.peak_eps},
                          {"peak_val", report.turning.peak_val}};
  doc["order_bounds"] = true;
  return doc;
}

BoundInputs bound_inputs_from_json(const Json& doc) {
  try {
    BoundInputs in;
    read_if(doc, "delta", in.delta);
    read_if(doc, "eps", in.eps);
    read_if(doc, "h", in.h);
    read_if(doc, "sigma_r", in.sigma_r);
    read_if(doc, "G", in.G);
    read_if(doc, "L", in.L);
    read_if(doc, "lambda_min", in.lambda_min);
    read_if(doc, "C", in.C);
    read_if(doc, "tau", in.tau);
    read_if(doc, "n_meas", in.n_meas);
    read_if(doc, "dimensional_exponent", in.dimensional_exponent);
    if (doc.contains("constants")) {
      const Json& c = doc.at("constants");
      read_if(c, "zeta1", in.consts.zeta1);
      read_if(c, "zeta2", in.consts.zeta2);
      read_if(c, "rho", in.consts.rho);
      read_if(c, "lambda1", in.consts.lambda1);
      read_if(c, "lambda2", in.consts.lambda2);
      read_if(c, "g_min", in.consts.g_min);
      read_if(c, "b_max", in.consts.b_max);
      read_if(c, "l1", in.consts.l1);
      read_if(c, "l2", in.consts.l2);
      read_if(c, "samples", in.consts.samples);
      read_if(c, "seed", in.consts.seed);
    }
    return in;
  } catch (const nlohmann::json::exception& e) {
    throw InvalidArgument(std::string("bound inputs: ") + e.what());
  }
}

SweepConfig sweep_config_from_json(const Json& doc, SweepConfig base) {
  static const std::vector<std::string> known = {
      "n",      "r",         "m",         "losses",        "h",          "lambda_mix",        "eps_grid",
      "trials", "noise",     "regime",    "seed",          "out",        "max_iters",         "eta",
      "step_fraction", "init_scale", "estimator_samples", "rip_trials", "threads"};
  require(doc.is_object(), "sweep config: expected a JSON object");
  for (const auto& item : doc.items())
    require(std::find(known.begin(), known.end(), item.key()) != known.end(),
            "sweep config: unknown key '" + item.key() + "'");
  try {
    SweepConfig c = std::move(base);
    read_if(doc, "n", c.n);
    read_if(doc, "r", c.r);
    read_if(doc, "m", c.m);
    if (doc.contains("losses")) {
      c.losses.clear();
      for (const auto& name : doc.at("losses")) c.losses.push_back(loss_kind_from_string(name.get<std::string>()));
    }
    read_if(doc, "h", c.h);
    read_if(doc, "lambda_mix", c.lambda_mix);
    read_if(doc, "eps_grid", c.eps_grid);
    read_if(doc, "trials", c.trials);
    if (doc.contains("noise")) {
      const Json& nz = doc.at("noise");
      const auto params = nz.at("params").get<std::vector<double>>();
      c.noise = NoiseModel::from_name(nz.at("kind").get<std::string>(), params, nz.value("centered", false));
    }
    if (doc.contains("regime")) c.regime = delta_regime_from_string(doc.at("regime").get<std::string>());
    read_if(doc, "seed", c.seed);
    read_if(doc, "out", c.out);
    read_if(doc, "max_iters", c.max_iters);
    if (doc.contains("eta")) {
      const Json& e = doc.at("eta");
      if (e.is_string()) {
        require(e.get<std::string>() == "auto", "sweep config: eta must be a number or \"auto\"");
        c.eta.reset();
      } else {
        c.eta = e.get<double>();
      }
    }
    read_if(doc, "step_fraction", c.step_fraction);
    read_if(doc, "init_scale", c.init_scale);
    read_if(doc, "estimator_samples", c.estimator_samples);
    read_if(doc, "rip_trials", c.rip_trials);
    read_if(doc, "threads", c.threads);
    return c;
  } catch (const nlohmann::json::exception& e) {
    throw InvalidArgument(std::string("sweep config: ") + e.what());
  }
}

Json sweep_config_to_json(const SweepConfig& c) {
  Json doc;
  doc["n"] = c.n;
  doc["r"] = c.r;
  doc["m"] = c.measurement_count();
  Json losses = Json::array();
  for (LossKind k : c.losses) losses.push_back(to_string(k));
  doc["losses"] = losses;
  doc["h"] = c.h;
  doc["lambda_mix"] = c.lambda_mix;
  doc["eps_grid"] = c.eps_grid;
  doc["trials"] = c.trials;
  doc["noise"] = {{"kind", c.noise.kind_name()}, {"params", c.noise.params()}, {"centered", c.noise.centered}};
  doc["regime"] = to_string(c.regime);
  doc["seed"] = c.seed;
  doc["out"] = c.out;
  doc["max_iters"] = c.max_iters;
  doc["eta"] = c.eta ? Json(*c.eta) : Json("auto");
  doc["step_fraction"] = c.step_fraction;
  doc["init_scale"] = c.init_scale;
  doc["estimator_samples"] = c.estimator_samples;
  doc["rip_trials"] = c.rip_trials;
  doc["threads"] = c.threads;
  return doc;
}

Json sweep_rows_to_json(const std::vector<SweepRow>& rows) {
  Json arr = Json::array();
  for (const auto& r : rows) {
    arr.push_back({{"loss", to_string(r.loss)},
                   {"epsilon", r.epsilon},
                   {"prob_lower_bound", number_or_null(r.prob_lower_bound)},
                   {"real_error", number_or_null(r.real_error)},
                   {"bound_error", number_or_null(r.bound_error)},
                   {"lipschitz_L", number_or_null(r.lipschitz_L)},
                   {"hessian_H", number_or_null(r.hessian_H)},
                   {"delta_hat", number_or_null(r.delta_hat)},
                   {"flags", r.flags}});
  }
  return arr;
}

Json solve_summary_to_json(const SolveResult& result, const ProblemInstance& instance, const LossSpec& spec) {
  const double final_error = result.error_trace.empty() ? 0.0 : result.error_trace.back();
  const double truth_norm = instance.truth.matrix.norm();
  Json doc;
  doc["loss"] = to_string(spec.kind);
  doc["h"] = spec.h;
  doc["lambda_mix"] = spec.lambda_mix;
  doc["mse_norm"] = to_string(spec.mse_norm);
  doc["iterations"] = result.iterations_run;
  doc["termination"] = to_string(result.termination);
  doc["step_size"] = result.step_size;
  doc["final_loss"] = number_or_null(result.loss_trace.empty() ? 0.0 : result.loss_trace.back());
  doc["final_error"] = number_or_null(final_error);
  doc["relative_error"] = number_or_null(truth_norm > 0.0 ? final_error / truth_norm : final_error);
  doc["final_grad_norm"] = number_or_null(result.final_grad_norm);
  doc["noise_norm"] = instance.noise.norm();
  return doc;
}

std::string dump(const Json& doc) { return doc.dump(2) + "\n"; }

Json read_json_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw InvalidArgument("cannot open '" + path + "'");
  try {
    return Json::parse(in);
  } catch (const nlohmann::json::exception& e) {
    throw InvalidArgument("'" + path + "': " + e.what());
  }
}

void write_text_file(const std::string& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw InvalidArgument("cannot write '" + path + "'");
  out << text;
  if (!out) throw InvalidArgument("write failed for '" + path + "'");
}

}  // namespace rsense
