#include "app.hpp"

#include <algorithm>
#include <atomic>
#include <cstdio>
#include <iostream>
#include <map>
#include <thread>

#include <CLI11.hpp>

#include "opdyn/io.hpp"

namespace opdyn::cli {

namespace fs = std::filesystem;

namespace {

// ---------------------------------------------------------------- parsing

std::uint64_t get_u64(const json& j, const char* what) {
  if (!j.is_number_integer() || (j.is_number_integer() && !j.is_number_unsigned() &&
                                 j.get<std::int64_t>() < 0)) {
    throw InvalidInput(std::string(what) + " must be a non-negative integer");
  }
  return j.get<std::uint64_t>();
}

double get_double(const json& j, const char* what) {
  if (!j.is_number()) throw InvalidInput(std::string(what) + " must be a number");
  return j.get<double>();
}

std::string get_string(const json& j, const char* what) {
  if (!j.is_string()) throw InvalidInput(std::string(what) + " must be a string");
  return j.get<std::string>();
}

Format parse_format(std::string_view s) {
  if (s == "csv") return Format::csv;
  if (s == "json") return Format::json;
  throw InvalidInput("format must be 'csv' or 'json', got '" + std::string(s) + "'");
}

std::string_view to_string(Format f) { return f == Format::csv ? "csv" : "json"; }

/// Model field: "continuous", "threshold" (per-agent thresholds come from the
/// parameters) or {"threshold": tau}.
std::pair<ExpressionModel, std::optional<double>> parse_model(const json& j) {
  if (j.is_string()) {
    const std::string s = j.get<std::string>();
    if (s == "continuous") return {ExpressionModel::continuous, std::nullopt};
    if (s == "threshold") return {ExpressionModel::threshold, std::nullopt};
    throw InvalidInput("model must be 'continuous', 'threshold' or {\"threshold\": tau}");
  }
  io::require_keys(j, {"threshold"}, "model");
  if (!j.contains("threshold")) throw InvalidInput("model object needs 'threshold'");
  const double tau = get_double(j["threshold"], "model.threshold");
  if (!(tau > 0.0 && tau < 1.0)) throw InvalidInput("model.threshold must lie in (0,1)");
  return {ExpressionModel::threshold, tau};
}

StopCriteria parse_stop(const json& j, StopCriteria stop) {
  io::require_keys(j, {"max_steps", "tol"}, "stop");
  if (j.contains("max_steps")) stop.max_steps = get_u64(j["max_steps"], "stop.max_steps");
  if (j.contains("tol")) stop.tol = get_double(j["tol"], "stop.tol");
  if (stop.max_steps == 0) throw InvalidInput("stop.max_steps must be positive");
  if (!(stop.tol >= 0.0)) throw InvalidInput("stop.tol must be non-negative");
  return stop;
}

std::string check_m_mode(const json& j) {
  const std::string m = get_string(j, "m_mode");
  if (m != "uniform" && m != "mirror") {
    throw InvalidInput("m_mode here must be 'uniform' or 'mirror', got '" + m + "'");
  }
  return m;
}

fs::path resolve(const fs::path& base, const std::string& p) {
  const fs::path path(p);
  return path.is_absolute() ? path : base / path;
}

/// Exactly one of `keys` present in `j`.
std::string pick_one(const json& j, std::initializer_list<const char*> keys, const char* what) {
  std::string found;
  for (const char* k : keys) {
    if (j.contains(k)) {
      if (!found.empty()) {
        throw InvalidInput(std::string(what) + ": give exactly one source, found both '" +
                           found + "' and '" + k + "'");
      }
      found = k;
    }
  }
  if (found.empty()) throw InvalidInput(std::string(what) + ": no source given");
  return found;
}

NetworkSource parse_network(const json& j, const fs::path& base) {
  io::require_keys(j, {"file", "generator", "inline", "m_mode"}, "network");
  const std::string kind = pick_one(j, {"file", "generator", "inline"}, "network");
  if (kind == "file") {
    NetworkFile f{resolve(base, get_string(j["file"], "network.file")), "uniform"};
    if (j.contains("m_mode")) {
      if (f.path.extension() != ".csv") {
        throw InvalidInput("network.m_mode applies to edge lists; JSON networks carry m_mode");
      }
      f.m_mode = check_m_mode(j["m_mode"]);
    }
    return f;
  }
  if (kind == "generator") {
    const json& g = j["generator"];
    io::require_keys(g, {"type", "n", "k"}, "network.generator");
    if (!g.contains("type") || get_string(g["type"], "generator.type") != "k_regular") {
      throw InvalidInput("network.generator.type must be 'k_regular'");
    }
    if (!g.contains("n") || !g.contains("k")) throw InvalidInput("generator needs 'n' and 'k'");
    NetworkGenerator gen{get_u64(g["n"], "generator.n"), get_u64(g["k"], "generator.k"),
                         "uniform"};
    if (j.contains("m_mode")) gen.m_mode = check_m_mode(j["m_mode"]);
    return gen;
  }
  if (j.contains("m_mode")) throw InvalidInput("inline networks carry their own m_mode");
  return NetworkInline{j["inline"]};
}

ParameterSource parse_parameters(const json& j, const fs::path& base) {
  io::require_keys(j, {"file", "beta_preset", "values"}, "parameters");
  const std::string kind = pick_one(j, {"file", "beta_preset", "values"}, "parameters");
  if (kind == "file") return ParameterFileSource{resolve(base, get_string(j["file"], "file"))};
  if (kind == "values") return ParameterValues{j["values"]};
  const json& b = j["beta_preset"];
  io::require_keys(b, {"lambda_override", "phi_override"}, "parameters.beta_preset");
  BetaPreset preset;
  if (b.contains("lambda_override")) {
    preset.lambda_override = get_double(b["lambda_override"], "lambda_override");
    if (!(*preset.lambda_override >= 0.0 && *preset.lambda_override <= 1.0)) {
      throw InvalidInput("lambda_override must lie in [0,1]");
    }
  }
  if (b.contains("phi_override")) {
    preset.phi_override = get_double(b["phi_override"], "phi_override");
    if (!(*preset.phi_override >= 0.0 && *preset.phi_override <= 1.0)) {
      throw InvalidInput("phi_override must lie in [0,1]");
    }
  }
  return preset;
}

SweepConfig parse_sweep(const json& j) {
  io::require_keys(j, {"instances", "resample", "threads"}, "sweep");
  SweepConfig s;
  if (j.contains("instances")) s.instances = get_u64(j["instances"], "sweep.instances");
  if (s.instances == 0) throw InvalidInput("sweep.instances must be positive");
  if (j.contains("resample")) {
    const std::string r = get_string(j["resample"], "sweep.resample");
    if (r == "all") {
      s.resample = Resample::all;
    } else if (r == "y0") {
      s.resample = Resample::y0;
    } else {
      throw InvalidInput("sweep.resample must be 'all' or 'y0'");
    }
  }
  if (j.contains("threads")) s.threads = get_u64(j["threads"], "sweep.threads");
  return s;
}

json json_or_null(const std::optional<double>& v) { return v ? json(*v) : json(nullptr); }

std::string stamp(const std::string& prefix, std::uint64_t seed, const std::string& hash) {
  return prefix + " seed=" + std::to_string(seed) + " config_hash=" + hash + "\n";
}

bool all_equal(const Vector& v, double x) { return (v.array() == x).all(); }

// ---------------------------------------------------------------- outputs

json trajectory_json(const std::vector<Snapshot>& traj, std::uint64_t seed,
                     const std::string& hash) {
  json t = json::array(), y = json::array(), yh = json::array();
  for (const Snapshot& s : traj) {
    t.push_back(s.t);
    y.push_back(io::to_json(s.y));
    yh.push_back(io::to_json(s.y_hat));
  }
  return json{{"seed", seed}, {"config_hash", hash}, {"t", t}, {"y", y}, {"y_hat", yh}};
}

std::string gnuplot_script(std::size_t n, std::uint64_t seed, const std::string& hash) {
  std::string s = stamp("#", seed, hash);
  s += "set xlabel 't'\nset ylabel 'opinion'\nset key off\n";
  s += "set multiplot layout 1,2\n";
  s += "set title 'private'\n";
  s += "plot for [i=2:" + std::to_string(n + 1) + "] 'series_y.dat' using 1:i with lines\n";
  s += "set title 'expressed'\n";
  s += "plot for [i=2:" + std::to_string(n + 1) + "] 'series_yhat.dat' using 1:i with lines\n";
  s += "unset multiplot\n";
  return s;
}

/// Compares a finished continuous run with the exact limit, when one exists.
json steady_comparison(const Instance& inst, const OpinionState& final_state,
                       PublicOpinion mode) {
  try {
    if (all_equal(inst.params.lambda, 1.0)) {
      const double alpha = consensus_value(inst.net, inst.params, inst.y0, mode);
      const double dev = std::max((final_state.y.array() - alpha).abs().maxCoeff(),
                                  (final_state.y_hat.array() - alpha).abs().maxCoeff());
      return json{{"kind", "consensus"},
                  {"consensus_value", alpha},
                  {"final_disagreement", disagreement(final_state.y)},
                  {"max_deviation", dev}};
    }
    const SystemMatrices sys = solve_steady_state(inst.net, inst.params, mode);
    const DisagreementReport report = discrepancy_report(inst.y0, sys, inst.params);
    return json{{"kind", "limit"},
                {"rho_P", sys.rho_P},
                {"max_error_y", (final_state.y - report.y_star).lpNorm<Eigen::Infinity>()},
                {"max_error_y_hat",
                 (final_state.y_hat - report.y_hat_star).lpNorm<Eigen::Infinity>()},
                {"report", io::report_to_json(report)}};
  } catch (const Error& e) {
    return json{{"kind", "unavailable"}, {"reason", e.what()}};
  }
}

struct SweepOutcome {
  bool ok = false;
  std::string error;
  std::uint64_t seed = 0;
  double v_y0 = 0, v_y_star = 0, v_yhat_star = 0;
  std::optional<double> kappa, lower_bound, tau_S;
  bool coincident = false;
  std::optional<SteadyInequalities> inequalities;
};

SweepOutcome sweep_one(const RunConfig& cfg, const std::optional<Instance>& fixed,
                       std::uint64_t seed) {
  SweepOutcome out;
  out.seed = seed;
  try {
    Instance inst = fixed ? *fixed : materialize(cfg, seed);
    if (fixed) inst.y0 = sample_initial_opinions(inst.net.n(), seed);
    const SystemMatrices sys = solve_steady_state(inst.net, inst.params, cfg.mode);
    const DisagreementReport r = discrepancy_report(inst.y0, sys, inst.params);
    out.v_y0 = r.v_y0;
    out.v_y_star = r.v_y_star;
    out.v_yhat_star = r.v_yhat_star;
    out.kappa = r.kappa;
    out.lower_bound = r.private_gap_lower_bound;
    out.tau_S = r.tau_S;
    out.coincident = !r.coincident_agents.empty();
    out.inequalities = r.inequalities;
    out.ok = true;
  } catch (const Error& e) {
    out.error = e.what();
  }
  return out;
}

}  // namespace

// ---------------------------------------------------------------- config

std::string config_hash(const json& j) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : j.dump()) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

RunConfig parse_run_config(json j, const fs::path& base_dir, const Overrides& overrides) {
  io::require_keys(j, {"schema", "seed", "mode", "model", "stop", "network", "parameters", "y0",
                       "output", "sweep"},
                   "config");
  if (!j.contains("schema") || !j["schema"].is_string() || j["schema"] != kRunSchema) {
    throw InvalidInput(std::string("config: 'schema' must be \"") + kRunSchema + "\"");
  }
  if (overrides.seed) j["seed"] = *overrides.seed;
  if (overrides.mode) j["mode"] = std::string(opdyn::to_string(*overrides.mode));
  if (overrides.format) j["output"]["format"] = std::string(to_string(*overrides.format));

  RunConfig cfg;
  if (j.contains("seed")) cfg.seed = get_u64(j["seed"], "seed");
  j["seed"] = cfg.seed;  // recorded even when defaulted
  if (j.contains("mode")) cfg.mode = parse_public_opinion(get_string(j["mode"], "mode"));
  if (j.contains("model")) std::tie(cfg.model, cfg.threshold) = parse_model(j["model"]);
  if (j.contains("stop")) cfg.stop = parse_stop(j["stop"], cfg.stop);
  if (j.contains("output")) {
    io::require_keys(j["output"], {"stride", "format"}, "output");
    if (j["output"].contains("stride")) cfg.stride = get_u64(j["output"]["stride"], "stride");
    if (j["output"].contains("format")) {
      cfg.format = parse_format(get_string(j["output"]["format"], "output.format"));
    }
  }
  if (!j.contains("network")) throw InvalidInput("config: 'network' is required");
  cfg.network = parse_network(j["network"], base_dir);
  if (!j.contains("parameters")) throw InvalidInput("config: 'parameters' is required");
  cfg.parameters = parse_parameters(j["parameters"], base_dir);
  if (j.contains("y0")) cfg.y0 = io::vector_from_json(j["y0"], "y0");
  if (j.contains("sweep")) cfg.sweep = parse_sweep(j["sweep"]);
  cfg.config_hash = config_hash(j);
  return cfg;
}

RunConfig load_run_config(const fs::path& path, const Overrides& overrides) {
  return parse_run_config(io::read_json(path.string()), path.parent_path(), overrides);
}

Instance materialize(const RunConfig& cfg, std::uint64_t seed) {
  std::optional<InfluenceNetwork> net;
  if (const auto* f = std::get_if<NetworkFile>(&cfg.network)) {
    if (f->path.extension() == ".csv") {
      net = build_network(io::edge_list_from_csv(io::read_text(f->path.string())),
                          io::conformity_from(f->m_mode, nullptr));
    } else {
      net = io::network_from_json(io::read_json(f->path.string()));
    }
  } else if (const auto* g = std::get_if<NetworkGenerator>(&cfg.network)) {
    net = generate_k_regular(g->n, g->k, seed, io::conformity_from(g->m_mode, nullptr));
  } else {
    net = io::network_from_json(std::get<NetworkInline>(cfg.network).network);
  }
  const std::size_t n = net->n();

  AgentParameters params;
  std::optional<Vector> y0 = cfg.y0;
  if (const auto* f = std::get_if<ParameterFileSource>(&cfg.parameters)) {
    io::ParameterFile file = io::parameters_from_json(io::read_json(f->path.string()));
    params = std::move(file.params);
    if (!y0) y0 = std::move(file.y0);
  } else if (const auto* b = std::get_if<BetaPreset>(&cfg.parameters)) {
    params = sample_parameters(n, seed);
    const auto size = static_cast<Eigen::Index>(n);
    if (b->lambda_override) params.lambda = Vector::Constant(size, *b->lambda_override);
    if (b->phi_override) params.phi = Vector::Constant(size, *b->phi_override);
  } else {
    io::ParameterFile file =
        io::parameters_from_json(std::get<ParameterValues>(cfg.parameters).values);
    params = std::move(file.params);
    if (!y0) y0 = std::move(file.y0);
  }
  if (cfg.model == ExpressionModel::threshold) {
    if (cfg.threshold) {
      params.threshold = Vector::Constant(static_cast<Eigen::Index>(n), *cfg.threshold);
    } else if (!params.threshold) {
      throw InvalidInput("threshold model needs model.threshold or per-agent thresholds");
    }
  }
  params.validate(n);
  if (!y0) y0 = sample_initial_opinions(n, seed);
  if (y0->size() != static_cast<Eigen::Index>(n)) {
    throw InvalidInput("y0 has " + std::to_string(y0->size()) + " entries for " +
                       std::to_string(n) + " agents");
  }
  return Instance{std::move(*net), std::move(params), std::move(*y0)};
}

void write_outputs(const fs::path& dir, const OutputSet& out) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw Error("cannot create output directory '" + dir.string() + "': " + ec.message());
  for (const auto& [name, content] : out.files) io::write_text((dir / name).string(), content);
}

// ---------------------------------------------------------------- commands

CommandResult cmd_simulate(const RunConfig& cfg) {
  const Instance inst = materialize(cfg);
  SimulationOptions opt;
  opt.mode = cfg.mode;
  opt.model = cfg.model;
  opt.stop = cfg.stop;
  opt.stride = cfg.stride;
  const SimulationResult run = simulate(inst.y0, inst.net, inst.params, opt);

  CommandResult res;
  if (!run.converged) {
    res.warnings.push_back(run.cycle_period
                               ? "expressed opinions entered a cycle of period " +
                                     std::to_string(*run.cycle_period)
                               : "no convergence within " + std::to_string(cfg.stop.max_steps) +
                                     " steps (residual " + io::format_double(run.residual) + ")");
  }
  json meta{{"command", "simulate"},
            {"seed", cfg.seed},
            {"config_hash", cfg.config_hash},
            {"mode", opdyn::to_string(cfg.mode)},
            {"model", opdyn::to_string(cfg.model)},
            {"n", inst.net.n()},
            {"stop", {{"max_steps", cfg.stop.max_steps}, {"tol", cfg.stop.tol}}},
            {"converged", run.converged},
            {"iterations", run.iterations},
            {"residual", run.residual},
            {"cycle_period", run.cycle_period ? json(*run.cycle_period) : json(nullptr)}};
  if (cfg.model == ExpressionModel::continuous) {
    meta["steady_state"] = steady_comparison(inst, run.final_state, cfg.mode);
  }

  std::vector<std::string> names;
  if (cfg.format == Format::csv) {
    res.outputs.add("trajectory.csv", io::trajectory_csv(run.trajectory));
  } else {
    res.outputs.add("trajectory.json",
                    trajectory_json(run.trajectory, cfg.seed, cfg.config_hash).dump(1) + "\n");
  }
  const std::string head = stamp("#", cfg.seed, cfg.config_hash);
  res.outputs.add("series_y.dat", head + io::series_dat(run.trajectory, false));
  res.outputs.add("series_yhat.dat", head + io::series_dat(run.trajectory, true));
  res.outputs.add("plot.gp", gnuplot_script(inst.net.n(), cfg.seed, cfg.config_hash));
  for (const auto& f : res.outputs.files) names.push_back(f.first);
  names.emplace_back("metadata.json");
  meta["files"] = names;
  res.outputs.add("metadata.json", meta.dump(1) + "\n");
  return res;
}

CommandResult cmd_steady(const RunConfig& cfg) {
  if (cfg.model != ExpressionModel::continuous) {
    throw InvalidInput("steady state is defined for the continuous model only");
  }
  const Instance inst = materialize(cfg);
  CommandResult res;
  json meta{{"command", "steady"},
            {"seed", cfg.seed},
            {"config_hash", cfg.config_hash},
            {"mode", opdyn::to_string(cfg.mode)},
            {"n", inst.net.n()}};

  if (all_equal(inst.params.lambda, 1.0)) {
    const double alpha = consensus_value(inst.net, inst.params, inst.y0, cfg.mode);
    res.warnings.emplace_back(
        "every lambda is 1: R and S do not exist, reporting the consensus value");
    meta["kind"] = "consensus";
    meta["consensus_value"] = alpha;
    meta["rho_P"] = spectral_radius(build_P(inst.net, inst.params, cfg.mode).full());
    if (cfg.format == Format::csv) {
      res.outputs.add("consensus.csv", "consensus_value\n" + io::format_double(alpha) + "\n");
    }
    meta["files"] = cfg.format == Format::csv ? json::array({"consensus.csv", "metadata.json"})
                                              : json::array({"metadata.json"});
    res.outputs.add("metadata.json", meta.dump(1) + "\n");
    return res;
  }

  const SystemMatrices sys = solve_steady_state(inst.net, inst.params, cfg.mode);
  const DisagreementReport report = discrepancy_report(inst.y0, sys, inst.params);
  meta["kind"] = "limit";
  meta["rho_P"] = sys.rho_P;
  meta["report"] = io::report_to_json(report);
  if (cfg.format == Format::csv) {
    res.outputs.add("R.csv", io::matrix_csv(sys.R));
    res.outputs.add("S.csv", io::matrix_csv(sys.S));
    res.outputs.add("limits.csv", io::discrepancy_csv(report));
  } else {
    json full = io::matrices_to_json(sys);
    full["seed"] = cfg.seed;
    full["config_hash"] = cfg.config_hash;
    full["mode"] = opdyn::to_string(cfg.mode);
    full["report"] = io::report_to_json(report);
    res.outputs.add("steady.json", full.dump(1) + "\n");
  }
  std::vector<std::string> names;
  for (const auto& f : res.outputs.files) names.push_back(f.first);
  names.emplace_back("metadata.json");
  meta["files"] = names;
  res.outputs.add("metadata.json", meta.dump(1) + "\n");
  return res;
}

CommandResult cmd_sweep(const RunConfig& cfg) {
  if (cfg.model != ExpressionModel::continuous) {
    throw InvalidInput("sweeps analyse the continuous model only");
  }
  const std::size_t p = cfg.sweep.instances;
  std::optional<Instance> fixed;
  if (cfg.sweep.resample == Resample::y0) fixed = materialize(cfg);

  std::vector<SweepOutcome> outcomes(p);
  std::size_t workers = cfg.sweep.threads;
  if (workers == 0) workers = std::max(1u, std::thread::hardware_concurrency());
  workers = std::min(workers, p);
  std::atomic<std::size_t> next{0};
  auto work = [&] {
    for (std::size_t i = next++; i < p; i = next++) {
      outcomes[i] = sweep_one(cfg, fixed, derive_seed(cfg.seed, Stream::sweep_instance, i));
    }
  };
  std::vector<std::thread> pool;
  for (std::size_t w = 1; w < workers; ++w) pool.emplace_back(work);
  work();
  for (auto& t : pool) t.join();

  std::size_t completed = 0, coincident = 0, bound_checked = 0, bound_violations = 0;
  std::size_t tau_checked = 0, tau_violations = 0, ineq_checked = 0;
  std::size_t upper = 0, lower = 0, spread = 0, all = 0;
  json errors = json::array();
  for (std::size_t i = 0; i < p; ++i) {
    const SweepOutcome& o = outcomes[i];
    if (!o.ok) {
      if (errors.size() < 10) errors.push_back({{"instance", i}, {"error", o.error}});
      continue;
    }
    ++completed;
    coincident += o.coincident;
    if (o.lower_bound) {
      ++bound_checked;
      bound_violations += *o.lower_bound > o.v_y_star;
    }
    if (o.kappa && o.tau_S) {
      ++tau_checked;
      tau_violations += *o.tau_S > *o.kappa;
    }
    if (o.inequalities) {
      ++ineq_checked;
      upper += o.inequalities->upper_chain;
      lower += o.inequalities->lower_chain;
      spread += o.inequalities->expressed_spread;
      all += o.inequalities->all();
    }
  }
  auto rate = [](std::size_t k, std::size_t of) {
    return of ? json(static_cast<double>(k) / static_cast<double>(of)) : json(nullptr);
  };
  json summary{
      {"command", "sweep"},
      {"seed", cfg.seed},
      {"config_hash", cfg.config_hash},
      {"mode", opdyn::to_string(cfg.mode)},
      {"instances", p},
      {"completed", completed},
      {"failed", p - completed},
      {"errors", errors},
      {"coincidence", {{"q", coincident}, {"p", completed}, {"q_over_p", rate(coincident, completed)}}},
      {"private_gap_bound", {{"checked", bound_checked}, {"violations", bound_violations}}},
      {"tau_S_vs_kappa", {{"checked", tau_checked}, {"violations", tau_violations}}},
      {"inequalities",
       {{"checked", ineq_checked},
        {"upper_chain_rate", rate(upper, ineq_checked)},
        {"lower_chain_rate", rate(lower, ineq_checked)},
        {"expressed_spread_rate", rate(spread, ineq_checked)},
        {"all_rate", rate(all, ineq_checked)}}}};

  CommandResult res;
  if (cfg.format == Format::csv) {
    std::string csv =
        "instance,seed,ok,v_y0,v_y_star,v_yhat_star,kappa,lower_bound,tau_S,coincident,"
        "inequalities_hold\n";
    auto opt = [](const std::optional<double>& v) { return v ? io::format_double(*v) : ""; };
    for (std::size_t i = 0; i < p; ++i) {
      const SweepOutcome& o = outcomes[i];
      csv += std::to_string(i) + ',' + std::to_string(o.seed) + ',' + (o.ok ? "1" : "0");
      if (o.ok) {
        csv += ',' + io::format_double(o.v_y0) + ',' + io::format_double(o.v_y_star) + ',' +
               io::format_double(o.v_yhat_star) + ',' + opt(o.kappa) + ',' + opt(o.lower_bound) +
               ',' + opt(o.tau_S) + ',' + (o.coincident ? "1" : "0") + ',' +
               (o.inequalities ? (o.inequalities->all() ? "1" : "0") : "");
      } else {
        csv += ",,,,,,,,";
      }
      csv += '\n';
    }
    res.outputs.add("instances.csv", csv);
  }
  res.outputs.add("summary.json", summary.dump(1) + "\n");
  if (completed != p) {
    res.exit_code = 1;
    res.warnings.push_back(std::to_string(p - completed) + " of " + std::to_string(p) +
                           " instances failed");
  }
  return res;
}

// ---------------------------------------------------------------- asch

AschConfig parse_asch_config(json j, const Overrides& overrides) {
  io::require_keys(j, {"schema", "n", "lambda1", "phi1", "w11", "variant", "model", "seed",
                       "mode", "stop", "grid", "output"},
                   "asch config");
  if (j.contains("schema") && (!j["schema"].is_string() || j["schema"] != kAschSchema)) {
    throw InvalidInput(std::string("asch config: 'schema' must be \"") + kAschSchema + "\"");
  }
  if (overrides.seed) j["seed"] = *overrides.seed;
  if (overrides.mode) j["mode"] = std::string(opdyn::to_string(*overrides.mode));
  if (overrides.format) j["output"]["format"] = std::string(to_string(*overrides.format));

  AschConfig cfg;
  auto& s = cfg.scenario;
  if (j.contains("n")) s.n = get_u64(j["n"], "n");
  if (j.contains("lambda1")) s.lambda1 = get_double(j["lambda1"], "lambda1");
  if (j.contains("phi1")) s.phi1 = get_double(j["phi1"], "phi1");
  if (j.contains("w11")) s.w11 = get_double(j["w11"], "w11");
  if (j.contains("variant")) {
    const std::string v = get_string(j["variant"], "variant");
    if (v == "first") {
      s.variant = asch::Variant::first;
    } else if (v == "second") {
      s.variant = asch::Variant::second;
    } else {
      throw InvalidInput("variant must be 'first' or 'second'");
    }
  }
  if (j.contains("model")) {
    const auto [model, tau] = parse_model(j["model"]);
    if (model == ExpressionModel::threshold && !tau) {
      throw InvalidInput("asch threshold model needs {\"threshold\": tau}");
    }
    s.model = model;
    if (tau) s.tau1 = *tau;
  }
  if (j.contains("seed")) cfg.seed = get_u64(j["seed"], "seed");
  j["seed"] = cfg.seed;
  if (j.contains("mode")) s.mode = parse_public_opinion(get_string(j["mode"], "mode"));
  if (j.contains("stop")) cfg.stop = parse_stop(j["stop"], cfg.stop);
  if (j.contains("output")) {
    io::require_keys(j["output"], {"format"}, "output");
    if (j["output"].contains("format")) {
      cfg.format = parse_format(get_string(j["output"]["format"], "output.format"));
    }
  }
  if (j.contains("grid")) {
    const json& g = j["grid"];
    io::require_keys(g, {"lambda1", "phi1", "tau1", "seeds"}, "grid");
    AschGrid grid;
    auto list = [&](const char* key, double fallback) {
      std::vector<double> out;
      if (!g.contains(key)) return std::vector<double>{fallback};
      const Vector v = io::vector_from_json(g[key], key);
      if (v.size() == 0) throw InvalidInput(std::string("grid.") + key + " is empty");
      for (Eigen::Index i = 0; i < v.size(); ++i) out.push_back(v[i]);
      return out;
    };
    grid.lambda1 = list("lambda1", s.lambda1);
    grid.phi1 = list("phi1", s.phi1);
    grid.tau1 = list("tau1", s.tau1);
    if (g.contains("tau1") && s.model != ExpressionModel::threshold) {
      throw InvalidInput("grid.tau1 needs the threshold model");
    }
    if (g.contains("seeds")) grid.seeds = get_u64(g["seeds"], "grid.seeds");
    if (grid.seeds == 0) throw InvalidInput("grid.seeds must be positive");
    cfg.grid = std::move(grid);
  }
  asch::validate(s);
  if (cfg.grid) {
    // Every grid point must be a valid scenario before anything runs.
    for (double l : cfg.grid->lambda1)
      for (double f : cfg.grid->phi1)
        for (double t : cfg.grid->tau1) {
          asch::AschScenario point = s;
          point.lambda1 = l;
          point.phi1 = f;
          point.tau1 = t;
          asch::validate(point);
        }
  }
  cfg.config_hash = config_hash(j);
  return cfg;
}

AschConfig load_asch_config(const fs::path& path, const Overrides& overrides) {
  return parse_asch_config(io::read_json(path.string()), overrides);
}

CommandResult cmd_asch(const AschConfig& cfg) {
  const asch::AschScenario& s = cfg.scenario;
  const bool first = s.variant == asch::Variant::first;
  const bool global = s.mode == PublicOpinion::global;
  const bool threshold = s.model == ExpressionModel::threshold;
  CommandResult res;

  const asch::AschOutcome out = asch::run_scenario(s, cfg.seed, cfg.stop, 1);
  if (!out.run.converged) res.warnings.emplace_back("scenario run did not converge");

  json closed{{"y1_star", nullptr}, {"y_hat1_star", nullptr}, {"threshold_prediction", nullptr}};
  if (first) {
    const double y = asch::closed_form_private(s.lambda1, s.self_weight());
    closed["y1_star"] = y;
    if (global && !threshold) closed["y_hat1_star"] = asch::closed_form_expressed(s.phi1, s.n, y);
    if (global && threshold) {
      closed["threshold_prediction"] = std::string(
          asch::to_string(asch::threshold_prediction(s.phi1, y, s.n, s.tau1, s.mode)));
    }
  }

  // Table corners under the same group size, variant and model.
  struct Corner {
    double lambda1, phi1;
  };
  const Corner corners[] = {{0.1, 0.9}, {0.9, 0.1}, {0.1, 0.1}};
  std::string corner_csv = "lambda1,phi1,y1_star,y_hat1_star,reaction\n";
  json corner_json = json::array();
  for (const Corner& c : corners) {
    asch::AschScenario cs = s;
    cs.lambda1 = c.lambda1;
    cs.phi1 = c.phi1;
    cs.w11.reset();
    const auto o = asch::run_scenario(cs, cfg.seed, cfg.stop);
    corner_csv += io::format_double(c.lambda1) + ',' + io::format_double(c.phi1) + ',' +
                  io::format_double(o.y1_star) + ',' + io::format_double(o.y_hat1_star) + ',' +
                  std::string(asch::to_string(o.reaction)) + '\n';
    corner_json.push_back({{"lambda1", c.lambda1},
                           {"phi1", c.phi1},
                           {"reaction", asch::to_string(o.reaction)}});
  }

  std::string f_curve = stamp("#", cfg.seed, cfg.config_hash) + "# lambda1 f\n";
  for (int k = 0; k <= 100; ++k) {
    const double l = k / 100.0;
    f_curve += io::format_double(l) + ' ' + io::format_double(asch::stubbornness_curve(l)) + '\n';
  }
  std::string g_curve = stamp("#", cfg.seed, cfg.config_hash) + "# phi1 g_n2 g_n4 g_n8\n";
  for (int k = 0; k <= 100; ++k) {
    const double f = k / 100.0;
    g_curve += io::format_double(f);
    for (std::size_t n : {2u, 4u, 8u}) g_curve += ' ' + io::format_double(asch::conformity_gain(f, n));
    g_curve += '\n';
  }

  json meta{{"command", "asch"},
            {"seed", cfg.seed},
            {"config_hash", cfg.config_hash},
            {"scenario",
             {{"n", s.n},
              {"lambda1", s.lambda1},
              {"phi1", s.phi1},
              {"w11", s.self_weight()},
              {"variant", first ? "first" : "second"},
              {"model", opdyn::to_string(s.model)},
              {"tau1", threshold ? json(s.tau1) : json(nullptr)},
              {"mode", opdyn::to_string(s.mode)}}},
            {"converged", out.run.converged},
            {"iterations", out.run.iterations},
            {"y1_star", out.y1_star},
            {"y_hat1_star", out.y_hat1_star},
            {"reaction", asch::to_string(out.reaction)},
            {"closed_form", closed},
            {"table_corners", corner_json}};

  if (cfg.grid) {
    const AschGrid& g = *cfg.grid;
    std::string csv =
        "lambda1,phi1,tau1,seed,y1_star,y_hat1_star,closed_form_y1,closed_form_yhat1,reaction,"
        "prediction\n";
    json rows = json::array();
    std::map<std::string, std::size_t> reactions;
    std::map<double, std::pair<std::size_t, std::size_t>> expressed;  // tau -> (ones, zeros)
    std::size_t unconverged = 0;
    for (double l : g.lambda1) {
      for (double f : g.phi1) {
        for (double t : threshold ? g.tau1 : std::vector<double>{s.tau1}) {
          for (std::size_t k = 0; k < g.seeds; ++k) {
            asch::AschScenario point = s;
            point.lambda1 = l;
            point.phi1 = f;
            point.tau1 = t;
            const std::uint64_t seed = derive_seed(cfg.seed, Stream::sweep_instance, k);
            const auto o = asch::run_scenario(point, seed, cfg.stop);
            unconverged += !o.run.converged;
            std::optional<double> cy, cyh;
            std::string prediction;
            if (first) {
              cy = asch::closed_form_private(l, point.self_weight());
              if (global && !threshold) cyh = asch::closed_form_expressed(f, s.n, *cy);
              if (global && threshold) {
                prediction = asch::to_string(asch::threshold_prediction(f, *cy, s.n, t, s.mode));
              }
            }
            ++reactions[std::string(asch::to_string(o.reaction))];
            if (threshold) {
              auto& counts = expressed[t];
              (o.y_hat1_star == 1.0 ? counts.first : counts.second)++;
            }
            auto opt = [](const std::optional<double>& v) {
              return v ? io::format_double(*v) : std::string();
            };
            csv += io::format_double(l) + ',' + io::format_double(f) + ',' +
                   (threshold ? io::format_double(t) : "") + ',' + std::to_string(seed) + ',' +
                   io::format_double(o.y1_star) + ',' + io::format_double(o.y_hat1_star) + ',' +
                   opt(cy) + ',' + opt(cyh) + ',' + std::string(asch::to_string(o.reaction)) +
                   ',' + prediction + '\n';
            rows.push_back({{"lambda1", l},
                            {"phi1", f},
                            {"tau1", threshold ? json(t) : json(nullptr)},
                            {"seed", seed},
                            {"y1_star", o.y1_star},
                            {"y_hat1_star", o.y_hat1_star},
                            {"closed_form_y1", json_or_null(cy)},
                            {"closed_form_yhat1", json_or_null(cyh)},
                            {"reaction", asch::to_string(o.reaction)},
                            {"prediction", prediction.empty() ? json(nullptr) : json(prediction)}});
          }
        }
      }
    }
    json by_tau = json::array();
    for (const auto& [t, c] : expressed) {
      by_tau.push_back({{"tau1", t}, {"expresses_1", c.first}, {"expresses_0", c.second}});
    }
    meta["grid_summary"] = {{"points", rows.size()},
                            {"unconverged", unconverged},
                            {"reactions", reactions},
                            {"expressed_by_tau", by_tau}};
    if (unconverged) res.warnings.push_back(std::to_string(unconverged) + " grid runs did not converge");
    if (cfg.format == Format::csv) {
      res.outputs.add("grid.csv", csv);
    } else {
      res.outputs.add("grid.json",
                      json{{"seed", cfg.seed}, {"config_hash", cfg.config_hash}, {"rows", rows}}
                              .dump(1) +
                          "\n");
    }
  }

  res.outputs.add("trajectory.csv", io::trajectory_csv(out.run.trajectory));
  res.outputs.add("corners.csv", corner_csv);
  res.outputs.add("curve_f.dat", f_curve);
  res.outputs.add("curve_g.dat", g_curve);
  std::vector<std::string> names;
  for (const auto& f : res.outputs.files) names.push_back(f.first);
  names.emplace_back("asch.json");
  meta["files"] = names;
  res.outputs.add("asch.json", meta.dump(1) + "\n");
  return res;
}

// ---------------------------------------------------------------- main

int run(int argc, char** argv) {
  CLI::App app{"Private and expressed opinion dynamics on influence networks", "opdyn"};
  app.require_subcommand(1);

  struct Flags {
    std::string config;
    std::string out;
    std::optional<std::uint64_t> seed;
    std::optional<std::string> mode;
    std::optional<std::string> format;
  } flags;

  auto add = [&](const char* name, const char* help) {
    CLI::App* sub = app.add_subcommand(name, help);
    sub->add_option("--config", flags.config, "JSON config file")->required();
    sub->add_option("--out", flags.out, "output directory")->required();
    sub->add_option("--seed", flags.seed, "base seed (overrides the config)");
    sub->add_option("--mode", flags.mode, "public opinion: local|global")
        ->check(CLI::IsMember({"local", "global"}));
    sub->add_option("--format", flags.format, "output format: csv|json")
        ->check(CLI::IsMember({"csv", "json"}));
    return sub;
  };
  CLI::App* simulate_cmd = add("simulate", "iterate the dynamics and export the trajectory");
  CLI::App* steady_cmd = add("steady", "exact steady state, operators and disagreement report");
  CLI::App* asch_cmd = add("asch", "conformity experiment scenarios and grids");
  CLI::App* sweep_cmd = add("sweep", "Monte-Carlo checks over independent instances");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e);
  }

  const std::string name = app.get_subcommands().front()->get_name();
  try {
    Overrides ov;
    ov.seed = flags.seed;
    if (flags.mode) ov.mode = parse_public_opinion(*flags.mode);
    if (flags.format) ov.format = parse_format(*flags.format);

    CommandResult res;
    if (asch_cmd->parsed()) {
      res = cmd_asch(load_asch_config(flags.config, ov));
    } else {
      const RunConfig cfg = load_run_config(flags.config, ov);
      if (simulate_cmd->parsed()) {
        res = cmd_simulate(cfg);
      } else if (steady_cmd->parsed()) {
        res = cmd_steady(cfg);
      } else if (sweep_cmd->parsed()) {
        res = cmd_sweep(cfg);
      }
    }
    write_outputs(flags.out, res.outputs);
    for (const auto& w : res.warnings) std::cerr << "opdyn " << name << ": warning: " << w << "\n";
    std::cout << "wrote " << res.outputs.files.size() << " files to " << flags.out << "\n";
    return res.exit_code;
  } catch (const InvalidInput& e) {
    std::cerr << "opdyn " << name << ": invalid input: " << e.what() << "\n";
  } catch (const AssumptionViolation& e) {
    std::cerr << "opdyn " << name << ": assumption violated: " << e.what() << "\n";
  } catch (const NumericalError& e) {
    std::cerr << "opdyn " << name << ": numerical error: " << e.what() << "\n";
  } catch (const Error& e) {
    std::cerr << "opdyn " << name << ": error: " << e.what() << "\n";
  } catch (const nlohmann::json::exception& e) {
    std::cerr << "opdyn " << name << ": invalid input: " << e.what() << "\n";
  } catch (const std::exception& e) {
    std::cerr << "opdyn " << name << ": error: " << e.what() << "\n";
  }
  return 1;
}

}  // namespace opdyn::cli
