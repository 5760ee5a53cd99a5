// Command-line front end: simulation, scenario generation, fitting,
// cross-validation, forecasting, evaluation, studies, detrending and
// network export. Every output file carries a provenance header.

#include <cstdlib>
#include <filesystem>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "stvar/stvar.hpp"

namespace fs = std::filesystem;
using namespace stvar;

namespace {

struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct GlobalOptions {
  int threads = 0;
  std::optional<std::uint64_t> seed;
};

std::uint64_t require_seed(const GlobalOptions& g) {
  if (g.seed) return *g.seed;
  throw UsageError("a seed is required for stochastic subcommands (--seed or env STVAR_SEED)");
}

std::uint64_t hash_args(const std::vector<std::string>& argv) {
  std::string joined;
  for (const auto& a : argv) joined += a + "\x1f";
  return fnv1a64(joined);
}

std::string read_file_bytes(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open file: " + path.string());
  return std::string((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
}

std::vector<std::string> default_ids(Index m) {
  std::vector<std::string> ids;
  ids.reserve(static_cast<std::size_t>(m));
  for (Index s = 0; s < m; ++s) ids.push_back("s" + std::to_string(s + 1));
  return ids;
}

NamedGeometry load_geometry(const std::string& geometry_path, const std::string& distance_path,
                            const std::string& unreachable) {
  if (!distance_path.empty())
    return read_distance_matrix(distance_path, unreachable != "infinite");
  if (!geometry_path.empty()) return read_geometry(geometry_path);
  throw CLI::ValidationError("--geometry", "either --geometry or --distance-matrix is required");
}

/// Parse "7-21,30-44" into a per-slot keep mask (1-based, inclusive ranges).
std::vector<bool> parse_slot_filter(const std::string& text, int period) {
  std::vector<bool> keep(period, false);
  std::stringstream ss(text);
  std::string range;
  while (std::getline(ss, range, ',')) {
    const auto dash = range.find('-');
    int lo, hi;
    try {
      lo = std::stoi(range.substr(0, dash));
      hi = dash == std::string::npos ? lo : std::stoi(range.substr(dash + 1));
    } catch (const std::exception&) {
      throw DataError("malformed slot range: " + range);
    }
    if (lo < 1 || hi > period || lo > hi)
      throw DataError("slot range out of bounds: " + range);
    for (int d = lo; d <= hi; ++d) keep[d - 1] = true;
  }
  return keep;
}

/// Single-column numeric CSV (optional header, comments allowed).
std::vector<double> read_series_csv(const fs::path& path) {
  std::vector<double> out;
  const auto lines = stvar::detail::read_csv_lines(path);
  for (std::size_t i = 0; i < lines.size(); ++i) {
    const auto& [line_no, line] = lines[i];
    try {
      out.push_back(stvar::detail::parse_double(line, line_no));
    } catch (const DataError&) {
      if (i == 0) continue;  // header line
      throw;
    }
  }
  if (out.empty()) throw DataError("no numeric rows in " + path.string());
  return out;
}

void write_forecasts_csv(const fs::path& path, const std::vector<Vector>& forecasts,
                         const std::vector<std::string>& ids, const Provenance& prov) {
  std::string out = prov.comment_line() + "\nhorizon";
  for (const auto& id : ids) out += "," + id;
  out += "\n";
  for (std::size_t h = 0; h < forecasts.size(); ++h) {
    out += std::to_string(h + 1);
    for (Index s = 0; s < forecasts[h].size(); ++s)
      out += "," + stvar::detail::format_double(forecasts[h](s));
    out += "\n";
  }
  stvar::detail::write_text(path, out);
}

int run(int argc, char** argv) {
  CLI::App app{"Spatio-temporal VAR estimation via weighted l1-regularized least squares"};
  app.require_subcommand(1);

  GlobalOptions global;
  app.add_option("--threads", global.threads, "Worker threads (0 = hardware concurrency)");
  std::uint64_t seed_flag = 0;
  CLI::Option* seed_opt =
      app.add_option("--seed", seed_flag, "Master seed for stochastic subcommands");
  if (const char* env = std::getenv("STVAR_SEED"); env != nullptr)
    global.seed = std::strtoull(env, nullptr, 10);

  std::vector<std::string> raw_args(argv, argv + argc);
  const std::uint64_t args_hash = hash_args(raw_args);

  // --- simulate ------------------------------------------------------------
  auto* sim = app.add_subcommand("simulate", "Simulate a VAR model to a panel CSV");
  std::string sim_model, sim_output;
  Index sim_t_len = 150, sim_burn_in = 500;
  sim->add_option("--model", sim_model, "Generating model JSON")->required();
  sim->add_option("--t-len", sim_t_len, "Observations to keep");
  sim->add_option("--burn-in", sim_burn_in, "Transient steps to discard");
  sim->add_option("--output", sim_output, "Panel CSV path")->required();

  // --- generate-scenario ----------------------------------------------------
  auto* gen = app.add_subcommand("generate-scenario", "Draw lattice sites and a truth model");
  ScenarioSpec gen_spec;
  gen_spec.m = 30;
  std::string gen_scenario = "a", gen_dir;
  bool gen_no_jitter = false;
  gen->add_option("--order", gen_spec.order, "VAR order (1-3)");
  gen->add_option("--setting", gen_spec.setting, "Site selection setting (1 or 2)");
  gen->add_option("--scenario", gen_scenario, "Sparsity scenario: a, b or c");
  gen->add_option("--sites", gen_spec.m, "Number of sites");
  gen->add_option("--sigma-scale", gen_spec.sigma_scale, "Innovation variance");
  gen->add_flag("--no-jitter", gen_no_jitter, "Disable lattice jitter");
  gen->add_option("--output-dir", gen_dir, "Output directory")->required();

  // --- fit -------------------------------------------------------------------
  auto* fitcmd = app.add_subcommand("fit", "Weighted l1 fit at a fixed (p, c, lambda)");
  std::string fit_input, fit_geometry, fit_distances, fit_unreachable = "dmax";
  std::string fit_weights = "exp-lag-dist", fit_output;
  double fit_c = 0.0, fit_lambda = 0.0;
  int fit_p = 1;
  fitcmd->add_option("--input", fit_input, "Panel CSV")->required();
  fitcmd->add_option("--geometry", fit_geometry, "Geometry CSV (site_id,x,y)");
  fitcmd->add_option("--distance-matrix", fit_distances, "Distance matrix CSV override");
  fitcmd->add_option("--unreachable", fit_unreachable,
                     "Unreachable pairs: dmax (substitute) or infinite (pin to zero)")
      ->check(CLI::IsMember({"dmax", "infinite"}));
  fitcmd->add_option("--weights", fit_weights, "Weight kind");
  fitcmd->add_option("--c", fit_c, "Weight constant c");
  fitcmd->add_option("--p", fit_p, "Lag order");
  fitcmd->add_option("--lambda", fit_lambda, "Penalty level")->required();
  fitcmd->add_option("--output", fit_output, "Fit JSON path")->required();

  // --- cv ---------------------------------------------------------------------
  auto* cvcmd = app.add_subcommand("cv", "Forward cross-validation over (p, c, lambda)");
  std::string cv_input, cv_geometry, cv_distances, cv_unreachable = "dmax";
  std::string cv_weights = "exp-lag-dist", cv_dir;
  CvPlan cv_plan;
  cvcmd->add_option("--input", cv_input, "Panel CSV")->required();
  cvcmd->add_option("--geometry", cv_geometry, "Geometry CSV");
  cvcmd->add_option("--distance-matrix", cv_distances, "Distance matrix CSV override");
  cvcmd->add_option("--unreachable", cv_unreachable, "Unreachable pairs: dmax or infinite")
      ->check(CLI::IsMember({"dmax", "infinite"}));
  cvcmd->add_option("--weights", cv_weights, "Weight kind");
  cvcmd->add_option("--p-candidates", cv_plan.p_candidates, "Lag order candidates")
      ->delimiter(',');
  cvcmd->add_option("--c-candidates", cv_plan.c_candidates, "Weight constant candidates")
      ->delimiter(',');
  cvcmd->add_option("--train-end", cv_plan.train_end, "Training window length (0 = 0.6 T)");
  cvcmd->add_option("--lambda-count", cv_plan.lambda_count, "Grid size");
  cvcmd->add_option("--lambda-ratio", cv_plan.lambda_ratio, "lambda_max / lambda_min");
  cvcmd->add_option("--output-dir", cv_dir, "Output directory")->required();

  // --- forecast ----------------------------------------------------------------
  auto* fc = app.add_subcommand("forecast", "Recursive h-step forecasts from a fitted model");
  std::string fc_fit, fc_input, fc_output;
  int fc_h = 1;
  fc->add_option("--fit", fc_fit, "Fit JSON")->required();
  fc->add_option("--input", fc_input, "History panel CSV")->required();
  fc->add_option("--horizon", fc_h, "Forecast horizon");
  fc->add_option("--output", fc_output, "Forecast CSV path")->required();

  // --- evaluate -------------------------------------------------------------------
  auto* ev = app.add_subcommand("evaluate", "Estimation metrics against a truth model");
  std::string ev_fit, ev_truth, ev_output, ev_dm_a, ev_dm_b;
  int ev_dm_h = 1;
  ev->add_option("--fit", ev_fit, "Fit JSON")->required();
  ev->add_option("--truth", ev_truth, "Truth model JSON")->required();
  ev->add_option("--dm-a", ev_dm_a, "Forecast error series A (CSV column)");
  ev->add_option("--dm-b", ev_dm_b, "Forecast error series B (CSV column)");
  ev->add_option("--dm-horizon", ev_dm_h, "DM long-run variance horizon");
  ev->add_option("--output", ev_output, "Metrics JSON path")->required();

  // --- network ---------------------------------------------------------------------
  auto* net = app.add_subcommand("network", "Edge classification against a truth model");
  std::string net_fit, net_truth, net_geometry, net_output;
  bool net_any_lag = false;
  net->add_option("--fit", net_fit, "Fit JSON")->required();
  net->add_option("--truth", net_truth, "Truth model JSON")->required();
  net->add_option("--geometry", net_geometry, "Geometry CSV for site ids");
  net->add_flag("--any-lag", net_any_lag, "Collapse lags: edge exists if any lag is nonzero");
  net->add_option("--output", net_output, "Edge CSV path")->required();

  // --- study -----------------------------------------------------------------------
  auto* study = app.add_subcommand("study", "Replicated simulation study from a JSON config");
  std::string study_config, study_dir;
  study->add_option("--config", study_config, "Study config JSON")->required();
  study->add_option("--output-dir", study_dir, "Output directory")->required();

  // --- detrend ------------------------------------------------------------------------
  auto* dt = app.add_subcommand("detrend", "Periodic trend removal and standardization");
  std::string dt_input, dt_dir, dt_slot_filter;
  DetrendOptions dt_opt;
  bool dt_no_boxplot = false;
  dt->add_option("--input", dt_input, "Panel CSV")->required();
  dt->add_option("--period", dt_opt.period, "Period in time steps");
  dt->add_option("--bandwidth", dt_opt.bandwidth, "Kernel bandwidth in slots (0 = default)");
  dt->add_option("--zero-median", dt_opt.zero_median_threshold,
                 "Slot median above which zeros are outliers");
  dt->add_flag("--no-boxplot", dt_no_boxplot, "Disable the 1.5 IQR outlier rule");
  dt->add_option("--slot-filter", dt_slot_filter,
                 "Keep only these 1-based slot ranges, e.g. 7-21,151-165; kept rows are "
                 "concatenated, so the filtered series has seams at range boundaries");
  dt->add_option("--output-dir", dt_dir, "Output directory")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForVersion& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 1;
  }
  if (seed_opt->count() > 0) global.seed = seed_flag;

  if (*sim) {
    const std::uint64_t seed = require_seed(global);
    const VarModel model = read_model_json(sim_model);
    const Panel panel = simulate(model, sim_t_len, sim_burn_in, seed);
    write_panel(sim_output, panel, default_ids(panel.sites()), Provenance{seed, args_hash});
  } else if (*gen) {
    gen_spec.seed = require_seed(global);
    gen_spec.jitter = !gen_no_jitter;
    if (gen_scenario.size() != 1) throw DataError("scenario must be one of a, b, c");
    gen_spec.scenario = gen_scenario[0];
    const auto [geometry, model] = generate_truth(gen_spec);
    const Provenance prov{gen_spec.seed, args_hash};
    const fs::path dir(gen_dir);
    write_geometry(dir / "sites.csv", geometry.coords(), default_ids(geometry.sites()), prov);
    write_model_json(dir / "truth_model.json", model, prov);
  } else if (*fitcmd) {
    const NamedPanel data = read_panel(fit_input);
    const NamedGeometry geo = load_geometry(fit_geometry, fit_distances, fit_unreachable);
    if (geo.geometry.sites() != data.panel.sites())
      throw DataError("geometry and panel disagree on the number of sites");
    const PenaltyWeights weights =
        weight_tensor({parse_weight_kind(fit_weights), fit_c}, geo.geometry, fit_p);
    const LaggedRegression reg = build_design(data.panel, fit_p);
    const FitResult result = fit(reg, weights, fit_lambda, std::nullopt,
                                 SolverOptions{.threads = resolve_threads(global.threads)});
    write_fit_json(fit_output, result, Provenance{global.seed.value_or(0), args_hash});
  } else if (*cvcmd) {
    const NamedPanel data = read_panel(cv_input);
    const NamedGeometry geo = load_geometry(cv_geometry, cv_distances, cv_unreachable);
    if (geo.geometry.sites() != data.panel.sites())
      throw DataError("geometry and panel disagree on the number of sites");
    cv_plan.kind = parse_weight_kind(cv_weights);
    cv_plan.threads = resolve_threads(global.threads);
    const CvResult result = forward_cv(data.panel, geo.geometry, cv_plan);
    const Provenance prov{global.seed.value_or(0), args_hash};
    const fs::path dir(cv_dir);
    write_cv_table(dir / "cv_table.csv", result.table, prov);
    nlohmann::json sel;
    sel["_provenance"] = prov.to_json();
    sel["p"] = result.p_opt;
    sel["c"] = result.c_opt;
    sel["lambda"] = result.lambda_opt;
    sel["rmsfe"] = result.rmsfe_opt;
    sel["degenerate"] = result.degenerate;
    stvar::detail::write_text(dir / "selected.json", sel.dump(2) + "\n");
    write_fit_json(dir / "fit.json", result.refit, prov);
    if (result.degenerate)
      std::cerr << "warning: lambda_max is zero everywhere; returning the zero fit\n";
  } else if (*fc) {
    const LoadedFit loaded = read_fit_json(fc_fit);
    const NamedPanel data = read_panel(fc_input);
    const std::vector<Vector> forecasts = forecast(loaded.coeffs, data.panel, fc_h);
    write_forecasts_csv(fc_output, forecasts, data.site_ids,
                        Provenance{global.seed.value_or(0), args_hash});
  } else if (*ev) {
    const LoadedFit loaded = read_fit_json(ev_fit);
    const VarModel truth = read_model_json(ev_truth);
    const CoefficientStack truth_stack = CoefficientStack::from_phis(truth.phis());
    if (loaded.coeffs.order() != truth_stack.order() ||
        loaded.coeffs.dim() != truth_stack.dim())
      throw DataError("fit and truth disagree on (p, m); refit at the truth order to compare");
    const EstimationErrors errs = estimation_errors(loaded.coeffs, truth_stack);
    const SupportMetrics supp = support_metrics(loaded.coeffs, truth_stack);
    nlohmann::json j;
    j["_provenance"] = Provenance{global.seed.value_or(0), args_hash}.to_json();
    j["l1_error"] = errs.l1;
    j["l2_error"] = errs.l2;
    j["pfz"] = supp.pfz;
    j["pfnz"] = supp.pfnz;
    if (!ev_dm_a.empty() || !ev_dm_b.empty()) {
      if (ev_dm_a.empty() || ev_dm_b.empty())
        throw DataError("--dm-a and --dm-b must both be given");
      const DmTestResult dm =
          dm_test(read_series_csv(ev_dm_a), read_series_csv(ev_dm_b), ev_dm_h);
      j["dm"] = {{"statistic", dm.statistic}, {"p_value", dm.p_value},
                 {"degenerate", dm.degenerate}};
    }
    stvar::detail::write_text(ev_output, j.dump(2) + "\n");
  } else if (*net) {
    const LoadedFit loaded = read_fit_json(net_fit);
    const VarModel truth = read_model_json(net_truth);
    const CoefficientStack truth_stack = CoefficientStack::from_phis(truth.phis());
    if (loaded.coeffs.order() != truth_stack.order() ||
        loaded.coeffs.dim() != truth_stack.dim())
      throw DataError("fit and truth disagree on (p, m)");
    const EdgeClassification edges = net_any_lag
                                         ? classify_network_any_lag(loaded.coeffs, truth_stack)
                                         : classify_network(loaded.coeffs, truth_stack);
    std::vector<std::string> ids = net_geometry.empty()
                                       ? default_ids(truth_stack.dim())
                                       : read_geometry(net_geometry).site_ids;
    write_edges(net_output, edges, ids, Provenance{global.seed.value_or(0), args_hash});
  } else if (*study) {
    StudyConfig cfg = read_study_config(study_config);
    if (global.seed) cfg.scenario.seed = *global.seed;
    if (!global.seed && cfg.scenario.seed == 0)
      throw CLI::ValidationError("--seed", "study needs a seed (config or --seed)");
    cfg.threads = resolve_threads(global.threads);
    const StudyResult result = run_study(cfg);
    const Provenance prov{cfg.scenario.seed, fnv1a64(read_file_bytes(study_config))};
    const fs::path dir(study_dir);
    write_study_tables(dir, result, cfg.horizons, prov);
    const auto [geometry, model] = generate_truth(cfg.scenario);
    write_geometry(dir / "sites.csv", geometry.coords(), default_ids(geometry.sites()), prov);
    write_model_json(dir / "truth_model.json", model, prov);
  } else if (*dt) {
    const NamedPanel data = read_panel(dt_input);
    dt_opt.boxplot_rule = !dt_no_boxplot;
    const Index m = data.panel.sites();
    Matrix standardized(data.panel.t_len(), m);
    std::vector<TrendModel> trends(static_cast<std::size_t>(m));
    parallel_for(static_cast<std::size_t>(m), resolve_threads(global.threads),
                 [&](std::size_t s) {
      const SiteDetrendResult res = detrend_series(data.panel.values.col(s), dt_opt);
      standardized.col(static_cast<Index>(s)) = res.standardized;
      trends[s] = res.trend;
    });
    if (!dt_slot_filter.empty()) {
      const std::vector<bool> keep = parse_slot_filter(dt_slot_filter, dt_opt.period);
      Index kept = 0;
      for (Index t = 0; t < standardized.rows(); ++t)
        if (keep[slot_index(t + 1, dt_opt.period) - 1]) standardized.row(kept++) = standardized.row(t);
      standardized.conservativeResize(kept, m);
    }
    const Provenance prov{global.seed.value_or(0), args_hash};
    const fs::path dir(dt_dir);
    write_panel(dir / "standardized.csv", Panel{std::move(standardized)}, data.site_ids, prov);
    write_trend_json(dir / "trend.json", trends, data.site_ids, prov);
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  try {
    return run(argc, argv);
  } catch (const stvar::DataError& e) {
    std::cerr << "data error: " << e.what() << "\n";
    return 2;
  } catch (const stvar::DimensionError& e) {
    std::cerr << "data error: " << e.what() << "\n";
    return 2;
  } catch (const stvar::NumericalError& e) {
    std::cerr << "numerical failure: " << e.what() << "\n";
    return 3;
  } catch (const UsageError& e) {
    std::cerr << "usage error: " << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
}
