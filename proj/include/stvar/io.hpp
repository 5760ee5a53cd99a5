#pragma once

#include <charconv>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <limits>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "stvar/common.hpp"
#include "stvar/cross_validation.hpp"
#include "stvar/detrend.hpp"
#include "stvar/evaluation.hpp"
#include "stvar/scenario.hpp"
#include "stvar/solver.hpp"
#include "stvar/var_model.hpp"
#include "stvar/weights.hpp"

namespace stvar {

inline constexpr const char* kVersion = "0.1.0";

inline std::uint64_t fnv1a64(const std::string& text) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : text) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

/// Stamped into every output file; everything here is reproducible, so two
/// runs with the same seed and config produce byte-identical files.
struct Provenance {
  std::uint64_t seed = 0;
  std::uint64_t config_hash = 0;

  std::string comment_line() const {
    char buf[128];
    std::snprintf(buf, sizeof(buf), "# stvar %s seed=%llu config=%016llx", kVersion,
                  static_cast<unsigned long long>(seed),
                  static_cast<unsigned long long>(config_hash));
    return buf;
  }

  nlohmann::json to_json() const {
    char hash[32];
    std::snprintf(hash, sizeof(hash), "%016llx", static_cast<unsigned long long>(config_hash));
    return {{"version", kVersion}, {"seed", seed}, {"config", hash}};
  }
};

namespace detail {

/// Shortest round-trip decimal form of a double.
inline std::string format_double(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

inline double parse_double(const std::string& cell, std::size_t line_no) {
  const char* first = cell.data();
  const char* last = cell.data() + cell.size();
  while (first != last && (*first == ' ' || *first == '\t')) ++first;
  while (last != first && (*(last - 1) == ' ' || *(last - 1) == '\t' || *(last - 1) == '\r'))
    --last;
  std::string trimmed(first, last);
  if (trimmed == "inf" || trimmed == "+inf") return std::numeric_limits<double>::infinity();
  double value = 0.0;
  const auto [ptr, ec] = std::from_chars(trimmed.data(), trimmed.data() + trimmed.size(), value);
  if (ec != std::errc{} || ptr != trimmed.data() + trimmed.size())
    throw DataError("non-numeric cell '" + trimmed + "' at line " + std::to_string(line_no));
  return value;
}

inline std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> cells;
  std::string cell;
  std::stringstream ss(line);
  while (std::getline(ss, cell, ',')) cells.push_back(cell);
  if (!line.empty() && line.back() == ',') cells.emplace_back();
  return cells;
}

inline std::string strip_cr(std::string s) {
  if (!s.empty() && s.back() == '\r') s.pop_back();
  return s;
}

/// Read all non-comment lines of a CSV file, keeping 1-based line numbers.
inline std::vector<std::pair<std::size_t, std::string>> read_csv_lines(
    const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open file: " + path.string());
  std::vector<std::pair<std::size_t, std::string>> lines;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    line = strip_cr(line);
    if (line.empty() || line[0] == '#') continue;
    lines.emplace_back(line_no, line);
  }
  return lines;
}

inline void write_text(const std::filesystem::path& path, const std::string& text) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write file: " + path.string());
  out << text;
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Panel CSV: provenance comment, header of site ids, one row per time point.
// ---------------------------------------------------------------------------

struct NamedPanel {
  Panel panel;
  std::vector<std::string> site_ids;
};

inline void write_panel(const std::filesystem::path& path, const Panel& panel,
                        const std::vector<std::string>& site_ids, const Provenance& prov) {
  if (static_cast<Index>(site_ids.size()) != panel.sites())
    throw DimensionError("write_panel: id count mismatch");
  std::string out = prov.comment_line() + "\n";
  for (std::size_t s = 0; s < site_ids.size(); ++s)
    out += (s == 0 ? "" : ",") + site_ids[s];
  out += "\n";
  for (Index t = 0; t < panel.t_len(); ++t) {
    for (Index s = 0; s < panel.sites(); ++s)
      out += (s == 0 ? "" : ",") + detail::format_double(panel.values(t, s));
    out += "\n";
  }
  detail::write_text(path, out);
}

inline NamedPanel read_panel(const std::filesystem::path& path) {
  const auto lines = detail::read_csv_lines(path);
  if (lines.size() < 2) throw DataError("panel file has no data rows: " + path.string());
  NamedPanel out;
  out.site_ids = detail::split_csv_line(lines.front().second);
  std::set<std::string> unique(out.site_ids.begin(), out.site_ids.end());
  if (unique.size() != out.site_ids.size())
    throw DataError("panel file has duplicate site ids: " + path.string());
  const std::size_t m = out.site_ids.size();
  const std::size_t t_len = lines.size() - 1;
  out.panel.values.resize(static_cast<Index>(t_len), static_cast<Index>(m));
  for (std::size_t r = 0; r < t_len; ++r) {
    const auto& [line_no, line] = lines[r + 1];
    const auto cells = detail::split_csv_line(line);
    if (cells.size() != m)
      throw DataError("ragged row at line " + std::to_string(line_no) + ": expected " +
                      std::to_string(m) + " cells, got " + std::to_string(cells.size()));
    for (std::size_t s = 0; s < m; ++s)
      out.panel.values(static_cast<Index>(r), static_cast<Index>(s)) =
          detail::parse_double(cells[s], line_no);
  }
  return out;
}

// ---------------------------------------------------------------------------
// Geometry CSV: site_id,x,y rows; optional distance-matrix override.
// ---------------------------------------------------------------------------

struct NamedGeometry {
  SiteGeometry geometry;
  std::vector<std::string> site_ids;
};

inline void write_geometry(const std::filesystem::path& path, const Matrix& coords,
                           const std::vector<std::string>& site_ids, const Provenance& prov) {
  if (static_cast<Index>(site_ids.size()) != coords.rows())
    throw DimensionError("write_geometry: id count mismatch");
  std::string out = prov.comment_line() + "\nsite_id,x,y\n";
  for (Index s = 0; s < coords.rows(); ++s)
    out += site_ids[s] + "," + detail::format_double(coords(s, 0)) + "," +
           detail::format_double(coords(s, 1)) + "\n";
  detail::write_text(path, out);
}

inline NamedGeometry read_geometry(const std::filesystem::path& path) {
  const auto lines = detail::read_csv_lines(path);
  if (lines.size() < 2) throw DataError("geometry file has no data rows: " + path.string());
  std::vector<std::string> ids;
  Matrix coords(static_cast<Index>(lines.size() - 1), 2);
  for (std::size_t r = 1; r < lines.size(); ++r) {
    const auto& [line_no, line] = lines[r];
    const auto cells = detail::split_csv_line(line);
    if (cells.size() != 3)
      throw DataError("ragged geometry row at line " + std::to_string(line_no));
    ids.push_back(cells[0]);
    coords(static_cast<Index>(r - 1), 0) = detail::parse_double(cells[1], line_no);
    coords(static_cast<Index>(r - 1), 1) = detail::parse_double(cells[2], line_no);
  }
  std::set<std::string> unique(ids.begin(), ids.end());
  if (unique.size() != ids.size())
    throw DataError("geometry file has duplicate site ids: " + path.string());
  return {SiteGeometry::from_coords(std::move(coords)), std::move(ids)};
}

/// Distance-matrix override: header of site ids, one row per site with a
/// leading id. `inf` marks an unreachable pair; `unreachable_to_dmax`
/// replaces those with the largest finite distance (the alternative keeps
/// them infinite, which pins the coefficients to zero via infinite weights).
inline NamedGeometry read_distance_matrix(const std::filesystem::path& path,
                                          bool unreachable_to_dmax = true) {
  const auto lines = detail::read_csv_lines(path);
  if (lines.size() < 2) throw DataError("distance file has no data rows: " + path.string());
  auto header = detail::split_csv_line(lines.front().second);
  if (header.size() < 2) throw DataError("distance file header too short: " + path.string());
  std::vector<std::string> ids(header.begin() + 1, header.end());
  const std::size_t m = ids.size();
  if (lines.size() - 1 != m) throw DataError("distance matrix is not square: " + path.string());
  Matrix d(static_cast<Index>(m), static_cast<Index>(m));
  for (std::size_t r = 1; r < lines.size(); ++r) {
    const auto& [line_no, line] = lines[r];
    const auto cells = detail::split_csv_line(line);
    if (cells.size() != m + 1)
      throw DataError("ragged distance row at line " + std::to_string(line_no));
    if (cells[0] != ids[r - 1])
      throw DataError("distance row id mismatch at line " + std::to_string(line_no));
    for (std::size_t c = 0; c < m; ++c)
      d(static_cast<Index>(r - 1), static_cast<Index>(c)) =
          detail::parse_double(cells[c + 1], line_no);
  }
  if (unreachable_to_dmax) {
    double dmax = 0.0;
    for (Index i = 0; i < d.size(); ++i)
      if (std::isfinite(d(i))) dmax = std::max(dmax, d(i));
    for (Index i = 0; i < d.size(); ++i)
      if (!std::isfinite(d(i))) d(i) = dmax;
  }
  std::set<std::string> unique(ids.begin(), ids.end());
  if (unique.size() != ids.size())
    throw DataError("distance file has duplicate site ids: " + path.string());
  return {SiteGeometry::from_distances(std::move(d)), std::move(ids)};
}

// ---------------------------------------------------------------------------
// JSON artifacts: fitted coefficients, generating models, trend models.
// ---------------------------------------------------------------------------

namespace detail {

inline nlohmann::json coefficient_blocks(const CoefficientStack& stack) {
  nlohmann::json blocks = nlohmann::json::array();
  for (int l = 0; l < stack.order(); ++l) {
    nlohmann::json block = nlohmann::json::array();
    for (int s = 0; s < stack.dim(); ++s) {
      nlohmann::json row = nlohmann::json::array();
      for (int sp = 0; sp < stack.dim(); ++sp) row.push_back(stack.phi(l, s, sp));
      block.push_back(std::move(row));
    }
    blocks.push_back(std::move(block));
  }
  return blocks;
}

inline CoefficientStack blocks_to_stack(const nlohmann::json& blocks, int p, int m) {
  CoefficientStack stack(p, m);
  if (static_cast<int>(blocks.size()) != p) throw DataError("coefficient blocks: lag count mismatch");
  for (int l = 0; l < p; ++l) {
    if (static_cast<int>(blocks[l].size()) != m)
      throw DataError("coefficient blocks: row count mismatch");
    for (int s = 0; s < m; ++s) {
      if (static_cast<int>(blocks[l][s].size()) != m)
        throw DataError("coefficient blocks: column count mismatch");
      for (int sp = 0; sp < m; ++sp) stack.phi(l, s, sp) = blocks[l][s][sp].get<double>();
    }
  }
  return stack;
}

}  // namespace detail

inline void write_fit_json(const std::filesystem::path& path, const FitResult& fit,
                           const Provenance& prov) {
  nlohmann::json j;
  j["_provenance"] = prov.to_json();
  j["p"] = fit.coeffs.order();
  j["m"] = fit.coeffs.dim();
  j["lambda"] = fit.lambda;
  j["coefficients"] = detail::coefficient_blocks(fit.coeffs);
  j["support"] = fit.support.size();
  j["converged"] = fit.all_converged;
  detail::write_text(path, j.dump(2) + "\n");
}

struct LoadedFit {
  CoefficientStack coeffs;
  double lambda = 0.0;
  bool converged = false;
};

inline LoadedFit read_fit_json(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open file: " + path.string());
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw DataError("malformed JSON in " + path.string() + ": " + e.what());
  }
  const int p = j.at("p").get<int>();
  const int m = j.at("m").get<int>();
  return {detail::blocks_to_stack(j.at("coefficients"), p, m), j.at("lambda").get<double>(),
          j.value("converged", false)};
}

inline void write_model_json(const std::filesystem::path& path, const VarModel& model,
                             const Provenance& prov) {
  nlohmann::json j;
  j["_provenance"] = prov.to_json();
  j["p"] = model.order();
  j["m"] = model.dim();
  j["phis"] = detail::coefficient_blocks(CoefficientStack::from_phis(model.phis()));
  nlohmann::json sig = nlohmann::json::array();
  for (Index r = 0; r < model.sigma().rows(); ++r) {
    nlohmann::json row = nlohmann::json::array();
    for (Index c = 0; c < model.sigma().cols(); ++c) row.push_back(model.sigma()(r, c));
    sig.push_back(std::move(row));
  }
  j["sigma"] = std::move(sig);
  detail::write_text(path, j.dump(2) + "\n");
}

inline VarModel read_model_json(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open file: " + path.string());
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw DataError("malformed JSON in " + path.string() + ": " + e.what());
  }
  const int p = j.at("p").get<int>();
  const int m = j.at("m").get<int>();
  const CoefficientStack stack = detail::blocks_to_stack(j.at("phis"), p, m);
  Matrix sigma(m, m);
  const auto& sig = j.at("sigma");
  if (static_cast<int>(sig.size()) != m) throw DataError("sigma: row count mismatch");
  for (int r = 0; r < m; ++r)
    for (int c = 0; c < m; ++c) sigma(r, c) = sig[r][c].get<double>();
  return VarModel(stack.to_phis(), std::move(sigma));
}

inline void write_trend_json(const std::filesystem::path& path,
                             const std::vector<TrendModel>& trends,
                             const std::vector<std::string>& site_ids, const Provenance& prov) {
  if (trends.size() != site_ids.size()) throw DimensionError("write_trend_json: size mismatch");
  nlohmann::json j;
  j["_provenance"] = prov.to_json();
  nlohmann::json sites = nlohmann::json::array();
  for (std::size_t s = 0; s < trends.size(); ++s) {
    nlohmann::json site;
    site["site_id"] = site_ids[s];
    site["period"] = trends[s].period;
    site["mu"] = std::vector<double>(trends[s].mu.data(), trends[s].mu.data() + trends[s].mu.size());
    site["a"] = trends[s].a;
    site["b"] = trends[s].b;
    site["sigma_floor"] = trends[s].sigma_floor;
    sites.push_back(std::move(site));
  }
  j["sites"] = std::move(sites);
  detail::write_text(path, j.dump(2) + "\n");
}

// ---------------------------------------------------------------------------
// Tabular outputs.
// ---------------------------------------------------------------------------

inline void write_cv_table(const std::filesystem::path& path, const std::vector<CvEntry>& table,
                           const Provenance& prov) {
  std::string out = prov.comment_line() + "\np,c,lambda,rmsfe\n";
  for (const CvEntry& e : table)
    out += std::to_string(e.p) + "," + detail::format_double(e.c) + "," +
           detail::format_double(e.lambda) + "," + detail::format_double(e.rmsfe) + "\n";
  detail::write_text(path, out);
}

inline void write_edges(const std::filesystem::path& path, const EdgeClassification& edges,
                        const std::vector<std::string>& site_ids, const Provenance& prov) {
  if (static_cast<int>(site_ids.size()) != edges.m)
    throw DimensionError("write_edges: id count mismatch");
  std::string out = prov.comment_line() + "\nfrom_site,to_site,lag,class\n";
  for (int l = 0; l < edges.p; ++l)
    for (int s = 0; s < edges.m; ++s)
      for (int sp = 0; sp < edges.m; ++sp)
        out += site_ids[sp] + "," + site_ids[s] + "," +
               (edges.aggregated ? std::string("any") : std::to_string(l + 1)) + "," +
               to_string(edges.at(l, s, sp)) + "\n";
  detail::write_text(path, out);
}

/// Study configuration, JSON. Unknown keys are ignored; the scenario seed may
/// be overridden by the caller after parsing.
inline StudyConfig read_study_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open file: " + path.string());
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw DataError("malformed JSON in " + path.string() + ": " + e.what());
  }
  StudyConfig cfg;
  try {
    const auto& sc = j.at("scenario");
    cfg.scenario.order = sc.value("order", 1);
    cfg.scenario.setting = sc.value("setting", 1);
    const std::string sname = sc.value("scenario", "a");
    if (sname.size() != 1) throw DataError("scenario name must be one of a, b, c");
    cfg.scenario.scenario = sname[0];
    cfg.scenario.m = sc.value("m", 30);
    cfg.scenario.sigma_scale = sc.value("sigma_scale", 0.01);
    cfg.scenario.seed = sc.value("seed", 0ULL);
    cfg.scenario.jitter = sc.value("jitter", true);
    cfg.replicates = j.value("replicates", 20);
    cfg.t_len = j.value("t_len", 150);
    cfg.train_end = j.value("train_end", 40);
    cfg.validation_end = j.value("validation_end", 70);
    cfg.burn_in = j.value("burn_in", 500);
    if (j.contains("p_candidates")) cfg.p_candidates = j["p_candidates"].get<std::vector<int>>();
    cfg.lambda_count = j.value("lambda_count", 30);
    cfg.lambda_ratio = j.value("lambda_ratio", 1000.0);
    cfg.horizons = j.value("horizons", 5);
    for (const auto& e : j.at("estimators")) {
      EstimatorConfig est;
      est.name = e.at("name").get<std::string>();
      est.kind = parse_weight_kind(e.value("kind", "exp-lag-dist"));
      est.c_candidates = e.at("c_candidates").get<std::vector<double>>();
      cfg.estimators.push_back(std::move(est));
    }
  } catch (const nlohmann::json::exception& e) {
    throw DataError("invalid study config " + path.string() + ": " + e.what());
  }
  return cfg;
}

inline void write_study_tables(const std::filesystem::path& dir, const StudyResult& study,
                               int horizons, const Provenance& prov) {
  std::string rep = prov.comment_line() +
                    "\nreplicate,estimator,p_opt,c_opt,lambda_opt,l1,l2,pfz,pfnz";
  for (int h = 1; h <= horizons; ++h) rep += ",rmsfe_h" + std::to_string(h);
  rep += "\n";
  for (const ReplicateMetrics& m : study.per_replicate) {
    rep += std::to_string(m.replicate) + "," + m.estimator + "," + std::to_string(m.p_opt) + "," +
           detail::format_double(m.c_opt) + "," + detail::format_double(m.lambda_opt) + "," +
           detail::format_double(m.l1) + "," + detail::format_double(m.l2) + "," +
           detail::format_double(m.pfz) + "," + detail::format_double(m.pfnz);
    for (double r : m.rmsfe) rep += "," + detail::format_double(r);
    rep += "\n";
  }
  detail::write_text(dir / "replicates.csv", rep);

  std::string sum = prov.comment_line() +
                    "\nestimator,metric,mean_ratio,se_ratio,used_replicates,ratio_of_means\n";
  for (const RatioSummary& r : study.summary)
    sum += r.estimator + "," + r.metric + "," + detail::format_double(r.mean_ratio) + "," +
           detail::format_double(r.se_ratio) + "," + std::to_string(r.used_replicates) + "," +
           detail::format_double(r.ratio_of_means) + "\n";
  detail::write_text(dir / "summary.csv", sum);
}

}  // namespace stvar
