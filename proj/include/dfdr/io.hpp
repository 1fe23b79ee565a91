#pragma once

#include <algorithm>
#include <cctype>
#include <cstdint>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <istream>
#include <optional>
#include <ostream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <string_view>
#include <unordered_set>
#include <vector>

#include "dfdr/fisher.hpp"
#include "dfdr/oracle.hpp"
#include "dfdr/procedures.hpp"
#include "dfdr/simulation.hpp"
#include "dfdr/step_function.hpp"

namespace dfdr {

namespace io_detail {

inline std::string trim(std::string_view s) {
  std::size_t b = 0, e = s.size();
  while (b < e && std::isspace(static_cast<unsigned char>(s[b]))) ++b;
  while (e > b && std::isspace(static_cast<unsigned char>(s[e - 1]))) --e;
  return std::string(s.substr(b, e - b));
}

inline std::vector<std::string> split(std::string_view s, char sep) {
  std::vector<std::string> out;
  std::size_t start = 0;
  for (std::size_t i = 0; i <= s.size(); ++i) {
    if (i == s.size() || s[i] == sep) {
      out.push_back(trim(s.substr(start, i - start)));
      start = i + 1;
    }
  }
  return out;
}

inline std::string lower(std::string s) {
  for (char& c : s) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  return s;
}

[[noreturn]] inline void fail_at(std::size_t line, const std::string& what) {
  throw std::runtime_error("line " + std::to_string(line) + ": " + what);
}

inline double parse_double(const std::string& token, std::size_t line) {
  if (token.empty()) fail_at(line, "empty numeric field");
  char* end = nullptr;
  const double v = std::strtod(token.c_str(), &end);
  if (end != token.c_str() + token.size())
    fail_at(line, "not a number: '" + token + "'");
  return v;
}

inline long long parse_count(const std::string& token, std::size_t line) {
  if (token.empty()) fail_at(line, "empty count field");
  char* end = nullptr;
  const long long v = std::strtoll(token.c_str(), &end, 10);
  if (end != token.c_str() + token.size())
    fail_at(line, "not an integer: '" + token + "'");
  if (v < 0) fail_at(line, "negative count");
  return v;
}

inline std::string format_full(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

inline std::string format_fixed4(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.4f", v);
  return buf;
}

inline std::vector<double> parse_double_list(const std::string& value,
                                             std::size_t line) {
  std::vector<double> out;
  for (const auto& tok : split(value, ','))
    if (!tok.empty()) out.push_back(parse_double(tok, line));
  if (out.empty()) fail_at(line, "empty list");
  return out;
}

}  // namespace io_detail

// ---------------------------------------------------------------------------
// Distribution files: one record per hypothesis, blank-line separated.
// Each record is key=value lines; `support` and `cdf` are parallel
// comma-separated decimal lists, `id` and `true_null` are optional.
// ---------------------------------------------------------------------------

struct DistRecord {
  std::string id;
  DiscretePValueDist dist;
  bool true_null = true;
};

inline std::vector<DistRecord> read_distribution_stream(
    std::istream& in, std::vector<std::string>* warnings = nullptr) {
  std::vector<DistRecord> records;
  DistRecord current;
  bool have_support = false, have_cdf = false, open = false;
  std::size_t line_no = 0, record_line = 0;

  const auto flush = [&]() {
    if (!open) return;
    if (!have_support || !have_cdf)
      io_detail::fail_at(record_line, "record missing support or cdf");
    if (current.id.empty())
      current.id = "H" + std::to_string(records.size() + 1);
    try {
      validate_dist(current.dist);
    } catch (const std::exception& e) {
      io_detail::fail_at(record_line,
                         "record '" + current.id + "': " + e.what());
    }
    if (warnings != nullptr && !is_superuniform(current.dist))
      warnings->push_back("record '" + current.id +
                          "' is not stochastically larger than uniform "
                          "(mid-p style); FDR guarantees need only F(0)=0");
    records.push_back(std::move(current));
    current = DistRecord{};
    have_support = have_cdf = open = false;
  };

  std::string raw;
  while (std::getline(in, raw)) {
    ++line_no;
    const std::string line = io_detail::trim(raw);
    if (line.empty()) {
      flush();
      continue;
    }
    if (line[0] == '#') continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos)
      io_detail::fail_at(line_no, "expected key=value, got '" + line + "'");
    const std::string key = io_detail::lower(io_detail::trim(line.substr(0, eq)));
    const std::string value = io_detail::trim(line.substr(eq + 1));
    if (!open) record_line = line_no;
    open = true;
    if (key == "id") {
      current.id = value;
    } else if (key == "true_null") {
      current.true_null = value != "0" && io_detail::lower(value) != "false";
    } else if (key == "support") {
      current.dist.support = io_detail::parse_double_list(value, line_no);
      have_support = true;
    } else if (key == "cdf") {
      current.dist.cdf = io_detail::parse_double_list(value, line_no);
      have_cdf = true;
    } else {
      io_detail::fail_at(line_no, "unknown key '" + key + "'");
    }
  }
  flush();
  if (records.empty()) throw std::runtime_error("distribution file has no records");
  return records;
}

inline void write_distribution_stream(std::ostream& out,
                                      const std::vector<DistRecord>& records) {
  for (std::size_t i = 0; i < records.size(); ++i) {
    const auto& r = records[i];
    if (i > 0) out << "\n";
    out << "id=" << r.id << "\n";
    if (!r.true_null) out << "true_null=0\n";
    out << "support=";
    for (std::size_t k = 0; k < r.dist.support.size(); ++k)
      out << (k ? "," : "") << io_detail::format_full(r.dist.support[k]);
    out << "\ncdf=";
    for (std::size_t k = 0; k < r.dist.cdf.size(); ++k)
      out << (k ? "," : "") << io_detail::format_full(r.dist.cdf[k]);
    out << "\n";
  }
}

inline std::vector<DistRecord> read_distribution_file(
    const std::string& path, std::vector<std::string>* warnings = nullptr) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open distribution file: " + path);
  try {
    return read_distribution_stream(in, warnings);
  } catch (const std::exception& e) {
    throw std::runtime_error(path + ": " + e.what());
  }
}

inline std::vector<PointMassDist> to_point_masses(
    const std::vector<DistRecord>& records) {
  std::vector<PointMassDist> dists;
  dists.reserve(records.size());
  for (const auto& r : records) dists.push_back(to_point_mass(r.dist, r.true_null));
  return dists;
}

// ---------------------------------------------------------------------------
// CSV inputs. Header row required.
// ---------------------------------------------------------------------------

struct CountRecord {
  std::string id;
  long long event_count = 0;
  long long total_count = 0;
};

inline std::vector<CountRecord> read_count_csv(std::istream& in) {
  std::string raw;
  std::size_t line_no = 0;
  std::vector<CountRecord> records;
  std::unordered_set<std::string> seen;
  bool header_done = false;
  while (std::getline(in, raw)) {
    ++line_no;
    const std::string line = io_detail::trim(raw);
    if (line.empty() || line[0] == '#') continue;
    const auto fields = io_detail::split(line, ',');
    if (!header_done) {
      if (fields.size() != 3 || io_detail::lower(fields[0]) != "id" ||
          io_detail::lower(fields[1]) != "event_count" ||
          io_detail::lower(fields[2]) != "total_count")
        io_detail::fail_at(line_no,
                           "expected header 'id,event_count,total_count'");
      header_done = true;
      continue;
    }
    if (fields.size() != 3) io_detail::fail_at(line_no, "expected 3 fields");
    CountRecord r;
    r.id = fields[0];
    if (r.id.empty()) io_detail::fail_at(line_no, "empty id");
    r.event_count = io_detail::parse_count(fields[1], line_no);
    r.total_count = io_detail::parse_count(fields[2], line_no);
    if (r.event_count > r.total_count)
      io_detail::fail_at(line_no, "event_count exceeds total_count");
    if (!seen.insert(r.id).second)
      io_detail::fail_at(line_no, "duplicate id '" + r.id + "'");
    records.push_back(std::move(r));
  }
  if (!header_done) throw std::runtime_error("empty counts file");
  if (records.empty()) throw std::runtime_error("counts file has no data rows");
  return records;
}

struct PValueRecord {
  std::string id;
  double pvalue = 1.0;
};

inline std::vector<PValueRecord> read_pvalue_csv(std::istream& in) {
  std::string raw;
  std::size_t line_no = 0;
  std::vector<PValueRecord> records;
  std::unordered_set<std::string> seen;
  bool header_done = false;
  while (std::getline(in, raw)) {
    ++line_no;
    const std::string line = io_detail::trim(raw);
    if (line.empty() || line[0] == '#') continue;
    const auto fields = io_detail::split(line, ',');
    if (!header_done) {
      if (fields.size() != 2 || io_detail::lower(fields[0]) != "id" ||
          io_detail::lower(fields[1]) != "pvalue")
        io_detail::fail_at(line_no, "expected header 'id,pvalue'");
      header_done = true;
      continue;
    }
    if (fields.size() != 2) io_detail::fail_at(line_no, "expected 2 fields");
    PValueRecord r;
    r.id = fields[0];
    if (r.id.empty()) io_detail::fail_at(line_no, "empty id");
    r.pvalue = io_detail::parse_double(fields[1], line_no);
    if (r.pvalue < 0.0 || r.pvalue > 1.0)
      io_detail::fail_at(line_no, "p-value outside [0, 1]");
    if (!seen.insert(r.id).second)
      io_detail::fail_at(line_no, "duplicate id '" + r.id + "'");
    records.push_back(std::move(r));
  }
  if (!header_done) throw std::runtime_error("empty p-value file");
  if (records.empty()) throw std::runtime_error("p-value file has no data rows");
  return records;
}

// ---------------------------------------------------------------------------
// Report and table writers.
// ---------------------------------------------------------------------------

/// Per-hypothesis report: id, pvalue, adjusted_<method>..., rejected_<method>...
inline void write_outcome_csv(std::ostream& out,
                              const std::vector<std::string>& ids,
                              const std::vector<double>& pvalues,
                              const std::vector<Method>& methods,
                              const std::vector<std::vector<double>>& adjusted,
                              double alpha, bool full_precision) {
  out << "id,pvalue";
  for (const Method m : methods)
    out << ",adjusted_" << io_detail::lower(std::string(method_label(m)));
  for (const Method m : methods)
    out << ",rejected_" << io_detail::lower(std::string(method_label(m)));
  out << "\n";
  for (std::size_t i = 0; i < ids.size(); ++i) {
    out << ids[i] << ",";
    out << (full_precision ? io_detail::format_full(pvalues[i])
                           : io_detail::format_fixed4(pvalues[i]));
    for (std::size_t mi = 0; mi < methods.size(); ++mi)
      out << ","
          << (full_precision ? io_detail::format_full(adjusted[mi][i])
                             : io_detail::format_fixed4(adjusted[mi][i]));
    for (std::size_t mi = 0; mi < methods.size(); ++mi)
      out << "," << (adjusted[mi][i] <= alpha ? 1 : 0);
    out << "\n";
  }
}

/// Grid rows x,G,Gunif.
inline void write_grid_csv(std::ostream& out, const std::vector<GridRow>& rows) {
  out << "x,G,Gunif\n";
  for (const auto& r : rows)
    out << io_detail::format_full(r.x) << "," << io_detail::format_full(r.g)
        << "," << io_detail::format_full(r.gunif) << "\n";
}

/// Enumeration trace: raw p-values, order statistics, adjusted values, the
/// per-hypothesis atom probabilities and the joint probability.
inline void write_trace_csv(std::ostream& out, const ExactRates& rates,
                            std::size_t n) {
  for (std::size_t j = 1; j <= n; ++j) out << "pv" << j << ",";
  for (std::size_t j = 1; j <= n; ++j) out << "sorted" << j << ",";
  for (std::size_t j = 1; j <= n; ++j) out << "adjusted" << j << ",";
  for (std::size_t j = 1; j <= n; ++j) out << "prob" << j << ",";
  out << "joint_prob,rejections\n";
  for (const auto& row : rates.trace) {
    for (const double v : row.pvalues) out << io_detail::format_fixed4(v) << ",";
    for (const double v : row.sorted) out << io_detail::format_fixed4(v) << ",";
    if (row.adjusted.empty())
      for (std::size_t j = 0; j < n; ++j) out << ",";
    else
      for (const double v : row.adjusted)
        out << io_detail::format_fixed4(v) << ",";
    for (const double v : row.atom_probs)
      out << io_detail::format_fixed4(v) << ",";
    out << io_detail::format_full(row.joint_prob) << "," << row.rejections
        << "\n";
  }
}

enum class SimMetric { power, fdr };

/// Study table, one row per configuration: m, m3, m1, q3, then the method
/// columns in the fixed order DBH, BH, [plugin,] DBY, BY, DSarkar, Sarkar.
inline void write_sim_results_csv(std::ostream& out,
                                  const std::vector<SimResult>& results,
                                  SimMetric metric = SimMetric::power) {
  if (results.empty()) return;
  const Method column_order[] = {Method::dbh, Method::bh,     Method::dby,
                                 Method::by,  Method::dsarkar, Method::sarkar};
  const bool with_plugin = results.front().has_plugin;
  out << "m,m3,m1,q3";
  for (const Method m : column_order) {
    out << "," << method_label(m);
    if (m == Method::bh && with_plugin) out << "," << results.front().plugin_label;
  }
  out << "\n";
  for (const auto& r : results) {
    out << r.config.positions << "," << r.config.false_nulls << ","
        << r.config.sparse_true_nulls << "," << r.config.effect_prob;
    for (const Method m : column_order) {
      const auto it = std::find(r.methods.begin(), r.methods.end(), m);
      if (it == r.methods.end()) {
        out << ",";
      } else {
        const auto& s = r.stats[static_cast<std::size_t>(it - r.methods.begin())];
        out << ","
            << io_detail::format_fixed4(metric == SimMetric::power ? s.power
                                                                   : s.fdr);
      }
      if (m == Method::bh && with_plugin)
        out << ","
            << io_detail::format_fixed4(metric == SimMetric::power
                                            ? r.plugin_stats.power
                                            : r.plugin_stats.fdr);
    }
    out << "\n";
  }
}

// ---------------------------------------------------------------------------
// Simulation config files: key=value lines plus one `config=` row per cell
// (fields N,m,m3,m1,q3). File-level trials/seed/alpha apply to every row.
// ---------------------------------------------------------------------------

struct SimFileConfig {
  std::vector<SimConfig> grid;
  std::vector<Method> methods = {Method::dbh, Method::bh,      Method::dby,
                                 Method::by,  Method::dsarkar, Method::sarkar};
  std::optional<PluginProcedure> plugin;
};

inline std::vector<double> read_number_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open constants file: " + path);
  std::vector<double> out;
  std::string tok;
  while (std::getline(in, tok)) {
    for (const auto& field : io_detail::split(tok, ','))
      if (!field.empty()) out.push_back(io_detail::parse_double(field, 1));
  }
  if (out.empty()) throw std::runtime_error("constants file is empty: " + path);
  return out;
}

inline SimFileConfig read_sim_config_stream(std::istream& in) {
  SimFileConfig file;
  int trials = 500;
  std::uint64_t seed = 1;
  double alpha = 0.05;
  std::string plugin_path, plugin_label = "plugin";
  bool plugin_stepdown = true;
  std::vector<std::vector<double>> rows;
  std::string raw;
  std::size_t line_no = 0;
  while (std::getline(in, raw)) {
    ++line_no;
    const std::string line = io_detail::trim(raw);
    if (line.empty() || line[0] == '#') continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos)
      io_detail::fail_at(line_no, "expected key=value, got '" + line + "'");
    const std::string key = io_detail::lower(io_detail::trim(line.substr(0, eq)));
    const std::string value = io_detail::trim(line.substr(eq + 1));
    if (key == "trials") {
      trials = static_cast<int>(io_detail::parse_count(value, line_no));
    } else if (key == "seed") {
      seed = static_cast<std::uint64_t>(io_detail::parse_count(value, line_no));
    } else if (key == "alpha") {
      alpha = io_detail::parse_double(value, line_no);
    } else if (key == "methods") {
      file.methods.clear();
      for (const auto& name : io_detail::split(value, ','))
        if (!name.empty()) file.methods.push_back(parse_method(name));
    } else if (key == "config") {
      const auto fields = io_detail::parse_double_list(value, line_no);
      if (fields.size() != 5)
        io_detail::fail_at(line_no, "config row needs N,m,m3,m1,q3");
      rows.push_back(fields);
    } else if (key == "plugin_constants") {
      plugin_path = value;
    } else if (key == "plugin_label") {
      plugin_label = value;
    } else if (key == "plugin_stepdown") {
      plugin_stepdown = value != "0";
    } else {
      io_detail::fail_at(line_no, "unknown key '" + key + "'");
    }
  }
  if (rows.empty()) throw std::runtime_error("simulation config has no config rows");
  for (const auto& f : rows) {
    SimConfig cfg;
    cfg.group_size = static_cast<int>(f[0]);
    cfg.positions = static_cast<int>(f[1]);
    cfg.false_nulls = static_cast<int>(f[2]);
    cfg.sparse_true_nulls = static_cast<int>(f[3]);
    cfg.effect_prob = f[4];
    cfg.trials = trials;
    cfg.seed = seed;
    cfg.alpha = alpha;
    validate_config(cfg);
    file.grid.push_back(cfg);
  }
  if (!plugin_path.empty()) {
    PluginProcedure plugin;
    plugin.label = plugin_label;
    plugin.critical = read_number_file(plugin_path);
    plugin.use_step_down = plugin_stepdown;
    file.plugin = std::move(plugin);
  }
  return file;
}

inline SimFileConfig read_sim_config_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open simulation config: " + path);
  try {
    return read_sim_config_stream(in);
  } catch (const std::exception& e) {
    throw std::runtime_error(path + ": " + e.what());
  }
}

}  // namespace dfdr
