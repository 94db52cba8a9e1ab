#pragma once

#include <charconv>
#include <filesystem>
#include <fstream>
#include <optional>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "salmix/diagnostics.hpp"
#include "salmix/mixture.hpp"

namespace salmix {

using json = nlohmann::json;

inline constexpr int kResultsSchemaVersion = 1;

struct Dataset {
  std::string name;
  std::vector<std::string> columns;
  Mat values;
  std::vector<std::string> labels; // empty when no label column

  Eigen::Index n() const { return values.rows(); }
  Eigen::Index p() const { return values.cols(); }
};

struct LoadOptions {
  char delimiter = ',';
  bool header = true;
  std::string label_column; // extracted by name when nonempty
};

namespace detail {

inline std::vector<std::string> split_line(const std::string& line, char delim) {
  std::vector<std::string> fields;
  std::string cur;
  bool quoted = false;
  for (std::size_t i = 0; i < line.size(); ++i) {
    const char c = line[i];
    if (quoted) {
      if (c == '"' && i + 1 < line.size() && line[i + 1] == '"') {
        cur += '"';
        ++i;
      } else if (c == '"') {
        quoted = false;
      } else {
        cur += c;
      }
    } else if (c == '"') {
      quoted = true;
    } else if (c == delim) {
      fields.push_back(cur);
      cur.clear();
    } else if (c != '\r') {
      cur += c;
    }
  }
  fields.push_back(cur);
  return fields;
}

inline std::string trimmed(const std::string& s) {
  const auto b = s.find_first_not_of(" \t");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t");
  return s.substr(b, e - b + 1);
}

inline double parse_double(const std::string& field, long row, long col) {
  const std::string t = trimmed(field);
  if (t.empty()) throw ParseError("missing value", row, col);
  double value = 0.0;
  const auto* begin = t.data();
  const auto* end = t.data() + t.size();
  const auto res = std::from_chars(begin, end, value);
  if (res.ec != std::errc{} || res.ptr != end)
    throw ParseError("non-numeric cell '" + t + "'", row, col);
  return value;
}

} // namespace detail

/// Locale-independent CSV reader. Rejects missing values outright, naming the
/// offending cell; the label column (if requested) is pulled out by name.
inline Dataset load_csv(const std::string& path, const LoadOptions& options = {}) {
  std::ifstream in(path);
  if (!in) throw ParseError("cannot open '" + path + "'");
  std::vector<std::vector<std::string>> rows;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty() || (line.size() == 1 && line[0] == '\r')) continue;
    rows.push_back(detail::split_line(line, options.delimiter));
  }
  if (rows.empty()) throw ParseError("empty file '" + path + "'");

  Dataset d;
  d.name = std::filesystem::path(path).stem().string();
  std::size_t first_data = 0;
  const std::size_t width = rows.front().size();
  for (std::size_t r = 0; r < rows.size(); ++r)
    if (rows[r].size() != width)
      throw ParseError("ragged row (expected " + std::to_string(width) + " fields, got " +
                           std::to_string(rows[r].size()) + ")",
                       static_cast<long>(r + 1));
  if (options.header) {
    for (const auto& h : rows.front()) d.columns.push_back(detail::trimmed(h));
    first_data = 1;
  } else {
    for (std::size_t c = 0; c < width; ++c) d.columns.push_back("col" + std::to_string(c + 1));
  }

  long label_idx = -1;
  if (!options.label_column.empty()) {
    for (std::size_t c = 0; c < d.columns.size(); ++c)
      if (d.columns[c] == options.label_column) label_idx = static_cast<long>(c);
    if (label_idx < 0)
      throw ParseError("label column '" + options.label_column + "' not found");
  }

  const auto n = static_cast<Eigen::Index>(rows.size() - first_data);
  const auto p = static_cast<Eigen::Index>(width - (label_idx >= 0 ? 1 : 0));
  if (n < 1 || p < 1) throw ParseError("dataset must have at least one row and one column");
  d.values.resize(n, p);
  if (label_idx >= 0) d.labels.reserve(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    const auto& fields = rows[first_data + i];
    Eigen::Index j = 0;
    for (std::size_t c = 0; c < width; ++c) {
      if (static_cast<long>(c) == label_idx) {
        d.labels.push_back(detail::trimmed(fields[c]));
        continue;
      }
      d.values(i, j++) = detail::parse_double(fields[c], static_cast<long>(first_data + i + 1),
                                              static_cast<long>(c + 1));
    }
  }
  if (label_idx >= 0) d.columns.erase(d.columns.begin() + label_idx);
  if (d.n() <= d.p())
    throw ParseError("need more rows than columns (n = " + std::to_string(d.n()) +
                     ", p = " + std::to_string(d.p()) + ")");
  return d;
}

struct StandardizeRecord {
  Vec mean;
  Vec sd;
};

/// Column z-scores; the transform record lets fitted parameters be reported
/// on either scale.
inline std::pair<Dataset, StandardizeRecord> standardize(const Dataset& d) {
  StandardizeRecord rec;
  rec.mean = d.values.colwise().mean().transpose();
  rec.sd.resize(d.p());
  for (Eigen::Index j = 0; j < d.p(); ++j) {
    const double ss = (d.values.col(j).array() - rec.mean[j]).square().sum();
    rec.sd[j] = std::sqrt(ss / static_cast<double>(d.n() - 1));
    if (!(rec.sd[j] > 0.0))
      throw DomainError("standardize: column '" + d.columns[j] + "' has zero variance");
  }
  Dataset out = d;
  for (Eigen::Index j = 0; j < d.p(); ++j)
    out.values.col(j) = (d.values.col(j).array() - rec.mean[j]) / rec.sd[j];
  return {std::move(out), std::move(rec)};
}

inline Dataset destandardize(const Dataset& d, const StandardizeRecord& rec) {
  Dataset out = d;
  for (Eigen::Index j = 0; j < d.p(); ++j)
    out.values.col(j) = d.values.col(j).array() * rec.sd[j] + rec.mean[j];
  return out;
}

/// Fitted parameters mapped back to the original data scale.
inline MixtureParams destandardize_params(const MixtureParams& params,
                                          const StandardizeRecord& rec) {
  const Mat d = rec.sd.asDiagonal();
  std::vector<SalParams> comps;
  comps.reserve(params.components.size());
  for (const auto& c : params.components)
    comps.emplace_back(rec.mean + rec.sd.cwiseProduct(c.mu), rec.sd.cwiseProduct(c.alpha),
                       SpdMatrix(d * c.sigma.matrix() * d));
  return MixtureParams(params.weights, std::move(comps));
}

// ---------------------------------------------------------------------------
// Structured-text persistence (versioned JSON, atomic writes)
// ---------------------------------------------------------------------------

inline void atomic_write_text(const std::string& path, const std::string& text) {
  namespace fs = std::filesystem;
  const fs::path target(path);
  if (target.has_parent_path()) fs::create_directories(target.parent_path());
  const fs::path tmp = target.string() + ".tmp";
  {
    std::ofstream out(tmp, std::ios::trunc);
    if (!out) throw Error("cannot write '" + tmp.string() + "'");
    out << text;
  }
  fs::rename(tmp, target);
}

inline json params_to_json(const MixtureParams& p) {
  json comps = json::array();
  for (const auto& c : p.components) {
    json sigma = json::array();
    for (Eigen::Index i = 0; i < c.dim(); ++i) {
      json row = json::array();
      for (Eigen::Index j = 0; j < c.dim(); ++j) row.push_back(c.sigma.matrix()(i, j));
      sigma.push_back(row);
    }
    comps.push_back({{"mu", std::vector<double>(c.mu.data(), c.mu.data() + c.mu.size())},
                     {"alpha", std::vector<double>(c.alpha.data(), c.alpha.data() + c.alpha.size())},
                     {"sigma", sigma}});
  }
  return {{"weights", std::vector<double>(p.weights.data(), p.weights.data() + p.weights.size())},
          {"components", comps}};
}

inline MixtureParams params_from_json(const json& j) {
  const auto wv = j.at("weights").get<std::vector<double>>();
  Vec w = Eigen::Map<const Vec>(wv.data(), static_cast<Eigen::Index>(wv.size()));
  std::vector<SalParams> comps;
  for (const auto& c : j.at("components")) {
    const auto mv = c.at("mu").get<std::vector<double>>();
    const auto av = c.at("alpha").get<std::vector<double>>();
    const auto p = static_cast<Eigen::Index>(mv.size());
    Mat sigma(p, p);
    for (Eigen::Index i = 0; i < p; ++i)
      for (Eigen::Index jj = 0; jj < p; ++jj) sigma(i, jj) = c.at("sigma")[i][jj].get<double>();
    comps.emplace_back(Eigen::Map<const Vec>(mv.data(), p), Eigen::Map<const Vec>(av.data(), p),
                       SpdMatrix(sigma));
  }
  return MixtureParams(w, std::move(comps));
}

inline json summary_to_json(const PosteriorSummary& s) {
  json arr = json::array();
  for (const auto& e : s.entries)
    arr.push_back(
        {{"name", e.name}, {"mean", e.mean}, {"sd", e.sd}, {"lo", e.lo}, {"hi", e.hi}});
  return arr;
}

inline void save_results(const std::string& path, json results) {
  results["schema_version"] = kResultsSchemaVersion;
  atomic_write_text(path, results.dump(2) + "\n");
}

inline json load_results(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ParseError("cannot open '" + path + "'");
  json j;
  try {
    in >> j;
  } catch (const json::exception& e) {
    throw ParseError(std::string("invalid results file: ") + e.what());
  }
  if (!j.contains("schema_version") || j["schema_version"].get<int>() != kResultsSchemaVersion)
    throw Error("results file '" + path + "' has an incompatible schema version");
  return j;
}

inline void write_csv(const std::string& path, const Dataset& d,
                      const std::string& label_column = "") {
  std::ostringstream out;
  out.precision(17);
  for (std::size_t c = 0; c < d.columns.size(); ++c)
    out << (c ? "," : "") << d.columns[c];
  const bool with_labels = !d.labels.empty() && !label_column.empty();
  if (with_labels) out << "," << label_column;
  out << "\n";
  for (Eigen::Index i = 0; i < d.n(); ++i) {
    for (Eigen::Index j = 0; j < d.p(); ++j) out << (j ? "," : "") << d.values(i, j);
    if (with_labels) out << "," << d.labels[i];
    out << "\n";
  }
  atomic_write_text(path, out.str());
}

/// Plot-ready lattice evaluation of the fitted mixture log-density (p = 2).
inline void write_density_grid(const std::string& path, const MixtureParams& params, double x_lo,
                               double x_hi, double y_lo, double y_hi, int nx, int ny) {
  if (params.p() != 2) throw ShapeError("write_density_grid: requires p = 2");
  if (nx < 2 || ny < 2) throw DomainError("write_density_grid: grid must be at least 2x2");
  const auto caches = component_caches(params);
  const Vec logw = params.weights.array().log();
  std::ostringstream out;
  out.precision(17);
  out << "x\ty\tlog_density\n";
  Vec x(2), lt(params.g());
  for (int i = 0; i < nx; ++i) {
    x[0] = x_lo + (x_hi - x_lo) * i / (nx - 1.0);
    for (int j = 0; j < ny; ++j) {
      x[1] = y_lo + (y_hi - y_lo) * j / (ny - 1.0);
      for (int k = 0; k < params.g(); ++k) {
        try {
          lt[k] = logw[k] + caches[k].log_density(x);
        } catch (const UnboundedDensity&) {
          lt[k] = std::numeric_limits<double>::infinity();
        }
      }
      out << x[0] << "\t" << x[1] << "\t" << log_sum_exp(lt) << "\n";
    }
  }
  atomic_write_text(path, out.str());
}

/// Every k-th sweep of a log-likelihood trace, exactly.
inline std::vector<double> thin_trace(const std::vector<double>& trace, int factor) {
  if (factor < 1) throw DomainError("thin_trace: factor must be >= 1");
  std::vector<double> out;
  for (std::size_t i = 0; i < trace.size(); i += factor) out.push_back(trace[i]);
  return out;
}

} // namespace salmix
