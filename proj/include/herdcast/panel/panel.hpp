#pragma once

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <map>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "herdcast/core/csv.hpp"
#include "herdcast/core/error.hpp"
#include "herdcast/panel/schema.hpp"

namespace herdcast::panel {

using Matrix = Eigen::MatrixXd;

struct CountyYearKey {
  int county_id = 0;
  std::string county_name;
  int year = 0;

  friend bool operator==(const CountyYearKey&, const CountyYearKey&) = default;
};

// County-year indicator panel sorted by (county_id, year). Cleaned panels are
// regular: every county covers the same contiguous year range.
struct IndicatorPanel {
  std::vector<CountyYearKey> keys;
  Matrix values;
  std::vector<std::string> feature_names;
  std::vector<Orientation> orientation;

  std::size_t rows() const { return keys.size(); }
  std::size_t features() const { return feature_names.size(); }

  std::vector<std::string> county_names() const {
    std::vector<std::string> names;
    for (const auto& k : keys)
      if (names.empty() || names.back() != k.county_name) names.push_back(k.county_name);
    return names;
  }

  std::vector<int> years() const {
    std::set<int> ys;
    for (const auto& k : keys) ys.insert(k.year);
    return {ys.begin(), ys.end()};
  }

  std::size_t county_count() const { return county_names().size(); }

  bool is_regular() const {
    const auto ys = years();
    const auto nc = county_count();
    if (keys.size() != nc * ys.size()) return false;
    for (std::size_t r = 0; r < keys.size(); ++r) {
      if (keys[r].county_id != static_cast<int>(r / ys.size())) return false;
      if (keys[r].year != ys[r % ys.size()]) return false;
    }
    return true;
  }

  // counties x features block for one year of a regular panel.
  Matrix year_slice(int year) const {
    const auto ys = years();
    const auto it = std::find(ys.begin(), ys.end(), year);
    if (it == ys.end()) throw ValidationError("year " + std::to_string(year) + " not in panel");
    const auto t = static_cast<Eigen::Index>(it - ys.begin());
    const auto T = static_cast<Eigen::Index>(ys.size());
    const auto nc = static_cast<Eigen::Index>(county_count());
    Matrix out(nc, values.cols());
    for (Eigen::Index c = 0; c < nc; ++c) out.row(c) = values.row(c * T + t);
    return out;
  }

  IndicatorPanel with_values(Matrix v) const {
    IndicatorPanel p = *this;
    p.values = std::move(v);
    return p;
  }
};

struct LoadReport {
  std::size_t rows_read = 0;
  std::size_t rows_removed_impossible = 0;
  std::size_t rows_imputed = 0;
  std::size_t values_interpolated = 0;
  std::vector<std::string> counties_rejected;
};

struct LoadResult {
  IndicatorPanel panel;
  LoadReport report;
};

namespace detail {

inline bool is_missing_token(const std::string& s) {
  return s.empty() || s == "NA" || s == "NaN" || s == "nan" || s == "-";
}

inline bool impossible(const FeatureSpec& f, double v) {
  if (v < 0.0) return true;
  return f.is_percentage() && v > 100.0;
}

// Linear interpolation between observed points; nearest value beyond the ends.
// Returns the number of filled entries, or -1 if nothing was observed.
inline int fill_series(std::vector<double>& s) {
  std::vector<std::size_t> obs;
  for (std::size_t i = 0; i < s.size(); ++i)
    if (!std::isnan(s[i])) obs.push_back(i);
  if (obs.empty()) return -1;
  int filled = 0;
  for (std::size_t i = 0; i < s.size(); ++i) {
    if (!std::isnan(s[i])) continue;
    ++filled;
    const auto hi = std::lower_bound(obs.begin(), obs.end(), i);
    if (hi == obs.begin()) {
      s[i] = s[obs.front()];
    } else if (hi == obs.end()) {
      s[i] = s[obs.back()];
    } else {
      const std::size_t b = *hi, a = *(hi - 1);
      const double w = static_cast<double>(i - a) / static_cast<double>(b - a);
      s[i] = (1.0 - w) * s[a] + w * s[b];
    }
  }
  return filled;
}

}  // namespace detail

// Validates, cleans and sorts a county-year CSV. Columns not in the schema are
// ignored. Rows with impossible values are dropped; year gaps and missing cells
// are filled within each county's series.
inline LoadResult parse_panel(std::istream& in, const Schema& schema) {
  const auto table = csv::parse(in);
  if (table.header.empty()) throw SchemaError("empty input: no header row");

  auto column = [&](const std::string& name) -> long {
    const auto it = std::find(table.header.begin(), table.header.end(), name);
    return it == table.header.end() ? -1 : static_cast<long>(it - table.header.begin());
  };
  const long county_col = column("county");
  const long year_col = column("year");
  if (county_col < 0) throw SchemaError("missing column 'county'");
  if (year_col < 0) throw SchemaError("missing column 'year'");
  std::vector<long> feature_cols;
  for (const auto& f : schema.features) {
    const long c = column(f.name);
    if (c < 0) throw SchemaError("missing feature column '" + f.name + "'");
    feature_cols.push_back(c);
  }

  LoadResult result;
  auto& report = result.report;
  const auto p = schema.size();
  const double nan = std::numeric_limits<double>::quiet_NaN();

  std::map<std::string, std::map<int, std::vector<double>>> by_county;
  std::set<std::pair<std::string, int>> seen;
  for (const auto& row : table.rows) {
    ++report.rows_read;
    if (row.fields.size() != table.header.size())
      throw ParseError(row.line, "expected " + std::to_string(table.header.size()) + " fields, found " +
                                     std::to_string(row.fields.size()));
    const std::string& county = row.fields[static_cast<std::size_t>(county_col)];
    if (county.empty()) throw ParseError(row.line, "empty county name");
    int year = 0;
    if (!csv::parse_int(row.fields[static_cast<std::size_t>(year_col)], year))
      throw ParseError(row.line, "invalid year '" + row.fields[static_cast<std::size_t>(year_col)] + "'");
    if (!seen.insert({county, year}).second)
      throw ValidationError("duplicate key (" + county + ", " + std::to_string(year) + ")");

    std::vector<double> v(p, nan);
    bool drop = false;
    for (std::size_t j = 0; j < p; ++j) {
      const auto& cell = row.fields[static_cast<std::size_t>(feature_cols[j])];
      if (detail::is_missing_token(cell)) continue;
      double x = 0.0;
      if (!csv::parse_double(cell, x) || !std::isfinite(x))
        throw ParseError(row.line, "invalid number '" + cell + "' in column '" + schema.features[j].name + "'");
      if (detail::impossible(schema.features[j], x)) drop = true;
      v[j] = x;
    }
    if (drop) {
      ++report.rows_removed_impossible;
      continue;
    }
    by_county[county][year] = std::move(v);
  }
  if (by_county.empty()) throw SchemaError("no usable data rows");

  int first = std::numeric_limits<int>::max(), last = std::numeric_limits<int>::min();
  for (const auto& [c, years] : by_county) {
    first = std::min(first, years.begin()->first);
    last = std::max(last, years.rbegin()->first);
  }
  const auto T = static_cast<std::size_t>(last - first + 1);

  struct CountyBlock {
    std::string name;
    std::vector<std::vector<double>> series;  // feature -> year
  };
  std::vector<CountyBlock> kept;
  for (const auto& [county, years] : by_county) {
    CountyBlock block{county, std::vector<std::vector<double>>(p, std::vector<double>(T, nan))};
    for (const auto& [year, v] : years)
      for (std::size_t j = 0; j < p; ++j) block.series[j][static_cast<std::size_t>(year - first)] = v[j];
    bool reject = false;
    std::size_t filled = 0;
    for (auto& s : block.series) {
      const int n = detail::fill_series(s);
      if (n < 0) {
        reject = true;
        break;
      }
      filled += static_cast<std::size_t>(n);
    }
    if (reject) {
      report.counties_rejected.push_back(county);
      continue;
    }
    const auto imputed_rows = T - years.size();
    report.rows_imputed += imputed_rows;
    report.values_interpolated += filled - imputed_rows * p;
    kept.push_back(std::move(block));
  }
  if (kept.empty()) throw ValidationError("every county was rejected during cleaning");

  auto& panel = result.panel;
  panel.feature_names = schema.names();
  panel.orientation = schema.orientations();
  panel.values.resize(static_cast<Eigen::Index>(kept.size() * T), static_cast<Eigen::Index>(p));
  for (std::size_t c = 0; c < kept.size(); ++c) {
    for (std::size_t t = 0; t < T; ++t) {
      const auto r = static_cast<Eigen::Index>(c * T + t);
      panel.keys.push_back({static_cast<int>(c), kept[c].name, first + static_cast<int>(t)});
      for (std::size_t j = 0; j < p; ++j) panel.values(r, static_cast<Eigen::Index>(j)) = kept[c].series[j][t];
    }
  }
  return result;
}

inline LoadResult load_panel(const std::string& path, const Schema& schema) {
  std::ifstream in(path);
  if (!in) throw ValidationError("cannot open panel file " + path);
  return parse_panel(in, schema);
}

inline void write_panel(std::ostream& out, const IndicatorPanel& panel,
                        const std::vector<std::string>* provenance = nullptr) {
  std::vector<std::string> header = {"county", "year"};
  header.insert(header.end(), panel.feature_names.begin(), panel.feature_names.end());
  if (provenance) header.push_back("provenance");
  csv::write_row(out, header);
  for (std::size_t r = 0; r < panel.rows(); ++r) {
    std::vector<std::string> fields = {panel.keys[r].county_name, std::to_string(panel.keys[r].year)};
    for (Eigen::Index j = 0; j < panel.values.cols(); ++j)
      fields.push_back(csv::format(panel.values(static_cast<Eigen::Index>(r), j)));
    if (provenance) fields.push_back((*provenance)[r]);
    csv::write_row(out, fields);
  }
}

inline void save_panel(const std::string& path, const IndicatorPanel& panel,
                       const std::vector<std::string>* provenance = nullptr) {
  std::ofstream out(path);
  if (!out) throw Error("cannot write " + path);
  write_panel(out, panel, provenance);
}

}  // namespace herdcast::panel
