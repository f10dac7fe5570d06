#pragma once

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <numeric>
#include <queue>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>
#include <nlohmann/json.hpp>

#include "herdcast/core/csv.hpp"
#include "herdcast/core/error.hpp"
#include "herdcast/core/hash.hpp"

namespace herdcast::geo {

using Matrix = Eigen::MatrixXd;

inline constexpr double earth_radius_km = 6371.0;
inline constexpr double pi = 3.14159265358979323846;

struct LatLon {
  double lat = 0.0;
  double lon = 0.0;
};

struct CentroidTable {
  std::vector<std::string> names;
  std::vector<LatLon> points;

  std::size_t size() const { return names.size(); }

  // Reorders to match the given county list; every name must be present.
  CentroidTable aligned_to(const std::vector<std::string>& counties) const {
    CentroidTable out;
    for (const auto& c : counties) {
      const auto it = std::find(names.begin(), names.end(), c);
      if (it == names.end()) throw ValidationError("no centroid for county '" + c + "'");
      out.names.push_back(c);
      out.points.push_back(points[static_cast<std::size_t>(it - names.begin())]);
    }
    return out;
  }
};

inline CentroidTable parse_centroids(std::istream& in) {
  const auto table = csv::parse(in);
  const auto col = [&](const char* n) {
    const auto it = std::find(table.header.begin(), table.header.end(), n);
    if (it == table.header.end()) throw SchemaError(std::string("centroid file missing column '") + n + "'");
    return static_cast<std::size_t>(it - table.header.begin());
  };
  const auto ci = col("county"), la = col("lat"), lo = col("lon");
  CentroidTable t;
  for (const auto& row : table.rows) {
    if (row.fields.size() != table.header.size()) throw ParseError(row.line, "wrong field count in centroid file");
    LatLon p;
    if (!csv::parse_double(row.fields[la], p.lat) || !csv::parse_double(row.fields[lo], p.lon))
      throw ParseError(row.line, "invalid coordinate");
    if (std::abs(p.lat) > 90.0 || std::abs(p.lon) > 180.0) throw ParseError(row.line, "coordinate out of range");
    if (std::find(t.names.begin(), t.names.end(), row.fields[ci]) != t.names.end())
      throw ValidationError("duplicate centroid for '" + row.fields[ci] + "'");
    t.names.push_back(row.fields[ci]);
    t.points.push_back(p);
  }
  return t;
}

inline CentroidTable load_centroids(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ValidationError("cannot open centroid file " + path);
  return parse_centroids(in);
}

inline double haversine(const LatLon& a, const LatLon& b) {
  const double rad = pi / 180.0;
  const double dlat = (b.lat - a.lat) * rad, dlon = (b.lon - a.lon) * rad;
  const double s = std::sin(dlat / 2) * std::sin(dlat / 2) +
                   std::cos(a.lat * rad) * std::cos(b.lat * rad) * std::sin(dlon / 2) * std::sin(dlon / 2);
  return 2.0 * earth_radius_km * std::asin(std::min(1.0, std::sqrt(s)));
}

inline Matrix distance_matrix(const CentroidTable& c) {
  const auto n = static_cast<Eigen::Index>(c.size());
  Matrix d = Matrix::Zero(n, n);
  for (Eigen::Index i = 0; i < n; ++i)
    for (Eigen::Index j = i + 1; j < n; ++j)
      d(i, j) = d(j, i) = haversine(c.points[static_cast<std::size_t>(i)], c.points[static_cast<std::size_t>(j)]);
  return d;
}

// Other nodes sorted by (distance, index).
inline std::vector<int> neighbor_order(const Matrix& d, int i) {
  std::vector<int> idx;
  for (int j = 0; j < d.rows(); ++j)
    if (j != i) idx.push_back(j);
  std::stable_sort(idx.begin(), idx.end(), [&](int a, int b) { return d(i, a) < d(i, b); });
  return idx;
}

struct SpatialGraph {
  std::vector<std::string> names;
  Matrix distances;
  Matrix adjacency;
  std::vector<std::pair<int, int>> edge_index;  // directed, sorted
  Matrix normalized;
  int k = 3;

  std::size_t nodes() const { return names.size(); }
  std::vector<int> degrees() const {
    std::vector<int> d;
    for (Eigen::Index i = 0; i < adjacency.rows(); ++i) d.push_back(static_cast<int>(adjacency.row(i).sum()));
    return d;
  }
};

inline Matrix normalize_adjacency(const Matrix& a) {
  const Matrix ai = a + Matrix::Identity(a.rows(), a.cols());
  const Eigen::VectorXd deg = ai.rowwise().sum();
  // a_ij / sqrt(d_i d_j) rounds once, so equal degrees give exact entries.
  Matrix out(ai.rows(), ai.cols());
  for (Eigen::Index i = 0; i < ai.rows(); ++i)
    for (Eigen::Index j = 0; j < ai.cols(); ++j) out(i, j) = ai(i, j) / std::sqrt(deg(i) * deg(j));
  return out;
}

inline std::vector<std::pair<int, int>> edges_from_adjacency(const Matrix& a) {
  std::vector<std::pair<int, int>> e;
  for (int i = 0; i < a.rows(); ++i)
    for (int j = 0; j < a.cols(); ++j)
      if (a(i, j) != 0.0) e.emplace_back(i, j);
  return e;
}

inline Matrix adjacency_from_edges(const std::vector<std::pair<int, int>>& edges, int n) {
  Matrix a = Matrix::Zero(n, n);
  for (const auto& [i, j] : edges) a(i, j) = 1.0;
  return a;
}

// Symmetrized kNN graph from a precomputed distance matrix.
inline SpatialGraph knn_from_distances(const Matrix& d, std::vector<std::string> names, int k) {
  const auto n = static_cast<int>(d.rows());
  if (k < 1) throw ValidationError("k must be at least 1");
  if (n < k + 1) throw ValidationError("kNN graph needs at least k+1 = " + std::to_string(k + 1) + " counties, got " +
                                       std::to_string(n));
  SpatialGraph g;
  g.names = std::move(names);
  g.distances = d;
  g.k = k;
  g.adjacency = Matrix::Zero(n, n);
  for (int i = 0; i < n; ++i) {
    const auto order = neighbor_order(d, i);
    for (int r = 0; r < k; ++r) {
      g.adjacency(i, order[static_cast<std::size_t>(r)]) = 1.0;
      g.adjacency(order[static_cast<std::size_t>(r)], i) = 1.0;
    }
  }
  g.edge_index = edges_from_adjacency(g.adjacency);
  g.normalized = normalize_adjacency(g.adjacency);
  return g;
}

inline SpatialGraph knn_graph(const CentroidTable& c, int k = 3) { return knn_from_distances(distance_matrix(c), c.names, k); }

struct ConnectivityReport {
  int components = 0;
  std::vector<int> degrees;
  std::vector<double> margins;  // d^(k+1) - d^(k); +inf when no (k+1)-th neighbour
};

inline int component_count(const Matrix& a) {
  const auto n = static_cast<int>(a.rows());
  std::vector<bool> seen(static_cast<std::size_t>(n), false);
  int count = 0;
  for (int s = 0; s < n; ++s) {
    if (seen[static_cast<std::size_t>(s)]) continue;
    ++count;
    std::queue<int> q;
    q.push(s);
    seen[static_cast<std::size_t>(s)] = true;
    while (!q.empty()) {
      const int u = q.front();
      q.pop();
      for (int v = 0; v < n; ++v)
        if (a(u, v) != 0.0 && !seen[static_cast<std::size_t>(v)]) {
          seen[static_cast<std::size_t>(v)] = true;
          q.push(v);
        }
    }
  }
  return count;
}

inline std::vector<double> knn_margins(const Matrix& d, int k) {
  std::vector<double> m;
  for (int i = 0; i < d.rows(); ++i) {
    const auto order = neighbor_order(d, i);
    if (static_cast<int>(order.size()) <= k) {
      m.push_back(std::numeric_limits<double>::infinity());
      continue;
    }
    m.push_back(d(i, order[static_cast<std::size_t>(k)]) - d(i, order[static_cast<std::size_t>(k - 1)]));
  }
  return m;
}

inline ConnectivityReport connectivity_report(const SpatialGraph& g) {
  return {component_count(g.adjacency), g.degrees(), knn_margins(g.distances, g.k)};
}

// kappa(k) for k = 1..k_max.
inline std::vector<int> component_curve(const Matrix& d, int k_max) {
  std::vector<int> out;
  for (int k = 1; k <= k_max && k < d.rows(); ++k) out.push_back(component_count(knn_from_distances(d, {}, k).adjacency));
  return out;
}

inline std::string graph_hash(const SpatialGraph& g) {
  std::string s = std::to_string(g.k) + ";";
  for (const auto& n : g.names) s += n + ",";
  for (const auto& [i, j] : g.edge_index) s += std::to_string(i) + "-" + std::to_string(j) + ",";
  return content_hash(s);
}

inline nlohmann::json to_json(const SpatialGraph& g, const CentroidTable* c = nullptr) {
  nlohmann::json edges = nlohmann::json::array();
  for (const auto& [i, j] : g.edge_index) edges.push_back({i, j});
  nlohmann::json j = {{"k", g.k}, {"names", g.names}, {"edge_index", edges}, {"hash", graph_hash(g)}};
  if (c) {
    nlohmann::json pts = nlohmann::json::array();
    for (const auto& p : c->points) pts.push_back({p.lat, p.lon});
    j["centroids"] = pts;
  }
  return j;
}

inline void write_edge_csv(std::ostream& out, const SpatialGraph& g) {
  csv::write_row(out, {"source", "target", "source_name", "target_name", "distance_km"});
  for (const auto& [i, j] : g.edge_index)
    csv::write_row(out, {std::to_string(i), std::to_string(j), g.names[static_cast<std::size_t>(i)],
                         g.names[static_cast<std::size_t>(j)], csv::format(g.distances(i, j))});
}

}  // namespace herdcast::geo
