#include <gtest/gtest.h>

#include <sstream>

#include "herdcast/geo/graph.hpp"
#include "support.hpp"

using namespace herdcast;
using namespace herdcast::geo;
using Matrix = Eigen::MatrixXd;
using support::max_abs;

namespace {

CentroidTable table(const std::vector<LatLon>& pts) {
  CentroidTable c;
  for (std::size_t i = 0; i < pts.size(); ++i) {
    c.names.push_back("c" + std::to_string(i));
    c.points.push_back(pts[i]);
  }
  return c;
}

}  // namespace

TEST(Haversine, AgreesWithIndependentOracles) {
  const LatLon dublin{53.3498, -6.2603}, cork{51.8985, -8.4756};
  EXPECT_EQ(haversine(dublin, dublin), 0.0);
  const double d = haversine(dublin, cork);
  EXPECT_NEAR(d, 219.5, 1.0);
  EXPECT_NEAR(d, support::great_circle_km(dublin.lat, dublin.lon, cork.lat, cork.lon), 1e-9);
  // The ellipsoid differs from the sphere by well under one percent here.
  EXPECT_NEAR(d, support::vincenty_km(dublin.lat, dublin.lon, cork.lat, cork.lon), 1.0);
  EXPECT_NEAR(haversine({0, 0}, {0, 180}), pi * earth_radius_km, 1e-6);

  Rng rng(5);
  for (int i = 0; i < 200; ++i) {
    const LatLon a{rng.uniform(-80, 80), rng.uniform(-180, 180)}, b{rng.uniform(-80, 80), rng.uniform(-180, 180)};
    EXPECT_NEAR(haversine(a, b), support::great_circle_km(a.lat, a.lon, b.lat, b.lon), 1e-6);
    EXPECT_NEAR(haversine(a, b), haversine(b, a), 1e-9);
  }
}

TEST(Knn, CollinearHandExample) {
  const auto g = knn_graph(table({{0, 0}, {0, 1}, {0, 3}, {0, 7}}), 1);
  EXPECT_EQ(g.degrees(), std::vector<int>({1, 2, 2, 1}));
  const std::vector<std::pair<int, int>> want = {{0, 1}, {1, 0}, {1, 2}, {2, 1}, {2, 3}, {3, 2}};
  EXPECT_EQ(g.edge_index, want);
  EXPECT_EQ(max_abs(adjacency_from_edges(g.edge_index, 4) - g.adjacency), 0.0);
}

TEST(Knn, TwoNodes) {
  const auto g = knn_graph(table({{53, -7}, {52, -8}}), 1);
  EXPECT_EQ(g.degrees(), std::vector<int>({1, 1}));
  for (Eigen::Index i = 0; i < 2; ++i)
    for (Eigen::Index j = 0; j < 2; ++j) EXPECT_EQ(g.normalized(i, j), 0.5);
  EXPECT_THROW(knn_graph(table({{53, -7}, {52, -8}}), 2), ValidationError);
  EXPECT_THROW(knn_graph(table({{53, -7}, {52, -8}}), 0), ValidationError);
}

TEST(Knn, TiesBreakByIndex) {
  // Nodes 1 and 2 are equidistant from node 0.
  const auto g = knn_graph(table({{0, 0}, {0, 1}, {0, -1}}), 1);
  EXPECT_EQ(neighbor_order(g.distances, 0), std::vector<int>({1, 2}));
  EXPECT_EQ(knn_margins(g.distances, 1)[0], 0.0);
}

TEST(Normalize, IsolatedNodeAndRowSums) {
  EXPECT_EQ(normalize_adjacency(Matrix::Zero(1, 1))(0, 0), 1.0);
  const auto g = knn_graph(support::irish_centroids(), 3);
  const Matrix ai = g.adjacency + Matrix::Identity(26, 26);
  const Eigen::VectorXd deg = ai.rowwise().sum();
  const Matrix rw = deg.cwiseInverse().asDiagonal() * ai;
  EXPECT_LT((rw.rowwise().sum().array() - 1.0).abs().maxCoeff(), 1e-12);
}

TEST(Knn, RandomSetsSymmetricAndBounded) {
  Rng rng(17);
  for (int trial = 0; trial < 200; ++trial) {
    const auto c = support::random_centroids(26, rng);
    const auto g = knn_graph(c, 3);
    EXPECT_EQ(max_abs(g.normalized - g.normalized.transpose()), 0.0);
    EXPECT_LE(support::spectral_radius(g.normalized), 1.0 + 1e-9);
    for (int d : g.degrees()) EXPECT_GE(d, 3);
    EXPECT_EQ(max_abs(adjacency_from_edges(g.edge_index, 26) - g.adjacency), 0.0);
  }
}

TEST(Knn, IrishCentroidsDegreesWithinTwoK) {
  const auto g = knn_graph(support::irish_centroids(), 3);
  for (int d : g.degrees()) {
    EXPECT_GE(d, 3);
    EXPECT_LE(d, 6);
  }
  EXPECT_EQ(component_count(g.adjacency), 1);
}

TEST(Connectivity, TwoFarClusters) {
  const auto c = table({{51.5, -10.0}, {51.6, -10.0}, {55.0, -6.0}, {55.1, -6.0}});
  const auto g = knn_graph(c, 1);
  EXPECT_EQ(connectivity_report(g).components, 2);
  const auto curve = component_curve(g.distances, 3);
  EXPECT_EQ(curve, std::vector<int>({2, 1, 1}));
}

TEST(Connectivity, JitterBelowMarginKeepsNeighbourhoods) {
  Rng rng(23);
  int checked = 0;
  for (int trial = 0; trial < 100 && checked < 20; ++trial) {
    const auto c = support::random_centroids(26, rng);
    const auto g = knn_graph(c, 3);
    const auto margins = knn_margins(g.distances, 3);
    const double m = *std::min_element(margins.begin(), margins.end());
    if (m < 1.0) continue;
    // Moving every point by at most r shifts each distance by at most 2r, so
    // r < m / 4 cannot reorder the k-th and (k+1)-th neighbours.
    const double r = 0.99 * m / 4.0;
    const double deg = r / (earth_radius_km * pi / 180.0) / std::sqrt(2.0);
    auto moved = c;
    for (auto& p : moved.points) {
      p.lat += rng.uniform(-deg, deg);
      p.lon += rng.uniform(-deg, deg);
    }
    for (std::size_t i = 0; i < c.size(); ++i) ASSERT_LT(haversine(c.points[i], moved.points[i]), r);
    EXPECT_EQ(knn_graph(moved, 3).edge_index, g.edge_index);
    ++checked;
  }
  EXPECT_GT(checked, 0);
}

TEST(Centroids, ParseAndAlign) {
  std::istringstream in("county,lat,lon\nB,52,-7\nA,53,-8\n");
  const auto c = parse_centroids(in);
  ASSERT_EQ(c.size(), 2u);
  const auto a = c.aligned_to({"A", "B"});
  EXPECT_EQ(a.names[0], "A");
  EXPECT_EQ(a.points[0].lat, 53.0);
  EXPECT_THROW(c.aligned_to({"Z"}), ValidationError);
  EXPECT_EQ(support::irish_centroids().size(), 26u);
}

TEST(Graph, HashIsStable) {
  const auto a = knn_graph(support::irish_centroids(), 3), b = knn_graph(support::irish_centroids(), 3);
  EXPECT_EQ(graph_hash(a), graph_hash(b));
  EXPECT_NE(graph_hash(a), graph_hash(knn_graph(support::irish_centroids(), 4)));
}
