#include <algorithm>
#include <cmath>
#include <numbers>

#include <gtest/gtest.h>
#include <nlohmann/json.hpp>

#include "decsim/error.hpp"
#include "decsim/topology.hpp"

using namespace decsim;

namespace {

// circulant oracle: eigenvalues of a ring with weights 1/3 are (1 + 2cos(2 pi q / n)) / 3
double ring_second_modulus(int n) {
  double best = 0.0;
  for (int q = 1; q < n; ++q) {
    best = std::max(best, std::abs(1.0 + 2.0 * std::cos(2.0 * std::numbers::pi * q / n)) / 3.0);
  }
  return best;
}

}  // namespace

TEST(Topology, RingNine) {
  const auto t = build_topology(TopologyKind::Ring, 9);
  for (int i = 0; i < 9; ++i) EXPECT_EQ(t.degree(i), 2u);
  EXPECT_EQ(edge_count(t), 9);
  EXPECT_EQ(t.neighbors[0], (std::vector<int>{1, 8}));
  EXPECT_FALSE(t.directed);
}

TEST(Topology, CompleteNine) {
  const auto t = build_topology(TopologyKind::Complete, 9);
  for (int i = 0; i < 9; ++i) EXPECT_EQ(t.degree(i), 8u);
  EXPECT_EQ(edge_count(t), 36);
}

TEST(Topology, LatticeOneIsRing) {
  EXPECT_EQ(build_topology(TopologyKind::RingLattice, 9, 1).neighbors, build_topology(TopologyKind::Ring, 9).neighbors);
}

TEST(Topology, TorusThreeByThree) {
  const auto t = build_topology(TopologyKind::Torus, 9, std::nullopt, TorusDims{3, 3});
  for (int i = 0; i < 9; ++i) EXPECT_EQ(t.degree(i), 4u);
  EXPECT_EQ(edge_count(t), 18);
}

TEST(Topology, TorusDefaultsToMostSquare) {
  EXPECT_EQ(default_torus_dims(16), (TorusDims{4, 4}));
  EXPECT_EQ(default_torus_dims(24), (TorusDims{4, 6}));
  EXPECT_FALSE(default_torus_dims(8).has_value());
  EXPECT_FALSE(default_torus_dims(7).has_value());
}

TEST(Topology, RejectsInvalidShapes) {
  EXPECT_THROW(build_topology(TopologyKind::Ring, 2), ConfigError);
  EXPECT_THROW(build_topology(TopologyKind::Torus, 8), ConfigError);
  EXPECT_THROW(build_topology(TopologyKind::Torus, 12, std::nullopt, TorusDims{2, 6}), ConfigError);
  EXPECT_THROW(build_topology(TopologyKind::Torus, 12, std::nullopt, TorusDims{3, 3}), ConfigError);
  EXPECT_THROW(build_topology(TopologyKind::RingLattice, 9), ConfigError);
  EXPECT_THROW(build_topology(TopologyKind::RingLattice, 9, 5), ConfigError);
  EXPECT_THROW(build_topology(TopologyKind::RingLattice, 9, 0), ConfigError);
}

TEST(Topology, ExponentialNeighbors) {
  EXPECT_EQ(exponential_neighbors(1, 9), (std::vector<int>{2, 3, 5, 0}));
  EXPECT_EQ(exponential_neighbors(0, 4), (std::vector<int>{1, 2}));
  EXPECT_EQ(exponential_neighbors(5, 16), (std::vector<int>{6, 7, 9, 13}));
  const auto t = build_topology(TopologyKind::Exponential, 9);
  EXPECT_TRUE(t.directed);
  EXPECT_EQ(edge_count(t), 36);
}

TEST(Topology, ExponentialMatchesBruteForce) {
  for (int n = 3; n <= 40; ++n) {
    for (int i = 0; i < n; ++i) {
      std::vector<int> expect;
      for (int m = 0; (1 << m) <= n - 1; ++m) {
        const int j = (i + (1 << m)) % n;
        if (j != i && std::find(expect.begin(), expect.end(), j) == expect.end()) expect.push_back(j);
      }
      ASSERT_EQ(exponential_neighbors(i, n), expect) << "i=" << i << " n=" << n;
    }
  }
}

TEST(Topology, EdgeCounts) {
  EXPECT_EQ(edge_count(build_topology(TopologyKind::Ring, 12)), 12);
  EXPECT_EQ(edge_count(build_topology(TopologyKind::RingLattice, 12, 3)), 36);
}

TEST(Topology, LatticeNeighborOrder) {
  const auto t = build_topology(TopologyKind::RingLattice, 10, 2);
  EXPECT_EQ(t.neighbors[0], (std::vector<int>{1, 9, 2, 8}));
}

TEST(MixingMatrix, RingRowsAreThirds) {
  const auto m = mixing_matrix(build_topology(TopologyKind::Ring, 9));
  for (int i = 0; i < 9; ++i) {
    int nonzero = 0;
    for (int j = 0; j < 9; ++j) {
      if (m(i, j) != 0.0) {
        ++nonzero;
        EXPECT_DOUBLE_EQ(m(i, j), 1.0 / 3.0);
      }
    }
    EXPECT_EQ(nonzero, 3);
  }
}

TEST(MixingMatrix, FullLatticeEqualsComplete) {
  const auto lattice = mixing_matrix(build_topology(TopologyKind::RingLattice, 9, 4));
  const auto complete = mixing_matrix(build_topology(TopologyKind::Complete, 9));
  EXPECT_EQ(lattice, complete);
  for (double w : complete.data()) EXPECT_EQ(w, 1.0 / 9.0);
}

TEST(MixingMatrix, StochasticAndSymmetric) {
  for (int n = 9; n <= 32; ++n) {
    for (auto kind : {TopologyKind::Ring, TopologyKind::Complete, TopologyKind::Exponential}) {
      const auto t = build_topology(kind, n);
      const auto m = mixing_matrix(t);
      for (int i = 0; i < n; ++i) {
        double row = 0.0, col = 0.0;
        for (int j = 0; j < n; ++j) {
          row += m(i, j);
          col += m(j, i);
          const bool linked = j == i || std::find(t.neighbors[i].begin(), t.neighbors[i].end(), j) != t.neighbors[i].end();
          EXPECT_EQ(m(i, j) > 0.0, linked);
        }
        EXPECT_NEAR(row, 1.0, 1e-12);
        if (!t.directed) EXPECT_NEAR(col, 1.0, 1e-12);
      }
      EXPECT_EQ(m.is_symmetric(), !t.directed);
    }
  }
}

TEST(Spectral, CompleteHasFullGap) {
  const auto r = spectral_report(mixing_matrix(build_topology(TopologyKind::Complete, 9)));
  EXPECT_NEAR(r.second_eigenvalue_modulus, 0.0, 1e-10);
  EXPECT_NEAR(r.spectral_gap, 1.0, 1e-10);
}

TEST(Spectral, RingMatchesCirculantFormula) {
  EXPECT_NEAR(spectral_report(mixing_matrix(fully_connected(4))).second_eigenvalue_modulus, 0.0, 1e-10);
  for (int n : {4, 5, 9, 16, 31}) {
    Topology ring;
    ring.kind = TopologyKind::Ring;
    ring.n = n;
    ring.neighbors.resize(static_cast<std::size_t>(n));
    for (int i = 0; i < n; ++i) ring.neighbors[static_cast<std::size_t>(i)] = {(i + 1) % n, (i + n - 1) % n};
    EXPECT_NEAR(spectral_report(mixing_matrix(ring)).second_eigenvalue_modulus, ring_second_modulus(n), 1e-8) << n;
  }
}

TEST(Spectral, IdentityHasNoGap) {
  MixingMatrix m(5);
  for (int i = 0; i < 5; ++i) m(i, i) = 1.0;
  const auto r = spectral_report(m);
  EXPECT_NEAR(r.second_eigenvalue_modulus, 1.0, 1e-12);
  EXPECT_NEAR(r.spectral_gap, 0.0, 1e-12);
}

TEST(Spectral, GapGrowsWithConnectivity) {
  for (int n = 8; n <= 32; ++n) {
    const double ring = spectral_report(mixing_matrix(build_topology(TopologyKind::Ring, n))).spectral_gap;
    const double lattice = spectral_report(mixing_matrix(build_topology(TopologyKind::RingLattice, n, 2))).spectral_gap;
    const double complete = spectral_report(mixing_matrix(build_topology(TopologyKind::Complete, n))).spectral_gap;
    EXPECT_LT(ring, lattice) << n;
    EXPECT_LT(lattice, complete) << n;
  }
}

TEST(Topology, JsonDump) {
  const auto j = to_json(build_topology(TopologyKind::Ring, 5));
  EXPECT_EQ(j["kind"], "ring");
  EXPECT_EQ(j["n"], 5);
  EXPECT_EQ(j["neighbors"][0], (std::vector<int>{1, 4}));
  EXPECT_EQ(to_json(mixing_matrix(build_topology(TopologyKind::Ring, 5)))["weights"].size(), 5u);
}
