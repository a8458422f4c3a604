// SPDX-License-Identifier: Apache-2.0
#pragma once

// Communication graphs for decentralized averaging and the mixing matrices
// derived from them. Nodes are 0-based; arithmetic on node ids is modulo n.

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json_fwd.hpp>

namespace decsim {

enum class TopologyKind { Ring, Torus, RingLattice, Exponential, Complete };

std::string_view to_string(TopologyKind kind);
/// Accepts "ring", "torus", "ring_lattice", "exponential", "complete".
TopologyKind parse_topology_kind(std::string_view name);

struct TorusDims {
  int rows = 0;
  int cols = 0;
  friend bool operator==(const TorusDims&, const TorusDims&) = default;
};

struct Topology {
  TopologyKind kind = TopologyKind::Ring;
  int n = 0;
  std::optional<int> k;               // coordination number, RingLattice only
  std::optional<TorusDims> dims;      // Torus only
  std::vector<std::vector<int>> neighbors;  // self excluded
  bool directed = false;

  std::size_t degree(int node) const { return neighbors.at(static_cast<std::size_t>(node)).size(); }
};

/// Builds one of the five graph families. Throws ConfigError naming the
/// violated constraint when n, k or the torus shape is invalid.
Topology build_topology(TopologyKind kind, int n, std::optional<int> k = std::nullopt,
                        std::optional<TorusDims> torus_dims = std::nullopt);

/// Fully connected graph for any n >= 1. Used for scales below the n >= 3
/// floor of build_topology (a single worker, or a pair).
Topology fully_connected(int n);

/// Most-square factorization r*c = n with r <= c and r, c >= 3.
std::optional<TorusDims> default_torus_dims(int n);

/// Out-neighbors {(i + 2^m) mod n : m = 0..floor(log2(n-1))}, in ascending m,
/// with self-hits and repeats dropped.
std::vector<int> exponential_neighbors(int i, int n);

/// Undirected edge count, or arc count for the directed exponential graph.
std::int64_t edge_count(const Topology& t);

/// Row-stochastic averaging weights, stored dense row-major.
class MixingMatrix {
 public:
  MixingMatrix() = default;
  explicit MixingMatrix(int n) : n_(n), weights_(static_cast<std::size_t>(n) * static_cast<std::size_t>(n), 0.0) {}

  int n() const noexcept { return n_; }
  double operator()(int i, int j) const { return weights_[index(i, j)]; }
  double& operator()(int i, int j) { return weights_[index(i, j)]; }
  std::span<const double> row(int i) const {
    return {weights_.data() + index(i, 0), static_cast<std::size_t>(n_)};
  }
  std::span<const double> data() const noexcept { return weights_; }

  bool is_symmetric(double tol = 0.0) const;

  friend bool operator==(const MixingMatrix&, const MixingMatrix&) = default;

 private:
  std::size_t index(int i, int j) const {
    return static_cast<std::size_t>(i) * static_cast<std::size_t>(n_) + static_cast<std::size_t>(j);
  }

  int n_ = 0;
  std::vector<double> weights_;
};

/// weights[i][j] = 1/(d_i + 1) for j = i and every neighbor j of i.
MixingMatrix mixing_matrix(const Topology& t);

struct SpectralReport {
  double second_eigenvalue_modulus = 0.0;
  double spectral_gap = 1.0;
};

/// Second-largest eigenvalue modulus of the mixing matrix and the gap 1 - |lambda_2|.
/// Throws NumericalError if the eigensolver fails to converge.
SpectralReport spectral_report(const MixingMatrix& m);

nlohmann::json to_json(const Topology& t);
nlohmann::json to_json(const MixingMatrix& m);
nlohmann::json to_json(const SpectralReport& r);

}  // namespace decsim
