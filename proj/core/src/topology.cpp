// SPDX-License-Identifier: Apache-2.0
#include "decsim/topology.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <complex>
#include <functional>

#include <Eigen/Dense>
#include <fmt/format.h>
#include <nlohmann/json.hpp>

#include "decsim/error.hpp"

namespace decsim {
namespace {

int mod(int a, int n) { return ((a % n) + n) % n; }

// floor(log2(x)) for x >= 1.
int floor_log2(int x) { return std::bit_width(static_cast<unsigned>(x)) - 1; }

// Neighbors at ring distance 1..k on both sides, ascending distance then index.
std::vector<int> ring_band(int i, int n, int k) {
  std::vector<int> out;
  out.reserve(static_cast<std::size_t>(2 * k));
  for (int d = 1; d <= k; ++d) {
    int a = mod(i - d, n);
    int b = mod(i + d, n);
    if (a > b) std::swap(a, b);
    for (int v : {a, b}) {
      if (v != i && std::find(out.begin(), out.end(), v) == out.end()) out.push_back(v);
    }
  }
  return out;
}

std::vector<std::vector<int>> band_graph(int n, int k) {
  std::vector<std::vector<int>> nbrs(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) nbrs[static_cast<std::size_t>(i)] = ring_band(i, n, k);
  return nbrs;
}

}  // namespace

std::string_view to_string(TopologyKind kind) {
  switch (kind) {
    case TopologyKind::Ring: return "ring";
    case TopologyKind::Torus: return "torus";
    case TopologyKind::RingLattice: return "ring_lattice";
    case TopologyKind::Exponential: return "exponential";
    case TopologyKind::Complete: return "complete";
  }
  return "unknown";
}

TopologyKind parse_topology_kind(std::string_view name) {
  if (name == "ring") return TopologyKind::Ring;
  if (name == "torus") return TopologyKind::Torus;
  if (name == "ring_lattice" || name == "lattice") return TopologyKind::RingLattice;
  if (name == "exponential") return TopologyKind::Exponential;
  if (name == "complete") return TopologyKind::Complete;
  throw ConfigError(fmt::format("unknown topology '{}' (expected ring, torus, ring_lattice, exponential or complete)", name));
}

std::optional<TorusDims> default_torus_dims(int n) {
  std::optional<TorusDims> best;
  for (int r = 3; r * r <= n; ++r) {
    if (n % r == 0 && n / r >= 3) best = TorusDims{r, n / r};
  }
  return best;
}

std::vector<int> exponential_neighbors(int i, int n) {
  if (n < 3) throw ConfigError(fmt::format("exponential graph requires n >= 3 (got n = {})", n));
  if (i < 0 || i >= n) throw ConfigError(fmt::format("node index {} outside [0, {})", i, n));
  std::vector<int> out;
  const int max_m = floor_log2(n - 1);
  for (int m = 0; m <= max_m; ++m) {
    const int v = static_cast<int>((static_cast<std::int64_t>(i) + (std::int64_t{1} << m)) % n);
    if (v != i && std::find(out.begin(), out.end(), v) == out.end()) out.push_back(v);
  }
  return out;
}

Topology fully_connected(int n) {
  if (n < 1) throw ConfigError(fmt::format("worker count must be >= 1 (got n = {})", n));
  Topology t;
  t.kind = TopologyKind::Complete;
  t.n = n;
  t.neighbors = band_graph(n, n / 2);
  return t;
}

Topology build_topology(TopologyKind kind, int n, std::optional<int> k, std::optional<TorusDims> torus_dims) {
  if (n < 3) throw ConfigError(fmt::format("{} topology requires n >= 3 (got n = {})", to_string(kind), n));

  Topology t;
  t.kind = kind;
  t.n = n;
  switch (kind) {
    case TopologyKind::Ring:
      t.neighbors = band_graph(n, 1);
      break;

    case TopologyKind::RingLattice: {
      if (!k) throw ConfigError("ring_lattice topology requires a coordination number k");
      if (*k < 1 || 2 * *k > n - 1) {
        throw ConfigError(fmt::format("ring_lattice requires 1 <= k <= (n-1)/2 (got k = {}, n = {})", *k, n));
      }
      t.k = k;
      t.neighbors = band_graph(n, *k);
      break;
    }

    case TopologyKind::Torus: {
      const auto dims = torus_dims ? torus_dims : default_torus_dims(n);
      if (!dims) {
        throw ConfigError(fmt::format("torus requires n = r*c with r >= 3 and c >= 3; n = {} has no such factorization", n));
      }
      if (dims->rows * dims->cols != n) {
        throw ConfigError(fmt::format("torus dims {}x{} do not multiply to n = {}", dims->rows, dims->cols, n));
      }
      if (dims->rows < 3 || dims->cols < 3) {
        throw ConfigError(fmt::format("torus requires r >= 3 and c >= 3 (got {}x{})", dims->rows, dims->cols));
      }
      t.dims = dims;
      const int rows = dims->rows;
      const int cols = dims->cols;
      t.neighbors.resize(static_cast<std::size_t>(n));
      for (int i = 0; i < n; ++i) {
        const int r = i / cols;
        const int c = i % cols;
        std::vector<int> nb = {mod(r - 1, rows) * cols + c, mod(r + 1, rows) * cols + c,
                               r * cols + mod(c - 1, cols), r * cols + mod(c + 1, cols)};
        std::sort(nb.begin(), nb.end());
        t.neighbors[static_cast<std::size_t>(i)] = std::move(nb);
      }
      break;
    }

    case TopologyKind::Exponential:
      t.directed = true;
      t.neighbors.resize(static_cast<std::size_t>(n));
      for (int i = 0; i < n; ++i) t.neighbors[static_cast<std::size_t>(i)] = exponential_neighbors(i, n);
      break;

    case TopologyKind::Complete:
      t.neighbors = band_graph(n, n / 2);
      break;
  }
  return t;
}

std::int64_t edge_count(const Topology& t) {
  std::int64_t arcs = 0;
  for (const auto& nb : t.neighbors) arcs += static_cast<std::int64_t>(nb.size());
  return t.directed ? arcs : arcs / 2;
}

bool MixingMatrix::is_symmetric(double tol) const {
  for (int i = 0; i < n_; ++i) {
    for (int j = i + 1; j < n_; ++j) {
      if (std::abs((*this)(i, j) - (*this)(j, i)) > tol) return false;
    }
  }
  return true;
}

MixingMatrix mixing_matrix(const Topology& t) {
  MixingMatrix m(t.n);
  for (int i = 0; i < t.n; ++i) {
    const auto& nb = t.neighbors[static_cast<std::size_t>(i)];
    const double w = 1.0 / static_cast<double>(nb.size() + 1);
    m(i, i) = w;
    for (int j : nb) m(i, j) = w;
  }
  return m;
}

SpectralReport spectral_report(const MixingMatrix& m) {
  const int n = m.n();
  if (n < 2) return SpectralReport{0.0, 1.0};

  Eigen::MatrixXd a(n, n);
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < n; ++j) a(i, j) = m(i, j);
  }

  std::vector<double> moduli;
  moduli.reserve(static_cast<std::size_t>(n));
  if (m.is_symmetric()) {
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver(a, Eigen::EigenvaluesOnly);
    if (solver.info() != Eigen::Success) {
      throw NumericalError(fmt::format("symmetric eigensolve did not converge within {} iterations",
                                       Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd>::m_maxIterations * n));
    }
    for (Eigen::Index q = 0; q < n; ++q) moduli.push_back(std::abs(solver.eigenvalues()(q)));
  } else {
    Eigen::EigenSolver<Eigen::MatrixXd> solver(a, /*computeEigenvectors=*/false);
    if (solver.info() != Eigen::Success) {
      throw NumericalError(fmt::format("general eigensolve did not converge within {} iterations",
                                       solver.getMaxIterations() * n));
    }
    for (Eigen::Index q = 0; q < n; ++q) moduli.push_back(std::abs(solver.eigenvalues()(q)));
  }
  std::sort(moduli.begin(), moduli.end(), std::greater<>());
  const double second = std::clamp(moduli[1], 0.0, 1.0);
  return SpectralReport{second, 1.0 - second};
}

nlohmann::json to_json(const Topology& t) {
  nlohmann::json j;
  j["kind"] = to_string(t.kind);
  j["n"] = t.n;
  j["directed"] = t.directed;
  if (t.k) j["k"] = *t.k;
  if (t.dims) j["torus_dims"] = {t.dims->rows, t.dims->cols};
  j["edges"] = edge_count(t);
  j["neighbors"] = t.neighbors;
  return j;
}

nlohmann::json to_json(const MixingMatrix& m) {
  nlohmann::json rows = nlohmann::json::array();
  for (int i = 0; i < m.n(); ++i) {
    const auto r = m.row(i);
    rows.push_back(std::vector<double>(r.begin(), r.end()));
  }
  return {{"n", m.n()}, {"weights", std::move(rows)}};
}

nlohmann::json to_json(const SpectralReport& r) {
  return {{"second_eigenvalue_modulus", r.second_eigenvalue_modulus}, {"spectral_gap", r.spectral_gap}};
}

}  // namespace decsim
