#pragma once

#include "expsdc/operator.hpp"
#include "expsdc/phi.hpp"

#include <cmath>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace expsdc {

enum class NodeFamily { chebyshev, uniform, gauss_legendre };

const char* to_string(NodeFamily family);
NodeFamily parse_node_family(std::string_view name);

/// Normalized nodes tau_1..tau_N on [0, 1] and substeps eta_i = tau_{i+1} - tau_i.
struct NodeSet {
  RealVector tau;
  RealVector eta;
  NodeFamily family = NodeFamily::chebyshev;

  int size() const { return static_cast<int>(tau.size()); }
  int substeps() const { return static_cast<int>(eta.size()); }
};

/// tau_i = (1 - cos(pi (i-1)/(N-1))) / 2.
NodeSet chebyshev_nodes(int N);
NodeSet uniform_nodes(int N);
/// Endpoints 0 and 1 plus the N-2 Gauss-Legendre points mapped to (0, 1).
NodeSet gauss_legendre_nodes(int N);
NodeSet make_nodes(NodeFamily family, int N);

/// Finite-difference weights: row j holds the coefficients of the j-th
/// derivative at z0, column l the node.
template <typename Real>
struct BasicFornbergTable {
  Eigen::Matrix<Real, Eigen::Dynamic, Eigen::Dynamic> coefficients;
  Real z0{};
};
using FornbergTable = BasicFornbergTable<double>;

/// Fornberg's recursion for derivative orders 0..m at z0 from the given nodes.
template <typename Real>
BasicFornbergTable<Real> fornberg_weights(Real z0, const Eigen::Matrix<Real, Eigen::Dynamic, 1>& nodes, int m) {
  const Index n = nodes.size();
  if (n == 0) throw std::invalid_argument("fornberg_weights needs at least one node");
  if (m < 0 || m > n - 1) throw std::invalid_argument("derivative order must lie in [0, nodes-1]");
  for (Index i = 0; i < n; ++i) {
    for (Index j = i + 1; j < n; ++j) {
      if (nodes[i] == nodes[j]) throw std::invalid_argument("duplicate node at index " + std::to_string(j));
    }
  }

  // c(l, k): weight of node l for derivative k.
  Eigen::Matrix<Real, Eigen::Dynamic, Eigen::Dynamic> c =
      Eigen::Matrix<Real, Eigen::Dynamic, Eigen::Dynamic>::Zero(n, m + 1);
  Real c1 = 1;
  Real c4 = nodes[0] - z0;
  c(0, 0) = 1;
  for (Index i = 1; i < n; ++i) {
    const Index mn = std::min<Index>(i, m);
    Real c2 = 1;
    const Real c5 = c4;
    c4 = nodes[i] - z0;
    for (Index j = 0; j < i; ++j) {
      const Real c3 = nodes[i] - nodes[j];
      c2 *= c3;
      if (j == i - 1) {
        for (Index k = mn; k >= 1; --k) {
          c(i, k) = c1 * (Real(k) * c(i - 1, k - 1) - c5 * c(i - 1, k)) / c2;
        }
        c(i, 0) = -c1 * c5 * c(i - 1, 0) / c2;
      }
      for (Index k = mn; k >= 1; --k) c(j, k) = (c4 * c(j, k) - Real(k) * c(j, k - 1)) / c3;
      c(j, 0) = c4 * c(j, 0) / c3;
    }
    c1 = c2;
  }
  return {c.transpose(), z0};
}

/// Nodes of substep i in the local variable sigma, tau_i -> 0 and tau_{i+1} -> 1.
RealVector local_nodes(const NodeSet& nodes, int i);

/// I(i, j) = integral of the j-th Lagrange basis polynomial over [tau_i, tau_{i+1}].
RealMatrix polynomial_quadrature_matrix(const NodeSet& nodes);

/// Exponential quadrature weights w[i][l](h_i Lambda) together with the
/// phi_0, phi_1 tables of every substep and the polynomial matrix I.
struct WeightSet {
  NodeSet nodes;
  double h = 0.0;
  std::vector<std::vector<LinearOperator>> w;
  std::vector<LinearOperator> phi0;
  std::vector<LinearOperator> phi1;
  RealMatrix quad;

  double substep(int i) const { return h * nodes.eta[i]; }
};

WeightSet etd_weight_set(const NodeSet& nodes, const LinearOperator& op, double h);

}  // namespace expsdc
