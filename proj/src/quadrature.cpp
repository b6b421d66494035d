#include "expsdc/quadrature.hpp"

#include <numbers>

namespace expsdc {

namespace {

void require_node_count(int N) {
  if (N < 2) throw std::invalid_argument("node sets need N >= 2 (got " + std::to_string(N) + ")");
}

NodeSet finish(RealVector tau, NodeFamily family) {
  NodeSet nodes;
  nodes.eta = tau.tail(tau.size() - 1) - tau.head(tau.size() - 1);
  nodes.tau = std::move(tau);
  nodes.family = family;
  return nodes;
}

// Roots of the Legendre polynomial P_n on (-1, 1), ascending.
RealVector legendre_roots(int n) {
  RealVector x(n);
  for (int k = 0; k < n; ++k) {
    double r = -std::cos(std::numbers::pi * (k + 0.75) / (n + 0.5));
    for (int iter = 0; iter < 100; ++iter) {
      double p0 = 1.0, p1 = r;
      for (int j = 2; j <= n; ++j) {
        const double p2 = ((2.0 * j - 1.0) * r * p1 - (j - 1.0) * p0) / j;
        p0 = p1;
        p1 = p2;
      }
      if (n == 1) p0 = 1.0;
      const double dp = n * (r * p1 - p0) / (r * r - 1.0);
      const double step = p1 / dp;
      r -= step;
      if (std::abs(step) < 1e-16) break;
    }
    x[k] = r;
  }
  return x;
}

}  // namespace

const char* to_string(NodeFamily family) {
  switch (family) {
    case NodeFamily::chebyshev:
      return "chebyshev";
    case NodeFamily::uniform:
      return "uniform";
    case NodeFamily::gauss_legendre:
      return "gauss-legendre";
  }
  return "unknown";
}

NodeFamily parse_node_family(std::string_view name) {
  if (name == "chebyshev") return NodeFamily::chebyshev;
  if (name == "uniform") return NodeFamily::uniform;
  if (name == "gauss-legendre" || name == "gauss_legendre" || name == "legendre") return NodeFamily::gauss_legendre;
  throw std::invalid_argument("unknown node family '" + std::string(name) + "'");
}

NodeSet chebyshev_nodes(int N) {
  require_node_count(N);
  RealVector tau(N);
  for (int i = 0; i < N; ++i) tau[i] = 0.5 * (1.0 - std::cos(std::numbers::pi * i / (N - 1)));
  tau[0] = 0.0;
  tau[N - 1] = 1.0;
  return finish(std::move(tau), NodeFamily::chebyshev);
}

NodeSet uniform_nodes(int N) {
  require_node_count(N);
  RealVector tau = RealVector::LinSpaced(N, 0.0, 1.0);
  return finish(std::move(tau), NodeFamily::uniform);
}

NodeSet gauss_legendre_nodes(int N) {
  require_node_count(N);
  RealVector tau(N);
  tau[0] = 0.0;
  tau[N - 1] = 1.0;
  if (N > 2) {
    const RealVector roots = legendre_roots(N - 2);
    for (int k = 0; k < N - 2; ++k) tau[k + 1] = 0.5 * (1.0 + roots[k]);
  }
  return finish(std::move(tau), NodeFamily::gauss_legendre);
}

NodeSet make_nodes(NodeFamily family, int N) {
  switch (family) {
    case NodeFamily::chebyshev:
      return chebyshev_nodes(N);
    case NodeFamily::uniform:
      return uniform_nodes(N);
    case NodeFamily::gauss_legendre:
      return gauss_legendre_nodes(N);
  }
  return chebyshev_nodes(N);
}

RealVector local_nodes(const NodeSet& nodes, int i) {
  return (nodes.tau.array() - nodes.tau[i]) / nodes.eta[i];
}

RealMatrix polynomial_quadrature_matrix(const NodeSet& nodes) {
  const int N = nodes.size();
  RealMatrix quad(N - 1, N);
  for (int i = 0; i < N - 1; ++i) {
    const RealMatrix a = fornberg_weights(0.0, RealVector(local_nodes(nodes, i)), N - 1).coefficients;
    for (int l = 0; l < N; ++l) {
      double sum = 0.0;
      for (int j = 0; j < N; ++j) sum += a(j, l) * inverse_factorial(j + 1);
      quad(i, l) = nodes.eta[i] * sum;
    }
  }
  return quad;
}

WeightSet etd_weight_set(const NodeSet& nodes, const LinearOperator& op, double h) {
  if (!(h > 0.0)) throw std::invalid_argument("step size must be positive");
  const int N = nodes.size();
  WeightSet set;
  set.nodes = nodes;
  set.h = h;
  set.quad = polynomial_quadrature_matrix(nodes);
  set.w.resize(N - 1);
  set.phi0.reserve(N - 1);
  set.phi1.reserve(N - 1);

  for (int i = 0; i < N - 1; ++i) {
    const double hi = set.substep(i);
    const PhiTable phis = phi_taylor_ss(hi * op, N);
    const RealMatrix a = fornberg_weights(0.0, RealVector(local_nodes(nodes, i)), N - 1).coefficients;
    auto& row = set.w[i];
    row.reserve(N);
    for (int l = 0; l < N; ++l) {
      LinearOperator wil = (hi * a(0, l)) * phis[1];
      for (int j = 1; j < N; ++j) wil = wil + (hi * a(j, l)) * phis[j + 1];
      row.push_back(std::move(wil));
    }
    set.phi0.push_back(phis[0]);
    set.phi1.push_back(phis[1]);
  }
  return set;
}

}  // namespace expsdc
