#include "expsdc/phi.hpp"

#include <cmath>
#include <numbers>
#include <sstream>

namespace expsdc {

namespace {

constexpr int kMaxFactorial = 170;

struct InverseFactorials {
  std::array<double, kMaxFactorial + 1> values{};
  InverseFactorials() {
    values[0] = 1.0;
    for (int n = 1; n <= kMaxFactorial; ++n) values[n] = values[n - 1] / n;
  }
};

const InverseFactorials& inverse_factorials() {
  static const InverseFactorials table;
  return table;
}

bool finite(Complex z) { return std::isfinite(z.real()) && std::isfinite(z.imag()); }

void require_order(int K) {
  if (K < 0) throw std::invalid_argument("phi order K must be non-negative");
  if (K + kTaylorTerms > kMaxFactorial) throw std::invalid_argument("phi order K too large");
}

void require_points(int P) {
  if (P < 8) throw std::invalid_argument("contour needs at least 8 points (got " + std::to_string(P) + ")");
}

// One doubling step phi_n(2a) from phi_i(a), all orders together.
template <typename T, typename Mul>
std::vector<T> double_argument(const std::vector<T>& half, Mul mul) {
  const int K = static_cast<int>(half.size()) - 1;
  std::vector<T> full(half.size());
  for (int n = 0; n <= K; ++n) {
    T acc = mul(half[0], half[n]);
    for (int i = 1; i <= n; ++i) acc += inverse_factorial(n - i) * half[i];
    full[n] = std::ldexp(1.0, -n) * acc;
  }
  return full;
}

Complex contour_point(double R, int j, int P) {
  const double theta = 2.0 * std::numbers::pi * j / P;
  return std::polar(R, theta);
}

// phi_0..phi_K at one contour node, initialized the way a scalar argument is.
std::vector<Complex> scalar_node_values(Complex gamma, int K) {
  if (std::abs(gamma) >= 1.0) return phi_explicit(gamma, K);
  std::vector<Complex> acc(K + 1, Complex{0.0});
  for (int j = 0; j < kDefaultContourPoints; ++j) {
    const auto v = phi_explicit(gamma + contour_point(kDefaultContourRadius, j, kDefaultContourPoints), K);
    for (int n = 0; n <= K; ++n) acc[n] += v[n];
  }
  for (auto& a : acc) a /= static_cast<double>(kDefaultContourPoints);
  return acc;
}

PhiTable scalar_table(const std::vector<Complex>& values, double norm, int s) {
  PhiTable table;
  table.values.reserve(values.size());
  for (Complex v : values) table.values.push_back(LinearOperator::scalar(v));
  table.argument_norm = norm;
  table.scaling_exponent = s;
  return table;
}

PhiTable dense_taylor_ss(const Matrix& lambda, int K) {
  const double norm = norms(LinearOperator::dense(lambda)).max();
  const int s = choose_scaling_exponent(norm);
  const Index d = lambda.rows();
  const Matrix a = std::ldexp(1.0, -s) * lambda;
  const Matrix id = Matrix::Identity(d, d);
  constexpr int m = kTaylorTerms;

  std::vector<Matrix> phis(K + 1);
  for (int i = 0; i <= K; ++i) {
    Matrix p = inverse_factorial(m + i) * a + inverse_factorial(m + i - 1) * id;
    for (int k = 0; k <= m - 2; ++k) {
      p = a * p;
      p.diagonal().array() += inverse_factorial(m + i - 2 - k);
    }
    if (!p.allFinite()) throw PhiError("non-finite Taylor initialization of phi_" + std::to_string(i), 0);
    phis[i] = std::move(p);
  }
  for (int level = 1; level <= s; ++level) {
    phis = double_argument(phis, [](const Matrix& x, const Matrix& y) -> Matrix { return x * y; });
    for (const auto& p : phis) {
      if (!p.allFinite()) {
        throw PhiError("non-finite phi value at doubling level " + std::to_string(level), level);
      }
    }
  }

  PhiTable table;
  for (auto& p : phis) table.values.push_back(LinearOperator::dense(std::move(p)));
  table.argument_norm = norm;
  table.scaling_exponent = s;
  return table;
}

}  // namespace

double inverse_factorial(int n) {
  if (n < 0 || n > kMaxFactorial) throw std::out_of_range("inverse_factorial argument out of range");
  return inverse_factorials().values[static_cast<std::size_t>(n)];
}

int choose_scaling_exponent(double norm) {
  if (!std::isfinite(norm)) throw std::invalid_argument("operator norm is not finite");
  if (norm <= 1.0) return 0;
  int e = 0;
  const double f = std::frexp(norm, &e);
  return f == 0.5 ? e - 1 : e;
}

int choose_scaling_exponent(const LinearOperator& op) { return choose_scaling_exponent(norms(op).max()); }

std::vector<Complex> phi_taylor_ss(Complex z, int K) {
  require_order(K);
  const int s = choose_scaling_exponent(std::abs(z));
  const Complex a = std::ldexp(1.0, -s) * z;
  constexpr int m = kTaylorTerms;

  std::vector<Complex> phis(K + 1);
  for (int i = 0; i <= K; ++i) {
    Complex p = a * inverse_factorial(m + i) + inverse_factorial(m + i - 1);
    for (int k = 0; k <= m - 2; ++k) p = a * p + inverse_factorial(m + i - 2 - k);
    phis[i] = p;
  }
  for (int level = 1; level <= s; ++level) {
    phis = double_argument(phis, [](Complex x, Complex y) { return x * y; });
    for (Complex p : phis) {
      if (!finite(p)) {
        std::ostringstream os;
        os << "non-finite phi value at doubling level " << level << " for z = " << z;
        throw PhiError(os.str(), level);
      }
    }
  }
  return phis;
}

PhiTable phi_taylor_ss(const LinearOperator& op, int K) {
  require_order(K);
  switch (op.kind()) {
    case OperatorKind::scalar: {
      const Complex z = op.scalar_value();
      return scalar_table(phi_taylor_ss(z, K), std::abs(z), choose_scaling_exponent(std::abs(z)));
    }
    case OperatorKind::diagonal: {
      const Vector& lambda = op.spectrum();
      const Index d = lambda.size();
      std::vector<Vector> cols(K + 1, Vector(d));
      for (Index j = 0; j < d; ++j) {
        const auto v = phi_taylor_ss(lambda[j], K);
        for (int n = 0; n <= K; ++n) cols[n][j] = v[n];
      }
      PhiTable table;
      for (auto& c : cols) table.values.push_back(LinearOperator::diagonal(std::move(c)));
      table.argument_norm = norms(op).max();
      table.scaling_exponent = choose_scaling_exponent(table.argument_norm);
      return table;
    }
    case OperatorKind::dense:
      return dense_taylor_ss(op.matrix(), K);
  }
  return {};
}

std::vector<Complex> phi_explicit(Complex z, int K) {
  require_order(K);
  std::vector<Complex> phis(K + 1);
  if (z == Complex{0.0}) {
    for (int n = 0; n <= K; ++n) phis[n] = inverse_factorial(n);
    return phis;
  }
  const Complex ez = std::exp(z);
  phis[0] = ez;
  if (K >= 1) phis[1] = (ez - 1.0) / z;
  if (K >= 2) phis[2] = (ez - 1.0 - z) / (z * z);
  if (K >= 3) phis[3] = (ez - 1.0 - z - 0.5 * z * z) / (z * z * z);
  for (int n = 4; n <= K; ++n) phis[n] = (phis[n - 1] - inverse_factorial(n - 1)) / z;
  return phis;
}

PhiTable phi_contour_scalar(Complex z, int K, int P, double R) {
  require_order(K);
  require_points(P);
  if (!(std::abs(z) < 1.0)) throw std::domain_error("scalar contour evaluation requires |z| < 1");
  std::vector<Complex> acc(K + 1, Complex{0.0});
  for (int j = 0; j < P; ++j) {
    const auto v = phi_explicit(z + contour_point(R, j, P), K);
    for (int n = 0; n <= K; ++n) acc[n] += v[n];
  }
  for (auto& a : acc) a /= static_cast<double>(P);
  return scalar_table(acc, std::abs(z), 0);
}

PhiTable phi_contour_matrix(const LinearOperator& op, int K, int P, double R, Complex z0) {
  require_order(K);
  require_points(P);
  if (op.kind() != OperatorKind::dense) throw std::invalid_argument("matrix contour needs a dense operator");
  const Matrix& lambda = op.matrix();
  const Index d = lambda.rows();
  const Matrix id = Matrix::Identity(d, d);
  const Matrix shift = z0 * id - lambda;

  std::vector<Matrix> acc(K + 1, Matrix::Zero(d, d));
  for (int j = 0; j < P; ++j) {
    const Complex offset = contour_point(R, j, P);
    const Complex gamma = z0 + offset;
    Eigen::PartialPivLU<Matrix> lu(Matrix(id + shift / offset));
    if (!(lu.rcond() > 1e-13)) {
      throw PhiError("singular resolvent at contour node " + std::to_string(j), j);
    }
    const Matrix resolvent = lu.inverse();
    const auto v = scalar_node_values(gamma, K);
    for (int n = 0; n <= K; ++n) acc[n] += v[n] * resolvent;
  }
  PhiTable table;
  for (auto& a : acc) table.values.push_back(LinearOperator::dense(a / static_cast<double>(P)));
  table.argument_norm = norms(op).max();
  return table;
}

PhiTable phi_recursive_contour(const LinearOperator& op, int K, int P, double R) {
  require_order(K);
  require_points(P);
  if (op.kind() != OperatorKind::scalar) throw std::invalid_argument("recursive contour needs a scalar operator");
  const Complex z = op.scalar_value();

  std::vector<Complex> phis(K + 1);
  if (std::abs(z) >= 1.0) {
    phis[0] = std::exp(z);
    for (int n = 1; n <= K; ++n) phis[n] = (phis[n - 1] - inverse_factorial(n - 1)) / z;
    return scalar_table(phis, std::abs(z), 0);
  }

  std::vector<Complex> nodes(P), values(P);
  for (int j = 0; j < P; ++j) {
    nodes[j] = z + contour_point(R, j, P);
    values[j] = std::exp(nodes[j]);
  }
  for (int n = 0; n <= K; ++n) {
    if (n > 0) {
      for (int j = 0; j < P; ++j) values[j] = (values[j] - inverse_factorial(n - 1)) / nodes[j];
    }
    Complex sum{0.0};
    for (Complex v : values) sum += v;
    phis[n] = sum / static_cast<double>(P);
  }
  return scalar_table(phis, std::abs(z), 0);
}

}  // namespace expsdc
