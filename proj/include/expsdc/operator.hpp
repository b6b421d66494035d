#pragma once

#include <Eigen/Dense>

#include <complex>
#include <memory>
#include <stdexcept>
#include <string>
#include <variant>

namespace expsdc {

using Complex = std::complex<double>;
using Vector = Eigen::VectorXcd;
using Matrix = Eigen::MatrixXcd;
using RealVector = Eigen::VectorXd;
using RealMatrix = Eigen::MatrixXd;
using Index = Eigen::Index;

enum class OperatorKind { scalar, diagonal, dense };

const char* to_string(OperatorKind kind);

class DimensionError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Raised when I - alpha*Lambda is singular or numerically singular.
class SingularShiftError : public std::runtime_error {
 public:
  SingularShiftError(Complex alpha, const std::string& detail);
  Complex alpha() const { return alpha_; }

 private:
  Complex alpha_;
};

namespace detail {
struct ShiftCache;
}

/// The stiff linear term of phi' = Lambda phi + N(t, phi).
///
/// Three storage shapes are supported: a complex scalar (d = 1), a
/// diagonal spectrum, and a dense complex matrix. Values are immutable once
/// built; copies share the lazily filled cache of shifted factorizations,
/// which is guarded internally so operators can be shared across threads.
class LinearOperator {
 public:
  LinearOperator() : LinearOperator(Complex{0.0}) {}

  static LinearOperator scalar(Complex value);
  static LinearOperator diagonal(Vector spectrum);
  static LinearOperator dense(Matrix matrix);

  /// Operator of the same kind and dimension as `like`, holding value*I.
  static LinearOperator identity_like(const LinearOperator& like, Complex value = 1.0);

  OperatorKind kind() const;
  Index dim() const;

  Complex scalar_value() const;
  const Vector& spectrum() const;
  const Matrix& matrix() const;

  Matrix to_dense() const;
  bool all_finite() const;

  LinearOperator scaled(Complex factor) const;

  friend LinearOperator operator+(const LinearOperator& a, const LinearOperator& b);
  friend LinearOperator operator-(const LinearOperator& a, const LinearOperator& b);
  friend LinearOperator operator*(Complex factor, const LinearOperator& a);

  /// Operator product a*b (both of the same kind).
  friend LinearOperator compose(const LinearOperator& a, const LinearOperator& b);

 private:
  explicit LinearOperator(Complex value);
  explicit LinearOperator(std::variant<Complex, Vector, Matrix> data);

  friend Vector solve_shifted(const LinearOperator& op, Complex alpha, const Vector& rhs);

  std::variant<Complex, Vector, Matrix> data_;
  std::shared_ptr<detail::ShiftCache> cache_;
};

/// Lambda * v.
Vector apply_op(const LinearOperator& op, const Vector& v);

/// out += op * v, without a temporary for the diagonal and scalar kinds.
void apply_add(const LinearOperator& op, const Vector& v, Vector& out);

/// Solves (I - alpha*Lambda) x = rhs. Dense factorizations are cached per alpha.
Vector solve_shifted(const LinearOperator& op, Complex alpha, const Vector& rhs);

struct OperatorNorms {
  double one = 0.0;
  double inf = 0.0;
  double max() const { return one > inf ? one : inf; }
};

/// Induced 1- and infinity-norms.
OperatorNorms norms(const LinearOperator& op);

}  // namespace expsdc
