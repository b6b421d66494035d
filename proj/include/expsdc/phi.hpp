#pragma once

#include "expsdc/operator.hpp"

#include <array>
#include <vector>

namespace expsdc {

/// Number of Taylor terms used before squaring, paired with the norm bound 1.
inline constexpr int kTaylorTerms = 20;

inline constexpr int kDefaultContourPoints = 64;
inline constexpr double kDefaultContourRadius = 1.0;

/// Raised when a phi evaluation produces a non-finite value.
class PhiError : public std::runtime_error {
 public:
  PhiError(const std::string& what, int level) : std::runtime_error(what), level_(level) {}
  /// Doubling level (1-based) at which the failure appeared, 0 for the initial series.
  int level() const { return level_; }

 private:
  int level_;
};

/// phi_0(A), ..., phi_K(A) for one argument A (same kind as the argument).
struct PhiTable {
  std::vector<LinearOperator> values;
  double argument_norm = 0.0;
  int scaling_exponent = 0;

  int order() const { return static_cast<int>(values.size()) - 1; }
  const LinearOperator& operator[](int n) const { return values.at(static_cast<std::size_t>(n)); }
};

/// 1/n! for n = 0..170.
double inverse_factorial(int n);

/// Truncated series sum_{k < terms} z^k / (k+n)!.
template <typename C>
C phi_series(C z, int n, int terms) {
  // Horner from the highest term down.
  C acc = C(0);
  for (int k = terms - 1; k >= 0; --k) {
    acc = acc * z + C(inverse_factorial(k + n));
  }
  return acc;
}

int choose_scaling_exponent(double norm);
int choose_scaling_exponent(const LinearOperator& op);

/// Taylor scaling and squaring for any operator kind. Diagonal operators are
/// evaluated entry by entry, each with its own scaling exponent.
PhiTable phi_taylor_ss(const LinearOperator& op, int K);

/// Scalar fast path of phi_taylor_ss returning phi_0(z)..phi_K(z).
std::vector<Complex> phi_taylor_ss(Complex z, int K);

/// phi_0..phi_K at a point via the closed forms (n <= 3) and the recursion.
std::vector<Complex> phi_explicit(Complex z, int K);

/// Trapezoidal Cauchy average on the circle z + R e^{i theta}; requires |z| < 1.
PhiTable phi_contour_scalar(Complex z, int K, int P = kDefaultContourPoints,
                            double R = kDefaultContourRadius);

/// Resolvent contour sum for a dense operator; the circle (z0, R) must enclose the spectrum.
PhiTable phi_contour_matrix(const LinearOperator& op, int K, int P, double R, Complex z0);

/// Scalar evaluation that builds phi_n from phi_{n-1}: contour-averaged
/// recursion when |Lambda| < 1, the plain recursion otherwise.
PhiTable phi_recursive_contour(const LinearOperator& op, int K, int P = kDefaultContourPoints,
                               double R = kDefaultContourRadius);

}  // namespace expsdc
