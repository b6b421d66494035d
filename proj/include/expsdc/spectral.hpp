#pragma once

#include "expsdc/operator.hpp"

namespace expsdc {

// Unitary-inverse FFT pair: ifft(fft(x)) == x. Plans are cached per thread.
Vector fft(const Vector& x);
Vector ifft(const Vector& x);

/// 2D transforms of an n x n field stored column-major (x fastest).
Vector fft2(const Vector& field, Index n);
Vector ifft2(const Vector& field, Index n);

/// Periodic grid on [a, b) with wavenumbers in FFT order.
struct SpectralGrid1D {
  Index n = 0;
  double a = 0.0;
  double b = 0.0;
  RealVector x;
  /// k_j = 2 pi j / (b - a), j = 0..n/2-1, -n/2..-1.
  RealVector k;
  /// 1 where |j| <= n/3, 0 elsewhere (2/3 rule).
  RealVector dealias;
  /// i k with the Nyquist mode zeroed.
  Vector ik;

  static SpectralGrid1D make(Index n, double a, double b);
  Index nyquist() const { return n / 2; }
  double length() const { return b - a; }
};

/// n x n periodic grid, same axis on x and y.
struct SpectralGrid2D {
  SpectralGrid1D axis;
  Index n() const { return axis.n; }
  static SpectralGrid2D make(Index n, double a, double b) { return {SpectralGrid1D::make(n, a, b)}; }
};

bool is_power_of_two(Index n);

}  // namespace expsdc
