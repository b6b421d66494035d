#include "expsdc/spectral.hpp"

#include <unsupported/Eigen/FFT>

#include <numbers>

namespace expsdc {

namespace {

Eigen::FFT<double>& plan() {
  thread_local Eigen::FFT<double> fft;
  return fft;
}

}  // namespace

Vector fft(const Vector& x) {
  Vector out(x.size());
  plan().fwd(out.data(), x.data(), x.size());
  return out;
}

Vector ifft(const Vector& x) {
  Vector out(x.size());
  plan().inv(out.data(), x.data(), x.size());
  return out;
}

Vector fft2(const Vector& field, Index n) {
  if (field.size() != n * n) throw DimensionError("fft2 expects an n*n field");
  Matrix m = Eigen::Map<const Matrix>(field.data(), n, n);
  Vector buf(n), out(n);
  for (Index c = 0; c < n; ++c) {
    buf = m.col(c);
    plan().fwd(out.data(), buf.data(), n);
    m.col(c) = out;
  }
  for (Index r = 0; r < n; ++r) {
    buf = m.row(r).transpose();
    plan().fwd(out.data(), buf.data(), n);
    m.row(r) = out.transpose();
  }
  return Eigen::Map<const Vector>(m.data(), n * n);
}

Vector ifft2(const Vector& field, Index n) {
  if (field.size() != n * n) throw DimensionError("ifft2 expects an n*n field");
  Matrix m = Eigen::Map<const Matrix>(field.data(), n, n);
  Vector buf(n), out(n);
  for (Index c = 0; c < n; ++c) {
    buf = m.col(c);
    plan().inv(out.data(), buf.data(), n);
    m.col(c) = out;
  }
  for (Index r = 0; r < n; ++r) {
    buf = m.row(r).transpose();
    plan().inv(out.data(), buf.data(), n);
    m.row(r) = out.transpose();
  }
  return Eigen::Map<const Vector>(m.data(), n * n);
}

bool is_power_of_two(Index n) { return n > 0 && (n & (n - 1)) == 0; }

SpectralGrid1D SpectralGrid1D::make(Index n, double a, double b) {
  if (!is_power_of_two(n) || n < 4) throw std::invalid_argument("grid size must be a power of two >= 4");
  if (!(b > a)) throw std::invalid_argument("grid domain must have b > a");
  SpectralGrid1D g;
  g.n = n;
  g.a = a;
  g.b = b;
  g.x.resize(n);
  g.k.resize(n);
  g.dealias.resize(n);
  g.ik.resize(n);
  const double scale = 2.0 * std::numbers::pi / (b - a);
  for (Index m = 0; m < n; ++m) {
    g.x[m] = a + (b - a) * static_cast<double>(m) / static_cast<double>(n);
    const Index j = m < n / 2 ? m : m - n;
    g.k[m] = scale * static_cast<double>(j);
    g.dealias[m] = 3 * std::abs(j) <= n ? 1.0 : 0.0;
    g.ik[m] = m == n / 2 ? Complex{0.0} : Complex(0.0, g.k[m]);
  }
  return g;
}

}  // namespace expsdc
