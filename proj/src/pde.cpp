#include "expsdc/pde.hpp"

#include <cmath>
#include <memory>
#include <numbers>
#include <stdexcept>

namespace expsdc {

using std::numbers::pi;

Complex ks_symbol(double k) {
  const double k2 = k * k;
  return {k2 - k2 * k2, 0.0};
}

Complex nikolaevskiy_symbol(double k) {
  const double k2 = k * k;
  const double d = 1.0 - k2;
  const double re = k2 * (kNikolaevskiyR - d * d);
  const double im = -kNikolaevskiyAlpha * k2 * k + kNikolaevskiyBeta * k2 * k2 * k;
  return {re, im};
}

Complex qg_symbol(double k, double l) {
  const double kk = k * k + l * l;
  if (kk == 0.0) return 0.0;
  const double k4 = k * k * k * k;
  const double l4 = l * l * l * l;
  return Complex(-kQgEpsilon * k * k, -k) / kk - kQgNu * (k4 * k4 + l4 * l4);
}

Complex kdv_symbol(double k) { return {0.0, kKdvDelta * k * k * k}; }

double ks_initial(double x) { return std::cos(x / 16.0) * (1.0 + std::sin(x / 16.0)); }

double nikolaevskiy_initial(double x) { return std::sin(x) + 0.1 * std::sin(x / 25.0); }

double qg_initial_streamfunction(double x, double y) {
  const double a = 2.0 * y * y + 0.5 * x * x - pi / 4.0;
  return 0.125 * std::exp(-8.0 * a * a);
}

double kdv_initial(double x) { return std::cos(pi * x); }

namespace {

Vector real_part(const Vector& v) { return v.real().cast<Complex>(); }

Vector sample(const SpectralGrid1D& g, double (*f)(double)) {
  Vector u(g.n);
  for (Index m = 0; m < g.n; ++m) u[m] = f(g.x[m]);
  return u;
}

/// Symbol on the grid with the odd part of the Nyquist mode removed, so the
/// operator maps real fields to real fields.
Vector grid_symbol(const SpectralGrid1D& g, Complex (*symbol)(double)) {
  Vector s(g.n);
  for (Index m = 0; m < g.n; ++m) {
    s[m] = symbol(g.k[m]);
    if (m == g.nyquist()) s[m] = s[m].real();
  }
  return s;
}

/// -(1/2) d/dx (u^2) in Fourier space, 2/3-rule dealiased.
struct BurgersTerm {
  std::shared_ptr<const SpectralGrid1D> grid;

  Vector operator()(const Vector& u_hat) const {
    const SpectralGrid1D& g = *grid;
    Vector masked = u_hat.cwiseProduct(g.dealias.cast<Complex>());
    Vector u = real_part(ifft(masked));
    Vector sq = u.cwiseProduct(u);
    Vector out = fft(sq);
    for (Index m = 0; m < g.n; ++m) out[m] *= -0.5 * g.ik[m] * g.dealias[m];
    return out;
  }
};

SemilinearProblem fourier_1d(std::string name, Index n, double a, double b, Complex (*symbol)(double),
                             double (*initial)(double), double t_end) {
  auto grid = std::make_shared<const SpectralGrid1D>(SpectralGrid1D::make(n, a, b));
  SemilinearProblem p;
  p.name = std::move(name);
  p.linear = LinearOperator::diagonal(grid_symbol(*grid, symbol));
  BurgersTerm term{grid};
  p.nonlinear = [term](double, const Vector& u_hat) { return term(u_hat); };
  p.initial_state = fft(sample(*grid, initial));
  p.t_start = 0.0;
  p.t_end = t_end;
  p.to_physical = [](const Vector& u_hat) { return real_part(ifft(u_hat)); };
  return p;
}

}  // namespace

SemilinearProblem make_ks(Index n, double t_end) {
  return fourier_1d("ks", n, 0.0, 64.0 * pi, ks_symbol, ks_initial, t_end);
}

SemilinearProblem make_nikolaevskiy(Index n, double t_end) {
  return fourier_1d("nikolaevskiy", n, -75.0 * pi, 75.0 * pi, nikolaevskiy_symbol, nikolaevskiy_initial, t_end);
}

SemilinearProblem make_kdv_fourier(Index n, double t_end) {
  return fourier_1d("kdv-fourier", n, 0.0, 2.0, kdv_symbol, kdv_initial, t_end);
}

RealMatrix fourier_differentiation_matrix(const SpectralGrid1D& grid) {
  const Index n = grid.n;
  RealMatrix d(n, n);
  Vector e = Vector::Zero(n);
  for (Index c = 0; c < n; ++c) {
    e.setZero();
    e[c] = 1.0;
    d.col(c) = ifft(grid.ik.cwiseProduct(fft(e))).real();
    e[c] = 0.0;
  }
  return d;
}

SemilinearProblem make_kdv_dense(Index n, double t_end) {
  auto grid = std::make_shared<const SpectralGrid1D>(SpectralGrid1D::make(n, 0.0, 2.0));
  const Vector symbol = grid_symbol(*grid, kdv_symbol);

  RealMatrix lambda(n, n);
  Vector e = Vector::Zero(n);
  for (Index c = 0; c < n; ++c) {
    e[c] = 1.0;
    lambda.col(c) = ifft(symbol.cwiseProduct(fft(e))).real();
    e[c] = 0.0;
  }

  SemilinearProblem p;
  p.name = "kdv";
  p.linear = LinearOperator::dense(lambda.cast<Complex>());
  BurgersTerm term{grid};
  p.nonlinear = [term](double, const Vector& u) { return real_part(ifft(term(fft(u)))); };
  p.initial_state = sample(*grid, kdv_initial);
  p.t_start = 0.0;
  p.t_end = t_end;
  p.to_physical = [](const Vector& u) { return real_part(u); };
  return p;
}

Vector qg_streamfunction_hat(const Vector& omega_hat, const SpectralGrid2D& grid) {
  const Index n = grid.n();
  const RealVector& k = grid.axis.k;
  Vector psi(n * n);
  for (Index iy = 0; iy < n; ++iy) {
    for (Index ix = 0; ix < n; ++ix) {
      const double kk = k[ix] * k[ix] + k[iy] * k[iy];
      const Index idx = ix + n * iy;
      psi[idx] = kk == 0.0 ? Complex{0.0} : -omega_hat[idx] / kk;
    }
  }
  return psi;
}

SemilinearProblem make_qg(Index n, double t_end) {
  auto grid = std::make_shared<const SpectralGrid2D>(SpectralGrid2D::make(n, -pi, pi));
  const SpectralGrid1D& axis = grid->axis;
  const Index size = n * n;

  Vector symbol(size);
  for (Index iy = 0; iy < n; ++iy) {
    for (Index ix = 0; ix < n; ++ix) {
      Complex s = qg_symbol(axis.k[ix], axis.k[iy]);
      if (ix == axis.nyquist()) s = s.real();
      symbol[ix + n * iy] = s;
    }
  }

  Vector psi(size);
  for (Index iy = 0; iy < n; ++iy)
    for (Index ix = 0; ix < n; ++ix) psi[ix + n * iy] = qg_initial_streamfunction(axis.x[ix], axis.x[iy]);
  Vector psi_hat = fft2(psi, n);
  Vector omega_hat(size);
  for (Index iy = 0; iy < n; ++iy)
    for (Index ix = 0; ix < n; ++ix) {
      const double kk = axis.k[ix] * axis.k[ix] + axis.k[iy] * axis.k[iy];
      omega_hat[ix + n * iy] = -kk * psi_hat[ix + n * iy];
    }

  SemilinearProblem p;
  p.name = "qg";
  p.linear = LinearOperator::diagonal(std::move(symbol));
  p.nonlinear = [grid](double, const Vector& w_hat) {
    const Index n = grid->n();
    const SpectralGrid1D& ax = grid->axis;
    Vector w = w_hat;
    for (Index iy = 0; iy < n; ++iy)
      for (Index ix = 0; ix < n; ++ix) w[ix + n * iy] *= ax.dealias[ix] * ax.dealias[iy];
    const Vector psi_hat = qg_streamfunction_hat(w, *grid);

    Vector u_hat(n * n), v_hat(n * n), wx_hat(n * n), wy_hat(n * n);
    for (Index iy = 0; iy < n; ++iy) {
      for (Index ix = 0; ix < n; ++ix) {
        const Index idx = ix + n * iy;
        u_hat[idx] = -ax.ik[iy] * psi_hat[idx];
        v_hat[idx] = ax.ik[ix] * psi_hat[idx];
        wx_hat[idx] = ax.ik[ix] * w[idx];
        wy_hat[idx] = ax.ik[iy] * w[idx];
      }
    }
    const RealVector u = ifft2(u_hat, n).real();
    const RealVector v = ifft2(v_hat, n).real();
    const RealVector wx = ifft2(wx_hat, n).real();
    const RealVector wy = ifft2(wy_hat, n).real();
    const Vector adv = (u.cwiseProduct(wx) + v.cwiseProduct(wy)).cast<Complex>();
    Vector out = fft2(adv, n);
    for (Index iy = 0; iy < n; ++iy)
      for (Index ix = 0; ix < n; ++ix) out[ix + n * iy] *= -ax.dealias[ix] * ax.dealias[iy];
    return out;
  };
  p.initial_state = std::move(omega_hat);
  p.t_start = 0.0;
  p.t_end = t_end;
  p.to_physical = [n](const Vector& w_hat) { return real_part(ifft2(w_hat, n)); };
  return p;
}

SemilinearProblem make_scalar_demo(double t_end) {
  SemilinearProblem p;
  p.name = "scalar";
  p.linear = LinearOperator::scalar(-1.0);
  p.nonlinear = [](double t, const Vector& state) {
    return Vector::Constant(state.size(), Complex(std::cos(2.0 * t)));
  };
  p.initial_state = Vector::Constant(1, 1.0);
  p.t_start = 0.0;
  p.t_end = t_end;
  p.exact = [](double t) {
    return Vector::Constant(1, 0.8 * std::exp(-t) + (std::cos(2.0 * t) + 2.0 * std::sin(2.0 * t)) / 5.0);
  };
  return p;
}

std::vector<std::string> problem_ids() { return {"ks", "nikolaevskiy", "qg", "kdv", "kdv-fourier", "scalar"}; }

SemilinearProblem make_problem(std::string_view id, const ProblemOptions& options) {
  auto size = [&](Index fallback) { return options.n > 0 ? options.n : fallback; };
  auto until = [&](double fallback) { return options.t_end.value_or(fallback); };
  const double kdv_end = 3.6 / pi;
  if (id == "ks") return make_ks(size(1024), until(60.0));
  if (id == "nikolaevskiy") return make_nikolaevskiy(size(4096), until(50.0));
  if (id == "qg") {
    return options.desk_scale ? make_qg(size(128), until(2.0)) : make_qg(size(256), until(5.0));
  }
  if (id == "kdv") return make_kdv_dense(size(128), until(kdv_end));
  if (id == "kdv-fourier") return make_kdv_fourier(size(128), until(kdv_end));
  if (id == "scalar") return make_scalar_demo(until(5.0));
  throw std::invalid_argument("unknown problem '" + std::string(id) + "'");
}

double relative_error(const Vector& x, const Vector& y) {
  if (x.size() != y.size()) throw DimensionError("relative_error: length mismatch");
  if (x.size() == 0) throw std::invalid_argument("relative_error: empty reference");
  const double scale = x.cwiseAbs().maxCoeff();
  if (!(scale > 0.0)) throw std::invalid_argument("relative_error: zero reference");
  return (x - y).cwiseAbs().maxCoeff() / scale;
}

double relative_error(const SemilinearProblem& problem, const Vector& reference, const Vector& state) {
  return relative_error(problem.physical(reference), problem.physical(state));
}

}  // namespace expsdc
