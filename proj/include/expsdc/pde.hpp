#pragma once

#include "expsdc/integrators.hpp"
#include "expsdc/spectral.hpp"

#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace expsdc {

// Benchmark symbols. Wavenumbers are already scaled to the domain.
Complex ks_symbol(double k);
Complex nikolaevskiy_symbol(double k);
/// Zero at the origin mode.
Complex qg_symbol(double k, double l);
Complex kdv_symbol(double k);

inline constexpr double kNikolaevskiyR = 0.25;
inline constexpr double kNikolaevskiyAlpha = 2.1;
inline constexpr double kNikolaevskiyBeta = 0.77;
inline constexpr double kQgEpsilon = 0.01;
inline constexpr double kQgNu = 1e-14;
inline constexpr double kKdvDelta = 0.022;

double ks_initial(double x);
double nikolaevskiy_initial(double x);
double qg_initial_streamfunction(double x, double y);
double kdv_initial(double x);

/// Fourier-space KS on [0, 64 pi], t in [0, 60].
SemilinearProblem make_ks(Index n = 1024, double t_end = 60.0);
/// Fourier-space Nikolaevskiy on [-75 pi, 75 pi], t in [0, 50].
SemilinearProblem make_nikolaevskiy(Index n = 4096, double t_end = 50.0);
/// Fourier-space vorticity on [-pi, pi]^2, t in [0, 5]. State index is ix + n*iy.
SemilinearProblem make_qg(Index n = 256, double t_end = 5.0);
/// Physical-space KdV on [0, 2] with a dense linear operator, t in [0, 3.6/pi].
SemilinearProblem make_kdv_dense(Index n = 128, double t_end = 3.6 / 3.14159265358979323846);
/// The same KdV discretization in Fourier space (diagonal operator).
SemilinearProblem make_kdv_fourier(Index n = 128, double t_end = 3.6 / 3.14159265358979323846);
/// phi' = -phi + cos(2t), phi(0) = 1 on [0, 5], with its exact solution.
SemilinearProblem make_scalar_demo(double t_end = 5.0);

/// Periodic Fourier differentiation matrix on `grid` (Nyquist mode dropped).
RealMatrix fourier_differentiation_matrix(const SpectralGrid1D& grid);

/// Spectral QG streamfunction: psi_hat = -omega_hat / (k^2 + l^2), 0 at the origin.
Vector qg_streamfunction_hat(const Vector& omega_hat, const SpectralGrid2D& grid);

struct ProblemOptions {
  /// Reduced QG size (n = 128, t = 2) for quick runs.
  bool desk_scale = false;
  /// Grid size; 0 keeps the problem default.
  Index n = 0;
  std::optional<double> t_end;
};

/// ids: ks, nikolaevskiy, qg, kdv, kdv-fourier, scalar.
SemilinearProblem make_problem(std::string_view id, const ProblemOptions& options = {});
std::vector<std::string> problem_ids();

/// ||x - y||_inf / ||x||_inf with x the reference.
double relative_error(const Vector& x, const Vector& y);
/// Same, after mapping both states to physical space.
double relative_error(const SemilinearProblem& problem, const Vector& reference, const Vector& state);

}  // namespace expsdc
