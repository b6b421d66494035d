#pragma once

#include "expsdc/integrators.hpp"
#include "expsdc/quadrature.hpp"

#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string_view>
#include <vector>

namespace expsdc {

/// Raised when an IMEXSDC substep hits the pole 1 - r*eta_i = 0.
class StabilityPoleError : public std::runtime_error {
 public:
  StabilityPoleError(int substep, Complex r);
  int substep() const { return substep_; }

 private:
  int substep_;
};

/// psi_N^M(r, z) of the Dahlquist-type problem phi' = mu phi + lambda phi with
/// r = h mu treated as the linear part and z = h lambda as the nonlinear part.
///
/// The per-r coefficients (W for ETDSDC, I for IMEXSDC) are built once so
/// that sweeping z for a fixed r costs only the recurrence.
class StabilityFunction {
 public:
  StabilityFunction(Scheme scheme, const NodeSet& nodes, int sweeps, Complex r);

  Complex operator()(Complex z) const;

  Complex r() const { return r_; }

 private:
  Scheme scheme_;
  NodeSet nodes_;
  int sweeps_;
  Complex r_;
  std::vector<Complex> exp_r_eta_;  // e^{r eta_i}
  std::vector<Complex> euler_coef_;  // eta_i phi_1(r eta_i)
  Matrix weights_;  // W (ETDSDC) or I (IMEXSDC), (N-1) x N
  int pole_substep_ = -1;
};

Complex stability_value(Scheme scheme, const NodeSet& nodes, int sweeps, Complex r, Complex z);

struct RegionQuery {
  Scheme scheme = Scheme::etdsdc;
  int nodes = 8;
  int sweeps = 7;
  NodeFamily family = NodeFamily::chebyshev;
  std::vector<Complex> r_values{Complex{0.0}};
  double re_min = -40.0;
  double re_max = 10.0;
  double im_min = -40.0;
  double im_max = 40.0;
  int re_points = 401;
  int im_points = 401;
  /// Accuracy mode threshold; stability mode when empty.
  std::optional<double> epsilon;

  void validate() const;
  Complex z_at(int ix, int iy) const;
};

inline constexpr double kDefaultAccuracyEpsilon = 1e-8;

struct RegionSlice {
  Complex r;
  /// |psi| or |psi - e^{r+z}|, row-major over (im, re); +inf at poles.
  std::vector<double> values;
  std::vector<bool> member;
};

struct RegionGrid {
  RegionQuery query;
  std::vector<RegionSlice> slices;
};

RegionGrid region_grid(const RegionQuery& query, int threads = 1);

enum class RegionFormat { csv, json };

void export_region(const RegionGrid& grid, const std::filesystem::path& path, RegionFormat format);
void export_region(const RegionGrid& grid, std::ostream& out, RegionFormat format);
RegionGrid load_region_json(const std::filesystem::path& path);
RegionGrid load_region_json(std::istream& in);

/// Named r lists {0, R0/2, R0}: dissipative (R0 = -30), dispersive (30i), mixed (30 e^{3 pi i/4}).
std::vector<Complex> region_preset(std::string_view name);

}  // namespace expsdc
