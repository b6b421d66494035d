#include "doctest.h"

#include "expsdc/analysis.hpp"

#include <cmath>
#include <random>
#include <sstream>

using namespace expsdc;

namespace {

RegionQuery small_query(Scheme scheme, int N, int M) {
  RegionQuery q;
  q.scheme = scheme;
  q.nodes = N;
  q.sweeps = M;
  q.re_min = -3.0;
  q.re_max = 1.0;
  q.im_min = -2.0;
  q.im_max = 2.0;
  q.re_points = 9;
  q.im_points = 5;
  return q;
}

std::string to_text(const RegionGrid& grid, RegionFormat format) {
  std::ostringstream os;
  export_region(grid, os, format);
  return os.str();
}

}  // namespace

TEST_CASE("etdsdc is exact on the linear part alone") {
  for (auto [N, M] : {std::pair{2, 0}, {4, 3}, {8, 7}, {6, 2}, {16, 15}}) {
    const NodeSet nodes = chebyshev_nodes(N);
    for (Complex r : {Complex(-30.0), Complex(0.0, 30.0), std::polar(30.0, 2.356194490192345), Complex(0.7, -2.0),
                      Complex(0.0)}) {
      const Complex psi = stability_value(Scheme::etdsdc, nodes, M, r, 0.0);
      CHECK(std::abs(psi - std::exp(r)) <= 1e-12 * std::max(1.0, std::abs(std::exp(r))));
    }
  }
}

TEST_CASE("zero linear part gives the explicit SDC value for both schemes") {
  CHECK(std::abs(stability_value(Scheme::etdsdc, chebyshev_nodes(2), 0, 0.0, Complex(-0.4, 0.3)) - Complex(0.6, 0.3)) <= 1e-15);
  CHECK(std::abs(stability_value(Scheme::imexsdc, chebyshev_nodes(2), 0, 0.0, Complex(-0.4, 0.3)) - Complex(0.6, 0.3)) <= 1e-15);
  // (2, 1): Euler predictor then one trapezoid correction, i.e. Heun: 1 + z + z^2/2.
  const Complex z(-1.2, 0.8);
  for (Scheme s : {Scheme::etdsdc, Scheme::imexsdc}) {
    CHECK(std::abs(stability_value(s, chebyshev_nodes(2), 1, 0.0, z) - (1.0 + z + 0.5 * z * z)) <= 1e-15);
  }
  std::mt19937_64 rng(4);
  std::uniform_real_distribution<double> u(-3.0, 3.0);
  for (int trial = 0; trial < 50; ++trial) {
    const Complex zz(u(rng), u(rng));
    const NodeSet nodes = chebyshev_nodes(2 + trial % 8);
    const int M = trial % 5;
    const Complex a = stability_value(Scheme::etdsdc, nodes, M, 0.0, zz);
    const Complex b = stability_value(Scheme::imexsdc, nodes, M, 0.0, zz);
    CHECK(std::abs(a - b) <= 1e-12 * std::max(1.0, std::abs(a)));
  }
  for (Scheme s : {Scheme::etdsdc, Scheme::imexsdc}) CHECK(stability_value(s, chebyshev_nodes(5), 3, 0.0, 0.0) == Complex(1.0));
}

TEST_CASE("explicit SDC with many sweeps approaches the exponential") {
  // Order min(N, M+1): the Taylor error of psi(0, z) - e^z is O(z^{order+1}).
  const NodeSet nodes = chebyshev_nodes(6);
  const Complex z(0.05, 0.02);
  const double e5 = std::abs(stability_value(Scheme::etdsdc, nodes, 5, 0.0, z) - std::exp(z));
  CHECK(e5 <= 1e-11);
  const double e2 = std::abs(stability_value(Scheme::etdsdc, nodes, 2, 0.0, z) - std::exp(z));
  const double e2h = std::abs(stability_value(Scheme::etdsdc, nodes, 2, 0.0, 0.5 * z) - std::exp(0.5 * z));
  CHECK(std::log2(e2 / e2h) == doctest::Approx(4.0).epsilon(0.05));
}

TEST_CASE("imexsdc poles are reported with the substep") {
  // Two nodes have one substep of length 1, so r = 1 sits on the pole.
  try {
    stability_value(Scheme::imexsdc, chebyshev_nodes(2), 0, 1.0, 0.0);
    FAIL("expected a pole");
  } catch (const StabilityPoleError& e) {
    CHECK(e.substep() == 1);
    CHECK(std::string(e.what()).find("substep 1") != std::string::npos);
  }
  const NodeSet three = chebyshev_nodes(3);
  CHECK_THROWS_AS(stability_value(Scheme::imexsdc, three, 1, 2.0, 0.5), StabilityPoleError);
  CHECK_NOTHROW(stability_value(Scheme::etdsdc, three, 1, 2.0, 0.5));
}

TEST_CASE("stability function objects reuse coefficients across z") {
  const StabilityFunction psi(Scheme::etdsdc, chebyshev_nodes(8), 7, -30.0);
  CHECK(psi.r() == Complex(-30.0));
  for (Complex z : {Complex(-1.0), Complex(0.5, 3.0), Complex(-20.0, -10.0)}) {
    CHECK(psi(z) == stability_value(Scheme::etdsdc, chebyshev_nodes(8), 7, -30.0, z));
  }
}

TEST_CASE("conjugate symmetry") {
  std::mt19937_64 rng(19);
  std::uniform_real_distribution<double> u(-20.0, 20.0);
  for (int trial = 0; trial < 60; ++trial) {
    const Complex r(u(rng), u(rng)), z(0.5 * u(rng), 0.5 * u(rng));
    const NodeSet nodes = chebyshev_nodes(2 + trial % 9);
    const int M = trial % 6;
    for (Scheme s : {Scheme::etdsdc, Scheme::imexsdc}) {
      try {
        const Complex a = stability_value(s, nodes, M, r, z);
        const Complex b = stability_value(s, nodes, M, std::conj(r), std::conj(z));
        CHECK(std::abs(a - std::conj(b)) <= 1e-12 * std::max(1.0, std::abs(a)));
      } catch (const StabilityPoleError&) {
      }
    }
  }

  RegionQuery q = small_query(Scheme::etdsdc, 4, 3);
  q.r_values = {Complex(-2.0, 3.0), Complex(-2.0, -3.0)};
  const RegionGrid g = region_grid(q);
  for (int iy = 0; iy < q.im_points; ++iy) {
    for (int ix = 0; ix < q.re_points; ++ix) {
      const std::size_t a = static_cast<std::size_t>(iy) * q.re_points + ix;
      const std::size_t b = static_cast<std::size_t>(q.im_points - 1 - iy) * q.re_points + ix;
      CHECK(g.slices[0].values[a] == doctest::Approx(g.slices[1].values[b]).epsilon(1e-12));
      CHECK(g.slices[0].member[a] == g.slices[1].member[b]);
    }
  }
}

TEST_CASE("region grid membership") {
  RegionQuery q = small_query(Scheme::etdsdc, 2, 0);
  q.re_min = -1.0;
  q.re_max = -1.0;
  q.im_min = 0.0;
  q.im_max = 0.0;
  q.re_points = 1;
  q.im_points = 1;
  const RegionGrid g = region_grid(q);
  REQUIRE(g.slices.size() == 1);
  CHECK(g.slices[0].values[0] <= 1e-15);
  CHECK(g.slices[0].member[0]);

  for (Scheme s : {Scheme::etdsdc, Scheme::imexsdc}) {
    RegionQuery a = small_query(s, 8, 7);
    a.epsilon = 1e-14;
    a.re_min = a.re_max = 0.0;
    a.im_min = a.im_max = 0.0;
    a.re_points = a.im_points = 1;
    CHECK(region_grid(a).slices[0].member[0]);
  }

  // Marker equals value <= threshold everywhere.
  RegionQuery m = small_query(Scheme::imexsdc, 4, 3);
  m.r_values = region_preset("dispersive");
  for (const auto& slice : region_grid(m, 3).slices) {
    for (std::size_t i = 0; i < slice.values.size(); ++i) CHECK(slice.member[i] == (slice.values[i] <= 1.0));
  }
}

TEST_CASE("region poles become non-members") {
  RegionQuery q = small_query(Scheme::imexsdc, 2, 0);
  q.r_values = {Complex(1.0)};
  const RegionGrid g = region_grid(q);
  for (std::size_t i = 0; i < g.slices[0].values.size(); ++i) {
    CHECK(std::isinf(g.slices[0].values[i]));
    CHECK_FALSE(g.slices[0].member[i]);
  }
}

TEST_CASE("large dissipative r keeps an accuracy neighborhood of the origin") {
  // The deviation is first order in z at stiff r, so membership needs a small disk.
  const StabilityFunction psi(Scheme::etdsdc, chebyshev_nodes(8), 7, -30.0);
  auto worst_on_circle = [&](double radius) {
    double worst = 0.0;
    for (int k = 0; k < 16; ++k) {
      const Complex z = std::polar(radius, 2.0 * 3.141592653589793 * k / 16.0);
      worst = std::max(worst, std::abs(psi(z) - std::exp(-30.0 + z)));
    }
    return worst;
  };
  double previous = worst_on_circle(1.0);
  double member_radius = 0.0;
  for (double radius = 0.5; radius >= 1e-6; radius *= 0.5) {
    const double w = worst_on_circle(radius);
    CHECK(w < previous);
    previous = w;
    if (w <= kDefaultAccuracyEpsilon && member_radius == 0.0) member_radius = radius;
  }
  CHECK(member_radius >= 1e-4);
  CHECK(std::abs(psi(0.0) - std::exp(-30.0)) <= 1e-12);
}

TEST_CASE("presets") {
  const auto d = region_preset("dissipative");
  REQUIRE(d.size() == 3);
  CHECK(d[0] == Complex(0.0));
  CHECK(d[1] == Complex(-15.0));
  CHECK(d[2] == Complex(-30.0));
  CHECK(region_preset("dispersive")[2] == Complex(0.0, 30.0));
  const auto m = region_preset("mixed");
  CHECK(std::abs(m[2] - 30.0 * Complex(-std::sqrt(0.5), std::sqrt(0.5))) <= 1e-13);
  CHECK(std::abs(m[1] - 0.5 * m[2]) <= 1e-15);
  CHECK_THROWS(region_preset("other"));
}

TEST_CASE("query validation") {
  RegionQuery q = small_query(Scheme::etdsdc, 4, 3);
  q.re_points = 0;
  CHECK_THROWS(region_grid(q));
  q = small_query(Scheme::etdsdc, 4, 3);
  q.epsilon = 0.0;
  CHECK_THROWS(region_grid(q));
  q = small_query(Scheme::etdrk4, 4, 3);
  CHECK_THROWS(region_grid(q));
  q = small_query(Scheme::etdsdc, 4, 3);
  q.r_values.clear();
  CHECK_THROWS(region_grid(q));
  q = small_query(Scheme::etdsdc, 4, 3);
  q.re_max = q.re_min - 1.0;
  CHECK_THROWS(region_grid(q));
  CHECK(small_query(Scheme::etdsdc, 4, 3).z_at(8, 4) == Complex(1.0, 2.0));
  CHECK(small_query(Scheme::etdsdc, 4, 3).z_at(0, 0) == Complex(-3.0, -2.0));
}

TEST_CASE("region export") {
  RegionQuery q = small_query(Scheme::etdsdc, 3, 2);
  q.re_points = 2;
  q.im_points = 2;
  const RegionGrid g = region_grid(q);
  const std::string csv = to_text(g, RegionFormat::csv);
  std::istringstream lines(csv);
  std::string line;
  std::vector<std::string> rows;
  while (std::getline(lines, line)) rows.push_back(line);
  REQUIRE(rows.size() == 5);
  CHECK(rows[0] == "re_r,im_r,re_z,im_z,value,member");
  CHECK(rows[1].rfind("0,0,-3,-2,", 0) == 0);
  CHECK(rows[2].rfind("0,0,1,-2,", 0) == 0);
  CHECK(rows[3].rfind("0,0,-3,2,", 0) == 0);

  RegionQuery big = small_query(Scheme::imexsdc, 6, 5);
  big.r_values = region_preset("mixed");
  big.epsilon = 1e-8;
  CHECK(to_text(region_grid(big), RegionFormat::csv) == to_text(region_grid(big, 4), RegionFormat::csv));
  CHECK(to_text(region_grid(big), RegionFormat::json) == to_text(region_grid(big), RegionFormat::json));
}

TEST_CASE("json round trip") {
  RegionQuery q = small_query(Scheme::imexsdc, 5, 4);
  q.r_values = {Complex(0.0), Complex(0.2, 1e-3), Complex(1.0)};
  q.family = NodeFamily::gauss_legendre;
  q.epsilon = 1e-6;
  const RegionGrid g = region_grid(q);
  std::istringstream in(to_text(g, RegionFormat::json));
  const RegionGrid back = load_region_json(in);
  CHECK(back.query.scheme == q.scheme);
  CHECK(back.query.nodes == 5);
  CHECK(back.query.sweeps == 4);
  CHECK(back.query.family == NodeFamily::gauss_legendre);
  REQUIRE(back.query.epsilon.has_value());
  CHECK(*back.query.epsilon == 1e-6);
  REQUIRE(back.slices.size() == g.slices.size());
  for (std::size_t s = 0; s < g.slices.size(); ++s) {
    CHECK(back.slices[s].r == g.slices[s].r);
    CHECK(back.slices[s].values == g.slices[s].values);
    CHECK(back.slices[s].member == g.slices[s].member);
  }
  CHECK(to_text(back, RegionFormat::json) == to_text(g, RegionFormat::json));
}
