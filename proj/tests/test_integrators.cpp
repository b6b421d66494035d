#include "doctest.h"

#include "expsdc/analysis.hpp"
#include "expsdc/integrators.hpp"

#include <cmath>
#include <random>

using namespace expsdc;

namespace {

Vector one(Complex v) { return Vector::Constant(1, v); }

SemilinearProblem scalar_problem(Complex lambda, NonlinearFn f, Complex y0, double t0, double t1) {
  SemilinearProblem p;
  p.name = "scalar";
  p.linear = LinearOperator::scalar(lambda);
  p.nonlinear = std::move(f);
  p.initial_state = one(y0);
  p.t_start = t0;
  p.t_end = t1;
  return p;
}

// phi' = -phi + cos(2t), phi(0) = 1.
SemilinearProblem forced_decay(double t_end) {
  return scalar_problem(-1.0, [](double t, const Vector& y) { return Vector(Vector::Constant(y.size(), std::cos(2.0 * t))); },
                        1.0, 0.0, t_end);
}

double forced_decay_exact(double t) { return 0.8 * std::exp(-t) + (std::cos(2.0 * t) + 2.0 * std::sin(2.0 * t)) / 5.0; }

// One step of `method` on the Dahlquist problem with r = h mu, z = h lambda.
Complex dahlquist_step(const MethodId& method, Complex r, Complex z, double h = 1.0) {
  SemilinearProblem p = scalar_problem(r / h, [z, h](double, const Vector& y) { return Vector((z / h) * y); }, 1.0, 0.0, h);
  return integrate_steps(p, method, 1).final_state[0];
}

MethodId sdc(Scheme scheme, int N, int M) {
  MethodId id;
  id.scheme = scheme;
  id.sdc.nodes = N;
  id.sdc.sweeps = M;
  return id;
}

double measured_order(const MethodId& method, const SemilinearProblem& p, double exact, long long base_steps) {
  const double e1 = std::abs(integrate_steps(p, method, base_steps).final_state[0] - exact);
  const double e2 = std::abs(integrate_steps(p, method, 2 * base_steps).final_state[0] - exact);
  return std::log2(e1 / e2);
}

}  // namespace

TEST_CASE("etd euler examples") {
  NonlinearFn zero = [](double, const Vector& y) { return Vector(Vector::Zero(y.size())); };
  SemilinearProblem p = scalar_problem(-1.0, zero, 1.0, 0.0, 1.0);
  NonlinearEvaluator rhs(p);
  const PhiTable phis = phi_taylor_ss(LinearOperator::scalar(-1.0), 1);
  CHECK(std::abs(etd_euler_step(one(1.0), 0.0, 1.0, rhs, phis)[0] - std::exp(-1.0)) <= 1e-15);

  SemilinearProblem q = scalar_problem(0.0, [](double, const Vector& y) { return Vector(3.0 * y); }, 2.0, 0.0, 1.0);
  NonlinearEvaluator rq(q);
  CHECK(std::abs(etd_euler_step(one(2.0), 0.0, 0.5, rq, phi_taylor_ss(LinearOperator::scalar(0.0), 1))[0] - 5.0) <= 1e-15);

  SemilinearProblem c = scalar_problem(-1.0, [](double, const Vector& y) { return Vector(Vector::Ones(y.size())); }, 0.0, 0.0, 1.0);
  NonlinearEvaluator rc(c);
  const Complex v = etd_euler_step(one(0.0), 0.0, 1.0, rc, phis)[0];
  CHECK(v.real() == doctest::Approx(0.632121).epsilon(1e-6));
  CHECK(std::abs(v - (1.0 - std::exp(-1.0))) <= 1e-15);
  CHECK(rc.count() == 1);
}

TEST_CASE("etdsdc examples") {
  NonlinearFn zero = [](double, const Vector& y) { return Vector(Vector::Zero(y.size())); };
  for (auto [N, M] : {std::pair{2, 0}, {4, 3}, {8, 7}, {5, 1}}) {
    const double h = 0.5, r = -3.0;
    SemilinearProblem p = scalar_problem(r / h, zero, Complex(2.0, 1.0), 0.0, h);
    const Complex got = integrate_steps(p, sdc(Scheme::etdsdc, N, M), 1).final_state[0];
    CHECK(std::abs(got - std::exp(r) * Complex(2.0, 1.0)) <= 1e-14);
  }

  SemilinearProblem f1 = scalar_problem(0.0, [](double, const Vector& y) { return Vector(Vector::Ones(y.size())); }, 4.0, 0.0, 1.0);
  CHECK(std::abs(integrate_steps(f1, sdc(Scheme::etdsdc, 2, 0), 1).final_state[0] - 5.0) <= 1e-15);
  CHECK(std::abs(integrate_steps(f1, sdc(Scheme::imexsdc, 2, 0), 1).final_state[0] - 5.0) <= 1e-15);
}

TEST_CASE("imexsdc provisional pass is backward Euler in the linear part") {
  // (N, M) = (2, 0) with no nonlinear term: psi = 1 / (1 - r).
  for (Complex r : {Complex(-4.0), Complex(0.0, 2.0), Complex(0.3, 0.0)}) {
    CHECK(std::abs(dahlquist_step(sdc(Scheme::imexsdc, 2, 0), r, 0.0) - 1.0 / (1.0 - r)) <= 1e-15);
  }
  // One correction sweep of the same config, worked by hand:
  // psi1 = 1/(1-r); psi2 = (1 - r psi1 + (r/2)(1 + psi1)) / (1 - r).
  const Complex r(-2.0, 0.5);
  const Complex p1 = 1.0 / (1.0 - r);
  const Complex want = (1.0 - r * p1 + 0.5 * r * (1.0 + p1)) / (1.0 - r);
  CHECK(std::abs(dahlquist_step(sdc(Scheme::imexsdc, 2, 1), r, 0.0) - want) <= 1e-15);
  CHECK(std::abs(stability_value(Scheme::imexsdc, chebyshev_nodes(2), 1, r, 0.0) - want) <= 1e-15);
}

TEST_CASE("etdrk4 examples") {
  NonlinearFn zero = [](double, const Vector& y) { return Vector(Vector::Zero(y.size())); };
  SemilinearProblem p = scalar_problem(-2.0, zero, 3.0, 0.0, 0.5);
  CHECK(std::abs(integrate_steps(p, MethodId::parse("etdrk4"), 1).final_state[0] - 3.0 * std::exp(-1.0)) <= 1e-15);

  SemilinearProblem g = scalar_problem(0.0, [](double, const Vector& y) { return Vector(y); }, 1.0, 0.0, 0.1);
  const Complex growth = integrate_steps(g, MethodId::parse("etdrk4"), 1).final_state[0];
  const double rk4 = 1.0 + 0.1 + 0.01 / 2 + 0.001 / 6 + 0.0001 / 24;
  CHECK(std::abs(growth - rk4) <= 1e-15);
  CHECK(growth.real() == doctest::Approx(1.10517083).epsilon(1e-8));

  // phi' = -phi + cos t, phi(0) = 0: phi = (cos t + sin t - e^{-t}) / 2.
  SemilinearProblem c = scalar_problem(-1.0, [](double t, const Vector& y) { return Vector(Vector::Constant(y.size(), std::cos(t))); }, 0.0, 0.0, 1.0);
  const double exact = 0.5 * (std::cos(1.0) + std::sin(1.0) - std::exp(-1.0));
  const double order = measured_order(MethodId::parse("etdrk4"), c, exact, 8);
  CHECK(order >= 3.5);
  CHECK(order <= 5.0);
}

TEST_CASE("integrate examples") {
  SemilinearProblem p = forced_decay(1.0);
  const IntegrationResult none = integrate_steps(p, MethodId::parse("etdsdc:4:3"), 0);
  CHECK(none.final_state == p.initial_state);
  CHECK(none.rhs_evals == 0);

  NonlinearFn zero = [](double, const Vector& y) { return Vector(Vector::Zero(y.size())); };
  SemilinearProblem lin = scalar_problem(Complex(-0.7, 2.0), zero, Complex(1.0, -1.0), 0.5, 2.5);
  for (const char* m : {"etdsdc:3:2", "etdsdc:8:7", "etdrk4", "etdeuler"}) {
    const Complex want = std::exp(Complex(-0.7, 2.0) * 2.0) * Complex(1.0, -1.0);
    CHECK(std::abs(integrate(lin, MethodId::parse(m), 0.1).final_state[0] - want) <= 1e-13);
  }

  SemilinearProblem q = forced_decay(1.0);
  const IntegrationResult r = integrate_steps(q, MethodId::parse("etdsdc:4:3"), 10);
  CHECK(r.steps == 10);
  CHECK(r.rhs_evals == 130);
  CHECK(q.rhs_eval_counter->load() == 130);
  CHECK(r.h == doctest::Approx(0.1));
  CHECK(r.step_seconds >= 0.0);

  CHECK(steps_for_step_size(q, 0.25) == 4);
  CHECK_THROWS(steps_for_step_size(q, 0.3));
  CHECK_THROWS(integrate(q, MethodId::parse("etdrk4"), 0.3));
}

TEST_CASE("observer sees every step") {
  SemilinearProblem p = forced_decay(1.0);
  std::vector<double> times;
  integrate_steps(p, MethodId::parse("etdrk4"), 5, [&](long long step, double t, const Vector&) {
    CHECK(step == static_cast<long long>(times.size()) + 1);
    times.push_back(t);
  });
  REQUIRE(times.size() == 5);
  CHECK(times.back() == doctest::Approx(1.0));
}

TEST_CASE("eval counters match actual calls") {
  for (const char* m : {"etdsdc:4:3", "etdsdc:8:7", "imexsdc:5:2", "etdrk4", "etdeuler", "etdsdc:2:0"}) {
    for (bool reuse : {false, true}) {
      MethodId id = MethodId::parse(m);
      if (reuse && id.scheme != Scheme::etdsdc && id.scheme != Scheme::imexsdc) continue;
      id.sdc.reuse_endpoint = reuse;
      SemilinearProblem p = forced_decay(1.0);
      long long calls = 0;
      auto inner = p.nonlinear;
      p.nonlinear = [&calls, inner](double t, const Vector& y) {
        ++calls;
        return inner(t, y);
      };
      const IntegrationResult r = integrate_steps(p, id, 7);
      CHECK(r.rhs_evals == calls);
      CHECK(r.rhs_evals == id.evals_for(7));
    }
  }
}

TEST_CASE("endpoint reuse changes only the cost") {
  SemilinearProblem p = forced_decay(2.0);
  MethodId plain = MethodId::parse("etdsdc:6:5");
  MethodId reuse = plain;
  reuse.sdc.reuse_endpoint = true;
  const IntegrationResult a = integrate_steps(p, plain, 9);
  const IntegrationResult b = integrate_steps(p, reuse, 9);
  CHECK(std::abs(a.final_state[0] - b.final_state[0]) <= 1e-14);
  CHECK(b.rhs_evals == 9 * 30 + 1);
  CHECK(a.rhs_evals == 9 * 31);
}

TEST_CASE("method identifiers") {
  const MethodId a = MethodId::parse("etdsdc:8:7");
  CHECK(a.scheme == Scheme::etdsdc);
  CHECK(a.sdc.nodes == 8);
  CHECK(a.sdc.sweeps == 7);
  CHECK(a.formal_order() == 8);
  CHECK(a.to_string() == "etdsdc:8:7");
  CHECK(a.evals_per_step() == 57);
  CHECK(MethodId::parse("imexsdc:4:1").formal_order() == 2);
  CHECK(MethodId::parse("etdsdc:4:3:uniform").sdc.family == NodeFamily::uniform);
  CHECK(MethodId::parse("etdsdc:4:3:uniform").to_string() == "etdsdc:4:3:uniform");
  CHECK(MethodId::parse("etdrk4").evals_per_step() == 4);
  CHECK(MethodId::parse("etdeuler").formal_order() == 1);
  CHECK(MethodId::parse("etdsdc:4:3").steps_for_budget(1300) == 100);
  CHECK(MethodId::parse("etdrk4").steps_for_budget(1) == 1);
  CHECK_THROWS(MethodId::parse("etdsdc:1:0"));
  CHECK_THROWS(MethodId::parse("etdsdc:4:-1"));
  CHECK_THROWS(MethodId::parse("etdsdc:4"));
  CHECK_THROWS(MethodId::parse("rk4"));
  CHECK_THROWS(MethodId::parse("etdrk4:4:3"));
}

TEST_CASE("divergence reports the step") {
  SemilinearProblem p = scalar_problem(0.0, [](double, const Vector& y) { return Vector(y.array().square().matrix()); }, 1.0, 0.0, 10.0);
  try {
    integrate_steps(p, MethodId::parse("etdrk4"), 20);
    FAIL("expected divergence");
  } catch (const DivergenceError& e) {
    CHECK(e.step() >= 1);
    CHECK(e.step() <= 20);
    CHECK(e.time() == doctest::Approx(0.5 * static_cast<double>(e.step())));
  }
}

TEST_CASE("problems are validated") {
  SemilinearProblem p = forced_decay(1.0);
  p.t_end = p.t_start;
  CHECK_THROWS(integrate_steps(p, MethodId::parse("etdrk4"), 1));
  SemilinearProblem q = forced_decay(1.0);
  q.linear = LinearOperator::diagonal(Vector::Ones(2));
  CHECK_THROWS(integrate_steps(q, MethodId::parse("etdrk4"), 1));
  SemilinearProblem s = forced_decay(1.0);
  s.linear = LinearOperator::scalar(2.0);
  s.nonlinear = [](double, const Vector& y) { return y; };
  s.t_end = 0.5;
  // h = 1/2 puts the implicit Euler pole on the shift.
  CHECK_THROWS_AS(integrate_steps(s, MethodId::parse("imexsdc:2:0"), 1), SingularShiftError);
}

TEST_CASE("single steps equal the stability recurrences") {
  std::mt19937_64 rng(31);
  std::uniform_real_distribution<double> u(-5.0, 5.0);
  double worst = 0.0;
  for (int trial = 0; trial < 100; ++trial) {
    Complex r(u(rng), u(rng)), z(u(rng), u(rng));
    while (std::abs(r) > 5.0) r *= 0.5;
    while (std::abs(z) > 5.0) z *= 0.5;
    const int N = 2 + trial % 7;
    const int M = trial % N;
    for (Scheme scheme : {Scheme::etdsdc, Scheme::imexsdc}) {
      const NodeSet nodes = chebyshev_nodes(N);
      bool pole = false;
      for (int i = 0; i < nodes.substeps(); ++i) pole |= std::abs(1.0 - r * nodes.eta[i]) < 1e-3;
      if (scheme == Scheme::imexsdc && pole) continue;
      const Complex psi = stability_value(scheme, nodes, M, r, z);
      const Complex step = dahlquist_step(sdc(scheme, N, M), r, z, 0.37);
      worst = std::max(worst, std::abs(psi - step) / std::max(1.0, std::abs(psi)));
    }
  }
  CHECK(worst <= 1e-12);
}

TEST_CASE("zero linear part collapses both schemes to explicit SDC") {
  SemilinearProblem p = scalar_problem(0.0, [](double t, const Vector& y) { return Vector(-y + Vector::Constant(y.size(), std::cos(2.0 * t))); }, 1.0, 0.0, 2.0);
  for (auto [N, M] : {std::pair{3, 2}, {6, 5}, {4, 1}}) {
    const Complex a = integrate_steps(p, sdc(Scheme::etdsdc, N, M), 16).final_state[0];
    const Complex b = integrate_steps(p, sdc(Scheme::imexsdc, N, M), 16).final_state[0];
    CHECK(std::abs(a - b) <= 1e-12);
  }
}

TEST_CASE("etd methods are exact on linear problems for every operator kind") {
  std::mt19937_64 rng(41);
  std::normal_distribution<double> g(0.0, 1.0);
  Matrix m(4, 4);
  for (Index i = 0; i < 4; ++i)
    for (Index j = 0; j < 4; ++j) m(i, j) = Complex(g(rng), g(rng));
  m -= 3.0 * Matrix::Identity(4, 4);
  Vector y0(4);
  for (Index i = 0; i < 4; ++i) y0[i] = Complex(g(rng), g(rng));
  NonlinearFn zero = [](double, const Vector& y) { return Vector(Vector::Zero(y.size())); };
  const double T = 1.5;
  for (const LinearOperator& op : {LinearOperator::diagonal(m.diagonal()), LinearOperator::dense(m)}) {
    SemilinearProblem p;
    p.linear = op;
    p.nonlinear = zero;
    p.initial_state = y0;
    p.t_end = T;
    const Vector want = phi_taylor_ss(T * op, 0)[0].to_dense() * y0;
    for (const char* method : {"etdeuler", "etdrk4", "etdsdc:5:4"}) {
      const Vector got = integrate_steps(p, MethodId::parse(method), 6).final_state;
      CHECK((got - want).cwiseAbs().maxCoeff() <= 1e-12 * want.cwiseAbs().maxCoeff());
    }
  }
}

TEST_CASE("convergence order on the forced decay problem") {
  // Half of the decay goes into the nonlinear part so that every sweep matters.
  const double T = 1.0;
  const double exact = forced_decay_exact(T);
  SemilinearProblem p = scalar_problem(
      -0.5, [](double t, const Vector& y) { return Vector(-0.5 * y + Vector::Constant(y.size(), std::cos(2.0 * t))); },
      1.0, 0.0, T);
  struct Case {
    const char* method;
    long long base;
  };
  for (Case c : {Case{"etdeuler", 64}, Case{"etdsdc:2:1", 32}, Case{"etdsdc:3:2", 16}, Case{"etdsdc:4:3", 8},
                 Case{"etdsdc:6:5", 2}, Case{"imexsdc:3:2", 16}, Case{"imexsdc:4:3", 8}, Case{"etdsdc:4:1", 16},
                 Case{"imexsdc:6:5", 2}, Case{"etdrk4", 8}}) {
    const MethodId id = MethodId::parse(c.method);
    const double order = measured_order(id, p, exact, c.base);
    CAPTURE(std::string(c.method));
    CHECK(order >= id.formal_order() - 0.5);
    // Three-node IMEX superconverges to exactly one order above formal here.
    CHECK(order <= id.formal_order() + 1.05);
  }
}

TEST_CASE("time-only forcing reaches the quadrature order after one sweep") {
  const double T = 1.0;
  const double exact = forced_decay_exact(T);
  SemilinearProblem p = forced_decay(T);
  for (const char* m : {"etdsdc:4:1", "etdsdc:5:1", "etdsdc:4:3"}) {
    const MethodId id = MethodId::parse(m);
    CAPTURE(std::string(m));
    CHECK(measured_order(id, p, exact, 8) >= id.sdc.nodes - 0.5);
  }
}
