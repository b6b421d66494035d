#include "expsdc/integrators.hpp"

#include <charconv>
#include <chrono>
#include <cmath>
#include <limits>
#include <sstream>

namespace expsdc {

namespace {

int parse_int(std::string_view text, std::string_view what) {
  int value = 0;
  const auto* end = text.data() + text.size();
  const auto [ptr, ec] = std::from_chars(text.data(), end, value);
  if (ec != std::errc{} || ptr != end) {
    throw std::invalid_argument("invalid " + std::string(what) + " '" + std::string(text) + "' in method id");
  }
  return value;
}

std::vector<std::string_view> split(std::string_view text, char sep) {
  std::vector<std::string_view> parts;
  std::size_t start = 0;
  while (true) {
    const auto pos = text.find(sep, start);
    parts.push_back(text.substr(start, pos == std::string_view::npos ? std::string_view::npos : pos - start));
    if (pos == std::string_view::npos) break;
    start = pos + 1;
  }
  return parts;
}

}  // namespace

void SemilinearProblem::validate() const {
  if (!(t_end > t_start)) throw std::invalid_argument("problem needs t_end > t_start");
  if (!nonlinear) throw std::invalid_argument("problem has no nonlinear term");
  if (initial_state.size() != linear.dim()) {
    throw DimensionError("initial state length " + std::to_string(initial_state.size()) +
                         " does not match operator dimension " + std::to_string(linear.dim()));
  }
}

Vector NonlinearEvaluator::operator()(double t, const Vector& state) {
  ++count_;
  if (problem_->rhs_eval_counter) problem_->rhs_eval_counter->fetch_add(1, std::memory_order_relaxed);
  Vector out = problem_->nonlinear(t, state);
  if (out.size() != state.size()) throw DimensionError("nonlinear term changed the state dimension");
  return out;
}

DivergenceError::DivergenceError(long long step, double time)
    : std::runtime_error([&] {
        std::ostringstream os;
        os << "integration diverged at step " << step << " (t = " << time << ")";
        return os.str();
      }()),
      step_(step),
      time_(time) {}

const char* to_string(Scheme scheme) {
  switch (scheme) {
    case Scheme::etd_euler:
      return "etdeuler";
    case Scheme::etdsdc:
      return "etdsdc";
    case Scheme::imexsdc:
      return "imexsdc";
    case Scheme::etdrk4:
      return "etdrk4";
  }
  return "unknown";
}

void SdcConfig::validate() const {
  if (nodes < 2) throw std::invalid_argument("SDC needs N >= 2 nodes");
  if (sweeps < 0) throw std::invalid_argument("SDC needs M >= 0 sweeps");
}

MethodId MethodId::parse(std::string_view text) {
  const auto parts = split(text, ':');
  MethodId id;
  const auto head = parts.front();
  if (head == "etdrk4" || head == "etdeuler") {
    if (parts.size() != 1) throw std::invalid_argument("method '" + std::string(head) + "' takes no N:M");
    id.scheme = head == "etdrk4" ? Scheme::etdrk4 : Scheme::etd_euler;
    return id;
  }
  if (head == "etdsdc") {
    id.scheme = Scheme::etdsdc;
  } else if (head == "imexsdc") {
    id.scheme = Scheme::imexsdc;
  } else {
    throw std::invalid_argument("unknown method '" + std::string(text) + "'");
  }
  if (parts.size() != 3 && parts.size() != 4) {
    throw std::invalid_argument("method '" + std::string(text) + "' must read scheme:N:M");
  }
  id.sdc.nodes = parse_int(parts[1], "N");
  id.sdc.sweeps = parse_int(parts[2], "M");
  if (parts.size() == 4) id.sdc.family = parse_node_family(parts[3]);
  id.sdc.validate();
  return id;
}

std::string MethodId::to_string() const {
  std::string s = expsdc::to_string(scheme);
  if (scheme == Scheme::etdsdc || scheme == Scheme::imexsdc) {
    s += ":" + std::to_string(sdc.nodes) + ":" + std::to_string(sdc.sweeps);
    if (sdc.family != NodeFamily::chebyshev) s += std::string(":") + expsdc::to_string(sdc.family);
  }
  return s;
}

int MethodId::formal_order() const {
  switch (scheme) {
    case Scheme::etd_euler:
      return 1;
    case Scheme::etdrk4:
      return 4;
    default:
      return sdc.order();
  }
}

long long MethodId::evals_per_step() const {
  switch (scheme) {
    case Scheme::etd_euler:
      return 1;
    case Scheme::etdrk4:
      return 4;
    default: {
      const long long per_level = sdc.nodes - 1;
      const long long levels = sdc.sweeps + 1;
      return per_level * levels + (sdc.reuse_endpoint ? 0 : 1);
    }
  }
}

long long MethodId::evals_for(long long steps) const {
  if (steps <= 0) return 0;
  const bool carries = (scheme == Scheme::etdsdc || scheme == Scheme::imexsdc) && sdc.reuse_endpoint;
  return steps * evals_per_step() + (carries ? 1 : 0);
}

long long MethodId::steps_for_budget(long long budget) const {
  const bool carries = (scheme == Scheme::etdsdc || scheme == Scheme::imexsdc) && sdc.reuse_endpoint;
  const double usable = static_cast<double>(budget - (carries ? 1 : 0));
  return std::max<long long>(1, std::llround(usable / static_cast<double>(evals_per_step())));
}

void StepWorkspace::resize(int nodes, Index dim) {
  for (auto* v : {&states, &next_states, &evals, &next_evals, &linear_terms}) {
    v->resize(static_cast<std::size_t>(nodes));
    for (auto& x : *v) x.resize(dim);
  }
}

Vector etd_euler_step(const Vector& state, double t, double h, NonlinearEvaluator& rhs, const PhiTable& phis) {
  Vector out = apply_op(phis[0], state);
  apply_add(phis[1], Vector(h * rhs(t, state)), out);
  return out;
}

Vector etdsdc_step(const Vector& state, double t, double h, NonlinearEvaluator& rhs, const SdcConfig& config,
                   const WeightSet& weights, StepWorkspace& work) {
  const int N = config.nodes;
  const NodeSet& nodes = weights.nodes;
  work.resize(N, state.size());
  auto& phi = work.states;
  auto& f = work.evals;
  auto& next = work.next_states;
  auto& next_f = work.next_evals;

  phi[0] = state;
  if (config.reuse_endpoint && work.carried_eval && work.carried_state && *work.carried_state == state) {
    f[0] = *work.carried_eval;
  } else {
    f[0] = rhs(t, state);
  }

  for (int i = 0; i < N - 1; ++i) {
    const double hi = h * nodes.eta[i];
    phi[i + 1] = apply_op(weights.phi0[i], phi[i]);
    apply_add(weights.phi1[i], Vector(hi * f[i]), phi[i + 1]);
    f[i + 1] = rhs(t + h * nodes.tau[i + 1], phi[i + 1]);
  }

  for (int k = 0; k < config.sweeps; ++k) {
    next[0] = phi[0];
    next_f[0] = f[0];
    for (int i = 0; i < N - 1; ++i) {
      const double hi = h * nodes.eta[i];
      Vector x = apply_op(weights.phi0[i], next[i]);
      apply_add(weights.phi1[i], Vector(hi * (next_f[i] - f[i])), x);
      for (int l = 0; l < N; ++l) apply_add(weights.w[i][l], f[l], x);
      next[i + 1] = std::move(x);
      next_f[i + 1] = rhs(t + h * nodes.tau[i + 1], next[i + 1]);
    }
    std::swap(phi, next);
    std::swap(f, next_f);
  }

  if (config.reuse_endpoint) {
    work.carried_state = phi[N - 1];
    work.carried_eval = f[N - 1];
  }
  return phi[N - 1];
}

Vector imexsdc_step(const Vector& state, double t, double h, NonlinearEvaluator& rhs, const SdcConfig& config,
                    const LinearOperator& linear, const NodeSet& nodes, const RealMatrix& quad,
                    StepWorkspace& work) {
  const int N = config.nodes;
  work.resize(N, state.size());
  auto& phi = work.states;
  auto& f = work.evals;
  auto& next = work.next_states;
  auto& next_f = work.next_evals;
  auto& integrand = work.linear_terms;

  phi[0] = state;
  if (config.reuse_endpoint && work.carried_eval && work.carried_state && *work.carried_state == state) {
    f[0] = *work.carried_eval;
  } else {
    f[0] = rhs(t, state);
  }

  for (int i = 0; i < N - 1; ++i) {
    const double hi = h * nodes.eta[i];
    phi[i + 1] = solve_shifted(linear, hi, Vector(phi[i] + hi * f[i]));
    f[i + 1] = rhs(t + h * nodes.tau[i + 1], phi[i + 1]);
  }

  std::vector<Vector> linear_part(static_cast<std::size_t>(N));
  for (int k = 0; k < config.sweeps; ++k) {
    for (int l = 0; l < N; ++l) {
      linear_part[l] = apply_op(linear, phi[l]);
      integrand[l] = linear_part[l] + f[l];
    }
    next[0] = phi[0];
    next_f[0] = f[0];
    for (int i = 0; i < N - 1; ++i) {
      const double hi = h * nodes.eta[i];
      Vector b = next[i] - hi * linear_part[i + 1] + hi * (next_f[i] - f[i]);
      for (int l = 0; l < N; ++l) b += (h * quad(i, l)) * integrand[l];
      next[i + 1] = solve_shifted(linear, hi, b);
      next_f[i + 1] = rhs(t + h * nodes.tau[i + 1], next[i + 1]);
    }
    std::swap(phi, next);
    std::swap(f, next_f);
  }

  if (config.reuse_endpoint) {
    work.carried_state = phi[N - 1];
    work.carried_eval = f[N - 1];
  }
  return phi[N - 1];
}

Etdrk4Coefficients Etdrk4Coefficients::build(const LinearOperator& linear, double h) {
  const PhiTable half = phi_taylor_ss(0.5 * h * linear, 1);
  const PhiTable full = phi_taylor_ss(h * linear, 3);
  Etdrk4Coefficients c;
  c.e_half = half[0];
  c.q_half = (0.5 * h) * half[1];
  c.e_full = full[0];
  c.f1 = h * (full[1] - 3.0 * full[2] + 4.0 * full[3]);
  c.f2 = h * (2.0 * full[2] - 4.0 * full[3]);
  c.f3 = h * (4.0 * full[3] - full[2]);
  return c;
}

Vector etdrk4_step(const Vector& state, double t, double h, NonlinearEvaluator& rhs, const Etdrk4Coefficients& c) {
  const Vector nu = rhs(t, state);
  const Vector eu = apply_op(c.e_half, state);

  Vector a = eu;
  apply_add(c.q_half, nu, a);
  const Vector na = rhs(t + 0.5 * h, a);

  Vector b = eu;
  apply_add(c.q_half, na, b);
  const Vector nb = rhs(t + 0.5 * h, b);

  Vector cc = apply_op(c.e_half, a);
  apply_add(c.q_half, Vector(2.0 * nb - nu), cc);
  const Vector nc = rhs(t + h, cc);

  Vector out = apply_op(c.e_full, state);
  apply_add(c.f1, nu, out);
  apply_add(c.f2, Vector(na + nb), out);
  apply_add(c.f3, nc, out);
  return out;
}

Stepper::Stepper(const SemilinearProblem& problem, const MethodId& method, double h)
    : problem_(&problem), method_(method), h_(h) {
  if (!(h > 0.0)) throw std::invalid_argument("step size must be positive");
  switch (method.scheme) {
    case Scheme::etd_euler:
      euler_ = phi_taylor_ss(h * problem.linear, 1);
      break;
    case Scheme::etdsdc:
      method.sdc.validate();
      weights_ = etd_weight_set(make_nodes(method.sdc.family, method.sdc.nodes), problem.linear, h);
      break;
    case Scheme::imexsdc:
      method.sdc.validate();
      nodes_ = make_nodes(method.sdc.family, method.sdc.nodes);
      quad_ = polynomial_quadrature_matrix(*nodes_);
      break;
    case Scheme::etdrk4:
      rk_ = Etdrk4Coefficients::build(problem.linear, h);
      break;
  }
}

Vector Stepper::step(const Vector& state, double t, NonlinearEvaluator& rhs) {
  switch (method_.scheme) {
    case Scheme::etd_euler:
      return etd_euler_step(state, t, h_, rhs, *euler_);
    case Scheme::etdsdc:
      return etdsdc_step(state, t, h_, rhs, method_.sdc, *weights_, work_);
    case Scheme::imexsdc:
      return imexsdc_step(state, t, h_, rhs, method_.sdc, problem_->linear, *nodes_, quad_, work_);
    case Scheme::etdrk4:
      return etdrk4_step(state, t, h_, rhs, *rk_);
  }
  return state;
}

IntegrationResult integrate_steps(const SemilinearProblem& problem, const MethodId& method, long long steps,
                                  const StepObserver& observer) {
  problem.validate();
  if (steps < 0) throw std::invalid_argument("step count must be non-negative");
  IntegrationResult result;
  result.final_state = problem.initial_state;
  result.steps = steps;
  if (steps == 0) return result;

  const double span = problem.t_end - problem.t_start;
  const double h = span / static_cast<double>(steps);
  result.h = h;
  Stepper stepper(problem, method, h);
  NonlinearEvaluator rhs(problem);
  Vector state = problem.initial_state;
  const auto started = std::chrono::steady_clock::now();
  for (long long n = 0; n < steps; ++n) {
    const double t = problem.t_start + static_cast<double>(n) * h;
    state = stepper.step(state, t, rhs);
    const double t_next = n + 1 == steps ? problem.t_end : t + h;
    if (!state.allFinite()) throw DivergenceError(n + 1, t_next);
    if (observer) observer(n + 1, t_next, state);
  }
  result.step_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - started).count();
  result.final_state = std::move(state);
  result.rhs_evals = rhs.count();
  return result;
}

long long steps_for_step_size(const SemilinearProblem& problem, double h) {
  if (!(h > 0.0)) throw std::invalid_argument("step size must be positive");
  const double ratio = (problem.t_end - problem.t_start) / h;
  const double steps = std::round(ratio);
  if (std::abs(ratio - steps) > 8.0 * std::numeric_limits<double>::epsilon() * std::max(1.0, steps)) {
    std::ostringstream os;
    os.precision(17);
    os << "step size " << h << " does not divide the time window into an integer number of steps";
    throw std::invalid_argument(os.str());
  }
  return static_cast<long long>(steps);
}

IntegrationResult integrate(const SemilinearProblem& problem, const MethodId& method, double h,
                            const StepObserver& observer) {
  return integrate_steps(problem, method, steps_for_step_size(problem, h), observer);
}

}  // namespace expsdc
