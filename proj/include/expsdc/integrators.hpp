#pragma once

#include "expsdc/operator.hpp"
#include "expsdc/phi.hpp"
#include "expsdc/quadrature.hpp"

#include <atomic>
#include <functional>
#include <memory>
#include <optional>
#include <string>
#include <string_view>

namespace expsdc {

using NonlinearFn = std::function<Vector(double t, const Vector& state)>;
using StateMap = std::function<Vector(const Vector& state)>;

/// phi' = Lambda phi + N(t, phi) on [t_start, t_end].
struct SemilinearProblem {
  std::string name;
  LinearOperator linear;
  NonlinearFn nonlinear;
  Vector initial_state;
  double t_start = 0.0;
  double t_end = 1.0;
  /// Maps a state to physical space for error measurement (identity when empty).
  StateMap to_physical;
  /// Exact solution in state space, when known.
  std::function<Vector(double t)> exact;
  /// Total nonlinear evaluations across every run that used this problem.
  std::shared_ptr<std::atomic<long long>> rhs_eval_counter = std::make_shared<std::atomic<long long>>(0);

  Index dim() const { return initial_state.size(); }
  Vector physical(const Vector& state) const { return to_physical ? to_physical(state) : state; }
  void validate() const;
};

/// Counts the nonlinear evaluations of one run.
class NonlinearEvaluator {
 public:
  explicit NonlinearEvaluator(const SemilinearProblem& problem) : problem_(&problem) {}

  Vector operator()(double t, const Vector& state);
  long long count() const { return count_; }

 private:
  const SemilinearProblem* problem_;
  long long count_ = 0;
};

class DivergenceError : public std::runtime_error {
 public:
  DivergenceError(long long step, double time);
  long long step() const { return step_; }
  double time() const { return time_; }

 private:
  long long step_;
  double time_;
};

enum class Scheme { etd_euler, etdsdc, imexsdc, etdrk4 };

const char* to_string(Scheme scheme);

struct SdcConfig {
  int nodes = 4;
  int sweeps = 3;
  NodeFamily family = NodeFamily::chebyshev;
  /// Take the first-node evaluation of each step from the last node of the previous one.
  bool reuse_endpoint = false;

  int order() const { return std::min(nodes, sweeps + 1); }
  void validate() const;
};

/// Method identifier with grammar scheme[:N:M], e.g. "etdsdc:8:7", "etdrk4".
struct MethodId {
  Scheme scheme = Scheme::etdrk4;
  SdcConfig sdc;

  static MethodId parse(std::string_view text);
  std::string to_string() const;
  int formal_order() const;
  /// Nonlinear evaluations of one step (steady state when endpoints are reused).
  long long evals_per_step() const;
  /// Total evaluations of a run of `steps` steps.
  long long evals_for(long long steps) const;
  /// Steps whose run cost is closest to `budget` evaluations (at least 1).
  long long steps_for_budget(long long budget) const;
};

// ---------------------------------------------------------------------------
// One-step maps. Tables are built at the step size the step is called with.
// ---------------------------------------------------------------------------

/// phi_0(h Lambda) state + h phi_1(h Lambda) N(t, state); `phis` is the table at h Lambda.
Vector etd_euler_step(const Vector& state, double t, double h, NonlinearEvaluator& rhs, const PhiTable& phis);

struct StepWorkspace {
  std::vector<Vector> states;
  std::vector<Vector> next_states;
  std::vector<Vector> evals;
  std::vector<Vector> next_evals;
  std::vector<Vector> linear_terms;
  /// Final state and final-node evaluation of the previous step, used with reuse_endpoint.
  std::optional<Vector> carried_state;
  std::optional<Vector> carried_eval;

  void resize(int nodes, Index dim);
};

/// Explicit ETDSDC step using the compact update.
Vector etdsdc_step(const Vector& state, double t, double h, NonlinearEvaluator& rhs, const SdcConfig& config,
                   const WeightSet& weights, StepWorkspace& work);

/// IMEXSDC step using the direct update; shifted solves go through `linear`.
Vector imexsdc_step(const Vector& state, double t, double h, NonlinearEvaluator& rhs, const SdcConfig& config,
                    const LinearOperator& linear, const NodeSet& nodes, const RealMatrix& quad,
                    StepWorkspace& work);

/// Cox-Matthews coefficients at step h.
struct Etdrk4Coefficients {
  LinearOperator e_half;
  LinearOperator q_half;
  LinearOperator e_full;
  LinearOperator f1;
  LinearOperator f2;
  LinearOperator f3;

  static Etdrk4Coefficients build(const LinearOperator& linear, double h);
};

Vector etdrk4_step(const Vector& state, double t, double h, NonlinearEvaluator& rhs, const Etdrk4Coefficients& c);

/// Precomputed tables for a fixed (problem, method, h).
class Stepper {
 public:
  Stepper(const SemilinearProblem& problem, const MethodId& method, double h);

  Vector step(const Vector& state, double t, NonlinearEvaluator& rhs);
  double h() const { return h_; }
  const MethodId& method() const { return method_; }
  const WeightSet* weights() const { return weights_ ? &*weights_ : nullptr; }

 private:
  const SemilinearProblem* problem_;
  MethodId method_;
  double h_;
  std::optional<PhiTable> euler_;
  std::optional<WeightSet> weights_;
  std::optional<NodeSet> nodes_;
  RealMatrix quad_;
  std::optional<Etdrk4Coefficients> rk_;
  StepWorkspace work_;
};

struct IntegrationResult {
  Vector final_state;
  long long steps = 0;
  long long rhs_evals = 0;
  double h = 0.0;
  /// Wall time of the stepping loop, excluding coefficient setup.
  double step_seconds = 0.0;
};

/// Called after each step with (step index starting at 1, time, state).
using StepObserver = std::function<void(long long step, double t, const Vector& state)>;

IntegrationResult integrate_steps(const SemilinearProblem& problem, const MethodId& method, long long steps,
                                  const StepObserver& observer = {});

/// (t_end - t_start)/h, which must be an integer to within rounding.
long long steps_for_step_size(const SemilinearProblem& problem, double h);

/// Fixed-step run at step h; (t_end - t_start)/h must be an integer to within rounding.
IntegrationResult integrate(const SemilinearProblem& problem, const MethodId& method, double h,
                            const StepObserver& observer = {});

}  // namespace expsdc
