#pragma once

#include "expsdc/pde.hpp"

#include <functional>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

namespace expsdc {

struct BenchmarkResult {
  std::string method;
  double h = 0.0;
  long long steps = 0;
  long long evals = 0;
  /// NaN when the run diverged.
  double rel_error = 0.0;
  double seconds = 0.0;
  bool diverged = false;
};

class ReferenceRejected : public std::runtime_error {
 public:
  ReferenceRejected(double disagreement, double limit);
  double disagreement() const { return disagreement_; }

 private:
  double disagreement_;
};

struct ReferenceOptions {
  std::vector<MethodId> methods{MethodId::parse("etdsdc:8:7"), MethodId::parse("etdrk4")};
  /// Reference runs use this multiple of the base budget.
  double budget_factor = 4.0;
  /// Target accuracy of the experiment; disagreement above 100x rejects the reference.
  double tolerance = 1e-10;
  /// Return problem.exact(t_end) directly when available.
  bool use_exact = true;
  int threads = 1;
};

struct ReferenceSolution {
  Vector state;
  /// Largest pairwise relative error (physical space) between the averaged runs.
  double disagreement = 0.0;
  std::vector<BenchmarkResult> runs;
  bool exact = false;
};

ReferenceSolution reference_solution(const SemilinearProblem& problem, long long base_evals,
                                     const ReferenceOptions& options = {});

struct StudyOptions {
  /// Points with error below the floor are treated as roundoff and left out of the fit.
  double fit_floor = 1e-12;
  /// Points above the ceiling are pre-asymptotic and left out of the fit.
  double fit_ceiling = 1e-1;
  int threads = 1;
};

struct SlopeFit {
  std::string method;
  /// d log(error) / d log(h); empty when fewer than three points qualify.
  std::optional<double> slope;
  int points = 0;
};

struct StudyResult {
  std::vector<BenchmarkResult> rows;
  std::vector<SlopeFit> slopes;
};

/// Runs every (method, budget) pair against `reference` and fits error-vs-h slopes.
StudyResult convergence_study(const SemilinearProblem& problem, const std::vector<MethodId>& methods,
                              const std::vector<long long>& budgets, const Vector& reference,
                              const StudyOptions& options = {});

/// One run at a fixed step count, measured against `reference` (if non-empty).
BenchmarkResult run_benchmark(const SemilinearProblem& problem, const MethodId& method, long long steps,
                              const Vector& reference, Vector* final_state = nullptr);

/// Least-squares slope of log(y) against log(x).
double fit_loglog_slope(const std::vector<double>& x, const std::vector<double>& y);

/// Data rows with header method,h,steps,evals,rel_error,seconds. Seconds are
/// written as 0 when `timing` is false so reruns are byte-identical.
void write_results_csv(std::ostream& out, const std::vector<BenchmarkResult>& rows, bool timing = true);

/// Double formatted with 17 significant digits; nan/inf spelled out.
std::string format_double(double value);

/// Quote a CSV field when it contains a comma, quote, or newline.
std::string csv_field(const std::string& text);

/// Runs items [0, count) on up to `threads` workers; exceptions are rethrown on the caller.
void parallel_for(std::size_t count, int threads, const std::function<void(std::size_t)>& body);

}  // namespace expsdc
