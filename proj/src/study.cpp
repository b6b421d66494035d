#include "expsdc/study.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdio>
#include <exception>
#include <limits>
#include <mutex>
#include <ostream>
#include <set>
#include <sstream>
#include <thread>

namespace expsdc {

ReferenceRejected::ReferenceRejected(double disagreement, double limit)
    : std::runtime_error([&] {
        std::ostringstream os;
        os.precision(3);
        os << "reference rejected: methods disagree by " << disagreement << " (limit " << limit << ")";
        return os.str();
      }()),
      disagreement_(disagreement) {}

void parallel_for(std::size_t count, int threads, const std::function<void(std::size_t)>& body) {
  const std::size_t workers = std::min<std::size_t>(count, static_cast<std::size_t>(std::max(1, threads)));
  if (workers <= 1) {
    for (std::size_t i = 0; i < count; ++i) body(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::exception_ptr failure;
  std::mutex failure_mutex;
  std::vector<std::thread> pool;
  pool.reserve(workers);
  for (std::size_t w = 0; w < workers; ++w) {
    pool.emplace_back([&] {
      for (std::size_t i = next++; i < count; i = next++) {
        try {
          body(i);
        } catch (...) {
          std::lock_guard lock(failure_mutex);
          if (!failure) failure = std::current_exception();
        }
      }
    });
  }
  for (auto& t : pool) t.join();
  if (failure) std::rethrow_exception(failure);
}

BenchmarkResult run_benchmark(const SemilinearProblem& problem, const MethodId& method, long long steps,
                              const Vector& reference, Vector* final_state) {
  BenchmarkResult row;
  row.method = method.to_string();
  row.steps = steps;
  row.h = steps > 0 ? (problem.t_end - problem.t_start) / static_cast<double>(steps) : 0.0;
  try {
    IntegrationResult run = integrate_steps(problem, method, steps);
    row.evals = run.rhs_evals;
    row.seconds = run.step_seconds;
    if (reference.size() > 0) {
      row.rel_error = relative_error(problem, reference, run.final_state);
      if (!std::isfinite(row.rel_error)) {
        row.diverged = true;
        row.rel_error = std::numeric_limits<double>::quiet_NaN();
      }
    } else {
      row.rel_error = std::numeric_limits<double>::quiet_NaN();
    }
    if (final_state) *final_state = std::move(run.final_state);
  } catch (const DivergenceError&) {
    row.diverged = true;
    row.evals = method.evals_for(steps);
    row.rel_error = std::numeric_limits<double>::quiet_NaN();
  }
  return row;
}

ReferenceSolution reference_solution(const SemilinearProblem& problem, long long base_evals,
                                     const ReferenceOptions& options) {
  ReferenceSolution ref;
  if (options.use_exact && problem.exact) {
    ref.state = problem.exact(problem.t_end);
    ref.exact = true;
    return ref;
  }
  std::set<std::string> distinct;
  for (const auto& m : options.methods) distinct.insert(m.to_string());
  if (distinct.size() < 2) throw std::invalid_argument("reference needs at least two distinct methods");
  if (base_evals <= 0) throw std::invalid_argument("reference budget must be positive");

  const auto budget = static_cast<long long>(std::llround(options.budget_factor * static_cast<double>(base_evals)));
  const std::size_t count = options.methods.size();
  std::vector<Vector> states(count);
  ref.runs.resize(count);
  parallel_for(count, options.threads, [&](std::size_t i) {
    const MethodId& method = options.methods[i];
    ref.runs[i] = run_benchmark(problem, method, method.steps_for_budget(budget), Vector(), &states[i]);
  });

  const double limit = 100.0 * options.tolerance;
  for (const auto& run : ref.runs) {
    if (run.diverged) throw ReferenceRejected(std::numeric_limits<double>::infinity(), limit);
  }
  double worst = 0.0;
  for (std::size_t a = 0; a < count; ++a)
    for (std::size_t b = a + 1; b < count; ++b)
      worst = std::max(worst, relative_error(problem, states[a], states[b]));
  ref.disagreement = worst;
  if (!(worst <= limit)) throw ReferenceRejected(worst, limit);

  ref.state = Vector::Zero(problem.dim());
  for (const auto& s : states) ref.state += s;
  ref.state /= static_cast<double>(count);
  return ref;
}

double fit_loglog_slope(const std::vector<double>& x, const std::vector<double>& y) {
  if (x.size() != y.size() || x.size() < 2) throw std::invalid_argument("slope fit needs at least two points");
  double sx = 0, sy = 0, sxx = 0, sxy = 0;
  const double n = static_cast<double>(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double lx = std::log(x[i]);
    const double ly = std::log(y[i]);
    sx += lx;
    sy += ly;
    sxx += lx * lx;
    sxy += lx * ly;
  }
  const double denom = n * sxx - sx * sx;
  if (denom == 0.0) throw std::invalid_argument("slope fit needs distinct abscissae");
  return (n * sxy - sx * sy) / denom;
}

StudyResult convergence_study(const SemilinearProblem& problem, const std::vector<MethodId>& methods,
                              const std::vector<long long>& budgets, const Vector& reference,
                              const StudyOptions& options) {
  if (methods.empty()) throw std::invalid_argument("study needs at least one method");
  if (budgets.empty()) throw std::invalid_argument("study needs at least one budget");
  for (long long b : budgets)
    if (b <= 0) throw std::invalid_argument("evaluation budgets must be positive");
  if (reference.size() != problem.dim()) throw DimensionError("reference has the wrong dimension");

  StudyResult study;
  study.rows.resize(methods.size() * budgets.size());
  parallel_for(study.rows.size(), options.threads, [&](std::size_t idx) {
    const MethodId& method = methods[idx / budgets.size()];
    const long long budget = budgets[idx % budgets.size()];
    study.rows[idx] = run_benchmark(problem, method, method.steps_for_budget(budget), reference);
  });

  if (budgets.size() < 3) return study;
  for (std::size_t m = 0; m < methods.size(); ++m) {
    SlopeFit fit;
    fit.method = methods[m].to_string();
    std::vector<double> hs, errs;
    std::set<long long> seen;
    for (std::size_t b = 0; b < budgets.size(); ++b) {
      const BenchmarkResult& row = study.rows[m * budgets.size() + b];
      if (row.diverged || !seen.insert(row.steps).second) continue;
      if (row.rel_error < options.fit_floor || row.rel_error > options.fit_ceiling) continue;
      hs.push_back(row.h);
      errs.push_back(row.rel_error);
    }
    fit.points = static_cast<int>(hs.size());
    if (hs.size() >= 3) fit.slope = fit_loglog_slope(hs, errs);
    study.slopes.push_back(fit);
  }
  return study;
}

std::string format_double(double value) {
  if (std::isnan(value)) return "nan";
  if (std::isinf(value)) return value > 0 ? "inf" : "-inf";
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", value);
  return buf;
}

std::string csv_field(const std::string& text) {
  if (text.find_first_of(",\"\r\n") == std::string::npos) return text;
  std::string out = "\"";
  for (char c : text) {
    if (c == '"') out += '"';
    out += c;
  }
  out += '"';
  return out;
}

void write_results_csv(std::ostream& out, const std::vector<BenchmarkResult>& rows, bool timing) {
  out << "method,h,steps,evals,rel_error,seconds\n";
  for (const auto& r : rows) {
    out << csv_field(r.method) << ',' << format_double(r.h) << ',' << r.steps << ',' << r.evals << ','
        << format_double(r.rel_error) << ',' << format_double(timing ? r.seconds : 0.0) << '\n';
  }
}

}  // namespace expsdc
