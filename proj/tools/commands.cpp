#include "commands.hpp"

#include "expsdc/analysis.hpp"
#include "expsdc/study.hpp"

#include "CLI11.hpp"
#include "json.hpp"

#include <Eigen/Eigenvalues>

#include <algorithm>
#include <cctype>
#include <charconv>
#include <cmath>
#include <cstdlib>
#include <fstream>
#include <iostream>
#include <memory>
#include <optional>
#include <sstream>

namespace expsdc::cli {

using nlohmann::json;

ParseError::ParseError(const std::string& message, int line, int column)
    : std::runtime_error(column > 0 ? "line " + std::to_string(line) + ", column " + std::to_string(column) + ": " +
                                          message
                                    : "line " + std::to_string(line) + ": " + message),
      message_(message),
      line_(line),
      column_(column) {}

namespace {

// Parses a real prefix of text[pos..]; returns false when nothing numeric is there.
bool take_real(std::string_view text, std::size_t& pos, double& value) {
  const char* begin = text.data() + pos;
  const char* end = text.data() + text.size();
  if (begin != end && *begin == '+') ++begin;  // from_chars rejects a leading '+'
  const auto [ptr, ec] = std::from_chars(begin, end, value);
  if (ec != std::errc{} || ptr == begin) return false;
  pos = static_cast<std::size_t>(ptr - text.data());
  return true;
}

std::string_view trim(std::string_view s) {
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.front()))) s.remove_prefix(1);
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.back()))) s.remove_suffix(1);
  return s;
}

bool is_unit(char c) { return c == 'i' || c == 'j'; }

}  // namespace

Complex parse_complex(std::string_view raw) {
  const std::string_view text = trim(raw);
  const int lead = static_cast<int>(raw.find_first_not_of(" \t\r\n"));
  auto fail = [&](std::size_t pos, const std::string& why) -> ParseError {
    return ParseError(why + " in '" + std::string(text) + "'", 1, lead + static_cast<int>(pos) + 1);
  };
  if (text.empty()) throw ParseError("empty complex number", 1, 0);

  if (text.front() == '(') {
    if (text.back() != ')') throw fail(text.size() - 1, "missing ')'");
    const auto comma = text.find(',');
    if (comma == std::string_view::npos) throw fail(text.size() - 1, "expected ','");
    std::size_t pos = 1;
    double re = 0.0, im = 0.0;
    while (pos < comma && text[pos] == ' ') ++pos;
    if (!take_real(text, pos, re)) throw fail(pos, "expected a number");
    while (pos < comma && text[pos] == ' ') ++pos;
    if (pos != comma) throw fail(pos, "unexpected character");
    pos = comma + 1;
    while (pos < text.size() && text[pos] == ' ') ++pos;
    if (!take_real(text, pos, im)) throw fail(pos, "expected a number");
    while (pos < text.size() && text[pos] == ' ') ++pos;
    if (pos != text.size() - 1) throw fail(pos, "unexpected character");
    return {re, im};
  }

  // Pure imaginary unit forms: i, +i, -i.
  if (text.size() <= 2 && is_unit(text.back()) &&
      (text.size() == 1 || text.front() == '+' || text.front() == '-')) {
    return {0.0, text.front() == '-' ? -1.0 : 1.0};
  }

  std::size_t pos = 0;
  double first = 0.0;
  if (!take_real(text, pos, first)) throw fail(pos, "expected a number");
  if (pos == text.size()) return {first, 0.0};
  if (is_unit(text[pos])) {
    if (pos + 1 != text.size()) throw fail(pos + 1, "unexpected character");
    return {0.0, first};
  }
  if (text[pos] != '+' && text[pos] != '-') throw fail(pos, "unexpected character");
  const double sign = text[pos] == '-' ? -1.0 : 1.0;
  if (pos + 2 == text.size() && is_unit(text[pos + 1])) return {first, sign};
  ++pos;
  double second = 0.0;
  const std::size_t start = pos;
  if (text[pos] == '+' || text[pos] == '-') throw fail(pos, "unexpected sign");
  if (!take_real(text, pos, second)) throw fail(start, "expected a number");
  if (pos == text.size() || !is_unit(text[pos])) throw fail(pos, "expected 'i'");
  if (pos + 1 != text.size()) throw fail(pos + 1, "unexpected character");
  return {first, sign * second};
}

Matrix read_matrix_csv(std::istream& in) {
  std::vector<std::vector<Complex>> rows;
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const auto hash = line.find('#');
    const std::string body = hash == std::string::npos ? line : line.substr(0, hash);
    if (trim(body).empty()) continue;
    std::vector<Complex> row;
    std::size_t start = 0;
    while (true) {
      const std::size_t comma = body.find(',', start);
      const std::string_view cell(body.data() + start, (comma == std::string::npos ? body.size() : comma) - start);
      try {
        row.push_back(parse_complex(cell));
      } catch (const ParseError& e) {
        const int col = e.column() > 0 ? static_cast<int>(start) + e.column() : static_cast<int>(start) + 1;
        throw ParseError(e.message(), line_no, col);
      }
      if (comma == std::string::npos) break;
      start = comma + 1;
    }
    if (!rows.empty() && row.size() != rows.front().size()) {
      throw ParseError("expected " + std::to_string(rows.front().size()) + " entries, found " +
                           std::to_string(row.size()),
                       line_no, 0);
    }
    rows.push_back(std::move(row));
  }
  if (rows.empty()) throw ParseError("matrix file has no rows", line_no, 0);
  if (rows.size() != rows.front().size()) {
    throw ParseError("matrix is " + std::to_string(rows.size()) + "x" + std::to_string(rows.front().size()) +
                         ", expected square",
                     line_no, 0);
  }
  const Index n = static_cast<Index>(rows.size());
  Matrix m(n, n);
  for (Index r = 0; r < n; ++r)
    for (Index c = 0; c < n; ++c) m(r, c) = rows[r][c];
  return m;
}

namespace {

int default_threads() {
  if (const char* env = std::getenv("EXPSDC_THREADS")) {
    int value = 0;
    const std::string_view s(env);
    const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), value);
    if (ec == std::errc{} && ptr == s.data() + s.size() && value > 0) return value;
  }
  return 1;
}

/// Writes to a file when a path is given, else to the fallback stream.
class Sink {
 public:
  Sink(const std::string& path, std::ostream& fallback) : path_(path) {
    if (path.empty()) {
      stream_ = &fallback;
    } else {
      file_ = std::make_unique<std::ofstream>(path, std::ios::binary);
      if (!*file_) throw std::runtime_error("cannot open '" + path + "' for writing");
      stream_ = file_.get();
    }
  }
  std::ostream& get() { return *stream_; }
  void finish() {
    stream_->flush();
    if (!*stream_) throw std::runtime_error("failed writing " + (path_.empty() ? std::string("output") : path_));
  }

 private:
  std::string path_;
  std::unique_ptr<std::ofstream> file_;
  std::ostream* stream_ = nullptr;
};

json complex_json(Complex z) { return json::array({z.real(), z.imag()}); }

json result_json(const BenchmarkResult& r, bool timing) {
  auto num = [](double v) { return std::isfinite(v) ? json(v) : json(nullptr); };
  return {{"method", r.method},     {"h", r.h},
          {"steps", r.steps},       {"evals", r.evals},
          {"rel_error", num(r.rel_error)}, {"seconds", timing ? r.seconds : 0.0},
          {"diverged", r.diverged}};
}

std::vector<std::string> split_list(const std::vector<std::string>& items) {
  std::vector<std::string> out;
  for (const auto& item : items) {
    std::size_t start = 0;
    while (start <= item.size()) {
      const auto comma = item.find(',', start);
      const auto piece = trim(std::string_view(item).substr(start, comma == std::string::npos ? std::string::npos
                                                                                           : comma - start));
      if (!piece.empty()) out.emplace_back(piece);
      if (comma == std::string::npos) break;
      start = comma + 1;
    }
  }
  return out;
}

/// Replaces "--config path" with the file's key = value pairs as --key=value,
/// skipping keys that also appear on the command line.
std::vector<std::string> expand_config(const std::vector<std::string>& args) {
  std::vector<std::string> out;
  std::optional<std::string> path;
  for (std::size_t i = 0; i < args.size(); ++i) {
    if (args[i] == "--config" && i + 1 < args.size()) {
      path = args[++i];
    } else if (args[i].rfind("--config=", 0) == 0) {
      path = args[i].substr(9);
    } else {
      out.push_back(args[i]);
    }
  }
  if (!path) return out;
  std::ifstream in(*path);
  if (!in) throw std::runtime_error("cannot open config '" + *path + "'");

  auto given = [&](const std::string& key) {
    const std::string flag = "--" + key;
    return std::any_of(out.begin(), out.end(), [&](const std::string& a) {
      return a == flag || a.rfind(flag + "=", 0) == 0;
    });
  };
  std::vector<std::string> extra;
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const std::string_view body = trim(line);
    if (body.empty() || body.front() == '#' || body.front() == ';') continue;
    const auto eq = body.find('=');
    if (eq == std::string_view::npos) throw ParseError("expected key = value", line_no, 0);
    std::string key(trim(body.substr(0, eq)));
    std::string value(trim(body.substr(eq + 1)));
    if (key.empty()) throw ParseError("missing key", line_no, 1);
    if (value.size() >= 2 && value.front() == '"' && value.back() == '"') value = value.substr(1, value.size() - 2);
    std::replace(key.begin(), key.end(), '_', '-');
    if (!given(key)) extra.push_back("--" + key + "=" + value);
  }
  // Options go after the subcommand name so they bind to it.
  const auto sub = std::find_if(out.begin(), out.end(), [](const std::string& a) { return a.rfind("-", 0) != 0; });
  out.insert(sub == out.end() ? out.end() : sub + 1, extra.begin(), extra.end());
  return out;
}

Scheme parse_region_scheme(const std::string& name) {
  if (name == "etdsdc") return Scheme::etdsdc;
  if (name == "imexsdc") return Scheme::imexsdc;
  return MethodId::parse(name).scheme;
}

struct ProblemArgs {
  std::string problem;
  Index n = 0;
  std::optional<double> t_end;
  bool scale = false;

  void attach(CLI::App* app) {
    app->add_option("--problem", problem, "ks | nikolaevskiy | qg | kdv | kdv-fourier | scalar")->required();
    app->add_option("--n", n, "grid size (problem default when omitted)");
    app->add_option("--t-end", t_end, "final time");
    app->add_flag("--scale", scale, "reduced desk-scale setup (QG: n = 128, t = 2)");
  }
  SemilinearProblem make() const {
    ProblemOptions opts;
    opts.desk_scale = scale;
    opts.n = n;
    opts.t_end = t_end;
    return make_problem(problem, opts);
  }
  json echo() const {
    return {{"problem", problem}, {"n", n}, {"t_end", t_end ? json(*t_end) : json(nullptr)}, {"scale", scale}};
  }
};

// ---------------------------------------------------------------------------

struct PhiArgs {
  std::string z;
  std::string matrix;
  int k = 3;
  std::string method = "taylor";
  int points = kDefaultContourPoints;
  double radius = kDefaultContourRadius;
  bool check = false;
  double tolerance = 1e-12;
  std::string format = "csv";
  std::string output;
};

double table_deviation(const PhiTable& value, const PhiTable& oracle) {
  double worst = 0.0;
  for (int n = 0; n <= value.order(); ++n) {
    const Matrix a = value[n].to_dense();
    const Matrix b = oracle[n].to_dense();
    const double scale = std::max(b.cwiseAbs().maxCoeff(), std::numeric_limits<double>::min());
    worst = std::max(worst, (a - b).cwiseAbs().maxCoeff() / scale);
  }
  return worst;
}

/// Contour centred on the mean eigenvalue, wide enough to enclose the spectrum.
PhiTable matrix_oracle(const LinearOperator& op, int k) {
  const Matrix& a = op.matrix();
  const Index d = a.rows();
  const Complex z0 = a.trace() / static_cast<double>(d);
  Eigen::ComplexEigenSolver<Matrix> eig(a, false);
  double rho = 0.0;
  for (Index i = 0; i < d; ++i) rho = std::max(rho, std::abs(eig.eigenvalues()[i] - z0));
  return phi_contour_matrix(op, k, 256, std::max(1.0, 1.5 * rho + 0.5), z0);
}

int cmd_phi(const PhiArgs& a, std::ostream& out, std::ostream& err) {
  if (a.z.empty() == a.matrix.empty()) throw CLI::ValidationError("phi", "give exactly one of --z or --matrix");
  LinearOperator op;
  if (!a.z.empty()) {
    op = LinearOperator::scalar(parse_complex(a.z));
  } else {
    std::ifstream in(a.matrix);
    if (!in) throw std::runtime_error("cannot open '" + a.matrix + "'");
    try {
      op = LinearOperator::dense(read_matrix_csv(in));
    } catch (const ParseError& e) {
      throw std::runtime_error(a.matrix + ": " + e.what());
    }
  }

  PhiTable table;
  if (a.method == "taylor") {
    table = phi_taylor_ss(op, a.k);
  } else if (a.method == "contour") {
    table = op.kind() == OperatorKind::scalar ? phi_contour_scalar(op.scalar_value(), a.k, a.points, a.radius)
                                              : phi_contour_matrix(op, a.k, a.points, a.radius,
                                                                   op.matrix().trace() / double(op.dim()));
  } else if (a.method == "explicit") {
    if (op.kind() != OperatorKind::scalar) throw std::invalid_argument("explicit formulas take a scalar --z");
    const auto v = phi_explicit(op.scalar_value(), a.k);
    for (Complex x : v) table.values.push_back(LinearOperator::scalar(x));
  } else {
    throw std::invalid_argument("unknown phi method '" + a.method + "'");
  }

  Sink sink(a.output, out);
  std::ostream& o = sink.get();
  const bool scalar = op.kind() == OperatorKind::scalar;
  if (a.format == "json") {
    json doc;
    doc["k"] = a.k;
    doc["method"] = a.method;
    json values = json::array();
    for (int n = 0; n <= a.k; ++n) {
      if (scalar) {
        values.push_back(complex_json(table[n].scalar_value()));
      } else {
        const Matrix m = table[n].to_dense();
        json rows = json::array();
        for (Index r = 0; r < m.rows(); ++r) {
          json row = json::array();
          for (Index c = 0; c < m.cols(); ++c) row.push_back(complex_json(m(r, c)));
          rows.push_back(row);
        }
        values.push_back(rows);
      }
    }
    doc["values"] = values;
    o << doc.dump(1) << '\n';
  } else if (scalar) {
    o << "n,re,im\n";
    for (int n = 0; n <= a.k; ++n) {
      const Complex v = table[n].scalar_value();
      o << n << ',' << format_double(v.real()) << ',' << format_double(v.imag()) << '\n';
    }
  } else {
    o << "n,row,col,re,im\n";
    for (int n = 0; n <= a.k; ++n) {
      const Matrix m = table[n].to_dense();
      for (Index r = 0; r < m.rows(); ++r)
        for (Index c = 0; c < m.cols(); ++c)
          o << n << ',' << r << ',' << c << ',' << format_double(m(r, c).real()) << ','
            << format_double(m(r, c).imag()) << '\n';
    }
  }
  sink.finish();

  if (!a.check) return kOk;
  const PhiTable oracle = scalar ? phi_recursive_contour(op, a.k) : matrix_oracle(op, a.k);
  const double dev = table_deviation(table, oracle);
  const bool ok = dev <= a.tolerance;
  err << "check: max relative deviation from oracle " << format_double(dev) << " (tolerance "
      << format_double(a.tolerance) << ") " << (ok ? "ok" : "FAILED") << '\n';
  return ok ? kOk : kCheckFailed;
}

// ---------------------------------------------------------------------------

struct WeightsArgs {
  int n = 4;
  std::string family = "chebyshev";
  std::string z = "0";
  double h = 1.0;
  std::string format = "csv";
  std::string output;
};

int cmd_weights(const WeightsArgs& a, std::ostream& out) {
  const NodeSet nodes = make_nodes(parse_node_family(a.family), a.n);
  const Complex z = parse_complex(a.z);
  const WeightSet ws = etd_weight_set(nodes, LinearOperator::scalar(z), a.h);

  Sink sink(a.output, out);
  std::ostream& o = sink.get();
  if (a.format == "json") {
    json doc;
    doc["nodes"] = a.n;
    doc["family"] = a.family;
    doc["z"] = complex_json(z);
    doc["h"] = a.h;
    doc["tau"] = std::vector<double>(nodes.tau.data(), nodes.tau.data() + nodes.tau.size());
    doc["eta"] = std::vector<double>(nodes.eta.data(), nodes.eta.data() + nodes.eta.size());
    json w = json::array(), q = json::array();
    for (int i = 0; i < nodes.substeps(); ++i) {
      json wr = json::array(), qr = json::array();
      for (int l = 0; l < nodes.size(); ++l) {
        wr.push_back(complex_json(ws.w[i][l].scalar_value()));
        qr.push_back(ws.quad(i, l));
      }
      w.push_back(wr);
      q.push_back(qr);
    }
    doc["w"] = w;
    doc["quadrature"] = q;
    o << doc.dump(1) << '\n';
  } else {
    o << "substep,node,re,im,quadrature\n";
    for (int i = 0; i < nodes.substeps(); ++i)
      for (int l = 0; l < nodes.size(); ++l) {
        const Complex w = ws.w[i][l].scalar_value();
        o << i << ',' << l << ',' << format_double(w.real()) << ',' << format_double(w.imag()) << ','
          << format_double(ws.quad(i, l)) << '\n';
      }
  }
  sink.finish();
  return kOk;
}

// ---------------------------------------------------------------------------

struct RegionsArgs {
  std::string scheme = "etdsdc";
  int n = 8;
  int m = 7;
  std::string family = "chebyshev";
  std::string preset;
  std::vector<std::string> r;
  double re_min = -40, re_max = 10, im_min = -40, im_max = 40;
  int re_points = 401, im_points = 401;
  std::optional<int> resolution;
  std::optional<double> epsilon;
  std::string format = "csv";
  std::string output;
  int threads = 1;
};

int cmd_regions(const RegionsArgs& a, std::ostream& out) {
  RegionQuery q;
  q.scheme = parse_region_scheme(a.scheme);
  q.nodes = a.n;
  q.sweeps = a.m;
  q.family = parse_node_family(a.family);
  if (!a.preset.empty() && !a.r.empty()) throw std::invalid_argument("give --preset or --r, not both");
  if (!a.preset.empty()) {
    q.r_values = region_preset(a.preset);
  } else if (!a.r.empty()) {
    q.r_values.clear();
    for (const auto& s : split_list(a.r)) q.r_values.push_back(parse_complex(s));
  }
  q.re_min = a.re_min;
  q.re_max = a.re_max;
  q.im_min = a.im_min;
  q.im_max = a.im_max;
  q.re_points = a.resolution.value_or(a.re_points);
  q.im_points = a.resolution.value_or(a.im_points);
  q.epsilon = a.epsilon;

  const RegionGrid grid = region_grid(q, a.threads);
  Sink sink(a.output, out);
  export_region(grid, sink.get(), a.format == "json" ? RegionFormat::json : RegionFormat::csv);
  sink.finish();
  return kOk;
}

// ---------------------------------------------------------------------------

struct SolveArgs {
  ProblemArgs problem;
  std::string method;
  std::optional<long long> steps;
  std::optional<double> h;
  std::optional<long long> budget;
  bool reference = false;
  std::string output;
  std::string result;
  std::string format = "csv";
  bool no_timing = false;
  int threads = 1;
};

int cmd_solve(const SolveArgs& a, std::ostream& out, std::ostream& err) {
  const int given = int(a.steps.has_value()) + int(a.h.has_value()) + int(a.budget.has_value());
  if (given != 1) throw CLI::ValidationError("solve", "give exactly one of --steps, --h, --budget");
  const SemilinearProblem problem = a.problem.make();
  const MethodId method = MethodId::parse(a.method);
  long long steps = 0;
  if (a.steps) {
    if (*a.steps < 0) throw std::invalid_argument("--steps must be non-negative");
    steps = *a.steps;
  } else if (a.h) {
    steps = steps_for_step_size(problem, *a.h);
  } else {
    steps = method.steps_for_budget(*a.budget);
  }

  // Zero steps stay at t_start, where no reference is defined.
  Vector reference;
  if (problem.exact && steps > 0) {
    reference = problem.exact(problem.t_end);
  } else if (a.reference && steps > 0) {
    ReferenceOptions ro;
    ro.threads = a.threads;
    reference = reference_solution(problem, method.evals_for(steps), ro).state;
  }

  Vector state;
  BenchmarkResult row = run_benchmark(problem, method, steps, reference, &state);
  const bool timing = !a.no_timing;

  if (!row.diverged && !a.output.empty()) {
    Sink snap(a.output, out);
    const Vector phys = problem.physical(state);
    snap.get() << "index,re,im\n";
    for (Index i = 0; i < phys.size(); ++i)
      snap.get() << i << ',' << format_double(phys[i].real()) << ',' << format_double(phys[i].imag()) << '\n';
    snap.finish();
  }

  Sink sink(a.result, out);
  if (a.format == "json") {
    json doc;
    doc["config"] = a.problem.echo();
    doc["config"]["method"] = method.to_string();
    doc["result"] = result_json(row, timing);
    sink.get() << doc.dump(1) << '\n';
  } else {
    write_results_csv(sink.get(), {row}, timing);
  }
  sink.finish();

  if (row.diverged) {
    err << "solve: " << row.method << " diverged on " << problem.name << '\n';
    return kDiverged;
  }
  return kOk;
}

// ---------------------------------------------------------------------------

struct ConvergeArgs {
  ProblemArgs problem;
  std::vector<std::string> methods;
  std::vector<std::string> budgets;
  std::vector<std::string> reference_methods;
  double reference_factor = 4.0;
  double tolerance = 1e-10;
  double fit_floor = 1e-12;
  double fit_ceiling = 1e-1;
  std::string format = "csv";
  std::string output;
  bool no_timing = false;
  int threads = 1;
};

int cmd_converge(const ConvergeArgs& a, std::ostream& out, std::ostream& err) {
  const SemilinearProblem problem = a.problem.make();
  std::vector<MethodId> methods;
  for (const auto& s : split_list(a.methods)) methods.push_back(MethodId::parse(s));
  std::vector<long long> budgets;
  for (const auto& s : split_list(a.budgets)) {
    long long v = 0;
    const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (ec != std::errc{} || ptr != s.data() + s.size()) throw std::invalid_argument("invalid budget '" + s + "'");
    budgets.push_back(v);
  }
  if (methods.empty() || budgets.empty()) throw std::invalid_argument("converge needs --methods and --budgets");

  ReferenceOptions ro;
  if (!a.reference_methods.empty()) {
    ro.methods.clear();
    for (const auto& s : split_list(a.reference_methods)) ro.methods.push_back(MethodId::parse(s));
  }
  ro.budget_factor = a.reference_factor;
  ro.tolerance = a.tolerance;
  ro.threads = a.threads;
  const ReferenceSolution ref = reference_solution(problem, *std::max_element(budgets.begin(), budgets.end()), ro);

  StudyOptions so;
  so.fit_floor = a.fit_floor;
  so.fit_ceiling = a.fit_ceiling;
  so.threads = a.threads;
  const StudyResult study = convergence_study(problem, methods, budgets, ref.state, so);
  const bool timing = !a.no_timing;

  Sink sink(a.output, out);
  if (a.format == "json") {
    json doc;
    json config = a.problem.echo();
    json ml = json::array();
    for (const auto& m : methods) ml.push_back(m.to_string());
    config["methods"] = ml;
    config["budgets"] = budgets;
    json rl = json::array();
    for (const auto& m : ro.methods) rl.push_back(m.to_string());
    config["reference_methods"] = rl;
    config["reference_factor"] = ro.budget_factor;
    config["tolerance"] = ro.tolerance;
    config["fit_floor"] = so.fit_floor;
    config["fit_ceiling"] = so.fit_ceiling;
    doc["config"] = config;
    doc["reference"] = {{"exact", ref.exact}, {"disagreement", ref.disagreement}};
    json rows = json::array();
    for (const auto& r : study.rows) rows.push_back(result_json(r, timing));
    doc["rows"] = rows;
    json slopes = json::array();
    for (const auto& s : study.slopes)
      slopes.push_back({{"method", s.method}, {"slope", s.slope ? json(*s.slope) : json(nullptr)}, {"points", s.points}});
    doc["slopes"] = slopes;
    sink.get() << doc.dump(1) << '\n';
  } else {
    write_results_csv(sink.get(), study.rows, timing);
  }
  sink.finish();

  if (study.slopes.empty()) err << "slopes: fit needs at least 3 budgets\n";
  for (const auto& s : study.slopes) {
    err << "slope " << s.method << ' ';
    if (s.slope) {
      err << format_double(*s.slope);
    } else {
      err << "n/a";
    }
    err << " (" << s.points << " points)\n";
  }
  const bool diverged = std::any_of(study.rows.begin(), study.rows.end(), [](const auto& r) { return r.diverged; });
  if (diverged) err << "converge: at least one run diverged\n";
  return diverged ? kDiverged : kOk;
}

void add_format(CLI::App* app, std::string& format) {
  app->add_option("--format", format, "csv | json")->check(CLI::IsMember({"csv", "json"}));
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Exponential and IMEX spectral deferred correction toolkit", "expsdc"};
  app.set_help_flag("--help", "show help");
  app.require_subcommand(1);
  const int threads = default_threads();

  PhiArgs phi;
  auto* sp = app.add_subcommand("phi", "evaluate phi_0..phi_K at a scalar or matrix");
  sp->add_option("--z", phi.z, "complex argument, e.g. 1, -2+3i, (0.5,1)");
  sp->add_option("--matrix", phi.matrix, "CSV file holding a square matrix");
  sp->add_option("--k", phi.k, "highest order K")->check(CLI::Range(0, 160));
  sp->add_option("--method", phi.method, "taylor | contour | explicit");
  sp->add_option("--points", phi.points, "contour points");
  sp->add_option("--radius", phi.radius, "contour radius");
  sp->add_flag("--check", phi.check, "compare against the contour/recursion oracle");
  sp->add_option("--tolerance", phi.tolerance, "relative tolerance for --check");
  add_format(sp, phi.format);
  sp->add_option("-o,--output", phi.output, "output file (stdout when omitted)");

  WeightsArgs weights;
  auto* sw = app.add_subcommand("weights", "dump ETD weights w_il(h z) and quadrature I_il");
  sw->add_option("--n", weights.n, "number of nodes");
  sw->add_option("--family", weights.family, "chebyshev | uniform | gauss-legendre");
  sw->add_option("--z", weights.z, "linear coefficient");
  sw->add_option("--h", weights.h, "step size");
  add_format(sw, weights.format);
  sw->add_option("-o,--output", weights.output, "output file");

  RegionsArgs regions;
  regions.threads = threads;
  auto* sr = app.add_subcommand("regions", "stability or accuracy region sweep");
  sr->add_option("--scheme", regions.scheme, "etdsdc | imexsdc");
  sr->add_option("--n", regions.n, "nodes");
  sr->add_option("--m", regions.m, "correction sweeps");
  sr->add_option("--family", regions.family, "node family");
  sr->add_option("--preset", regions.preset, "dissipative | dispersive | mixed");
  sr->add_option("--r", regions.r, "r values (comma separated or repeated)");
  sr->add_option("--re-min", regions.re_min);
  sr->add_option("--re-max", regions.re_max);
  sr->add_option("--im-min", regions.im_min);
  sr->add_option("--im-max", regions.im_max);
  sr->add_option("--re-points", regions.re_points);
  sr->add_option("--im-points", regions.im_points);
  sr->add_option("--resolution", regions.resolution, "points per axis (overrides --re-points/--im-points)");
  sr->add_option("--epsilon", regions.epsilon, "accuracy mode threshold");
  add_format(sr, regions.format);
  sr->add_option("-o,--output", regions.output, "output file");
  sr->add_option("--threads", regions.threads, "worker threads")->check(CLI::PositiveNumber);

  SolveArgs solve;
  solve.threads = threads;
  auto* ss = app.add_subcommand("solve", "run one method on one problem");
  solve.problem.attach(ss);
  ss->add_option("--method", solve.method, "e.g. etdsdc:8:7, imexsdc:4:3, etdrk4")->required();
  ss->add_option("--steps", solve.steps, "number of steps");
  ss->add_option("--h", solve.h, "step size");
  ss->add_option("--budget", solve.budget, "nonlinear evaluation budget");
  ss->add_flag("--reference", solve.reference, "measure error against a computed reference (exact solutions are always used)");
  ss->add_option("-o,--output", solve.output, "final physical state CSV");
  ss->add_option("--result", solve.result, "result file (stdout when omitted)");
  add_format(ss, solve.format);
  ss->add_flag("--no-timing", solve.no_timing, "write 0 seconds");
  ss->add_option("--threads", solve.threads)->check(CLI::PositiveNumber);

  ConvergeArgs converge;
  converge.threads = threads;
  auto* sc = app.add_subcommand("converge", "error against evaluations, step size and time");
  converge.problem.attach(sc);
  sc->add_option("--methods", converge.methods, "method ids")->required();
  sc->add_option("--budgets", converge.budgets, "evaluation budgets")->required();
  sc->add_option("--reference-methods", converge.reference_methods, "methods averaged for the reference");
  sc->add_option("--reference-factor", converge.reference_factor, "reference budget multiple");
  sc->add_option("--tolerance", converge.tolerance, "target accuracy used to accept the reference");
  sc->add_option("--fit-floor", converge.fit_floor, "errors below are excluded from the slope fit");
  sc->add_option("--fit-ceiling", converge.fit_ceiling, "errors above are excluded from the slope fit");
  add_format(sc, converge.format);
  sc->add_option("-o,--output", converge.output, "output file");
  sc->add_flag("--no-timing", converge.no_timing, "write 0 seconds");
  sc->add_option("--threads", converge.threads)->check(CLI::PositiveNumber);

  for (auto* sub : app.get_subcommands({}))
    sub->add_option("--config", "read options from a key = value file (command line wins)");

  try {
    const std::vector<std::string> expanded = expand_config(args);
    std::vector<std::string> reversed(expanded.rbegin(), expanded.rend());
    app.parse(reversed);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return kOk;
  } catch (const ParseError& e) {
    err << "error: config " << e.what() << '\n';
    return kUsage;
  } catch (const CLI::ParseError& e) {
    std::ostringstream o, e2;
    const int code = app.exit(e, o, e2);
    out << o.str();
    err << e2.str();
    return code == 0 ? kOk : kUsage;
  } catch (const std::runtime_error& e) {
    err << "error: " << e.what() << '\n';
    return kUsage;
  }

  try {
    if (*sp) return cmd_phi(phi, out, err);
    if (*sw) return cmd_weights(weights, out);
    if (*sr) return cmd_regions(regions, out);
    if (*ss) return cmd_solve(solve, out, err);
    if (*sc) return cmd_converge(converge, out, err);
  } catch (const CLI::ValidationError& e) {
    err << "error: " << e.what() << '\n';
    return kUsage;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return kFailure;
  }
  return kUsage;
}

}  // namespace expsdc::cli
