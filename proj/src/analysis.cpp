#include "expsdc/analysis.hpp"

#include "json.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <numbers>
#include <sstream>
#include <thread>

namespace expsdc {

namespace {

using json = nlohmann::json;

std::string fmt_double(double x) {
  if (std::isnan(x)) return "nan";
  if (std::isinf(x)) return x > 0 ? "inf" : "-inf";
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", x);
  return buf;
}

const char* scheme_name(Scheme s) { return to_string(s); }

Scheme parse_region_scheme(const std::string& name) {
  if (name == "etdsdc") return Scheme::etdsdc;
  if (name == "imexsdc") return Scheme::imexsdc;
  throw std::invalid_argument("region scheme must be etdsdc or imexsdc (got '" + name + "')");
}

void fill_slice(const RegionQuery& q, const StabilityFunction& psi, RegionSlice& slice, int row_begin, int row_end) {
  const double threshold = q.epsilon ? *q.epsilon : 1.0;
  for (int iy = row_begin; iy < row_end; ++iy) {
    for (int ix = 0; ix < q.re_points; ++ix) {
      const std::size_t idx = static_cast<std::size_t>(iy) * q.re_points + ix;
      const Complex z = q.z_at(ix, iy);
      double value = std::numeric_limits<double>::infinity();
      try {
        const Complex v = psi(z);
        value = q.epsilon ? std::abs(v - std::exp(psi.r() + z)) : std::abs(v);
        if (std::isnan(value)) value = std::numeric_limits<double>::infinity();
      } catch (const StabilityPoleError&) {
      }
      slice.values[idx] = value;
      slice.member[idx] = value <= threshold;
    }
  }
}

}  // namespace

StabilityPoleError::StabilityPoleError(int substep, Complex r)
    : std::runtime_error([&] {
        std::ostringstream os;
        os << "IMEXSDC stability function has a pole at substep " << substep << " for r = " << r;
        return os.str();
      }()),
      substep_(substep) {}

StabilityFunction::StabilityFunction(Scheme scheme, const NodeSet& nodes, int sweeps, Complex r)
    : scheme_(scheme), nodes_(nodes), sweeps_(sweeps), r_(r) {
  if (scheme != Scheme::etdsdc && scheme != Scheme::imexsdc) {
    throw std::invalid_argument("stability functions exist for etdsdc and imexsdc only");
  }
  if (sweeps < 0) throw std::invalid_argument("sweeps must be non-negative");
  const int N = nodes.size();
  if (scheme == Scheme::etdsdc) {
    const WeightSet set = etd_weight_set(nodes, LinearOperator::scalar(r), 1.0);
    weights_.resize(N - 1, N);
    for (int i = 0; i < N - 1; ++i) {
      exp_r_eta_.push_back(set.phi0[i].scalar_value());
      euler_coef_.push_back(nodes.eta[i] * set.phi1[i].scalar_value());
      for (int j = 0; j < N; ++j) weights_(i, j) = set.w[i][j].scalar_value();
    }
  } else {
    weights_ = polynomial_quadrature_matrix(nodes).cast<Complex>();
    for (int i = 0; i < N - 1; ++i) {
      const Complex denom = 1.0 - r * nodes.eta[i];
      if (std::abs(denom) <= 1e-14 * std::max(1.0, std::abs(r * nodes.eta[i])) && pole_substep_ < 0) {
        pole_substep_ = i + 1;
      }
      exp_r_eta_.push_back(denom);
    }
  }
}

Complex StabilityFunction::operator()(Complex z) const {
  if (pole_substep_ > 0) throw StabilityPoleError(pole_substep_, r_);
  const int N = nodes_.size();
  std::vector<Complex> psi(N), next(N);
  psi[0] = 1.0;
  if (scheme_ == Scheme::etdsdc) {
    for (int i = 0; i < N - 1; ++i) psi[i + 1] = exp_r_eta_[i] * psi[i] + euler_coef_[i] * z * psi[i];
    for (int k = 0; k < sweeps_; ++k) {
      next[0] = psi[0];
      for (int i = 0; i < N - 1; ++i) {
        Complex quad{0.0};
        for (int j = 0; j < N; ++j) quad += weights_(i, j) * psi[j];
        next[i + 1] = exp_r_eta_[i] * next[i] + euler_coef_[i] * z * (next[i] - psi[i]) + z * quad;
      }
      std::swap(psi, next);
    }
  } else {
    for (int i = 0; i < N - 1; ++i) psi[i + 1] = (1.0 + z * nodes_.eta[i]) / exp_r_eta_[i] * psi[i];
    for (int k = 0; k < sweeps_; ++k) {
      next[0] = psi[0];
      for (int i = 0; i < N - 1; ++i) {
        Complex quad{0.0};
        for (int j = 0; j < N; ++j) quad += weights_(i, j) * psi[j];
        const double eta = nodes_.eta[i];
        next[i + 1] = (next[i] + eta * z * (next[i] - psi[i]) - r_ * eta * psi[i + 1] + (r_ + z) * quad) /
                      exp_r_eta_[i];
      }
      std::swap(psi, next);
    }
  }
  return psi[N - 1];
}

Complex stability_value(Scheme scheme, const NodeSet& nodes, int sweeps, Complex r, Complex z) {
  return StabilityFunction(scheme, nodes, sweeps, r)(z);
}

void RegionQuery::validate() const {
  if (scheme != Scheme::etdsdc && scheme != Scheme::imexsdc) {
    throw std::invalid_argument("region queries support etdsdc and imexsdc");
  }
  SdcConfig{nodes, sweeps, family}.validate();
  if (re_points < 1 || im_points < 1) throw std::invalid_argument("grid resolution must be positive");
  if (!(re_max >= re_min) || !(im_max >= im_min)) throw std::invalid_argument("grid extents are inverted");
  if (epsilon && !(*epsilon > 0.0)) throw std::invalid_argument("accuracy epsilon must be positive");
  if (r_values.empty()) throw std::invalid_argument("region query needs at least one r value");
}

Complex RegionQuery::z_at(int ix, int iy) const {
  const double re = re_points == 1 ? re_min : re_min + (re_max - re_min) * ix / (re_points - 1);
  const double im = im_points == 1 ? im_min : im_min + (im_max - im_min) * iy / (im_points - 1);
  return {re, im};
}

RegionGrid region_grid(const RegionQuery& query, int threads) {
  query.validate();
  const NodeSet nodes = make_nodes(query.family, query.nodes);
  const std::size_t points = static_cast<std::size_t>(query.re_points) * query.im_points;
  RegionGrid grid;
  grid.query = query;
  for (Complex r : query.r_values) {
    RegionSlice slice;
    slice.r = r;
    slice.values.assign(points, 0.0);
    slice.member.assign(points, false);
    const StabilityFunction psi(query.scheme, nodes, query.sweeps, r);

    const int workers = std::max(1, std::min(threads, query.im_points));
    if (workers == 1) {
      fill_slice(query, psi, slice, 0, query.im_points);
    } else {
      // std::vector<bool> packs bits, so each worker fills a private buffer.
      std::vector<RegionSlice> parts(static_cast<std::size_t>(workers), slice);
      std::vector<std::thread> pool;
      const int rows = query.im_points;
      for (int w = 0; w < workers; ++w) {
        pool.emplace_back([&, w] {
          fill_slice(query, psi, parts[w], rows * w / workers, rows * (w + 1) / workers);
        });
      }
      for (auto& t : pool) t.join();
      for (int w = 0; w < workers; ++w) {
        const std::size_t lo = static_cast<std::size_t>(rows * w / workers) * query.re_points;
        const std::size_t hi = static_cast<std::size_t>(rows * (w + 1) / workers) * query.re_points;
        for (std::size_t i = lo; i < hi; ++i) {
          slice.values[i] = parts[w].values[i];
          slice.member[i] = parts[w].member[i];
        }
      }
    }
    grid.slices.push_back(std::move(slice));
  }
  return grid;
}

void export_region(const RegionGrid& grid, const std::filesystem::path& path, RegionFormat format) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot open '" + path.string() + "' for writing");
  export_region(grid, out, format);
  if (!out) throw std::runtime_error("failed writing '" + path.string() + "'");
}

void export_region(const RegionGrid& grid, std::ostream& out, RegionFormat format) {
  const RegionQuery& q = grid.query;

  if (format == RegionFormat::csv) {
    out << "re_r,im_r,re_z,im_z,value,member\n";
    for (const auto& slice : grid.slices) {
      for (int iy = 0; iy < q.im_points; ++iy) {
        for (int ix = 0; ix < q.re_points; ++ix) {
          const std::size_t idx = static_cast<std::size_t>(iy) * q.re_points + ix;
          const Complex z = q.z_at(ix, iy);
          out << fmt_double(slice.r.real()) << ',' << fmt_double(slice.r.imag()) << ',' << fmt_double(z.real())
              << ',' << fmt_double(z.imag()) << ',' << fmt_double(slice.values[idx]) << ','
              << (slice.member[idx] ? 1 : 0) << '\n';
        }
      }
    }
  } else {
    json doc;
    doc["query"] = {{"scheme", scheme_name(q.scheme)},
                    {"nodes", q.nodes},
                    {"sweeps", q.sweeps},
                    {"family", to_string(q.family)},
                    {"re_min", q.re_min},
                    {"re_max", q.re_max},
                    {"im_min", q.im_min},
                    {"im_max", q.im_max},
                    {"re_points", q.re_points},
                    {"im_points", q.im_points},
                    {"mode", q.epsilon ? "accuracy" : "stability"},
                    {"epsilon", q.epsilon ? json(*q.epsilon) : json(nullptr)}};
    json slices = json::array();
    for (const auto& slice : grid.slices) {
      json values = json::array();
      json member = json::array();
      for (std::size_t i = 0; i < slice.values.size(); ++i) {
        values.push_back(std::isfinite(slice.values[i]) ? json(slice.values[i]) : json(nullptr));
        member.push_back(slice.member[i] ? 1 : 0);
      }
      slices.push_back({{"r", {slice.r.real(), slice.r.imag()}}, {"values", values}, {"member", member}});
    }
    doc["slices"] = slices;
    out << doc.dump(1) << '\n';
  }
}

RegionGrid load_region_json(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open '" + path.string() + "'");
  return load_region_json(in);
}

RegionGrid load_region_json(std::istream& in) {
  const json doc = json::parse(in);
  const json& q = doc.at("query");
  RegionGrid grid;
  grid.query.scheme = parse_region_scheme(q.at("scheme").get<std::string>());
  grid.query.nodes = q.at("nodes").get<int>();
  grid.query.sweeps = q.at("sweeps").get<int>();
  grid.query.family = parse_node_family(q.at("family").get<std::string>());
  grid.query.re_min = q.at("re_min").get<double>();
  grid.query.re_max = q.at("re_max").get<double>();
  grid.query.im_min = q.at("im_min").get<double>();
  grid.query.im_max = q.at("im_max").get<double>();
  grid.query.re_points = q.at("re_points").get<int>();
  grid.query.im_points = q.at("im_points").get<int>();
  if (!q.at("epsilon").is_null()) grid.query.epsilon = q.at("epsilon").get<double>();
  grid.query.r_values.clear();
  for (const auto& s : doc.at("slices")) {
    RegionSlice slice;
    slice.r = {s.at("r")[0].get<double>(), s.at("r")[1].get<double>()};
    for (const auto& v : s.at("values")) {
      slice.values.push_back(v.is_null() ? std::numeric_limits<double>::infinity() : v.get<double>());
    }
    for (const auto& m : s.at("member")) slice.member.push_back(m.get<int>() != 0);
    grid.query.r_values.push_back(slice.r);
    grid.slices.push_back(std::move(slice));
  }
  return grid;
}

std::vector<Complex> region_preset(std::string_view name) {
  Complex r0;
  if (name == "dissipative") {
    r0 = -30.0;
  } else if (name == "dispersive") {
    r0 = Complex(0.0, 30.0);
  } else if (name == "mixed") {
    r0 = std::polar(30.0, 3.0 * std::numbers::pi / 4.0);
  } else {
    throw std::invalid_argument("unknown region preset '" + std::string(name) + "'");
  }
  return {Complex{0.0}, 0.5 * r0, r0};
}

}  // namespace expsdc
