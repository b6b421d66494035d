#include "expsdc/operator.hpp"

#include <cmath>
#include <limits>
#include <map>
#include <mutex>
#include <sstream>

namespace expsdc {

namespace {

constexpr double kSingularTol = 1e-13;

std::string format_complex(Complex z) {
  std::ostringstream os;
  os.precision(17);
  os << z.real() << (z.imag() < 0 ? "-" : "+") << std::abs(z.imag()) << "i";
  return os.str();
}

bool finite(Complex z) { return std::isfinite(z.real()) && std::isfinite(z.imag()); }

struct ComplexLess {
  bool operator()(Complex a, Complex b) const {
    if (a.real() != b.real()) return a.real() < b.real();
    return a.imag() < b.imag();
  }
};

void require_dim(const LinearOperator& op, const Vector& v) {
  if (op.dim() != v.size()) {
    std::ostringstream os;
    os << "dimension mismatch: operator is " << op.dim() << ", vector is " << v.size();
    throw DimensionError(os.str());
  }
}

void require_same_shape(const LinearOperator& a, const LinearOperator& b) {
  if (a.kind() != b.kind() || a.dim() != b.dim()) {
    throw DimensionError(std::string("operator shape mismatch: ") + to_string(a.kind()) + " vs " +
                         to_string(b.kind()));
  }
}

Complex shifted_pivot(Complex alpha, Complex lambda) {
  const Complex pivot = 1.0 - alpha * lambda;
  const double scale = std::max(1.0, std::abs(alpha * lambda));
  if (std::abs(pivot) <= kSingularTol * scale) {
    throw SingularShiftError(alpha, "I - alpha*Lambda is singular");
  }
  return pivot;
}

}  // namespace

namespace detail {

struct ShiftCache {
  std::mutex mutex;
  std::map<Complex, std::shared_ptr<const Eigen::PartialPivLU<Matrix>>, ComplexLess> factors;
};

}  // namespace detail

const char* to_string(OperatorKind kind) {
  switch (kind) {
    case OperatorKind::scalar:
      return "scalar";
    case OperatorKind::diagonal:
      return "diagonal";
    case OperatorKind::dense:
      return "dense";
  }
  return "unknown";
}

SingularShiftError::SingularShiftError(Complex alpha, const std::string& detail)
    : std::runtime_error(detail + " (alpha = " + format_complex(alpha) + ")"), alpha_(alpha) {}

LinearOperator::LinearOperator(Complex value) : data_(value) {}

LinearOperator::LinearOperator(std::variant<Complex, Vector, Matrix> data) : data_(std::move(data)) {
  if (std::holds_alternative<Matrix>(data_)) cache_ = std::make_shared<detail::ShiftCache>();
}

LinearOperator LinearOperator::scalar(Complex value) {
  if (!finite(value)) throw std::invalid_argument("scalar operator must be finite");
  return LinearOperator(value);
}

LinearOperator LinearOperator::diagonal(Vector spectrum) {
  if (spectrum.size() == 0) throw DimensionError("diagonal operator needs at least one entry");
  if (!spectrum.allFinite()) throw std::invalid_argument("diagonal operator must be finite");
  return LinearOperator(std::variant<Complex, Vector, Matrix>(std::move(spectrum)));
}

LinearOperator LinearOperator::dense(Matrix matrix) {
  if (matrix.rows() != matrix.cols() || matrix.rows() == 0) {
    throw DimensionError("dense operator must be square and non-empty");
  }
  if (!matrix.allFinite()) throw std::invalid_argument("dense operator must be finite");
  return LinearOperator(std::variant<Complex, Vector, Matrix>(std::move(matrix)));
}

LinearOperator LinearOperator::identity_like(const LinearOperator& like, Complex value) {
  switch (like.kind()) {
    case OperatorKind::scalar:
      return LinearOperator(value);
    case OperatorKind::diagonal:
      return LinearOperator(std::variant<Complex, Vector, Matrix>(Vector(Vector::Constant(like.dim(), value))));
    case OperatorKind::dense:
      return LinearOperator(std::variant<Complex, Vector, Matrix>(
          Matrix(value * Matrix::Identity(like.dim(), like.dim()))));
  }
  return LinearOperator(value);
}

OperatorKind LinearOperator::kind() const { return static_cast<OperatorKind>(data_.index()); }

Index LinearOperator::dim() const {
  switch (kind()) {
    case OperatorKind::scalar:
      return 1;
    case OperatorKind::diagonal:
      return std::get<Vector>(data_).size();
    case OperatorKind::dense:
      return std::get<Matrix>(data_).rows();
  }
  return 0;
}

Complex LinearOperator::scalar_value() const { return std::get<Complex>(data_); }
const Vector& LinearOperator::spectrum() const { return std::get<Vector>(data_); }
const Matrix& LinearOperator::matrix() const { return std::get<Matrix>(data_); }

Matrix LinearOperator::to_dense() const {
  switch (kind()) {
    case OperatorKind::scalar:
      return Matrix::Constant(1, 1, scalar_value());
    case OperatorKind::diagonal:
      return spectrum().asDiagonal();
    case OperatorKind::dense:
      return matrix();
  }
  return {};
}

bool LinearOperator::all_finite() const {
  switch (kind()) {
    case OperatorKind::scalar:
      return finite(scalar_value());
    case OperatorKind::diagonal:
      return spectrum().allFinite();
    case OperatorKind::dense:
      return matrix().allFinite();
  }
  return false;
}

LinearOperator LinearOperator::scaled(Complex factor) const { return factor * *this; }

LinearOperator operator+(const LinearOperator& a, const LinearOperator& b) {
  require_same_shape(a, b);
  switch (a.kind()) {
    case OperatorKind::scalar:
      return LinearOperator(a.scalar_value() + b.scalar_value());
    case OperatorKind::diagonal:
      return LinearOperator(std::variant<Complex, Vector, Matrix>(Vector(a.spectrum() + b.spectrum())));
    case OperatorKind::dense:
      return LinearOperator(std::variant<Complex, Vector, Matrix>(Matrix(a.matrix() + b.matrix())));
  }
  return a;
}

LinearOperator operator-(const LinearOperator& a, const LinearOperator& b) { return a + (-1.0) * b; }

LinearOperator operator*(Complex factor, const LinearOperator& a) {
  switch (a.kind()) {
    case OperatorKind::scalar:
      return LinearOperator(factor * a.scalar_value());
    case OperatorKind::diagonal:
      return LinearOperator(std::variant<Complex, Vector, Matrix>(Vector(factor * a.spectrum())));
    case OperatorKind::dense:
      return LinearOperator(std::variant<Complex, Vector, Matrix>(Matrix(factor * a.matrix())));
  }
  return a;
}

LinearOperator compose(const LinearOperator& a, const LinearOperator& b) {
  require_same_shape(a, b);
  switch (a.kind()) {
    case OperatorKind::scalar:
      return LinearOperator(a.scalar_value() * b.scalar_value());
    case OperatorKind::diagonal:
      return LinearOperator(
          std::variant<Complex, Vector, Matrix>(Vector(a.spectrum().cwiseProduct(b.spectrum()))));
    case OperatorKind::dense:
      return LinearOperator(std::variant<Complex, Vector, Matrix>(Matrix(a.matrix() * b.matrix())));
  }
  return a;
}

Vector apply_op(const LinearOperator& op, const Vector& v) {
  require_dim(op, v);
  switch (op.kind()) {
    case OperatorKind::scalar:
      return op.scalar_value() * v;
    case OperatorKind::diagonal:
      return op.spectrum().cwiseProduct(v);
    case OperatorKind::dense:
      return op.matrix() * v;
  }
  return v;
}

void apply_add(const LinearOperator& op, const Vector& v, Vector& out) {
  require_dim(op, v);
  switch (op.kind()) {
    case OperatorKind::scalar:
      out += op.scalar_value() * v;
      break;
    case OperatorKind::diagonal:
      out.array() += op.spectrum().array() * v.array();
      break;
    case OperatorKind::dense:
      out.noalias() += op.matrix() * v;
      break;
  }
}

Vector solve_shifted(const LinearOperator& op, Complex alpha, const Vector& rhs) {
  require_dim(op, rhs);
  switch (op.kind()) {
    case OperatorKind::scalar:
      return rhs / shifted_pivot(alpha, op.scalar_value());
    case OperatorKind::diagonal: {
      Vector x(rhs.size());
      const Vector& lambda = op.spectrum();
      for (Index j = 0; j < rhs.size(); ++j) x[j] = rhs[j] / shifted_pivot(alpha, lambda[j]);
      return x;
    }
    case OperatorKind::dense: {
      std::shared_ptr<const Eigen::PartialPivLU<Matrix>> lu;
      {
        std::lock_guard<std::mutex> lock(op.cache_->mutex);
        auto it = op.cache_->factors.find(alpha);
        if (it != op.cache_->factors.end()) lu = it->second;
      }
      if (!lu) {
        const Index d = op.dim();
        Matrix shifted = Matrix::Identity(d, d) - alpha * op.matrix();
        auto fresh = std::make_shared<Eigen::PartialPivLU<Matrix>>(shifted);
        // rcond() is only an estimate and can miss an exactly zero pivot.
        const auto pivots = fresh->matrixLU().diagonal().cwiseAbs();
        if (!(pivots.minCoeff() > kSingularTol * std::max(1.0, pivots.maxCoeff())) || !(fresh->rcond() > kSingularTol)) {
          throw SingularShiftError(alpha, "I - alpha*Lambda is numerically singular");
        }
        std::lock_guard<std::mutex> lock(op.cache_->mutex);
        lu = op.cache_->factors.emplace(alpha, std::move(fresh)).first->second;
      }
      return lu->solve(rhs);
    }
  }
  return rhs;
}

OperatorNorms norms(const LinearOperator& op) {
  switch (op.kind()) {
    case OperatorKind::scalar: {
      const double a = std::abs(op.scalar_value());
      return {a, a};
    }
    case OperatorKind::diagonal: {
      const double a = op.spectrum().cwiseAbs().maxCoeff();
      return {a, a};
    }
    case OperatorKind::dense: {
      const RealMatrix mag = op.matrix().cwiseAbs();
      return {mag.colwise().sum().maxCoeff(), mag.rowwise().sum().maxCoeff()};
    }
  }
  return {};
}

}  // namespace expsdc
