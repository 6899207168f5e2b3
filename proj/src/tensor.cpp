#include "derprop/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <functional>
#include <numeric>

#include "derprop/kernels.hpp"

namespace derprop {

namespace {

std::size_t product(const std::vector<std::size_t>& dims) {
  return std::accumulate(dims.begin(), dims.end(), std::size_t{1}, std::multiplies<>());
}

void check_dims(const std::vector<std::size_t>& dims) {
  if (dims.empty()) throw ShapeError("tensor must have at least one dimension");
  for (std::size_t d : dims)
    if (d == 0) throw ShapeError("tensor dims must be positive, got " + shape_string(dims));
}

}  // namespace

Tensor::Tensor(std::vector<std::size_t> dims, double fill) : dims_(std::move(dims)) {
  check_dims(dims_);
  data_.assign(product(dims_), fill);
}

Tensor::Tensor(std::vector<std::size_t> dims, std::vector<double> data) : dims_(std::move(dims)), data_(std::move(data)) {
  check_dims(dims_);
  if (product(dims_) != data_.size()) {
    throw ShapeError("tensor dims " + shape_string(dims_) + " need " + std::to_string(product(dims_)) +
                     " values, got " + std::to_string(data_.size()));
  }
}

Tensor Tensor::from_rows(std::initializer_list<std::initializer_list<double>> rows) {
  const std::size_t r = rows.size();
  const std::size_t c = r == 0 ? 0 : rows.begin()->size();
  std::vector<double> data;
  data.reserve(r * c);
  for (const auto& row : rows) {
    if (row.size() != c) throw ShapeError("from_rows: ragged rows");
    data.insert(data.end(), row.begin(), row.end());
  }
  return Tensor({r, c}, std::move(data));
}

Tensor Tensor::vector(std::vector<double> values) {
  const std::size_t n = values.size();
  return Tensor({n}, std::move(values));
}

Tensor Tensor::identity(std::size_t n) {
  Tensor t = matrix(n, n);
  for (std::size_t i = 0; i < n; ++i) t(i, i) = 1.0;
  return t;
}

std::vector<double> Tensor::column(std::size_t c) const {
  std::vector<double> out(rows());
  for (std::size_t r = 0; r < rows(); ++r) out[r] = (*this)(r, c);
  return out;
}

void Tensor::set_column(std::size_t c, std::span<const double> values) {
  for (std::size_t r = 0; r < rows(); ++r) (*this)(r, c) = values[r];
}

bool Tensor::bit_equal(const Tensor& other) const noexcept {
  return dims_ == other.dims_ &&
         (data_.empty() || std::memcmp(data_.data(), other.data_.data(), data_.size() * sizeof(double)) == 0);
}

std::string shape_string(const std::vector<std::size_t>& dims) {
  std::string s = "[";
  for (std::size_t i = 0; i < dims.size(); ++i) {
    if (i) s += ", ";
    s += std::to_string(dims[i]);
  }
  return s + "]";
}

void require_matrix(const Tensor& t, std::string_view what) {
  if (!t.is_matrix()) throw ShapeError(std::string(what) + ": expected a 2-D tensor, got " + shape_string(t.dims()));
}

void require_finite(const Tensor& t, std::string_view what) {
  for (std::size_t i = 0; i < t.size(); ++i) {
    if (!std::isfinite(t[i]))
      throw NonFiniteError(std::string(what) + ": non-finite value at flat index " + std::to_string(i));
  }
}

Tensor transpose(const Tensor& a) {
  require_matrix(a, "transpose");
  Tensor t = Tensor::matrix(a.cols(), a.rows());
  for (std::size_t r = 0; r < a.rows(); ++r)
    for (std::size_t c = 0; c < a.cols(); ++c) t(c, r) = a(r, c);
  return t;
}

Tensor axpby(double alpha, const Tensor& a, double beta, const Tensor& b) {
  if (!a.same_shape(b)) throw ShapeError("axpby: " + shape_string(a.dims()) + " vs " + shape_string(b.dims()));
  Tensor out(a.dims());
  for (std::size_t i = 0; i < a.size(); ++i) out[i] = alpha * a[i] + beta * b[i];
  return out;
}

Tensor add(const Tensor& a, const Tensor& b) {
  if (!a.same_shape(b)) throw ShapeError("add: " + shape_string(a.dims()) + " vs " + shape_string(b.dims()));
  Tensor out(a.dims());
  for (std::size_t i = 0; i < a.size(); ++i) out[i] = a[i] + b[i];
  return out;
}

Tensor subtract(const Tensor& a, const Tensor& b) {
  if (!a.same_shape(b)) throw ShapeError("subtract: " + shape_string(a.dims()) + " vs " + shape_string(b.dims()));
  Tensor out(a.dims());
  for (std::size_t i = 0; i < a.size(); ++i) out[i] = a[i] - b[i];
  return out;
}

Tensor scale(const Tensor& a, double factor) {
  Tensor out = a;
  for (double& v : out.values()) v *= factor;
  return out;
}

double max_abs_diff(const Tensor& a, const Tensor& b) {
  if (!a.same_shape(b)) throw ShapeError("max_abs_diff: shape mismatch");
  double m = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) m = std::max(m, std::abs(a[i] - b[i]));
  return m;
}

Tensor l1_normalize_columns(const Tensor& t, ZeroColumnPolicy policy) {
  require_matrix(t, "l1_normalize_columns");
  const std::size_t d = t.rows(), m = t.cols();
  Tensor out = t;
  for (std::size_t c = 0; c < m; ++c) {
    double norm = 0.0;
    for (std::size_t r = 0; r < d; ++r) norm += std::abs(t(r, c));
    if (norm < 1e-12) {
      if (policy == ZeroColumnPolicy::kError)
        throw DegenerateColumnError(c, "l1_normalize_columns: column " + std::to_string(c) + " has L1 norm below 1e-12");
      for (std::size_t r = 0; r < d; ++r) out(r, c) = 1.0 / static_cast<double>(d);
      continue;
    }
    for (std::size_t r = 0; r < d; ++r) out(r, c) = t(r, c) / norm;
  }
  return out;
}

Tensor softmax_columns_raw(const Tensor& logits) {
  require_matrix(logits, "softmax_columns");
  const std::size_t c = logits.rows(), m = logits.cols();
  if (c == 0) throw ShapeError("softmax_columns: need at least one class");
  Tensor out = Tensor::matrix(c, m);
  for (std::size_t j = 0; j < m; ++j) {
    double mx = logits(0, j);
    for (std::size_t k = 1; k < c; ++k) mx = std::max(mx, logits(k, j));
    double z = 0.0;
    for (std::size_t k = 0; k < c; ++k) {
      const double e = std::exp(logits(k, j) - mx);
      out(k, j) = e;
      z += e;
    }
    for (std::size_t k = 0; k < c; ++k) out(k, j) /= z;
  }
  return out;
}

double entrywise_l1(const Tensor& t) {
  if (t.empty()) return 0.0;
  // Row-partial order, matching kernels::l1_distance bit for bit.
  const std::size_t rows = t.dims()[0];
  const std::size_t n = t.size() / rows;
  double total = 0.0;
  for (std::size_t i = 0; i < rows; ++i) {
    double s = 0.0;
    for (std::size_t j = 0; j < n; ++j) s += std::abs(t[i * n + j]);
    total += s;
  }
  return total;
}

Tensor LabelMap::one_hot() const {
  Tensor t = Tensor::matrix(static_cast<std::size_t>(num_classes), classes.size());
  for (std::size_t i = 0; i < classes.size(); ++i) {
    if (classes[i] < 0 || classes[i] >= num_classes)
      throw ShapeError("label " + std::to_string(classes[i]) + " at pixel " + std::to_string(i) + " outside [0, " +
                       std::to_string(num_classes) + ")");
    t(static_cast<std::size_t>(classes[i]), i) = 1.0;
  }
  return t;
}

FeatureMap normalize_features(const Tensor& raw, ZeroColumnPolicy policy) {
  return FeatureMap{l1_normalize_columns(raw, policy)};
}

ProbMap softmax_columns(const LogitMap& logits) { return ProbMap{softmax_columns_raw(logits.values)}; }

LabelMap argmax_labels(const Tensor& scores) {
  require_matrix(scores, "argmax_labels");
  LabelMap out;
  out.num_classes = static_cast<int>(scores.rows());
  out.classes.resize(scores.cols());
  for (std::size_t j = 0; j < scores.cols(); ++j) {
    std::size_t best = 0;
    for (std::size_t k = 1; k < scores.rows(); ++k)
      if (scores(k, j) > scores(best, j)) best = k;
    out.classes[j] = static_cast<int>(best);
  }
  return out;
}

LabelMap labels_from_one_hot(const Tensor& t) {
  require_matrix(t, "labels_from_one_hot");
  LabelMap out;
  out.num_classes = static_cast<int>(t.rows());
  out.classes.resize(t.cols());
  for (std::size_t j = 0; j < t.cols(); ++j) {
    int hot = -1;
    for (std::size_t k = 0; k < t.rows(); ++k) {
      const double v = t(k, j);
      if (v == 1.0 && hot < 0) {
        hot = static_cast<int>(k);
      } else if (v != 0.0) {
        hot = -2;
        break;
      }
    }
    if (hot < 0) throw ShapeError("column " + std::to_string(j) + " is not one-hot");
    out.classes[j] = hot;
  }
  return out;
}

}  // namespace derprop
