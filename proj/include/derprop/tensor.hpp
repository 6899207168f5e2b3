#pragma once

#include <cstddef>
#include <cstdint>
#include <initializer_list>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "derprop/error.hpp"

namespace derprop {

// Dense row-major array of doubles with explicit dims.
class Tensor {
 public:
  Tensor() = default;
  explicit Tensor(std::vector<std::size_t> dims, double fill = 0.0);
  Tensor(std::vector<std::size_t> dims, std::vector<double> data);

  static Tensor matrix(std::size_t rows, std::size_t cols, double fill = 0.0) {
    return Tensor({rows, cols}, fill);
  }
  static Tensor from_rows(std::initializer_list<std::initializer_list<double>> rows);
  static Tensor vector(std::vector<double> values);
  static Tensor identity(std::size_t n);

  const std::vector<std::size_t>& dims() const noexcept { return dims_; }
  std::size_t ndim() const noexcept { return dims_.size(); }
  std::size_t size() const noexcept { return data_.size(); }
  bool empty() const noexcept { return data_.empty(); }

  std::span<const double> values() const noexcept { return data_; }
  std::span<double> values() noexcept { return data_; }
  const std::vector<double>& data() const noexcept { return data_; }
  double* raw() noexcept { return data_.data(); }
  const double* raw() const noexcept { return data_.data(); }

  // 2-D accessors; callers are expected to have checked is_matrix().
  bool is_matrix() const noexcept { return dims_.size() == 2; }
  std::size_t rows() const noexcept { return dims_.empty() ? 0 : dims_[0]; }
  std::size_t cols() const noexcept { return dims_.size() < 2 ? 1 : dims_[1]; }
  double& operator()(std::size_t r, std::size_t c) noexcept { return data_[r * dims_[1] + c]; }
  double operator()(std::size_t r, std::size_t c) const noexcept { return data_[r * dims_[1] + c]; }
  double& operator[](std::size_t i) noexcept { return data_[i]; }
  double operator[](std::size_t i) const noexcept { return data_[i]; }

  std::vector<double> column(std::size_t c) const;
  void set_column(std::size_t c, std::span<const double> values);

  bool same_shape(const Tensor& other) const noexcept { return dims_ == other.dims_; }
  // Bitwise comparison of dims and payload.
  bool bit_equal(const Tensor& other) const noexcept;
  bool operator==(const Tensor& other) const = default;

 private:
  std::vector<std::size_t> dims_;
  std::vector<double> data_;
};

std::string shape_string(const std::vector<std::size_t>& dims);

// Throws ShapeError unless t is 2-D.
void require_matrix(const Tensor& t, std::string_view what);
// Throws NonFiniteError naming the first offending flat index.
void require_finite(const Tensor& t, std::string_view what);

Tensor transpose(const Tensor& a);
Tensor add(const Tensor& a, const Tensor& b);
Tensor subtract(const Tensor& a, const Tensor& b);
Tensor scale(const Tensor& a, double factor);
// alpha*a + beta*b
Tensor axpby(double alpha, const Tensor& a, double beta, const Tensor& b);
double max_abs_diff(const Tensor& a, const Tensor& b);

enum class ZeroColumnPolicy { kError, kUniformFallback };

// Columns rescaled to unit L1 norm. Columns with norm < 1e-12 either raise
// DegenerateColumnError or become the constant column 1/D.
Tensor l1_normalize_columns(const Tensor& t, ZeroColumnPolicy policy);

// Column-wise softmax with per-column max subtraction.
Tensor softmax_columns_raw(const Tensor& logits);

// Sum of absolute values of all entries.
double entrywise_l1(const Tensor& t);

struct FeatureMap {
  Tensor values;  // [D, M]
  std::size_t d() const noexcept { return values.rows(); }
  std::size_t m() const noexcept { return values.cols(); }
};

struct LogitMap {
  Tensor values;  // [C, M]
  std::size_t c() const noexcept { return values.rows(); }
  std::size_t m() const noexcept { return values.cols(); }
};

struct ProbMap {
  Tensor values;  // [C, M], columns on the probability simplex
  std::size_t c() const noexcept { return values.rows(); }
  std::size_t m() const noexcept { return values.cols(); }
};

// Per-pixel class indices.
struct LabelMap {
  std::vector<int> classes;
  int num_classes = 0;

  std::size_t m() const noexcept { return classes.size(); }
  Tensor one_hot() const;  // [C, M]
  ProbMap as_prob() const { return ProbMap{one_hot()}; }
};

FeatureMap normalize_features(const Tensor& raw, ZeroColumnPolicy policy);
ProbMap softmax_columns(const LogitMap& logits);

// Argmax per column; ties resolve to the lowest class index.
LabelMap argmax_labels(const Tensor& scores);

// Throws ShapeError unless every column of t is one-hot.
LabelMap labels_from_one_hot(const Tensor& t);

}  // namespace derprop
