#include "derprop/model.hpp"

#include <cmath>

#include "derprop/kernels.hpp"
#include "derprop/rng.hpp"

namespace derprop {

namespace {

struct Offsets {
  std::size_t w1, b1, w2, b2, wc, bc, end;
};

Offsets offsets(const ModelShape& s) {
  Offsets o{};
  o.w1 = 0;
  o.b1 = o.w1 + s.hidden * ModelShape::kWindow;
  o.w2 = o.b1 + s.hidden;
  o.b2 = o.w2 + s.feature_dim * s.hidden;
  o.wc = o.b2 + s.feature_dim;
  o.bc = o.wc + s.num_classes * s.feature_dim;
  o.end = o.bc + s.num_classes;
  return o;
}

Tensor slice_matrix(const std::vector<double>& p, std::size_t at, std::size_t rows, std::size_t cols) {
  return Tensor({rows, cols}, std::vector<double>(p.begin() + static_cast<std::ptrdiff_t>(at),
                                                  p.begin() + static_cast<std::ptrdiff_t>(at + rows * cols)));
}

// out = W x + b (b broadcast over columns).
Tensor affine(const std::vector<double>& p, std::size_t w_at, std::size_t b_at, std::size_t rows, std::size_t cols,
              const Tensor& x) {
  Tensor out = kernels::matmul(slice_matrix(p, w_at, rows, cols), x);
  for (std::size_t r = 0; r < rows; ++r)
    for (std::size_t c = 0; c < out.cols(); ++c) out(r, c) += p[b_at + r];
  return out;
}

// dW = g x^T, db = row sums of g.
void affine_grad(const Tensor& g, const Tensor& x, std::vector<double>& grad, std::size_t w_at, std::size_t b_at) {
  const Tensor dw = kernels::matmul(g, transpose(x));
  for (std::size_t i = 0; i < dw.size(); ++i) grad[w_at + i] += dw[i];
  for (std::size_t r = 0; r < g.rows(); ++r) {
    double s = 0.0;
    for (std::size_t c = 0; c < g.cols(); ++c) s += g(r, c);
    grad[b_at + r] += s;
  }
}

}  // namespace

std::size_t ModelShape::parameter_count() const { return offsets(*this).end; }

ToyModel::ToyModel(ModelShape shape) : shape_(shape), params_(shape.parameter_count(), 0.0) {}

ToyModel::ToyModel(ModelShape shape, std::vector<double> params) : shape_(shape), params_(std::move(params)) {
  if (params_.size() != shape_.parameter_count())
    throw ShapeError("ToyModel: expected " + std::to_string(shape_.parameter_count()) + " parameters, got " +
                     std::to_string(params_.size()));
}

ToyModel ToyModel::initialize(ModelShape shape, std::uint64_t seed) {
  ToyModel m(shape);
  const Offsets o = offsets(shape);
  CounterRng rng(seed);
  auto fill = [&](std::size_t from, std::size_t to, double scale) {
    for (std::size_t i = from; i < to; ++i) m.params_[i] = scale * rng.normal();
  };
  fill(o.w1, o.b1, 1.0 / std::sqrt(static_cast<double>(ModelShape::kWindow)));
  fill(o.w2, o.b2, 1.0 / std::sqrt(static_cast<double>(shape.hidden)));
  fill(o.b2, o.wc, 0.1);
  fill(o.wc, o.bc, 1.0);
  return m;
}

Tensor im2col3x3(const Tensor& image) {
  if (image.ndim() != 3 || image.dims()[0] != 3) throw ShapeError("im2col3x3: expected [3, H, W], got " + shape_string(image.dims()));
  const std::size_t h = image.dims()[1], w = image.dims()[2], m = h * w;
  Tensor out({ModelShape::kWindow, m}, 0.0);
  std::size_t row = 0;
  for (std::size_t ch = 0; ch < 3; ++ch)
    for (int dy = -1; dy <= 1; ++dy)
      for (int dx = -1; dx <= 1; ++dx, ++row)
        for (std::size_t y = 0; y < h; ++y) {
          const auto yy = static_cast<std::ptrdiff_t>(y) + dy;
          if (yy < 0 || yy >= static_cast<std::ptrdiff_t>(h)) continue;
          for (std::size_t x = 0; x < w; ++x) {
            const auto xx = static_cast<std::ptrdiff_t>(x) + dx;
            if (xx < 0 || xx >= static_cast<std::ptrdiff_t>(w)) continue;
            out(row, y * w + x) = image[ch * m + static_cast<std::size_t>(yy) * w + static_cast<std::size_t>(xx)];
          }
        }
  return out;
}

ToyModel::Cache ToyModel::forward(const Tensor& image) const {
  const Offsets o = offsets(shape_);
  Cache c;
  c.height = image.dims().at(1);
  c.width = image.dims().at(2);
  c.patches = im2col3x3(image);
  c.hidden = affine(params_, o.w1, o.b1, shape_.hidden, ModelShape::kWindow, c.patches);
  for (double& v : c.hidden.values()) v = std::tanh(v);
  c.raw = affine(params_, o.w2, o.b2, shape_.feature_dim, shape_.hidden, c.hidden);
  const std::size_t d = shape_.feature_dim, m = c.raw.cols();
  c.column_l1.assign(m, 0.0);
  for (std::size_t j = 0; j < m; ++j)
    for (std::size_t i = 0; i < d; ++i) c.column_l1[j] += std::abs(c.raw(i, j));
  c.features = normalize_features(c.raw, ZeroColumnPolicy::kUniformFallback);
  c.logits = LogitMap{affine(params_, o.wc, o.bc, shape_.num_classes, d, scale(c.features.values, shape_.logit_scale))};
  return c;
}

std::vector<double> ToyModel::backward(const Cache& c, const Tensor& d_features, const Tensor& d_logits) const {
  const Offsets o = offsets(shape_);
  const std::size_t d = shape_.feature_dim, m = c.raw.cols();
  std::vector<double> grad(params_.size(), 0.0);

  Tensor dv = d_features.empty() ? Tensor({d, m}, 0.0) : d_features;
  if (!d_logits.empty()) {
    affine_grad(d_logits, scale(c.features.values, shape_.logit_scale), grad, o.wc, o.bc);
    const Tensor wc = scale(slice_matrix(params_, o.wc, shape_.num_classes, d), shape_.logit_scale);
    const Tensor back = kernels::matmul_tn(wc, d_logits);
    for (std::size_t i = 0; i < dv.size(); ++i) dv[i] += back[i];
  }

  // v = u / |u|_1  =>  du = (g - <g, v> sign(u)) / |u|_1; fallback columns get no gradient.
  Tensor du({d, m}, 0.0);
  for (std::size_t j = 0; j < m; ++j) {
    const double s = c.column_l1[j];
    if (s < 1e-12) continue;
    double gv = 0.0;
    for (std::size_t i = 0; i < d; ++i) gv += dv(i, j) * c.features.values(i, j);
    for (std::size_t i = 0; i < d; ++i) {
      const double u = c.raw(i, j);
      const double sg = u > 0 ? 1.0 : (u < 0 ? -1.0 : 0.0);
      du(i, j) = (dv(i, j) - gv * sg) / s;
    }
  }

  affine_grad(du, c.hidden, grad, o.w2, o.b2);
  const Tensor w2 = slice_matrix(params_, o.w2, d, shape_.hidden);
  Tensor dz = kernels::matmul_tn(w2, du);
  for (std::size_t i = 0; i < dz.size(); ++i) dz[i] *= 1.0 - c.hidden[i] * c.hidden[i];
  affine_grad(dz, c.patches, grad, o.w1, o.b1);
  return grad;
}

}  // namespace derprop
