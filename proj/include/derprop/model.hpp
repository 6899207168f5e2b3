#pragma once

#include <cstdint>
#include <vector>

#include "derprop/tensor.hpp"

namespace derprop {

struct ModelShape {
  std::size_t hidden = 16;
  std::size_t feature_dim = 8;  // D
  std::size_t num_classes = 4;  // C
  // Fixed gain on V before the classifier; L1-normalised features alone keep
  // logits too small for confident predictions.
  double logit_scale = 4.0;

  static constexpr std::size_t kWindow = 27;  // 3 channels x 3 x 3

  std::size_t parameter_count() const;
};

// Per-pixel extractor on a 3x3 neighbourhood:
//   U = W2 tanh(W1 patch + b1) + b2,  V = L1-normalised U,  L = Wc (s V) + bc, s = logit_scale.
// All weights live in one flat vector in the order W1, b1, W2, b2, Wc, bc.
class ToyModel {
 public:
  ToyModel() = default;
  explicit ToyModel(ModelShape shape);
  ToyModel(ModelShape shape, std::vector<double> params);

  static ToyModel initialize(ModelShape shape, std::uint64_t seed);

  const ModelShape& shape() const noexcept { return shape_; }
  const std::vector<double>& params() const noexcept { return params_; }
  std::vector<double>& params() noexcept { return params_; }

  struct Cache {
    std::size_t height = 0, width = 0;
    Tensor patches;  // [27, M]
    Tensor hidden;   // tanh activations [hidden, M]
    Tensor raw;      // U [D, M]
    std::vector<double> column_l1;
    FeatureMap features;
    LogitMap logits;
  };

  // image: [3, H, W].
  Cache forward(const Tensor& image) const;
  LogitMap logits(const Tensor& image) const { return forward(image).logits; }

  // Gradient of the flat parameters given dLoss/dV and dLoss/dL; either may be empty.
  std::vector<double> backward(const Cache& cache, const Tensor& d_features, const Tensor& d_logits) const;

 private:
  ModelShape shape_;
  std::vector<double> params_;
};

// Zero-padded 3x3 neighbourhoods, rows ordered (channel, dy, dx).
Tensor im2col3x3(const Tensor& image);

}  // namespace derprop
