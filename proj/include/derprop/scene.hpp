#pragma once

#include <array>
#include <cstdint>
#include <vector>

#include "derprop/tensor.hpp"

namespace derprop {

struct SceneParams {
  int num_classes = 4;
  int blob_count = 6;
  double noise_sigma = 0.2;
  // Class colour palette is shared by every scene drawn with the same palette seed.
  std::uint64_t palette_seed = 1234;
};

struct SyntheticScene {
  Tensor image;  // [3, H, W]
  LabelMap labels;
  std::uint64_t seed = 0;
  std::size_t height = 0;
  std::size_t width = 0;
  SceneParams params;

  std::size_t pixels() const noexcept { return height * width; }
};

// Piecewise-constant class regions (ellipses and stripes over a background
// class) coloured by class mean plus Gaussian noise. Deterministic per
// (seed, H, W, params); every class appears when H*W >= C.
SyntheticScene generate_synthetic_scene(std::uint64_t seed, std::size_t height, std::size_t width,
                                        const SceneParams& params);

// Class colour means in [0, 1]^3.
std::vector<std::array<double, 3>> class_palette(const SceneParams& params);

enum class AugmentMode { kWeak, kStrong };

struct AugmentParams {
  double p_flip = 0.5;
  double p_zoom = 0.5;       // nearest-neighbour zoom by a factor in [1, 2] then crop back to H x W
  // Classes are told apart by colour alone, so photometric jitter is kept mild
  // and grayscale is off by default.
  double p_color = 0.8;      // brightness / contrast / saturation jitter
  double color_strength = 0.1;
  double p_grayscale = 0.0;
  double p_blur = 0.5;       // 3x3 box blur
  double p_mix = 0.5;        // probability the trainer pastes a rectangle from another scene

  static AugmentParams none() { return {0, 0, 0, 0.1, 0, 0, 0}; }
};

// Axis-aligned rectangle in pixel coordinates, [y0, y1) x [x0, x1).
struct Rect {
  std::size_t y0 = 0, y1 = 0, x0 = 0, x1 = 0;
  bool empty() const noexcept { return y1 <= y0 || x1 <= x0; }
};

// Weak: geometry only (flip, zoom-crop), applied to image and labels alike.
// Strong: the same geometry for the same seed, then photometric transforms
// on the image only.
SyntheticScene augment(const SyntheticScene& scene, AugmentMode mode, std::uint64_t seed, const AugmentParams& params);

// Random rectangle covering roughly 1/8 to 1/2 of the image.
Rect draw_mix_rect(std::size_t height, std::size_t width, std::uint64_t seed);

// Copies the rectangle of `src` (image and labels) into `dst`.
SyntheticScene mix_scenes(const SyntheticScene& dst, const SyntheticScene& src, const Rect& rect);

// Copies the rectangle's pixel columns of `src` into `dst`; both [K, H*W].
void paste_columns(Tensor& dst, const Tensor& src, const Rect& rect, std::size_t width);

}  // namespace derprop
