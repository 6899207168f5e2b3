#include "derprop/scene.hpp"

#include <algorithm>
#include <array>
#include <cmath>

#include "derprop/rng.hpp"

namespace derprop {

std::vector<std::array<double, 3>> class_palette(const SceneParams& params) {
  CounterRng rng(params.palette_seed);
  std::vector<std::array<double, 3>> colors;
  double min_dist = 0.45;
  int attempts = 0;
  while (static_cast<int>(colors.size()) < params.num_classes) {
    std::array<double, 3> c{rng.uniform(0.1, 0.9), rng.uniform(0.1, 0.9), rng.uniform(0.1, 0.9)};
    bool ok = true;
    for (const auto& o : colors) {
      const double d = std::hypot(c[0] - o[0], c[1] - o[1], c[2] - o[2]);
      if (d < min_dist) ok = false;
    }
    if (ok) {
      colors.push_back(c);
    } else if (++attempts > 200) {
      min_dist *= 0.8;
      attempts = 0;
    }
  }
  return colors;
}

namespace {

// Paints one random shape; returns the number of pixels it covers.
std::size_t paint_shape(std::vector<int>& labels, std::size_t h, std::size_t w, int cls, CounterRng& rng) {
  const double hd = static_cast<double>(h), wd = static_cast<double>(w);
  std::size_t painted = 0;
  if (rng.bernoulli(0.7)) {
    const double cy = rng.uniform(0, hd), cx = rng.uniform(0, wd);
    const double ry = rng.uniform(std::max(1.0, hd / 10), std::max(1.5, hd / 3));
    const double rx = rng.uniform(std::max(1.0, wd / 10), std::max(1.5, wd / 3));
    for (std::size_t y = 0; y < h; ++y)
      for (std::size_t x = 0; x < w; ++x) {
        const double dy = (static_cast<double>(y) + 0.5 - cy) / ry, dx = (static_cast<double>(x) + 0.5 - cx) / rx;
        if (dy * dy + dx * dx <= 1.0) {
          labels[y * w + x] = cls;
          ++painted;
        }
      }
  } else {
    const int orientation = static_cast<int>(rng.below(3));  // horizontal, vertical, diagonal
    const double extent = orientation == 0 ? hd : (orientation == 1 ? wd : hd + wd);
    const double width = rng.uniform(2.0, std::max(2.5, std::min(hd, wd) / 4));
    const double start = rng.uniform(0, extent);
    for (std::size_t y = 0; y < h; ++y)
      for (std::size_t x = 0; x < w; ++x) {
        const double coord = orientation == 0 ? static_cast<double>(y)
                            : orientation == 1 ? static_cast<double>(x)
                                               : static_cast<double>(y + x) / 2.0 + hd / 4;
        if (coord >= start && coord < start + width) {
          labels[y * w + x] = cls;
          ++painted;
        }
      }
  }
  return painted;
}

}  // namespace

SyntheticScene generate_synthetic_scene(std::uint64_t seed, std::size_t height, std::size_t width,
                                        const SceneParams& params) {
  if (height < 4 || width < 4) throw ShapeError("synthetic scenes need H, W >= 4");
  if (params.num_classes < 2) throw ConfigError("synthetic scenes need at least 2 classes");
  const std::size_t m = height * width;
  const int c = params.num_classes;
  CounterRng rng(seed);

  // Blobs cycle through the non-background classes so every class gets a
  // region; layouts where some class covers less than M / (4C) pixels are
  // redrawn, keeping the most balanced one if none qualifies.
  const std::size_t min_count = std::max<std::size_t>(1, m / (4 * static_cast<std::size_t>(c)));
  std::vector<int> labels(m), best;
  std::size_t best_min = 0;
  for (int attempt = 0; attempt < 64; ++attempt) {
    const int background = static_cast<int>(rng.below(static_cast<std::uint64_t>(c)));
    std::fill(labels.begin(), labels.end(), background);
    const auto offset = rng.below(static_cast<std::uint64_t>(c - 1));
    for (int b = 0; b < params.blob_count; ++b) {
      const int cls = (background + 1 + static_cast<int>((offset + static_cast<std::uint64_t>(b)) % static_cast<std::uint64_t>(c - 1))) % c;
      std::vector<int> trial = labels;
      // Shapes that miss every pixel are redrawn.
      for (int tries = 0; tries < 16; ++tries) {
        trial = labels;
        if (paint_shape(trial, height, width, cls, rng) > 0) break;
      }
      labels = std::move(trial);
    }
    std::vector<std::size_t> counts(static_cast<std::size_t>(c), 0);
    for (int k : labels) ++counts[static_cast<std::size_t>(k)];
    const std::size_t smallest = *std::min_element(counts.begin(), counts.end());
    if (best.empty() || smallest > best_min) {
      best = labels;
      best_min = smallest;
    }
    if (smallest >= min_count) break;
  }
  labels = std::move(best);
  if (best_min == 0 && m >= static_cast<std::size_t>(c)) {
    // Plant any missing class in pixels whose class occurs more than once.
    std::vector<std::size_t> counts(static_cast<std::size_t>(c), 0);
    for (int k : labels) ++counts[static_cast<std::size_t>(k)];
    std::size_t pos = rng.below(m);
    for (int k = 0; k < c; ++k) {
      if (counts[static_cast<std::size_t>(k)] > 0) continue;
      while (counts[static_cast<std::size_t>(labels[pos])] <= 1) pos = (pos + 1) % m;
      --counts[static_cast<std::size_t>(labels[pos])];
      labels[pos] = k;
      ++counts[static_cast<std::size_t>(k)];
      pos = (pos + 1) % m;
    }
  }

  const auto palette = class_palette(params);
  SyntheticScene scene;
  scene.seed = seed;
  scene.height = height;
  scene.width = width;
  scene.params = params;
  scene.labels = LabelMap{labels, c};
  scene.image = Tensor({3, height, width});
  for (std::size_t p = 0; p < m; ++p) {
    const auto& col = palette[static_cast<std::size_t>(labels[p])];
    for (std::size_t ch = 0; ch < 3; ++ch) {
      const double noise = params.noise_sigma > 0 ? params.noise_sigma * rng.normal() : 0.0;
      scene.image[ch * m + p] = col[ch] + noise;
    }
  }
  return scene;
}

SyntheticScene augment(const SyntheticScene& scene, AugmentMode mode, std::uint64_t seed, const AugmentParams& params) {
  const std::size_t h = scene.height, w = scene.width, m = h * w;
  const CounterRng root(seed);
  CounterRng geo = root.split(1);

  const bool flip = geo.bernoulli(params.p_flip);
  const bool zoom = geo.bernoulli(params.p_zoom);
  const double s = zoom ? geo.uniform(1.0, 2.0) : 1.0;
  const double oy = zoom ? geo.uniform(0.0, static_cast<double>(h) * (s - 1.0)) : 0.0;
  const double ox = zoom ? geo.uniform(0.0, static_cast<double>(w) * (s - 1.0)) : 0.0;

  SyntheticScene out = scene;
  for (std::size_t y = 0; y < h; ++y) {
    for (std::size_t x = 0; x < w; ++x) {
      const std::size_t xf = flip ? w - 1 - x : x;
      auto sy = static_cast<std::size_t>(std::floor((static_cast<double>(y) + oy) / s));
      auto sx = static_cast<std::size_t>(std::floor((static_cast<double>(xf) + ox) / s));
      sy = std::min(sy, h - 1);
      sx = std::min(sx, w - 1);
      const std::size_t dst = y * w + x, src = sy * w + sx;
      out.labels.classes[dst] = scene.labels.classes[src];
      for (std::size_t ch = 0; ch < 3; ++ch) out.image[ch * m + dst] = scene.image[ch * m + src];
    }
  }
  if (mode == AugmentMode::kWeak) return out;

  CounterRng photo = root.split(2);
  double* img = out.image.raw();
  if (photo.bernoulli(params.p_color)) {
    const double st = params.color_strength;
    const double brightness = 0.5 * photo.uniform(-st, st);
    const double contrast = 1.0 + photo.uniform(-st, st);
    const double saturation = 1.0 + photo.uniform(-st, st);
    double mean = 0.0;
    for (std::size_t i = 0; i < 3 * m; ++i) mean += img[i];
    mean /= static_cast<double>(3 * m);
    for (std::size_t p = 0; p < m; ++p) {
      double px[3];
      for (std::size_t ch = 0; ch < 3; ++ch) px[ch] = (img[ch * m + p] - mean) * contrast + mean + brightness;
      const double gray = (px[0] + px[1] + px[2]) / 3.0;
      for (std::size_t ch = 0; ch < 3; ++ch) img[ch * m + p] = gray + (px[ch] - gray) * saturation;
    }
  }
  if (photo.bernoulli(params.p_grayscale)) {
    for (std::size_t p = 0; p < m; ++p) {
      const double lum = 0.299 * img[p] + 0.587 * img[m + p] + 0.114 * img[2 * m + p];
      for (std::size_t ch = 0; ch < 3; ++ch) img[ch * m + p] = lum;
    }
  }
  if (photo.bernoulli(params.p_blur)) {
    const Tensor src = out.image;
    for (std::size_t ch = 0; ch < 3; ++ch)
      for (std::size_t y = 0; y < h; ++y)
        for (std::size_t x = 0; x < w; ++x) {
          double acc = 0.0;
          int n = 0;
          for (int dy = -1; dy <= 1; ++dy)
            for (int dx = -1; dx <= 1; ++dx) {
              const auto yy = static_cast<std::ptrdiff_t>(y) + dy, xx = static_cast<std::ptrdiff_t>(x) + dx;
              if (yy < 0 || xx < 0 || yy >= static_cast<std::ptrdiff_t>(h) || xx >= static_cast<std::ptrdiff_t>(w)) continue;
              acc += src[ch * m + static_cast<std::size_t>(yy) * w + static_cast<std::size_t>(xx)];
              ++n;
            }
          img[ch * m + y * w + x] = acc / n;
        }
  }
  return out;
}

Rect draw_mix_rect(std::size_t height, std::size_t width, std::uint64_t seed) {
  CounterRng rng(seed);
  const auto rh = static_cast<std::size_t>(rng.uniform(0.35, 0.7) * static_cast<double>(height));
  const auto rw = static_cast<std::size_t>(rng.uniform(0.35, 0.7) * static_cast<double>(width));
  Rect r;
  r.y0 = rng.below(height - rh + 1);
  r.x0 = rng.below(width - rw + 1);
  r.y1 = r.y0 + rh;
  r.x1 = r.x0 + rw;
  return r;
}

void paste_columns(Tensor& dst, const Tensor& src, const Rect& rect, std::size_t width) {
  if (!dst.same_shape(src)) throw ShapeError("paste_columns: shape mismatch");
  for (std::size_t k = 0; k < dst.rows(); ++k)
    for (std::size_t y = rect.y0; y < rect.y1; ++y)
      for (std::size_t x = rect.x0; x < rect.x1; ++x) dst(k, y * width + x) = src(k, y * width + x);
}

SyntheticScene mix_scenes(const SyntheticScene& dst, const SyntheticScene& src, const Rect& rect) {
  if (dst.height != src.height || dst.width != src.width) throw ShapeError("mix_scenes: scene sizes differ");
  SyntheticScene out = dst;
  const std::size_t m = dst.pixels(), w = dst.width;
  for (std::size_t y = rect.y0; y < rect.y1; ++y)
    for (std::size_t x = rect.x0; x < rect.x1; ++x) {
      const std::size_t p = y * w + x;
      out.labels.classes[p] = src.labels.classes[p];
      for (std::size_t ch = 0; ch < 3; ++ch) out.image[ch * m + p] = src.image[ch * m + p];
    }
  return out;
}

}  // namespace derprop
