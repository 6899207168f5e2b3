#include <algorithm>
#include <array>
#include <set>

#include <gtest/gtest.h>

#include "derprop/losses.hpp"
#include "derprop/model.hpp"
#include "derprop/scene.hpp"
#include "helpers.hpp"

namespace derprop {
namespace {

using testing::random_matrix;

TEST(Scene, SameSeedIsByteIdentical) {
  const SceneParams p;
  const SyntheticScene a = generate_synthetic_scene(42, 16, 12, p), b = generate_synthetic_scene(42, 16, 12, p);
  EXPECT_TRUE(a.image.bit_equal(b.image));
  EXPECT_EQ(a.labels.classes, b.labels.classes);
  EXPECT_EQ(a.image.dims(), (std::vector<std::size_t>{3, 16, 12}));
}

TEST(Scene, ZeroNoiseGivesOneColourPerClass) {
  SceneParams p;
  p.num_classes = 2;
  p.noise_sigma = 0.0;
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    const SyntheticScene s = generate_synthetic_scene(seed, 4, 4, p);
    std::set<std::array<double, 3>> colours;
    for (std::size_t i = 0; i < 16; ++i) colours.insert({s.image[i], s.image[16 + i], s.image[32 + i]});
    EXPECT_EQ(colours.size(), 2u) << seed;
  }
}

TEST(Scene, EveryClassAppears) {
  const SceneParams p;
  for (std::uint64_t seed = 0; seed < 50; ++seed) {
    const SyntheticScene s = generate_synthetic_scene(seed, 8, 8, p);
    std::set<int> seen(s.labels.classes.begin(), s.labels.classes.end());
    EXPECT_EQ(seen.size(), 4u) << seed;
  }
}

TEST(Scene, DifferentSeedsDiffer) {
  const SceneParams p;
  for (std::uint64_t seed = 0; seed < 100; ++seed)
    EXPECT_NE(generate_synthetic_scene(2 * seed, 32, 32, p).labels.classes,
              generate_synthetic_scene(2 * seed + 1, 32, 32, p).labels.classes);
}

TEST(Augment, ZeroProbabilitiesAreIdentity) {
  const SyntheticScene s = generate_synthetic_scene(3, 10, 10, SceneParams{});
  for (AugmentMode mode : {AugmentMode::kWeak, AugmentMode::kStrong}) {
    const SyntheticScene a = augment(s, mode, 9, AugmentParams::none());
    EXPECT_TRUE(a.image.bit_equal(s.image));
    EXPECT_EQ(a.labels.classes, s.labels.classes);
  }
}

TEST(Augment, FlipMirrorsLabels) {
  const SyntheticScene s = generate_synthetic_scene(4, 6, 9, SceneParams{});
  AugmentParams p = AugmentParams::none();
  p.p_flip = 1.0;
  const SyntheticScene a = augment(s, AugmentMode::kWeak, 1, p);
  for (std::size_t i = 0; i < 6; ++i)
    for (std::size_t j = 0; j < 9; ++j) EXPECT_EQ(a.labels.classes[i * 9 + j], s.labels.classes[i * 9 + 8 - j]);
}

TEST(Augment, DeterministicAndStrongSharesGeometry) {
  const SyntheticScene s = generate_synthetic_scene(5, 12, 12, SceneParams{});
  const AugmentParams p;
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    const SyntheticScene a = augment(s, AugmentMode::kStrong, seed, p), b = augment(s, AugmentMode::kStrong, seed, p);
    EXPECT_TRUE(a.image.bit_equal(b.image));
    EXPECT_EQ(augment(s, AugmentMode::kWeak, seed, p).labels.classes, a.labels.classes);
  }
}

TEST(Mix, PastesRectangle) {
  const SyntheticScene a = generate_synthetic_scene(6, 8, 8, SceneParams{}), b = generate_synthetic_scene(7, 8, 8, SceneParams{});
  const Rect r{2, 5, 1, 4};
  const SyntheticScene m = mix_scenes(a, b, r);
  for (std::size_t y = 0; y < 8; ++y)
    for (std::size_t x = 0; x < 8; ++x) {
      const bool in = y >= 2 && y < 5 && x >= 1 && x < 4;
      EXPECT_EQ(m.labels.classes[y * 8 + x], (in ? b : a).labels.classes[y * 8 + x]);
    }
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    const Rect d = draw_mix_rect(8, 8, seed);
    EXPECT_FALSE(d.empty());
    EXPECT_LE(d.y1, 8u);
    EXPECT_LE(d.x1, 8u);
  }
}

TEST(Model, Im2ColZeroPads) {
  Tensor img({3, 2, 2}, 0.0);
  for (std::size_t i = 0; i < 12; ++i) img[i] = static_cast<double>(i + 1);
  const Tensor p = im2col3x3(img);
  ASSERT_EQ(p.dims(), (std::vector<std::size_t>{27, 4}));
  // Pixel (0,0), channel 0: centre is 1, the up-left neighbour is padding.
  EXPECT_EQ(p(4, 0), 1.0);
  EXPECT_EQ(p(0, 0), 0.0);
  EXPECT_EQ(p(8, 0), 4.0);
}

TEST(Model, ForwardShapesAndNormalisedFeatures) {
  const ModelShape shape;
  const ToyModel m = ToyModel::initialize(shape, 1);
  EXPECT_EQ(m.params().size(), shape.parameter_count());
  const ToyModel::Cache c = m.forward(generate_synthetic_scene(1, 5, 7, SceneParams{}).image);
  EXPECT_EQ(c.features.values.dims(), (std::vector<std::size_t>{8, 35}));
  EXPECT_EQ(c.logits.values.dims(), (std::vector<std::size_t>{4, 35}));
  for (std::size_t j = 0; j < 35; ++j) {
    double s = 0.0;
    for (std::size_t i = 0; i < 8; ++i) s += std::abs(c.features.values(i, j));
    EXPECT_NEAR(s, 1.0, 1e-12);
  }
}

TEST(Model, BackwardMatchesFiniteDifferences) {
  ModelShape shape;
  shape.hidden = 5;
  shape.feature_dim = 4;
  shape.num_classes = 3;
  const ToyModel m = ToyModel::initialize(shape, 2);
  const Tensor image = generate_synthetic_scene(2, 4, 4, SceneParams{}).image;
  const Tensor a = random_matrix(4, 16, 3), b = random_matrix(3, 16, 4);
  auto objective = [&](const ToyModel& model) {
    const ToyModel::Cache c = model.forward(image);
    double s = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * c.features.values[i];
    for (std::size_t i = 0; i < b.size(); ++i) s += b[i] * c.logits.values[i];
    return s;
  };
  const std::vector<double> g = m.backward(m.forward(image), a, b);
  const Tensor x = Tensor::vector(m.params());
  auto f = [&](const Tensor& p) {
    return objective(ToyModel(shape, std::vector<double>(p.values().begin(), p.values().end())));
  };
  EXPECT_LT(finite_difference_check(f, Tensor::vector(g), x, 1e-6).max_relative_error, 1e-5);
}

TEST(Model, InitializeIsDeterministic) {
  EXPECT_EQ(ToyModel::initialize(ModelShape{}, 8).params(), ToyModel::initialize(ModelShape{}, 8).params());
  EXPECT_NE(ToyModel::initialize(ModelShape{}, 8).params(), ToyModel::initialize(ModelShape{}, 9).params());
}

}  // namespace
}  // namespace derprop
