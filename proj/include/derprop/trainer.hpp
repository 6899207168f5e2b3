#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "derprop/losses.hpp"
#include "derprop/model.hpp"
#include "derprop/scene.hpp"

namespace derprop {

struct TrainConfig {
  std::uint64_t seed = 0;

  // Data.
  std::size_t height = 32;
  std::size_t width = 32;
  std::size_t train_scenes = 16;
  std::size_t val_scenes = 8;
  double labeled_fraction = 0.125;
  SceneParams scene;
  AugmentParams augment;

  // Model.
  std::size_t hidden = 16;
  std::size_t feature_dim = 8;
  double logit_scale = 4.0;

  // Optimisation.
  int epochs = 30;
  std::size_t batch_size = 2;
  double learning_rate = 0.1;
  double optimizer_momentum = 0.0;

  LossWeights weights;
  DerLossSpec der{1, 0.5, DerivativeVariant::kForward, true, LabeledTarget::kYGram, Reduction::kMean};
  // Column normalisation keeps rectified logits on the scale of L; without it
  // their magnitude grows with M and the rectified CE dominates the gradient.
  KernelNormalization propagation_normalization = KernelNormalization::kColumnL1;
  double tau = 0.95;

  bool dlp_enabled = true;
  bool der_loss_enabled = true;
  bool momentum_enabled = true;

  // Validation images whose predicted maps are written each epoch.
  std::size_t export_maps = 2;

  void validate() const;
  int num_classes() const noexcept { return scene.num_classes; }
};

TrainConfig config_from_json(const nlohmann::json& j);
nlohmann::json config_to_json(const TrainConfig& c);

struct MomentumState {
  std::vector<double> theta_m;
  int epoch = 0;
};

// theta_m := (theta_m + theta_b) / 2, epoch += 1.
MomentumState momentum_update(const MomentumState& state, const std::vector<double>& theta_b);

struct MiouResult {
  std::vector<double> per_class;  // NaN for classes absent from both maps
  double mean = 0.0;
};

MiouResult evaluate_miou(const LabelMap& pred, const LabelMap& gt, int num_classes);

struct Dataset {
  std::vector<SyntheticScene> labeled;
  std::vector<SyntheticScene> unlabeled;
  std::vector<SyntheticScene> val;
};

// Scenes drawn from the config seed; the labeled subset is a seeded choice of
// round(labeled_fraction * train_scenes) scenes (at least one).
Dataset make_dataset(const TrainConfig& config);

struct EpochMetrics {
  int epoch = 0;
  double loss_ce = 0.0;
  double loss_kl = 0.0;
  double loss_der = 0.0;
  double miou_train = 0.0;
  double miou_val = 0.0;
};

struct TrainResult {
  std::vector<EpochMetrics> metrics;
  ToyModel initial_model;
  ToyModel final_model;
  std::optional<MomentumState> momentum;
  // Model used for evaluation: the momentum network when enabled.
  ToyModel eval_model() const;
};

// Runs the configured schedule; when out_dir is set, writes config.json,
// metrics.csv, final_model.dpt, momentum_model.dpt (momentum runs only) and
// maps/epNNN_imgKKK.pgm. Throws NonFiniteError naming epoch and term.
TrainResult train(const TrainConfig& config, const Dataset& data,
                  const std::optional<std::filesystem::path>& out_dir = std::nullopt);

double mean_miou(const ToyModel& model, const std::vector<SyntheticScene>& scenes);

std::string metrics_csv(const std::vector<EpochMetrics>& rows);

}  // namespace derprop
