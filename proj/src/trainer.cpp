#include "derprop/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <set>

#include "derprop/format.hpp"
#include "derprop/io.hpp"
#include "derprop/rng.hpp"

namespace derprop {

using nlohmann::json;

void TrainConfig::validate() const {
  if (!(labeled_fraction > 0.0 && labeled_fraction <= 1.0)) throw ConfigError("labeled_fraction must be in (0, 1]");
  if (epochs < 1) throw ConfigError("epochs must be >= 1");
  if (batch_size < 1) throw ConfigError("batch_size must be >= 1");
  if (train_scenes < 1) throw ConfigError("train_scenes must be >= 1");
  if (val_scenes < 1) throw ConfigError("val_scenes must be >= 1");
  if (height < 4 || width < 4) throw ConfigError("height and width must be >= 4");
  if (scene.num_classes < 2 || scene.num_classes > 256) throw ConfigError("num_classes must be in [2, 256]");
  if (hidden < 1 || feature_dim < 2) throw ConfigError("model needs hidden >= 1 and feature_dim >= 2");
  if (!(logit_scale > 0.0) || !std::isfinite(logit_scale)) throw ConfigError("model.logit_scale must be positive and finite");
  if (!(learning_rate >= 0.0)) throw ConfigError("learning_rate must be >= 0");
  if (!(optimizer_momentum >= 0.0 && optimizer_momentum < 1.0)) throw ConfigError("optimizer_momentum must be in [0, 1)");
  if (!(tau >= 0.0 && tau <= 1.0)) throw ConfigError("tau must be in [0, 1]");
  weights.validate();
  try {
    der.validate(feature_dim);
    output_dim(feature_dim, 1, der.variant);
  } catch (const DimensionUnderflowError& e) {
    throw ConfigError(std::string("derivative loss does not fit feature_dim: ") + e.what());
  }
}

namespace {

void check_keys(const json& j, const std::string& where, std::initializer_list<const char*> allowed) {
  if (!j.is_object()) throw ConfigError(where + " must be a JSON object");
  const std::set<std::string> ok(allowed.begin(), allowed.end());
  for (const auto& [key, _] : j.items())
    if (!ok.count(key)) throw ConfigError("unknown config key '" + (where.empty() ? key : where + "." + key) + "'");
}

template <typename T>
void read(const json& j, const char* key, T& out, const std::string& where) {
  if (!j.contains(key)) return;
  try {
    out = j.at(key).get<T>();
  } catch (const json::exception&) {
    throw ConfigError("config key '" + (where.empty() ? std::string(key) : where + "." + key) + "' has the wrong type");
  }
}

std::string target_name(LabeledTarget t) { return t == LabeledTarget::kYGram ? "ygram" : "zero"; }
std::string reduction_name(Reduction r) { return r == Reduction::kSum ? "sum" : "mean"; }
std::string normalization_name(KernelNormalization n) { return n == KernelNormalization::kNone ? "none" : "column_l1"; }

}  // namespace

TrainConfig config_from_json(const json& j) {
  TrainConfig c;
  check_keys(j, "", {"seed", "height", "width", "train_scenes", "val_scenes", "labeled_fraction", "scene", "augment",
                     "model", "epochs", "batch_size", "learning_rate", "optimizer_momentum", "loss_weights",
                     "der_loss", "propagation_normalization", "tau", "dlp_enabled", "der_loss_enabled", "momentum_enabled", "export_maps",
                     "schedule"});
  read(j, "seed", c.seed, "");
  read(j, "height", c.height, "");
  read(j, "width", c.width, "");
  read(j, "train_scenes", c.train_scenes, "");
  read(j, "val_scenes", c.val_scenes, "");
  read(j, "labeled_fraction", c.labeled_fraction, "");
  read(j, "epochs", c.epochs, "");
  read(j, "batch_size", c.batch_size, "");
  read(j, "learning_rate", c.learning_rate, "");
  read(j, "optimizer_momentum", c.optimizer_momentum, "");
  read(j, "tau", c.tau, "");
  if (j.contains("propagation_normalization")) {
    std::string name;
    read(j, "propagation_normalization", name, "");
    if (name == "none")
      c.propagation_normalization = KernelNormalization::kNone;
    else if (name == "column_l1")
      c.propagation_normalization = KernelNormalization::kColumnL1;
    else
      throw ConfigError("propagation_normalization must be 'none' or 'column_l1'");
  }
  read(j, "dlp_enabled", c.dlp_enabled, "");
  read(j, "der_loss_enabled", c.der_loss_enabled, "");
  read(j, "momentum_enabled", c.momentum_enabled, "");
  read(j, "export_maps", c.export_maps, "");
  if (j.contains("scene")) {
    const json& s = j["scene"];
    check_keys(s, "scene", {"num_classes", "blob_count", "noise_sigma", "palette_seed"});
    read(s, "num_classes", c.scene.num_classes, "scene");
    read(s, "blob_count", c.scene.blob_count, "scene");
    read(s, "noise_sigma", c.scene.noise_sigma, "scene");
    read(s, "palette_seed", c.scene.palette_seed, "scene");
  }
  if (j.contains("augment")) {
    const json& a = j["augment"];
    check_keys(a, "augment", {"p_flip", "p_zoom", "p_color", "color_strength", "p_grayscale", "p_blur", "p_mix"});
    read(a, "p_flip", c.augment.p_flip, "augment");
    read(a, "p_zoom", c.augment.p_zoom, "augment");
    read(a, "p_color", c.augment.p_color, "augment");
    read(a, "color_strength", c.augment.color_strength, "augment");
    read(a, "p_grayscale", c.augment.p_grayscale, "augment");
    read(a, "p_blur", c.augment.p_blur, "augment");
    read(a, "p_mix", c.augment.p_mix, "augment");
  }
  if (j.contains("model")) {
    const json& m = j["model"];
    check_keys(m, "model", {"hidden", "feature_dim", "logit_scale"});
    read(m, "hidden", c.hidden, "model");
    read(m, "feature_dim", c.feature_dim, "model");
    read(m, "logit_scale", c.logit_scale, "model");
  }
  if (j.contains("loss_weights")) {
    const json& w = j["loss_weights"];
    check_keys(w, "loss_weights", {"lambda_ce", "lambda_kl", "lambda_der", "eta"});
    read(w, "lambda_ce", c.weights.lambda_ce, "loss_weights");
    read(w, "lambda_kl", c.weights.lambda_kl, "loss_weights");
    read(w, "lambda_der", c.weights.lambda_der, "loss_weights");
    read(w, "eta", c.weights.eta, "loss_weights");
  }
  c.der.eta = c.weights.eta;
  if (j.contains("der_loss")) {
    const json& d = j["der_loss"];
    check_keys(d, "der_loss", {"order_budget", "variant", "sparsity_enabled", "labeled_high_order_target", "reduction"});
    read(d, "order_budget", c.der.order_budget, "der_loss");
    read(d, "sparsity_enabled", c.der.sparsity_enabled, "der_loss");
    std::string name;
    if (d.contains("variant")) {
      read(d, "variant", name, "der_loss");
      const auto v = parse_variant(name);
      if (!v) throw ConfigError("unknown derivative variant '" + name + "'");
      c.der.variant = *v;
    }
    if (d.contains("labeled_high_order_target")) {
      read(d, "labeled_high_order_target", name, "der_loss");
      if (name == "ygram")
        c.der.labeled_high_order_target = LabeledTarget::kYGram;
      else if (name == "zero")
        c.der.labeled_high_order_target = LabeledTarget::kZero;
      else
        throw ConfigError("labeled_high_order_target must be 'ygram' or 'zero'");
    }
    if (d.contains("reduction")) {
      read(d, "reduction", name, "der_loss");
      if (name == "sum")
        c.der.reduction = Reduction::kSum;
      else if (name == "mean")
        c.der.reduction = Reduction::kMean;
      else
        throw ConfigError("reduction must be 'sum' or 'mean'");
    }
  }
  c.validate();
  return c;
}

json config_to_json(const TrainConfig& c) {
  json j;
  j["seed"] = c.seed;
  j["height"] = c.height;
  j["width"] = c.width;
  j["train_scenes"] = c.train_scenes;
  j["val_scenes"] = c.val_scenes;
  j["labeled_fraction"] = c.labeled_fraction;
  j["scene"] = {{"num_classes", c.scene.num_classes},
                {"blob_count", c.scene.blob_count},
                {"noise_sigma", c.scene.noise_sigma},
                {"palette_seed", c.scene.palette_seed}};
  j["augment"] = {{"p_flip", c.augment.p_flip},           {"p_zoom", c.augment.p_zoom},
                  {"p_color", c.augment.p_color},         {"color_strength", c.augment.color_strength},
                  {"p_grayscale", c.augment.p_grayscale}, {"p_blur", c.augment.p_blur},
                  {"p_mix", c.augment.p_mix}};
  j["model"] = {{"hidden", c.hidden}, {"feature_dim", c.feature_dim}, {"logit_scale", c.logit_scale}};
  j["epochs"] = c.epochs;
  j["batch_size"] = c.batch_size;
  j["learning_rate"] = c.learning_rate;
  j["optimizer_momentum"] = c.optimizer_momentum;
  j["loss_weights"] = {{"lambda_ce", c.weights.lambda_ce},
                       {"lambda_kl", c.weights.lambda_kl},
                       {"lambda_der", c.weights.lambda_der},
                       {"eta", c.weights.eta}};
  j["der_loss"] = {{"order_budget", c.der.order_budget},
                   {"variant", std::string(variant_name(c.der.variant))},
                   {"sparsity_enabled", c.der.sparsity_enabled},
                   {"labeled_high_order_target", target_name(c.der.labeled_high_order_target)},
                   {"reduction", reduction_name(c.der.reduction)}};
  j["propagation_normalization"] = normalization_name(c.propagation_normalization);
  j["tau"] = c.tau;
  j["dlp_enabled"] = c.dlp_enabled;
  j["der_loss_enabled"] = c.der_loss_enabled;
  j["momentum_enabled"] = c.momentum_enabled;
  j["export_maps"] = c.export_maps;
  return j;
}

MomentumState momentum_update(const MomentumState& state, const std::vector<double>& theta_b) {
  if (state.theta_m.size() != theta_b.size())
    throw ShapeError("momentum_update: length " + std::to_string(state.theta_m.size()) + " vs " +
                     std::to_string(theta_b.size()));
  MomentumState next;
  next.theta_m.resize(theta_b.size());
  for (std::size_t i = 0; i < theta_b.size(); ++i) next.theta_m[i] = (state.theta_m[i] + theta_b[i]) / 2.0;
  next.epoch = state.epoch + 1;
  return next;
}

MiouResult evaluate_miou(const LabelMap& pred, const LabelMap& gt, int num_classes) {
  if (pred.m() != gt.m()) throw ShapeError("evaluate_miou: pixel counts differ");
  const auto c = static_cast<std::size_t>(num_classes);
  std::vector<std::size_t> tp(c, 0), fp(c, 0), fn(c, 0);
  for (std::size_t i = 0; i < gt.m(); ++i) {
    const auto p = static_cast<std::size_t>(pred.classes[i]), g = static_cast<std::size_t>(gt.classes[i]);
    if (p == g) {
      ++tp[p];
    } else {
      ++fp[p];
      ++fn[g];
    }
  }
  MiouResult r;
  r.per_class.assign(c, std::nan(""));
  double sum = 0.0;
  std::size_t present = 0;
  for (std::size_t k = 0; k < c; ++k) {
    const std::size_t denom = tp[k] + fp[k] + fn[k];
    if (denom == 0) continue;
    r.per_class[k] = static_cast<double>(tp[k]) / static_cast<double>(denom);
    sum += r.per_class[k];
    ++present;
  }
  r.mean = present ? sum / static_cast<double>(present) : 0.0;
  return r;
}

Dataset make_dataset(const TrainConfig& config) {
  config.validate();
  const CounterRng root(config.seed);
  std::vector<SyntheticScene> train;
  for (std::size_t i = 0; i < config.train_scenes; ++i)
    train.push_back(generate_synthetic_scene(root.split(100).split(i).key(), config.height, config.width, config.scene));

  auto n_labeled = static_cast<std::size_t>(std::llround(config.labeled_fraction * static_cast<double>(config.train_scenes)));
  n_labeled = std::clamp<std::size_t>(n_labeled, 1, config.train_scenes);
  std::vector<std::size_t> order(config.train_scenes);
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  CounterRng pick = root.split(200);
  for (std::size_t i = order.size(); i > 1; --i) std::swap(order[i - 1], order[pick.below(i)]);
  std::vector<bool> is_labeled(config.train_scenes, false);
  for (std::size_t i = 0; i < n_labeled; ++i) is_labeled[order[i]] = true;

  Dataset d;
  for (std::size_t i = 0; i < train.size(); ++i) (is_labeled[i] ? d.labeled : d.unlabeled).push_back(train[i]);
  for (std::size_t i = 0; i < config.val_scenes; ++i)
    d.val.push_back(generate_synthetic_scene(root.split(300).split(i).key(), config.height, config.width, config.scene));
  return d;
}

ToyModel TrainResult::eval_model() const {
  if (momentum) return ToyModel(final_model.shape(), momentum->theta_m);
  return final_model;
}

double mean_miou(const ToyModel& model, const std::vector<SyntheticScene>& scenes) {
  if (scenes.empty()) return 0.0;
  LabelMap pred{{}, scenes.front().labels.num_classes}, gt{{}, scenes.front().labels.num_classes};
  for (const SyntheticScene& s : scenes) {
    const LabelMap p = argmax_labels(model.logits(s.image).values);
    pred.classes.insert(pred.classes.end(), p.classes.begin(), p.classes.end());
    gt.classes.insert(gt.classes.end(), s.labels.classes.begin(), s.labels.classes.end());
  }
  return evaluate_miou(pred, gt, gt.num_classes).mean;
}

std::string metrics_csv(const std::vector<EpochMetrics>& rows) {
  std::string s = "epoch,loss_ce,loss_kl,loss_der,miou_train,miou_val\n";
  for (const EpochMetrics& r : rows) {
    s += std::to_string(r.epoch) + "," + format_double(r.loss_ce) + "," + format_double(r.loss_kl) + "," +
         format_double(r.loss_der) + "," + format_double(r.miou_train) + "," + format_double(r.miou_val) + "\n";
  }
  return s;
}

namespace {

struct SampleResult {
  LossParts parts;
  std::vector<double> grad;
};

void check_finite(const LossParts& p, int epoch) {
  const std::pair<const char*, double> terms[] = {{"loss_ce", p.ce}, {"loss_kl", p.kl}, {"loss_der", p.der}};
  for (const auto& [name, v] : terms)
    if (!std::isfinite(v)) throw NonFiniteError("non-finite " + std::string(name) + " at epoch " + std::to_string(epoch));
}

SampleResult labeled_sample(const ToyModel& model, const SyntheticScene& scene, const TrainConfig& cfg,
                            std::uint64_t aug_seed) {
  const SyntheticScene view = augment(scene, AugmentMode::kWeak, aug_seed, cfg.augment);
  const ToyModel::Cache cache = model.forward(view.image);
  StudentInputs in;
  in.features = cache.features;
  in.logits = cache.logits;
  in.target = view.labels.as_prob();
  in.mask.assign(view.pixels(), 1);
  in.ce_plain_scale = 1.0;
  in.ce_rectified_scale = cfg.dlp_enabled ? 1.0 : 0.0;
  in.propagate_variant = cfg.der.variant;
  in.propagate_normalization = cfg.propagation_normalization;
  if (cfg.der_loss_enabled)
    in.der_targets = labeled_target_stack(view.labels, cfg.der.order_budget, cfg.der.labeled_high_order_target);
  StudentGradients g;
  SampleResult r;
  r.parts = student_loss(in, cfg.der, cfg.weights, &g);
  r.grad = model.backward(cache, g.d_features, g.d_logits);
  return r;
}

SampleResult unlabeled_sample(const ToyModel& model, const SyntheticScene& scene, const SyntheticScene* partner,
                              const TrainConfig& cfg, std::uint64_t aug_seed, int epoch) {
  SyntheticScene weak = augment(scene, AugmentMode::kWeak, aug_seed, cfg.augment);
  SyntheticScene strong = augment(scene, AugmentMode::kStrong, aug_seed, cfg.augment);
  if (partner) {
    const std::uint64_t partner_seed = CounterRng(aug_seed).split(1).key();
    const Rect rect = draw_mix_rect(scene.height, scene.width, CounterRng(aug_seed).split(2).key());
    weak = mix_scenes(weak, augment(*partner, AugmentMode::kWeak, partner_seed, cfg.augment), rect);
    strong = mix_scenes(strong, augment(*partner, AugmentMode::kStrong, partner_seed, cfg.augment), rect);
  }

  // Teacher: live parameters on the weak view, no gradient.
  const ToyModel::Cache teacher = model.forward(weak.image);
  const ProbMap pw = softmax_columns(teacher.logits);
  ProbMap target = pw;
  std::vector<Tensor> teacher_stack;
  if (cfg.dlp_enabled || cfg.der_loss_enabled)
    teacher_stack = similarity_stack(teacher.features, std::max<std::size_t>(cfg.der.order_budget, 1), cfg.der.variant);
  if (cfg.dlp_enabled) {
    // Same values as derivative_propagate, reusing the Gram matrices of the derivative targets.
    Tensor kernel = add(teacher_stack[0], teacher_stack[1]);
    if (cfg.propagation_normalization == KernelNormalization::kColumnL1) kernel = normalize_kernel_columns(kernel);
    const ProbMap rectified = softmax_columns(propagate(teacher.logits, SimilarityMatrix{kernel, SimilarityKind::kPredicted}));
    target = blend_pseudo_labels(pw, rectified, BlendSchedule{epoch, cfg.epochs});
  }

  const ToyModel::Cache student = model.forward(strong.image);
  StudentInputs in;
  in.features = student.features;
  in.logits = student.logits;
  in.mask = confidence_mask(target, cfg.tau);
  in.target = std::move(target);
  in.ce_plain_scale = cfg.dlp_enabled ? 0.5 : 1.0;
  in.ce_rectified_scale = cfg.dlp_enabled ? 0.5 : 0.0;
  in.use_kl = true;
  in.propagate_variant = cfg.der.variant;
  in.propagate_normalization = cfg.propagation_normalization;
  if (cfg.der_loss_enabled) {
    teacher_stack.resize(cfg.der.order_budget + 1);
    in.der_targets = std::move(teacher_stack);
  }
  StudentGradients g;
  SampleResult r;
  r.parts = student_loss(in, cfg.der, cfg.weights, &g);
  r.grad = model.backward(student, g.d_features, g.d_logits);
  return r;
}

std::string pad3(std::size_t v) {
  std::string s = std::to_string(v);
  return std::string(s.size() < 3 ? 3 - s.size() : 0, '0') + s;
}

}  // namespace

TrainResult train(const TrainConfig& cfg, const Dataset& data, const std::optional<std::filesystem::path>& out_dir) {
  cfg.validate();
  if (data.labeled.empty()) throw ConfigError("training needs at least one labeled scene");
  const ModelShape shape{cfg.hidden, cfg.feature_dim, static_cast<std::size_t>(cfg.num_classes()), cfg.logit_scale};
  const CounterRng root(cfg.seed);

  TrainResult result;
  result.initial_model = ToyModel::initialize(shape, root.split(400).key());
  ToyModel model = result.initial_model;
  if (cfg.momentum_enabled) result.momentum = MomentumState{model.params(), 0};
  std::vector<double> velocity(model.params().size(), 0.0);

  const std::size_t n_lab = data.labeled.size(), n_unl = data.unlabeled.size(), b = cfg.batch_size;
  const std::size_t steps = n_unl > 0 ? (n_unl + b - 1) / b : (n_lab + b - 1) / b;
  std::vector<SyntheticScene> train_scenes = data.labeled;
  train_scenes.insert(train_scenes.end(), data.unlabeled.begin(), data.unlabeled.end());

  if (out_dir) {
    std::filesystem::create_directories(*out_dir / "maps");
    json j = config_to_json(cfg);
    j["schedule"] = {
        {"steps_per_epoch", steps},
        {"per_step", "batch_size labeled scenes (cycled) then batch_size unlabeled scenes (shuffled per epoch); "
                     "gradient = mean over labeled + mean over unlabeled; one SGD update"},
        {"cross_entropy", "labeled: CE(P) + CE(P~); unlabeled: [CE(P^s) + CE(P~^s)] / 2; "
                          "without DLP the rectified terms are dropped and CE(P^s) has weight 1"},
        {"pseudo_labels", "regenerated every step from the live network on the weak view"},
        {"blend", "eta = epoch / epochs with epoch counted from 0"},
        {"momentum", "theta_m = (theta_m + theta) / 2 after every epoch; evaluation only"},
        {"labeled_scenes", n_lab},
        {"unlabeled_scenes", n_unl}};
    io::write_file_atomic(*out_dir / "config.json", j.dump(2) + "\n");
  }

  for (int ep = 0; ep < cfg.epochs; ++ep) {
    const CounterRng ep_rng = root.split(500).split(static_cast<std::uint64_t>(ep));
    std::vector<std::size_t> unl_order(n_unl), lab_order(n_lab);
    for (std::size_t i = 0; i < n_unl; ++i) unl_order[i] = i;
    for (std::size_t i = 0; i < n_lab; ++i) lab_order[i] = i;
    CounterRng shuffle = ep_rng.split(0);
    for (std::size_t i = n_unl; i > 1; --i) std::swap(unl_order[i - 1], unl_order[shuffle.below(i)]);
    for (std::size_t i = n_lab; i > 1; --i) std::swap(lab_order[i - 1], lab_order[shuffle.below(i)]);

    LossParts epoch_parts;
    for (std::size_t step = 0; step < steps; ++step) {
      const CounterRng step_rng = ep_rng.split(1).split(step);
      std::vector<double> grad(model.params().size(), 0.0);
      LossParts step_parts;
      auto accumulate = [&](const SampleResult& r, double w) {
        check_finite(r.parts, ep + 1);
        step_parts.ce += w * r.parts.ce;
        step_parts.kl += w * r.parts.kl;
        step_parts.der += w * r.parts.der;
        for (std::size_t i = 0; i < grad.size(); ++i) grad[i] += w * r.grad[i];
      };

      const double wl = 1.0 / static_cast<double>(b);
      for (std::size_t k = 0; k < b; ++k) {
        const SyntheticScene& s = data.labeled[lab_order[(step * b + k) % n_lab]];
        accumulate(labeled_sample(model, s, cfg, step_rng.split(k).key()), wl);
      }
      if (n_unl > 0) {
        const std::size_t begin = step * b, end = std::min(n_unl, begin + b);
        const double wu = 1.0 / static_cast<double>(end - begin);
        for (std::size_t k = begin; k < end; ++k) {
          CounterRng sample_rng = step_rng.split(1000 + k);
          const SyntheticScene* partner = nullptr;
          if (n_unl > 1 && sample_rng.bernoulli(cfg.augment.p_mix)) {
            std::size_t other = sample_rng.below(n_unl - 1);
            if (other >= unl_order[k]) ++other;
            partner = &data.unlabeled[other];
          }
          accumulate(unlabeled_sample(model, data.unlabeled[unl_order[k]], partner, cfg, sample_rng.split(7).key(), ep),
                     wu);
        }
      }

      for (std::size_t i = 0; i < grad.size(); ++i) {
        velocity[i] = cfg.optimizer_momentum * velocity[i] + grad[i];
        model.params()[i] -= cfg.learning_rate * velocity[i];
      }
      epoch_parts.ce += step_parts.ce / static_cast<double>(steps);
      epoch_parts.kl += step_parts.kl / static_cast<double>(steps);
      epoch_parts.der += step_parts.der / static_cast<double>(steps);
    }

    if (result.momentum) result.momentum = momentum_update(*result.momentum, model.params());
    result.final_model = model;
    const ToyModel eval = result.eval_model();

    EpochMetrics row;
    row.epoch = ep + 1;
    row.loss_ce = epoch_parts.ce;
    row.loss_kl = epoch_parts.kl;
    row.loss_der = epoch_parts.der;
    row.miou_train = mean_miou(eval, train_scenes);
    row.miou_val = mean_miou(eval, data.val);
    result.metrics.push_back(row);

    if (out_dir) {
      for (std::size_t k = 0; k < std::min(cfg.export_maps, data.val.size()); ++k) {
        const LabelMap pred = argmax_labels(eval.logits(data.val[k].image).values);
        io::export_pgm(pred, cfg.height, cfg.width,
                       *out_dir / "maps" / ("ep" + pad3(static_cast<std::size_t>(row.epoch)) + "_img" + pad3(k) + ".pgm"));
      }
      io::write_file_atomic(*out_dir / "metrics.csv", metrics_csv(result.metrics));
    }
  }
  result.final_model = model;

  if (out_dir) {
    io::write_tensor(*out_dir / "final_model.dpt", Tensor::vector(model.params()));
    if (result.momentum) io::write_tensor(*out_dir / "momentum_model.dpt", Tensor::vector(result.momentum->theta_m));
  }
  return result;
}

}  // namespace derprop
