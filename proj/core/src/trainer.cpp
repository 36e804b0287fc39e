#include "bodylift/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>

#include "bodylift/error.hpp"
#include "bodylift/metrics.hpp"
#include "bodylift/ops.hpp"

namespace bodylift::train {

using ad::Var;
using net::ForwardContext;
using net::Mode;

// RNG streams derived from TrainConfig::seed.
namespace stream {
constexpr std::uint64_t kInit = 0;
constexpr std::uint64_t kLabeledOrder = 1;
constexpr std::uint64_t kLabeledDropout = 2;
constexpr std::uint64_t kUnlabeledDropout = 3;
constexpr std::uint64_t kUnlabeledOrder = 4;
}  // namespace stream

std::string to_string(TrainMode mode) {
  switch (mode) {
    case TrainMode::Supervised: return "supervised";
    case TrainMode::Semi: return "semi";
    case TrainMode::Baseline: return "baseline";
  }
  return "?";
}

TrainMode parse_mode(const std::string& text) {
  if (text == "supervised") return TrainMode::Supervised;
  if (text == "semi") return TrainMode::Semi;
  if (text == "baseline") return TrainMode::Baseline;
  throw ConfigError("unknown training mode '" + text + "' (supervised|semi|baseline)");
}

std::string to_string(ReencodeSource source) {
  return source == ReencodeSource::Generator ? "generator" : "decoder";
}

ReencodeSource parse_reencode_source(const std::string& text) {
  if (text == "generator") return ReencodeSource::Generator;
  if (text == "decoder") return ReencodeSource::Decoder;
  throw ConfigError("unknown re-encode source '" + text + "' (generator|decoder)");
}

void TrainConfig::validate() const {
  weights.validate();
  if (batch_size < 2) throw ConfigError("batch_size must be at least 2 (batch normalization)");
  if (!(lr > 0.0) || !std::isfinite(lr)) throw ConfigError("learning rate must be positive");
  if (!(lr_decay > 0.0 && lr_decay <= 1.0)) throw ConfigError("lr_decay must lie in (0, 1]");
  if (lr_decay_steps == 0) throw ConfigError("lr_decay_steps must be positive");
  if (epochs == 0) throw ConfigError("epochs must be positive");
  if (width < 8) throw ConfigError("width must be at least 8");
  if (!(dropout >= 0.0 && dropout < 1.0)) throw ConfigError("dropout must lie in [0, 1)");
  if (disc_steps == 0) throw ConfigError("disc_steps must be positive");
}

namespace {

ad::AdamConfig adam_config(const TrainConfig& c) {
  ad::AdamConfig a;
  a.lr = c.lr;
  a.decay_rate = c.lr_decay;
  a.decay_steps = c.lr_decay_steps;
  return a;
}

}  // namespace

Trainer::Trainer(net::ModelParams& model, const TrainConfig& config)
    : model_(model),
      config_(config),
      lifting_opt_(model.lifting_parameters(), adam_config(config)),
      labeled_dropout_(make_rng(config.seed, stream::kLabeledDropout)),
      unlabeled_dropout_(make_rng(config.seed, stream::kUnlabeledDropout)) {
  config_.validate();
  if (model_.is_full()) disc_opt_.emplace(model_.discriminator_parameters(), adam_config(config));
}

StepResult Trainer::lifting_step(const Batch& labeled, const Tensor* unlabeled2d, Tensor* real_h3d,
                                 Tensor* fake_f2d) {
  const auto& w = config_.weights;
  ForwardContext lab{Mode::Train, &labeled_dropout_, true, true};

  Var x2 = ad::constant(labeled.pose2d);
  Var x3 = ad::constant(labeled.pose3d);
  std::vector<std::pair<double, Var>> terms;
  losses::SupervisedParts sup;
  std::optional<losses::UnlabeledParts> unsup;

  if (!model_.is_full()) {
    Var pred = net::generate(model_, x2, Var{}, lab);
    Var est = losses::loss_est(pred, x3);
    sup.est = est.item();
    terms.emplace_back(w.est, est);
  } else {
    Var f2d = net::encode2d(model_, x2, lab);
    Var h3d = net::encode3d(model_, x3, lab);
    Var rec_h = net::decode(model_, h3d, lab);
    Var rec_f = net::decode(model_, f2d, lab);
    Var pred = net::generate(model_, x2, f2d, lab);
    Var est = losses::loss_est(pred, x3);
    Var perc = losses::loss_perceptual(f2d, h3d);
    Var rec = losses::loss_rec(rec_h, rec_f, x3);
    sup = {est.item(), perc.item(), rec.item()};
    terms = {{w.est, est}, {w.perceptual, perc}, {w.rec, rec}};
    if (real_h3d) *real_h3d = h3d.value();

    if (unlabeled2d) {
      // Running statistics stay a function of labeled data only.
      ForwardContext unl{Mode::Train, &unlabeled_dropout_, true, false};
      ForwardContext reenc = unl;
      reenc.trainable = !config_.detach_reencoder;
      ForwardContext frozen_disc{Mode::Train, nullptr, false, false};

      Var u2 = ad::constant(*unlabeled2d);
      Var f_ul = net::encode2d(model_, u2, unl);
      Var pred_ul = config_.reencode_source == ReencodeSource::Generator ? net::generate(model_, u2, f_ul, unl)
                                                                          : net::decode(model_, f_ul, unl);
      Var h_ul = net::encode3d(model_, pred_ul, reenc);
      Var adv = losses::adversarial_generator_loss(net::discriminate(model_, f_ul, frozen_disc));
      Var perc_ul = losses::loss_perceptual(f_ul, h_ul);
      unsup = losses::UnlabeledParts{adv.item(), perc_ul.item()};
      terms.emplace_back(w.disc_unlabeled, adv);
      terms.emplace_back(w.perc_unlabeled, perc_ul);
      if (fake_f2d) *fake_f2d = f_ul.value();
    }
  }

  Var total = ad::weighted_sum(terms);
  StepResult result;
  result.losses = losses::total_semi(sup, unsup, w);
  result.losses.total = total.item();
  if (!std::isfinite(result.losses.total)) throw NumericError("non-finite training loss");

  lifting_opt_.zero_grad();
  total.backward();
  lifting_opt_.step();
  return result;
}

double Trainer::discriminator_loss(const Tensor& real_h3d, const Tensor& fake_f2d) {
  ForwardContext ctx{Mode::Train, nullptr, false, false};
  Var real = net::discriminate(model_, ad::constant(real_h3d), ctx);
  Var fake = net::discriminate(model_, ad::constant(fake_f2d), ctx);
  return losses::loss_discriminator(real, fake).item();
}

double Trainer::discriminator_step(const Tensor& real_h3d, const Tensor& fake_f2d) {
  if (!disc_opt_) throw ConfigError("the baseline model has no discriminator");
  ForwardContext ctx{Mode::Train, nullptr, true, false};
  Var real = net::discriminate(model_, ad::constant(real_h3d), ctx);
  Var fake = net::discriminate(model_, ad::constant(fake_f2d), ctx);
  Var loss = losses::loss_discriminator(real, fake);
  if (!std::isfinite(loss.item())) throw NumericError("non-finite discriminator loss");
  disc_opt_->zero_grad();
  loss.backward();
  disc_opt_->step();
  return loss.item();
}

StepResult Trainer::step(const Batch& labeled, const Tensor* unlabeled2d) {
  Tensor real, fake;
  StepResult r = lifting_step(labeled, unlabeled2d, &real, &fake);
  if (unlabeled2d && model_.is_full()) {
    // A zero adversarial weight leaves the discriminator out of training entirely.
    if (config_.weights.disc_unlabeled > 0.0) {
      for (std::size_t k = 0; k < config_.disc_steps; ++k) {
        const double loss = discriminator_step(real, fake);
        if (k == 0) r.disc_loss = loss;
      }
    } else {
      r.disc_loss = discriminator_loss(real, fake);
    }
  }
  return r;
}

std::function<Tensor(const Tensor&)> make_predictor(net::ModelParams& model) {
  return [&model](const Tensor& x) { return net::predict(model, x); };
}

namespace {

void require_labeled(const Dataset& data, const char* what) {
  if (data.empty()) throw ConfigError(std::string(what) + " set is empty");
  const std::size_t j = data.front().joint_count();
  for (const auto& s : data) {
    if (!s.pose3d) throw FormatError(std::string(what) + " set contains samples without 3D poses");
    if (s.joint_count() != j) throw FormatError(std::string(what) + " set mixes joint counts");
  }
}

JointSet joint_set_for(std::size_t joints) {
  if (joints == 16) return JointSet::H36M16;
  if (joints == 17) return JointSet::H36M17;
  return JointSet::Custom;
}

double validation_mpjpe(net::ModelParams& model, const Dataset& val, const NormStats& stats, std::size_t root) {
  const auto preds = metrics::predict_poses(make_predictor(model), val, stats, root);
  double total = 0.0;
  for (std::size_t k = 0; k < val.size(); ++k) total += metrics::mpjpe_p1(preds[k], *val[k].pose3d, root);
  return total / double(val.size());
}

/// Cycles through a dataset in reshuffled passes, independent of the labeled epochs.
class CyclicSampler {
 public:
  CyclicSampler(std::size_t n, Rng rng) : order_(n), rng_(std::move(rng)) {
    std::iota(order_.begin(), order_.end(), 0);
    reshuffle();
  }
  std::vector<std::size_t> next(std::size_t count) {
    std::vector<std::size_t> out;
    out.reserve(count);
    while (out.size() < count) {
      if (cursor_ == order_.size()) reshuffle();
      out.push_back(order_[cursor_++]);
    }
    return out;
  }

 private:
  void reshuffle() {
    std::shuffle(order_.begin(), order_.end(), rng_);
    cursor_ = 0;
  }
  std::vector<std::size_t> order_;
  Rng rng_;
  std::size_t cursor_ = 0;
};

TrainResult run(const Dataset& labeled, const Dataset* unlabeled, const Dataset& val, TrainConfig config,
                const TrainCallbacks& cb) {
  config.validate();
  require_labeled(labeled, "labeled");
  if (!val.empty()) require_labeled(val, "validation");
  const std::size_t joints = labeled.front().joint_count();
  if (!val.empty() && val.front().joint_count() != joints) throw FormatError("validation joint count differs");
  if (config.root_index >= joints) throw ConfigError("root_index outside the joint set");

  TrainResult result;
  auto warn = [&](const std::string& msg) {
    result.warnings.push_back(msg);
    if (cb.on_warning) cb.on_warning(msg);
  };

  if (unlabeled && unlabeled->empty()) {
    warn("unlabeled set is empty; falling back to supervised training");
    unlabeled = nullptr;
  }
  if (unlabeled && unlabeled->front().joint_count() != joints) throw FormatError("unlabeled joint count differs");

  result.stats = compute_norm_stats(labeled);
  {
    std::size_t clamped = 0;
    for (std::size_t i = 0; i < result.stats.std2d.size(); ++i) clamped += result.stats.std2d[i] <= NormStats::kMinStd;
    for (std::size_t i = 0; i < result.stats.std3d.size(); ++i) {
      if (i / 3 != config.root_index) clamped += result.stats.std3d[i] <= NormStats::kMinStd;
    }
    if (clamped) warn(std::to_string(clamped) + " zero-variance coordinates clamped to std 1e-8");
  }

  net::ModelSpec spec;
  spec.joints = joints;
  spec.width = config.width;
  spec.dropout = config.dropout;
  spec.joint_set = joint_set_for(joints);
  spec.variant = config.mode == TrainMode::Baseline ? net::Variant::Baseline : net::Variant::Full;
  Rng init = make_rng(config.seed, stream::kInit);
  result.model = net::build_model(spec, init);
  auto& model = result.model;

  Trainer trainer(model, config);
  Rng order_rng = make_rng(config.seed, stream::kLabeledOrder);
  std::optional<CyclicSampler> unlabeled_sampler;
  if (unlabeled) unlabeled_sampler.emplace(unlabeled->size(), make_rng(config.seed, stream::kUnlabeledOrder));

  std::vector<std::size_t> order(labeled.size());
  std::iota(order.begin(), order.end(), 0);
  std::optional<std::vector<Tensor>> best;
  std::size_t since_best = 0;

  for (std::size_t epoch = 1; epoch <= config.epochs; ++epoch) {
    const std::vector<Tensor> epoch_start = model.snapshot();
    std::shuffle(order.begin(), order.end(), order_rng);
    for (std::size_t start = 0; start < order.size(); start += config.batch_size) {
      const std::size_t end = std::min(order.size(), start + config.batch_size);
      if (end - start < 2) continue;  // batch-norm needs two rows
      const std::span<const std::size_t> idx(order.data() + start, end - start);
      Batch batch{batch2d(labeled, idx, result.stats), batch3d(labeled, idx, result.stats)};
      std::optional<Tensor> u2;
      if (unlabeled_sampler) {
        const auto uidx = unlabeled_sampler->next(idx.size());
        u2 = batch2d(*unlabeled, uidx, result.stats);
      }
      StepResult r;
      try {
        r = trainer.step(batch, u2 ? &*u2 : nullptr);
      } catch (const NumericError& e) {
        auto good = std::make_shared<Checkpoint>();
        good->model = model.clone();
        good->model.restore(best ? *best : epoch_start);
        good->stats = result.stats;
        throw TrainingDiverged(std::string(e.what()) + " at step " + std::to_string(result.steps + 1), good);
      }
      ++result.steps;
      TrainLogEntry entry{result.steps, epoch, r.losses, r.disc_loss, std::nullopt};
      result.log.push_back(entry);
      if (cb.on_step) cb.on_step(entry);
    }
    result.epochs_run = epoch;

    if (!val.empty()) {
      const double mpjpe = validation_mpjpe(model, val, result.stats, config.root_index);
      if (!result.log.empty()) result.log.back().val_mpjpe = mpjpe;
      if (cb.on_validation) cb.on_validation(epoch, mpjpe);
      if (!result.best_val_mpjpe || mpjpe < *result.best_val_mpjpe) {
        result.best_val_mpjpe = mpjpe;
        result.best_epoch = epoch;
        best = model.snapshot();
        since_best = 0;
      } else if (config.patience > 0 && ++since_best >= config.patience) {
        break;
      }
    }
  }
  if (best) model.restore(*best);
  return result;
}

}  // namespace

TrainResult train_supervised(const Dataset& labeled, const Dataset& val, const TrainConfig& config,
                             const TrainCallbacks& callbacks) {
  TrainConfig c = config;
  c.mode = TrainMode::Supervised;
  return run(labeled, nullptr, val, c, callbacks);
}

TrainResult train_semi(const Dataset& labeled, const Dataset& unlabeled, const Dataset& val,
                       const TrainConfig& config, const TrainCallbacks& callbacks) {
  TrainConfig c = config;
  c.mode = TrainMode::Semi;
  return run(labeled, &unlabeled, val, c, callbacks);
}

TrainResult train_baseline(const Dataset& labeled, const Dataset& val, const TrainConfig& config,
                           const TrainCallbacks& callbacks) {
  TrainConfig c = config;
  c.mode = TrainMode::Baseline;
  return run(labeled, nullptr, val, c, callbacks);
}

TrainResult train(const Dataset& labeled, const Dataset& unlabeled, const Dataset& val, const TrainConfig& config,
                  const TrainCallbacks& callbacks) {
  switch (config.mode) {
    case TrainMode::Supervised: return train_supervised(labeled, val, config, callbacks);
    case TrainMode::Semi: return train_semi(labeled, unlabeled, val, config, callbacks);
    case TrainMode::Baseline: return train_baseline(labeled, val, config, callbacks);
  }
  throw ConfigError("unknown training mode");
}

void write_log_csv(const std::vector<TrainLogEntry>& log, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw FormatError("cannot write training log " + path.string());
  out.precision(17);
  out << losses::kLogHeader << '\n';
  for (const auto& e : log) {
    const auto& l = e.losses;
    out << e.step << ',' << l.est << ',' << l.perceptual_labeled << ',' << l.rec << ',' << l.disc_unlabeled << ','
        << l.perceptual_unlabeled << ',' << l.total << ',' << e.disc_loss << '\n';
  }
}

void write_validation_csv(const std::vector<TrainLogEntry>& log, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw FormatError("cannot write validation log " + path.string());
  out.precision(17);
  out << "epoch,step,val_mpjpe_mm\n";
  for (const auto& e : log) {
    if (e.val_mpjpe) out << e.epoch << ',' << e.step << ',' << *e.val_mpjpe << '\n';
  }
}

}  // namespace bodylift::train
