#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "bodylift/adam.hpp"
#include "bodylift/checkpoint.hpp"
#include "bodylift/losses.hpp"
#include "bodylift/model.hpp"
#include "bodylift/pose.hpp"

namespace bodylift::train {

enum class TrainMode { Supervised, Semi, Baseline };
/// Which prediction of an unlabeled pose is re-encoded by the 3D encoder.
enum class ReencodeSource { Generator, Decoder };

std::string to_string(TrainMode mode);
TrainMode parse_mode(const std::string& text);
std::string to_string(ReencodeSource source);
ReencodeSource parse_reencode_source(const std::string& text);

struct TrainConfig {
  TrainMode mode = TrainMode::Supervised;
  losses::LossWeights weights;
  double lr = 1e-3;
  double lr_decay = 1.0;  // exponential decay factor; 1 disables
  std::uint64_t lr_decay_steps = 100000;
  std::size_t batch_size = 64;
  std::size_t epochs = 25;
  std::uint64_t seed = 0;
  std::size_t width = 1024;
  double dropout = 0.5;
  bool detach_reencoder = false;
  ReencodeSource reencode_source = ReencodeSource::Generator;
  std::size_t disc_steps = 1;  // discriminator updates per lifting update
  std::size_t patience = 10;   // validations without improvement before stopping; 0 disables
  std::size_t root_index = 0;

  /// Throws ConfigError on batch_size < 2, lr ≤ 0, or invalid weights.
  void validate() const;
};

struct TrainLogEntry {
  std::size_t step = 0;
  std::size_t epoch = 0;
  losses::LossBreakdown losses;
  double disc_loss = 0.0;
  std::optional<double> val_mpjpe;  // set on the last step of a validated epoch
};

struct TrainResult {
  net::ModelParams model;
  NormStats stats;
  std::vector<TrainLogEntry> log;
  std::size_t steps = 0;
  std::size_t epochs_run = 0;
  std::optional<double> best_val_mpjpe;
  std::size_t best_epoch = 0;
  std::vector<std::string> warnings;
};

struct TrainCallbacks {
  std::function<void(const TrainLogEntry&)> on_step;
  std::function<void(std::size_t epoch, double val_mpjpe)> on_validation;
  std::function<void(const std::string&)> on_warning;
};

/// Raised when the loss or a gradient turns non-finite. Carries the last
/// good parameters (best validated, or the state before the failing step).
class TrainingDiverged : public NumericError {
 public:
  TrainingDiverged(const std::string& what, std::shared_ptr<Checkpoint> last_good)
      : NumericError(what), last_good_(std::move(last_good)) {}
  const Checkpoint& last_good() const { return *last_good_; }

 private:
  std::shared_ptr<Checkpoint> last_good_;
};

/// Normalized mini-batch.
struct Batch {
  Tensor pose2d;  // B×2J
  Tensor pose3d;  // B×3J
};

struct StepResult {
  losses::LossBreakdown losses;
  double disc_loss = 0.0;
};

/// One optimizer step at a time over a model it does not own. Lifting
/// networks and the discriminator have separate Adam instances, so each
/// half-step leaves the other side untouched.
class Trainer {
 public:
  Trainer(net::ModelParams& model, const TrainConfig& config);

  /// Lifting half-step (supervised terms, plus unlabeled terms when `unlabeled2d`
  /// is given), then discriminator updates when the adversarial weight is positive.
  StepResult step(const Batch& labeled, const Tensor* unlabeled2d = nullptr);

  /// Updates encoders/decoder/generator only. Fills the detached features
  /// the discriminator half-step consumes.
  StepResult lifting_step(const Batch& labeled, const Tensor* unlabeled2d, Tensor* real_h3d = nullptr,
                          Tensor* fake_f2d = nullptr);
  /// Updates the discriminator only; returns its loss before the update.
  double discriminator_step(const Tensor& real_h3d, const Tensor& fake_f2d);
  /// Discriminator loss without updating anything.
  double discriminator_loss(const Tensor& real_h3d, const Tensor& fake_f2d);

  const ad::Adam& lifting_optimizer() const { return lifting_opt_; }

 private:
  net::ModelParams& model_;
  TrainConfig config_;
  ad::Adam lifting_opt_;
  std::optional<ad::Adam> disc_opt_;
  Rng labeled_dropout_;
  Rng unlabeled_dropout_;
};

/// Encoders, decoder and generator trained jointly on the supervised objective.
TrainResult train_supervised(const Dataset& labeled, const Dataset& val, const TrainConfig& config,
                             const TrainCallbacks& callbacks = {});
/// Supervised objective plus adversarial alignment of unlabeled 2D features and
/// self-consistency with the re-encoded prediction.
TrainResult train_semi(const Dataset& labeled, const Dataset& unlabeled, const Dataset& val,
                       const TrainConfig& config, const TrainCallbacks& callbacks = {});
/// Generator alone on the 2D pose, optimized on the estimation loss.
TrainResult train_baseline(const Dataset& labeled, const Dataset& val, const TrainConfig& config,
                           const TrainCallbacks& callbacks = {});

/// Dispatches on config.mode.
TrainResult train(const Dataset& labeled, const Dataset& unlabeled, const Dataset& val, const TrainConfig& config,
                  const TrainCallbacks& callbacks = {});

/// Eval-mode predictor over normalized batches, for metrics::evaluate.
std::function<Tensor(const Tensor&)> make_predictor(net::ModelParams& model);

/// Per-step CSV (losses::kLogHeader columns).
void write_log_csv(const std::vector<TrainLogEntry>& log, const std::filesystem::path& path);
/// Validation CSV: epoch,step,val_mpjpe_mm.
void write_validation_csv(const std::vector<TrainLogEntry>& log, const std::filesystem::path& path);

}  // namespace bodylift::train
