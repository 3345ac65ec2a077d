#pragma once

#include <filesystem>
#include <functional>
#include <map>
#include <nlohmann/json.hpp>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "imloc/augment.hpp"
#include "imloc/config.hpp"
#include "imloc/dataset.hpp"
#include "imloc/loss.hpp"
#include "imloc/model.hpp"

namespace imloc {

struct TrainConfig {
  double base_lr = 1e-4;
  double min_lr = 5e-7;
  double beta1 = 0.9;
  double beta2 = 0.95;
  double adam_eps = 1e-8;
  double weight_decay = 0.05;
  std::int64_t epochs = 200;
  double warmup_epochs = 4;
  std::int64_t micro_batch = 1;
  std::int64_t accumulate = 32;
  std::int64_t early_stop_patience = 15;
  std::uint64_t seed = 0;
  std::int64_t eval_every = 1;  // epochs between validations
  std::int64_t max_steps = 0;   // optimizer updates; 0 = no limit
  double target_f1 = 0;         // stop once validation F1 reaches it; 0 = off
  int edge_k = 0;               // 0 = pick_k of the canvas
  AugmentationPolicy augmentation = AugmentationPolicy::standard();

  void validate() const;
};

/// Learning rate at a (fractional) epoch: linear warmup from 0, then cosine
/// decay from base_lr to min_lr at `epochs`.
double lr_schedule(double epoch_fraction, const TrainConfig& cfg);

/// Everything a run needs; the layout of the JSON config file.
struct RunConfig {
  ModelConfig model = ModelConfig::vit_base();
  LossConfig loss{};
  TrainConfig train{};
};

void to_json(nlohmann::json& j, const AugmentationPolicy& p);
void from_json(const nlohmann::json& j, AugmentationPolicy& p);
void to_json(nlohmann::json& j, const LossConfig& c);
void from_json(const nlohmann::json& j, LossConfig& c);
void to_json(nlohmann::json& j, const TrainConfig& c);
void from_json(const nlohmann::json& j, TrainConfig& c);
void to_json(nlohmann::json& j, const RunConfig& c);
void from_json(const nlohmann::json& j, RunConfig& c);

/// Adam with decoupled weight decay (decay skipped for entries flagged
/// without it). Parameters that received no gradient are left alone.
class AdamW {
 public:
  AdamW(double beta1, double beta2, double eps, double weight_decay);

  /// One update using grad * grad_scale as the gradient.
  void step(ParameterStore& store, double lr, double grad_scale = 1.0);
  std::int64_t steps() const noexcept { return t_; }

  std::map<std::string, Tensor> state_tensors() const;
  void load_state(const std::map<std::string, Tensor>& tensors, std::int64_t steps);

 private:
  double beta1_, beta2_, eps_, weight_decay_;
  std::int64_t t_ = 0;
  std::map<std::string, Tensor> m_, v_;
};

struct TrainState {
  std::int64_t step = 0;    // optimizer updates applied
  std::int64_t epoch = 0;   // epoch in progress
  std::int64_t cursor = 0;  // samples of this epoch already consumed
  double best_f1 = -1;
  std::int64_t best_epoch = -1;
  std::int64_t best_step = -1;
  std::int64_t epochs_since_best = 0;
  std::int64_t evaluations = 0;
};

void to_json(nlohmann::json& j, const TrainState& s);
void from_json(const nlohmann::json& j, TrainState& s);

struct StepRecord {
  std::int64_t step = 0;
  std::int64_t epoch = 0;
  double lr = 0;
  LossTerms loss;  // mean over the samples of the update
};

struct EvalRecord {
  std::int64_t step = 0;
  std::int64_t epoch = 0;
  double f1 = 0;
  std::optional<double> auc;
  bool improved = false;
};

struct FitOptions {
  std::filesystem::path out_dir;  // empty: no checkpoints or logs
  bool resume = false;            // continue from out_dir/last
  std::function<void(const StepRecord&)> on_step;
  std::function<void(const EvalRecord&)> on_eval;
};

struct FitResult {
  TrainState state;
  std::vector<StepRecord> steps;
  std::vector<EvalRecord> evals;
  std::string stop_reason;
  double best_f1 = -1;  // F1 of the best checkpoint, including a final out-of-schedule evaluation
  std::filesystem::path best_checkpoint;
};

class TrainingDiverged : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class Trainer {
 public:
  Trainer(Model& model, TrainConfig cfg, LossConfig loss);

  struct StepOutcome {
    LossTerms loss;  // mean over the micro-batch
    bool updated = false;
  };

  /// Forward and backward on one canvas-padded sample; gradients add up
  /// in the parameters. Throws TrainingDiverged on a non-finite loss.
  LossTerms accumulate(const PaddedSample& sample);
  /// Applies one update with the accumulated gradients averaged over the
  /// samples seen since the previous update, then clears them.
  void apply_update(double lr);
  /// Processes one micro-batch and updates once `accumulate` micro-batches
  /// are pending.
  StepOutcome train_step(const std::vector<Sample>& micro_batch, double lr);
  std::int64_t pending_samples() const noexcept { return pending_samples_; }

  FitResult fit(const SampleSet& train, const SampleSet& val, const FitOptions& opts = {});

  /// Parameters, optimizer moments and state; restoring is bit-exact.
  void save_state(const std::filesystem::path& dir) const;
  void load_state(const std::filesystem::path& dir);

  const TrainState& state() const noexcept { return state_; }
  const TrainConfig& config() const noexcept { return cfg_; }
  int edge_k() const;

 private:
  PaddedSample prepare(const Sample& s) const;
  double lr_for_update(std::int64_t update_in_epoch, std::int64_t updates_per_epoch) const;

  Model& model_;
  TrainConfig cfg_;
  LossConfig loss_;
  AdamW opt_;
  TrainState state_;
  std::int64_t pending_micro_ = 0;
  std::int64_t pending_samples_ = 0;
};

/// Order in which an epoch visits `n` samples.
std::vector<std::size_t> epoch_order(std::size_t n, std::uint64_t seed, std::int64_t epoch);

}  // namespace imloc
