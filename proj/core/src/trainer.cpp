#include "imloc/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numbers>
#include <sstream>

#include "imloc/checkpoint.hpp"
#include "imloc/evaluate.hpp"
#include "imloc/morphology.hpp"

namespace imloc {

namespace fs = std::filesystem;

void TrainConfig::validate() const {
  auto fail = [](const std::string& m) { throw std::invalid_argument("train." + m); };
  if (!(base_lr >= 0)) fail("base_lr must be non-negative");
  if (!(min_lr >= 0 && min_lr <= base_lr)) fail("min_lr must lie in [0, base_lr]");
  if (!(beta1 >= 0 && beta1 < 1 && beta2 >= 0 && beta2 < 1)) fail("betas must lie in [0, 1)");
  if (!(adam_eps > 0)) fail("adam_eps must be positive");
  if (!(weight_decay >= 0)) fail("weight_decay must be non-negative");
  if (epochs < 1) fail("epochs must be >= 1");
  if (!(warmup_epochs >= 0 && warmup_epochs <= static_cast<double>(epochs))) fail("warmup_epochs must lie in [0, epochs]");
  if (micro_batch < 1) fail("micro_batch must be >= 1");
  if (accumulate < 1) fail("accumulate must be >= 1");
  if (early_stop_patience < 0) fail("early_stop_patience must be >= 0");
  if (eval_every < 1) fail("eval_every must be >= 1");
  if (max_steps < 0) fail("max_steps must be >= 0");
  if (edge_k < 0) fail("edge_k must be >= 0");
}

double lr_schedule(double epoch_fraction, const TrainConfig& cfg) {
  const double e = std::clamp(epoch_fraction, 0.0, static_cast<double>(cfg.epochs));
  if (e < cfg.warmup_epochs) return cfg.base_lr * e / cfg.warmup_epochs;
  const double span = static_cast<double>(cfg.epochs) - cfg.warmup_epochs;
  const double progress = span > 0 ? (e - cfg.warmup_epochs) / span : 1.0;
  return cfg.min_lr + 0.5 * (cfg.base_lr - cfg.min_lr) * (1.0 + std::cos(std::numbers::pi * progress));
}

// ---- JSON -----------------------------------------------------------------

void to_json(nlohmann::json& j, const AugmentationPolicy& p) {
  j = {{"rescale_prob", p.rescale_prob},
       {"rescale_min", p.rescale_min},
       {"rescale_max", p.rescale_max},
       {"hflip_prob", p.hflip_prob},
       {"vflip_prob", p.vflip_prob},
       {"blur_prob", p.blur_prob},
       {"blur_sigma_min", p.blur_sigma_min},
       {"blur_sigma_max", p.blur_sigma_max},
       {"rot90_prob", p.rot90_prob},
       {"small_rotation_prob", p.small_rotation_prob},
       {"small_rotation_max_deg", p.small_rotation_max_deg},
       {"copy_move_prob", p.copy_move_prob},
       {"inpaint_prob", p.inpaint_prob}};
}

void from_json(const nlohmann::json& j, AugmentationPolicy& p) {
  if (j.is_string()) {
    const auto name = j.get<std::string>();
    if (name == "standard") {
      p = AugmentationPolicy::standard();
    } else if (name == "identity" || name == "none") {
      p = AugmentationPolicy::identity();
    } else {
      throw std::invalid_argument("unknown augmentation preset '" + name + "'");
    }
    return;
  }
  p = AugmentationPolicy::identity();
  p.rescale_prob = j.value("rescale_prob", p.rescale_prob);
  p.rescale_min = j.value("rescale_min", p.rescale_min);
  p.rescale_max = j.value("rescale_max", p.rescale_max);
  p.hflip_prob = j.value("hflip_prob", p.hflip_prob);
  p.vflip_prob = j.value("vflip_prob", p.vflip_prob);
  p.blur_prob = j.value("blur_prob", p.blur_prob);
  p.blur_sigma_min = j.value("blur_sigma_min", p.blur_sigma_min);
  p.blur_sigma_max = j.value("blur_sigma_max", p.blur_sigma_max);
  p.rot90_prob = j.value("rot90_prob", p.rot90_prob);
  p.small_rotation_prob = j.value("small_rotation_prob", p.small_rotation_prob);
  p.small_rotation_max_deg = j.value("small_rotation_max_deg", p.small_rotation_max_deg);
  p.copy_move_prob = j.value("copy_move_prob", p.copy_move_prob);
  p.inpaint_prob = j.value("inpaint_prob", p.inpaint_prob);
}

void to_json(nlohmann::json& j, const LossConfig& c) { j = {{"lambda", c.lambda}, {"epsilon", c.epsilon}}; }

void from_json(const nlohmann::json& j, LossConfig& c) {
  c.lambda = j.value("lambda", c.lambda);
  c.epsilon = j.value("epsilon", c.epsilon);
}

void to_json(nlohmann::json& j, const TrainConfig& c) {
  j = {{"base_lr", c.base_lr},
       {"min_lr", c.min_lr},
       {"betas", {c.beta1, c.beta2}},
       {"adam_eps", c.adam_eps},
       {"weight_decay", c.weight_decay},
       {"epochs", c.epochs},
       {"warmup_epochs", c.warmup_epochs},
       {"micro_batch", c.micro_batch},
       {"accumulate", c.accumulate},
       {"early_stop_patience", c.early_stop_patience},
       {"seed", c.seed},
       {"eval_every", c.eval_every},
       {"max_steps", c.max_steps},
       {"target_f1", c.target_f1},
       {"edge_k", c.edge_k},
       {"augmentation", c.augmentation}};
}

void from_json(const nlohmann::json& j, TrainConfig& c) {
  c.base_lr = j.value("base_lr", c.base_lr);
  c.min_lr = j.value("min_lr", c.min_lr);
  if (j.contains("betas")) {
    const auto& b = j.at("betas");
    if (!b.is_array() || b.size() != 2) throw std::invalid_argument("train.betas must be a pair");
    c.beta1 = b[0].get<double>();
    c.beta2 = b[1].get<double>();
  }
  c.adam_eps = j.value("adam_eps", c.adam_eps);
  c.weight_decay = j.value("weight_decay", c.weight_decay);
  c.epochs = j.value("epochs", c.epochs);
  c.warmup_epochs = j.value("warmup_epochs", c.warmup_epochs);
  c.micro_batch = j.value("micro_batch", c.micro_batch);
  c.accumulate = j.value("accumulate", c.accumulate);
  c.early_stop_patience = j.value("early_stop_patience", c.early_stop_patience);
  c.seed = j.value("seed", c.seed);
  c.eval_every = j.value("eval_every", c.eval_every);
  c.max_steps = j.value("max_steps", c.max_steps);
  c.target_f1 = j.value("target_f1", c.target_f1);
  c.edge_k = j.value("edge_k", c.edge_k);
  if (j.contains("augmentation")) c.augmentation = j.at("augmentation").get<AugmentationPolicy>();
}

void to_json(nlohmann::json& j, const RunConfig& c) { j = {{"model", c.model}, {"loss", c.loss}, {"train", c.train}}; }

void from_json(const nlohmann::json& j, RunConfig& c) {
  if (j.contains("model")) c.model = j.at("model").get<ModelConfig>();
  if (j.contains("loss")) c.loss = j.at("loss").get<LossConfig>();
  if (j.contains("train")) c.train = j.at("train").get<TrainConfig>();
}

void to_json(nlohmann::json& j, const TrainState& s) {
  j = {{"step", s.step},
       {"epoch", s.epoch},
       {"cursor", s.cursor},
       {"best_f1", s.best_f1},
       {"best_epoch", s.best_epoch},
       {"best_step", s.best_step},
       {"epochs_since_best", s.epochs_since_best},
       {"evaluations", s.evaluations}};
}

void from_json(const nlohmann::json& j, TrainState& s) {
  s.step = j.at("step").get<std::int64_t>();
  s.epoch = j.at("epoch").get<std::int64_t>();
  s.cursor = j.at("cursor").get<std::int64_t>();
  s.best_f1 = j.at("best_f1").get<double>();
  s.best_epoch = j.at("best_epoch").get<std::int64_t>();
  s.best_step = j.at("best_step").get<std::int64_t>();
  s.epochs_since_best = j.at("epochs_since_best").get<std::int64_t>();
  s.evaluations = j.at("evaluations").get<std::int64_t>();
}

// ---- AdamW ----------------------------------------------------------------

AdamW::AdamW(double beta1, double beta2, double eps, double weight_decay)
    : beta1_(beta1), beta2_(beta2), eps_(eps), weight_decay_(weight_decay) {}

void AdamW::step(ParameterStore& store, double lr, double grad_scale) {
  ++t_;
  const double bc1 = 1.0 - std::pow(beta1_, static_cast<double>(t_));
  const double bc2 = 1.0 - std::pow(beta2_, static_cast<double>(t_));
  for (auto& e : store.entries()) {
    if (e.kind != ParameterStore::Kind::parameter || !e.var.has_grad()) continue;
    Tensor& p = e.var.mutable_value();
    const Tensor& g = e.var.grad();
    auto [mit, m_new] = m_.try_emplace(e.name, p.shape());
    auto [vit, v_new] = v_.try_emplace(e.name, p.shape());
    Tensor& m = mit->second;
    Tensor& v = vit->second;
    const double decay = e.weight_decay ? 1.0 - lr * weight_decay_ : 1.0;
    for (std::int64_t i = 0; i < p.numel(); ++i) {
      const double gi = static_cast<double>(g[i]) * grad_scale;
      const double mi = beta1_ * m[i] + (1.0 - beta1_) * gi;
      const double vi = beta2_ * v[i] + (1.0 - beta2_) * gi * gi;
      m[i] = static_cast<float>(mi);
      v[i] = static_cast<float>(vi);
      const double update = (mi / bc1) / (std::sqrt(vi / bc2) + eps_);
      p[i] = static_cast<float>(static_cast<double>(p[i]) * decay - lr * update);
    }
  }
}

std::map<std::string, Tensor> AdamW::state_tensors() const {
  std::map<std::string, Tensor> out;
  for (const auto& [name, t] : m_) out.emplace("adam.m." + name, t);
  for (const auto& [name, t] : v_) out.emplace("adam.v." + name, t);
  return out;
}

void AdamW::load_state(const std::map<std::string, Tensor>& tensors, std::int64_t steps) {
  m_.clear();
  v_.clear();
  for (const auto& [name, t] : tensors) {
    if (name.rfind("adam.m.", 0) == 0) m_.emplace(name.substr(7), t);
    if (name.rfind("adam.v.", 0) == 0) v_.emplace(name.substr(7), t);
  }
  t_ = steps;
}

// ---- Trainer --------------------------------------------------------------

std::vector<std::size_t> epoch_order(std::size_t n, std::uint64_t seed, std::int64_t epoch) {
  std::vector<std::size_t> order(n);
  for (std::size_t i = 0; i < n; ++i) order[i] = i;
  Rng rng = Rng(seed).derive("shuffle").derive(static_cast<std::uint64_t>(epoch));
  for (std::size_t i = n; i > 1; --i) {
    const auto j = static_cast<std::size_t>(rng.uniform_int(0, static_cast<std::int64_t>(i) - 1));
    std::swap(order[i - 1], order[j]);
  }
  return order;
}

Trainer::Trainer(Model& model, TrainConfig cfg, LossConfig loss)
    : model_(model),
      cfg_(std::move(cfg)),
      loss_(loss),
      opt_(cfg_.beta1, cfg_.beta2, cfg_.adam_eps, cfg_.weight_decay) {
  cfg_.validate();
  loss_.validate();
}

int Trainer::edge_k() const {
  return cfg_.edge_k > 0 ? cfg_.edge_k : pick_k(model_.config().canvas_h, model_.config().canvas_w);
}

PaddedSample Trainer::prepare(const Sample& s) const {
  return pad_to_canvas(s, model_.canvas(), model_.config().patch_size);
}

LossTerms Trainer::accumulate(const PaddedSample& sample) {
  const auto edge = edge_mask(sample.mask, edge_k());
  auto fwd = model_.forward(sample.image, true);
  LossTerms terms;
  auto loss = combined_loss(fwd.logits_full, sample.mask, edge, loss_, &terms);
  if (!std::isfinite(terms.total)) {
    std::ostringstream os;
    os << "non-finite loss at step " << state_.step << " (epoch " << state_.epoch << ", sample '"
       << sample.source_id << "'): seg=" << terms.seg << " edge=" << terms.edge;
    throw TrainingDiverged(os.str());
  }
  ag::backward(loss);
  ++pending_samples_;
  return terms;
}

void Trainer::apply_update(double lr) {
  if (pending_samples_ == 0) return;
  opt_.step(model_.parameters(), lr, 1.0 / static_cast<double>(pending_samples_));
  model_.parameters().zero_grad();
  pending_samples_ = 0;
  pending_micro_ = 0;
  ++state_.step;
}

Trainer::StepOutcome Trainer::train_step(const std::vector<Sample>& micro_batch, double lr) {
  if (micro_batch.empty()) throw std::invalid_argument("train_step: empty micro-batch");
  StepOutcome out;
  for (const auto& s : micro_batch) {
    const auto t = accumulate(prepare(s));
    out.loss.total += t.total;
    out.loss.seg += t.seg;
    out.loss.edge += t.edge;
  }
  const auto n = static_cast<double>(micro_batch.size());
  out.loss.total /= n;
  out.loss.seg /= n;
  out.loss.edge /= n;
  if (++pending_micro_ >= cfg_.accumulate) {
    apply_update(lr);
    out.updated = true;
  }
  return out;
}

double Trainer::lr_for_update(std::int64_t update_in_epoch, std::int64_t updates_per_epoch) const {
  const double frac = static_cast<double>(state_.epoch) +
                      static_cast<double>(update_in_epoch + 1) / static_cast<double>(updates_per_epoch);
  return lr_schedule(frac, cfg_);
}

void Trainer::save_state(const fs::path& dir) const {
  auto tensors = model_tensors(model_);
  for (auto& [name, t] : opt_.state_tensors()) tensors.emplace(name, t);
  nlohmann::json meta;
  meta["model_config"] = model_.config();
  meta["train_config"] = cfg_;
  meta["loss_config"] = loss_;
  meta["train_state"] = state_;
  meta["optimizer_steps"] = opt_.steps();
  write_checkpoint(dir, tensors, meta);
}

void Trainer::load_state(const fs::path& dir) {
  auto data = read_checkpoint(dir);
  if (!data.metadata.contains("train_state")) throw CheckpointError(dir.string() + " holds no training state");
  if (nlohmann::json(model_.config()) != data.metadata.at("model_config")) {
    throw CheckpointError("model configuration of " + dir.string() + " differs from the current model");
  }
  std::map<std::string, Tensor> model_part, opt_part;
  for (auto& [name, t] : data.tensors) (name.rfind("adam.", 0) == 0 ? opt_part : model_part).emplace(name, std::move(t));
  const auto report = load_tensors(model_.parameters(), model_part);
  if (!report.complete() || !report.unexpected.empty()) {
    throw CheckpointError("cannot restore " + dir.string() + ": " + report.summary());
  }
  opt_.load_state(opt_part, data.metadata.at("optimizer_steps").get<std::int64_t>());
  state_ = data.metadata.at("train_state").get<TrainState>();
  model_.parameters().zero_grad();
  pending_samples_ = 0;
  pending_micro_ = 0;
}

namespace {

nlohmann::json step_json(const StepRecord& r) {
  return {{"type", "step"}, {"step", r.step},         {"epoch", r.epoch},
          {"lr", r.lr},     {"loss", r.loss.total},   {"seg", r.loss.seg},
          {"edge", r.loss.edge}};
}

nlohmann::json eval_json(const EvalRecord& r) {
  nlohmann::json j = {{"type", "eval"}, {"step", r.step}, {"epoch", r.epoch}, {"f1", r.f1}, {"improved", r.improved}};
  j["auc"] = r.auc ? nlohmann::json(*r.auc) : nlohmann::json(nullptr);
  return j;
}

}  // namespace

FitResult Trainer::fit(const SampleSet& train, const SampleSet& val, const FitOptions& opts) {
  if (train.empty()) throw std::invalid_argument("fit: training split is empty");
  if (val.empty()) throw std::invalid_argument("fit: validation split is empty");

  const bool persist = !opts.out_dir.empty();
  std::ofstream log;
  if (persist) {
    fs::create_directories(opts.out_dir);
    if (opts.resume) load_state(opts.out_dir / "last");
    log.open(opts.out_dir / "train_log.jsonl", opts.resume ? std::ios::app : std::ios::trunc);
  } else if (opts.resume) {
    throw std::invalid_argument("fit: resume requires an output directory");
  }

  FitResult result;
  const auto n = static_cast<std::int64_t>(train.size());
  const std::int64_t group = cfg_.micro_batch * cfg_.accumulate;
  const std::int64_t updates_per_epoch = (n + group - 1) / group;
  if (persist) result.best_checkpoint = opts.out_dir / "best";

  // F1 of the model currently stored as best; survives resumes through the
  // checkpoint metadata.
  double saved_best = -1;
  if (persist && opts.resume && fs::exists(opts.out_dir / "best" / "metadata.json")) {
    saved_best = read_checkpoint(opts.out_dir / "best").metadata.value("val_f1", -1.0);
  }

  auto evaluate_now = [&](bool count) {
    const auto report = evaluate_dataset(model_, val);
    EvalRecord rec{state_.step, state_.epoch, report.dataset_f1(), report.dataset_auc(), false};
    if (rec.f1 > saved_best) {
      saved_best = rec.f1;
      if (persist) {
        save_model(opts.out_dir / "best", model_, {{"val_f1", rec.f1}, {"step", rec.step}, {"epoch", rec.epoch}});
      }
    }
    // Out-of-schedule evaluations leave the patience bookkeeping as an
    // uninterrupted run would have it.
    if (count) {
      ++state_.evaluations;
      rec.improved = rec.f1 > state_.best_f1;
      if (rec.improved) {
        state_.best_f1 = rec.f1;
        state_.best_epoch = rec.epoch;
        state_.best_step = rec.step;
        state_.epochs_since_best = 0;
      } else {
        ++state_.epochs_since_best;
      }
    }
    result.evals.push_back(rec);
    if (log.is_open()) log << eval_json(rec).dump() << '\n';
    if (opts.on_eval) opts.on_eval(rec);
    return rec;
  };

  std::string reason;
  while (reason.empty() && state_.epoch < cfg_.epochs) {
    const auto order = epoch_order(train.size(), cfg_.seed, state_.epoch);
    std::int64_t update_in_epoch = state_.cursor / group;
    StepRecord acc{};
    std::int64_t acc_samples = 0;
    auto flush = [&]() {
      const double lr = lr_for_update(update_in_epoch, updates_per_epoch);
      apply_update(lr);
      ++update_in_epoch;
      StepRecord rec{state_.step, state_.epoch, lr,
                     {acc.loss.total / static_cast<double>(acc_samples), acc.loss.seg / static_cast<double>(acc_samples),
                      acc.loss.edge / static_cast<double>(acc_samples)}};
      result.steps.push_back(rec);
      if (log.is_open()) log << step_json(rec).dump() << '\n';
      if (opts.on_step) opts.on_step(rec);
      acc = {};
      acc_samples = 0;
    };

    while (state_.cursor < n) {
      const std::int64_t end = std::min(n, state_.cursor + cfg_.micro_batch);
      for (std::int64_t i = state_.cursor; i < end; ++i) {
        const auto idx = order[static_cast<std::size_t>(i)];
        Sample s = train.get(idx);
        Rng rng = Rng(cfg_.seed)
                      .derive("augment")
                      .derive(hash_string(s.source_id) ^ mix64(static_cast<std::uint64_t>(state_.epoch)));
        const auto terms = accumulate(prepare(augment(s, cfg_.augmentation, rng)));
        acc.loss.total += terms.total;
        acc.loss.seg += terms.seg;
        acc.loss.edge += terms.edge;
        ++acc_samples;
      }
      state_.cursor = end;
      if (++pending_micro_ >= cfg_.accumulate) flush();
      if (cfg_.max_steps > 0 && state_.step >= cfg_.max_steps) {
        reason = "max_steps";
        break;
      }
    }
    if (!reason.empty()) break;
    if (pending_samples_ > 0) flush();  // partial group at the end of an epoch

    ++state_.epoch;
    state_.cursor = 0;
    if (state_.epoch % cfg_.eval_every == 0 || state_.epoch == cfg_.epochs) {
      // Evaluation is attributed to the epoch just completed.
      --state_.epoch;
      const auto rec = evaluate_now(true);
      ++state_.epoch;
      if (cfg_.target_f1 > 0 && rec.f1 >= cfg_.target_f1) {
        reason = "target_f1";
      } else if (state_.epochs_since_best >= cfg_.early_stop_patience) {
        reason = "early_stop";
      }
    }
    if (persist) save_state(opts.out_dir / "last");
  }
  if (reason.empty()) reason = "epochs";

  if (reason == "max_steps") {
    if (persist) save_state(opts.out_dir / "last");
    evaluate_now(false);
  }
  result.state = state_;
  result.best_f1 = saved_best;
  result.stop_reason = reason;
  return result;
}

}  // namespace imloc
