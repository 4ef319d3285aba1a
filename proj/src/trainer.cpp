#include <cmath>
#include <set>
#include <sstream>

#include "bcareid/errors.hpp"
#include "bcareid/sampler.hpp"
#include "bcareid/trainer.hpp"

namespace bcareid {

std::string_view to_string(BranchMode m) {
  return m == BranchMode::kReduce ? "reduce" : "enhance";
}

std::optional<BranchMode> parse_mode(std::string_view s) {
  if (s == "reduce") return BranchMode::kReduce;
  if (s == "enhance") return BranchMode::kEnhance;
  return std::nullopt;
}

double BranchConfig::effective_lambda_db() const {
  if (lambda_db) return *lambda_db;
  if (mode == BranchMode::kReduce) return 0.01;
  return bias_channel == "pose" ? 0.05 : 0.01;
}

CombinedWeights BranchConfig::weights() const {
  return {lambda_dr, effective_lambda_db(), margin_dr, margin_db, bias_hinge};
}

EncoderShape BranchConfig::encoder_shape(int input_dim) const {
  return {input_dim, hidden, emb_dim, leaky_slope};
}

void BranchConfig::validate() const {
  if (!(lambda_dr >= 0.0)) throw ConfigError("lambda_dr must be >= 0");
  if (!(effective_lambda_db() >= 0.0))
    throw ConfigError("lambda_db must be >= 0; choose the sign with mode");
  if (lambda_dr == 0.0 && effective_lambda_db() == 0.0)
    throw ConfigError("lambda_dr and lambda_db are both zero");
  if (effective_lambda_db() > 0.0 && bias_channel.empty())
    throw ConfigError("lambda_db > 0 requires bias_channel");
  if (!(margin_dr >= 0.0) || !(margin_db >= 0.0)) throw ConfigError("margins must be >= 0");
  if (p < 2) throw ConfigError("P must be >= 2");
  if (k < 2) throw ConfigError("K must be >= 2");
  if (epochs < 0) throw ConfigError("epochs must be >= 0");
  if (!(base_rate >= 0.0)) throw ConfigError("base_rate must be >= 0");
  if (emb_dim < 1) throw ConfigError("emb_dim must be >= 1");
  for (int h : hidden)
    if (h < 1) throw ConfigError("hidden widths must be >= 1");
}

std::string TrainLog::to_csv() const {
  std::ostringstream out;
  out.precision(17);
  out << "epoch,loss_dr,loss_db,active_frac_dr,active_frac_db,rate,skipped\n";
  for (const auto& e : epochs)
    out << e.epoch << ',' << e.loss_dr << ',' << e.loss_db << ',' << e.active_frac_dr << ','
        << e.active_frac_db << ',' << e.rate << ',' << e.skipped << '\n';
  return out.str();
}

std::size_t batches_per_epoch(const Dataset& ds, const BranchConfig& cfg) {
  const std::size_t batch = static_cast<std::size_t>(cfg.p) * static_cast<std::size_t>(cfg.k);
  const std::size_t n = ds.count(Split::kTrain);
  return std::max<std::size_t>(1, (n + batch - 1) / batch);
}

TrainState init_train_state(const Dataset& ds, const BranchConfig& cfg) {
  cfg.validate();
  Rng rng = derive_rng(cfg.seed, "encoder-init");
  TrainState s;
  s.params = init_encoder(cfg.encoder_shape(static_cast<int>(ds.feature_dim)), rng);
  s.adam = AdamState::for_params(s.params);
  return s;
}

namespace {

std::span<const int> bias_labels(const Batch& b, std::optional<std::size_t> channel) {
  if (!channel) return {};
  return b.bias[*channel];
}

bool has_two_classes(std::span<const int> labels) {
  for (int v : labels)
    if (v != labels.front()) return true;
  return false;
}

}  // namespace

BatchGradient batch_gradient(const Dataset& ds, const BranchConfig& cfg,
                             const EncoderParams& params, const Batch& batch) {
  std::optional<std::size_t> channel;
  if (!cfg.bias_channel.empty()) channel = ds.channel_index(cfg.bias_channel);
  if (!channel && cfg.effective_lambda_db() > 0.0) ds.require_channel(cfg.bias_channel);
  const Matrix inputs = ds.feature_matrix(batch.indices);
  auto enc = encode(params, inputs);
  auto loss = combined_loss(enc.embeddings, batch.ids, bias_labels(batch, channel), cfg.mode,
                            cfg.weights());
  auto grads = backprop(enc.tape, loss.total.gradient);
  return {std::move(loss), std::move(grads)};
}

void run_epochs(const Dataset& ds, const BranchConfig& cfg, TrainState& state, TrainLog& log,
                int until_epoch) {
  cfg.validate();
  if (until_epoch > cfg.epochs) throw ConfigError("cannot train past the configured epochs");
  std::optional<std::size_t> channel;
  if (!cfg.bias_channel.empty()) channel = ds.channel_index(cfg.bias_channel);
  if (!channel && cfg.effective_lambda_db() > 0.0) ds.require_channel(cfg.bias_channel);

  bool dataset_has_two_classes = false;
  if (channel) {
    std::set<int> classes;
    for (const auto& s : ds.samples)
      if (s.split == Split::kTrain) classes.insert(s.bias[*channel]);
    dataset_has_two_classes = classes.size() >= 2;
  }
  const bool bias_active = channel && cfg.effective_lambda_db() > 0.0;

  const Schedule schedule{cfg.base_rate, cfg.epochs};
  const std::size_t n_batches = batches_per_epoch(ds, cfg);

  for (int epoch = state.epoch; epoch < until_epoch; ++epoch) {
    const double rate = schedule_rate(schedule, epoch);
    PkSampler sampler(ds, cfg.p, cfg.k, derive_rng(cfg.seed, "batches", static_cast<std::uint64_t>(epoch)));
    EpochLog entry;
    entry.epoch = epoch + 1;
    entry.rate = rate;
    std::size_t bias_batches = 0;
    for (std::size_t b = 0; b < n_batches; ++b) {
      std::optional<BatchGradient> step;
      for (int attempt = 0; attempt <= kBatchRetries && !step; ++attempt) {
        Batch batch = sampler.next();
        if (bias_active && dataset_has_two_classes && !has_two_classes(batch.bias[*channel]))
          continue;
        try {
          step = batch_gradient(ds, cfg, state.params, batch);
        } catch (const BatchCompositionError&) {
          if (attempt == kBatchRetries) throw;
        }
      }
      if (!step)
        throw BatchCompositionError("epoch " + std::to_string(epoch + 1) + ", batch " +
                                    std::to_string(b + 1) + ": no valid batch after " +
                                    std::to_string(kBatchRetries) + " retries");
      const auto& loss = step->loss;
      if (!std::isfinite(loss.total.value) || !step->grads.all_finite())
        throw TrainingError("non-finite loss at epoch " + std::to_string(epoch + 1) + ", batch " +
                            std::to_string(b + 1));
      entry.loss_dr += loss.reid.value / static_cast<double>(loss.reid.selection.size());
      entry.active_frac_dr += loss.reid.active_fraction();
      if (!loss.bias.selection.empty()) {
        const std::size_t valid = loss.bias.selection.size() - loss.bias.skipped_anchors;
        entry.loss_db += valid ? loss.bias.value / static_cast<double>(valid) : 0.0;
        entry.active_frac_db += loss.bias.active_fraction();
        entry.skipped += loss.bias.skipped_anchors;
        ++bias_batches;
      }
      if (!step->grads.all_zero()) {
        adam_step(state.params, step->grads, state.adam, rate);
        ++entry.updates;
      }
    }
    entry.loss_dr /= static_cast<double>(n_batches);
    entry.active_frac_dr /= static_cast<double>(n_batches);
    if (bias_batches) {
      entry.loss_db /= static_cast<double>(bias_batches);
      entry.active_frac_db /= static_cast<double>(bias_batches);
    }
    log.epochs.push_back(entry);
    state.epoch = epoch + 1;
  }
}

TrainResult train_branch(const Dataset& ds, const BranchConfig& cfg) {
  TrainResult r{init_train_state(ds, cfg), {}};
  run_epochs(ds, cfg, r.state, r.log, cfg.epochs);
  return r;
}

}  // namespace bcareid
