#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "bcareid/dataset.hpp"
#include "bcareid/losses.hpp"
#include "bcareid/numerics.hpp"
#include "bcareid/sampler.hpp"

namespace bcareid {

struct BranchConfig {
  BranchMode mode = BranchMode::kReduce;
  std::string bias_channel = "pose";
  double lambda_dr = 1.0;
  std::optional<double> lambda_db;  // unset: mode/channel default
  double margin_dr = 0.3;
  double margin_db = 0.3;
  bool bias_hinge = true;
  int p = 16;
  int k = 4;
  int epochs = 60;
  double base_rate = 3e-4;
  std::uint64_t seed = 0;
  std::vector<int> hidden = {64, 64};
  int emb_dim = 64;
  double leaky_slope = 0.01;

  // 0.01 when reducing; when enhancing 0.05 for pose and 0.01 otherwise.
  double effective_lambda_db() const;
  CombinedWeights weights() const;
  EncoderShape encoder_shape(int input_dim) const;
  void validate() const;
};

std::string_view to_string(BranchMode m);
std::optional<BranchMode> parse_mode(std::string_view s);

struct EpochLog {
  int epoch = 0;  // 1-based
  double loss_dr = 0.0;
  double loss_db = 0.0;
  double active_frac_dr = 0.0;
  double active_frac_db = 0.0;
  double rate = 0.0;
  std::size_t skipped = 0;
  std::size_t updates = 0;
};

struct TrainLog {
  std::vector<EpochLog> epochs;
  std::string to_csv() const;
};

struct TrainState {
  EncoderParams params;
  AdamState adam;
  int epoch = 0;  // completed epochs
};

constexpr int kBatchRetries = 10;

TrainState init_train_state(const Dataset& ds, const BranchConfig& cfg);

// Runs epochs [state.epoch, until_epoch) of the schedule defined by cfg.
// Each epoch's batch stream is derived from (seed, epoch), so stopping and
// resuming from a checkpoint reproduces the uninterrupted trajectory.
void run_epochs(const Dataset& ds, const BranchConfig& cfg, TrainState& state, TrainLog& log,
                int until_epoch);

struct TrainResult {
  TrainState state;
  TrainLog log;
};

TrainResult train_branch(const Dataset& ds, const BranchConfig& cfg);

std::size_t batches_per_epoch(const Dataset& ds, const BranchConfig& cfg);

// One batch worth of gradient: exposed so the reduce/enhance symmetry can be
// inspected without running an update.
struct BatchGradient {
  CombinedLoss loss;
  EncoderParams grads;
};
BatchGradient batch_gradient(const Dataset& ds, const BranchConfig& cfg,
                             const EncoderParams& params, const Batch& batch);

}  // namespace bcareid
