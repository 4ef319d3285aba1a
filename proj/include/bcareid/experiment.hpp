#pragma once

#include <string>
#include <vector>

#include "bcareid/config.hpp"
#include "bcareid/embedder.hpp"
#include "bcareid/report.hpp"
#include "bcareid/trainer.hpp"

namespace bcareid {

// Synthetic data from cfg.generator, then the query/gallery split.
SplitResult prepare_dataset(const RunConfig& cfg);

struct BranchRun {
  TrainResult train;
  EmbeddingSet embeddings;  // every split, in dataset order
};

BranchRun run_branch(const Dataset& ds, const RunConfig& cfg, const std::string& name = "branch");

EvaluateOptions evaluate_options(const RunConfig& cfg);

struct SweepRow {
  double lambda_db = 0.0;
  double rank1 = 0.0;
  double mean_ap = 0.0;
  double probe_accuracy = 0.0;
  double nauc_neg = 0.0;
  double nauc_pos = 0.0;
};

// One train + embed + evaluate + probe cycle per lambda_db, all sharing the
// base config's seed. Statistics use base.branch.bias_channel.
std::vector<SweepRow> lambda_sweep(const Dataset& ds, const RunConfig& base, BranchMode mode,
                                   std::span<const double> lambdas);

std::string sweep_csv(std::span<const SweepRow> rows);

}  // namespace bcareid
