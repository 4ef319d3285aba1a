#include "bcareid/errors.hpp"
#include "bcareid/text.hpp"
#include "bcareid/experiment.hpp"

namespace bcareid {

SplitResult prepare_dataset(const RunConfig& cfg) {
  const Dataset raw = generate_synthetic(cfg.generator, cfg.seed);
  Rng rng = derive_rng(cfg.seed, "query-split");
  return split_query_gallery(raw, cfg.query_fraction, rng);
}

BranchRun run_branch(const Dataset& ds, const RunConfig& cfg, const std::string& name) {
  RunConfig c = cfg;
  c.sync_seeds();
  BranchRun run;
  run.train = train_branch(ds, c.branch);
  run.embeddings = embed_all(run.train.state.params, ds, {}, {c.eval.l2_normalize, name});
  return run;
}

EvaluateOptions evaluate_options(const RunConfig& cfg) {
  EvaluateOptions o;
  o.settings = cfg.eval;
  o.probe = cfg.probe;
  o.probe.seed = cfg.seed;
  return o;
}

std::vector<SweepRow> lambda_sweep(const Dataset& ds, const RunConfig& base, BranchMode mode,
                                   std::span<const double> lambdas) {
  if (lambdas.empty()) throw ConfigError("lambda list is empty");
  const std::string& channel = base.branch.bias_channel;
  if (channel.empty()) throw ConfigError("sweep needs a bias channel");
  std::vector<SweepRow> rows;
  for (double lambda : lambdas) {
    if (!(lambda >= 0.0)) throw ConfigError("sweep lambdas must be >= 0");
    RunConfig cfg = base;
    cfg.branch.mode = mode;
    cfg.branch.lambda_db = lambda;
    const auto run = run_branch(ds, cfg);
    auto opts = evaluate_options(cfg);
    opts.channels = {channel};
    const auto report = evaluate_embeddings(run.embeddings, Protocol::standard(), opts);
    const auto& ch = report.channel(channel);
    rows.push_back({lambda, report.rank1(), report.metrics.mean_ap, ch.probe->accuracy,
                    ch.nauc_neg, ch.nauc_pos});
  }
  return rows;
}

std::string sweep_csv(std::span<const SweepRow> rows) {
  std::string out = "lambda_db,rank1,map,probe_acc,nauc_neg,nauc_pos\n";
  for (const auto& r : rows) {
    for (double v : {r.lambda_db, r.rank1, r.mean_ap, r.probe_accuracy, r.nauc_neg})
      out += format_double(v) + ",";
    out += format_double(r.nauc_pos) + "\n";
  }
  return out;
}

}  // namespace bcareid
