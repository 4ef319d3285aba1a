#pragma once

#include <optional>
#include <string>
#include <vector>

#include "bcareid/config.hpp"
#include "bcareid/evaluation.hpp"
#include "bcareid/probe.hpp"

namespace bcareid {

struct ChannelReport {
  std::string channel;
  std::optional<ProbeReport> probe;
  std::vector<double> p_neg;  // same-bias negatives by rank
  std::vector<double> p_pos;  // same-bias positives by rank
  double nauc_neg = 0.0;
  double nauc_pos = 0.0;
  std::size_t nauc_k = 0;

  std::string curves_csv() const;
};

struct EvalReport {
  std::string protocol;
  RetrievalMetrics metrics;
  std::size_t queries = 0;
  std::size_t dropped_queries = 0;
  std::vector<ChannelReport> channels;
  std::string config;  // echo of the resolved run config

  double rank1() const { return metrics.rank(1); }
  const ChannelReport& channel(std::string_view name) const;

  std::string to_json() const;
  std::string metrics_csv() const;
};

struct EvaluateOptions {
  EvalSettings settings;
  ProbeConfig probe;
  bool run_probe = true;
  std::vector<std::string> channels;  // empty: every channel in the set
};

// Ranks query against gallery rows under `protocol`, then fills retrieval
// metrics, same-bias rank curves and (optionally) probe accuracy per channel.
EvalReport evaluate_embeddings(const EmbeddingSet& emb, const Protocol& protocol,
                               const EvaluateOptions& opts);

}  // namespace bcareid
