#pragma once

#include <string>
#include <vector>

#include "bcareid/embedder.hpp"

namespace bcareid {

enum class ProtocolKind { kStandard, kNoBias };

struct Protocol {
  ProtocolKind kind = ProtocolKind::kStandard;
  std::string channel;  // required for kNoBias

  static Protocol standard() { return {}; }
  static Protocol nobias(std::string channel) { return {ProtocolKind::kNoBias, std::move(channel)}; }
  std::string describe() const;
};

struct QueryRanking {
  std::size_t query = 0;               // row in the embedding set
  std::vector<std::size_t> gallery;    // retained rows, nearest first
  std::vector<double> distances;       // aligned with gallery
  std::vector<char> positive;          // same identity
  std::vector<std::vector<char>> same_bias;  // [channel][position]
};

struct RankResult {
  std::vector<QueryRanking> queries;
  std::size_t dropped_queries = 0;
  Protocol protocol;
  std::vector<std::string> channels;

  std::size_t channel_index(std::string_view name) const;
  std::size_t longest_list() const;
};

// Ranks every gallery row for every query row by squared Euclidean distance,
// ties by gallery row. Standard protocol drops gallery items sharing identity
// and camera with the query; nobias additionally drops wrong-identity items
// sharing the query's label on the protocol channel. Queries left without a
// positive are dropped and counted. Bias labels are read only for the
// exclusion rule and the same_bias masks.
RankResult rank_gallery(const EmbeddingSet& emb, const Protocol& protocol = Protocol::standard());

struct RetrievalMetrics {
  std::vector<double> cmc;  // cmc[k-1] = fraction with a positive in the top k
  double mean_ap = 0.0;
  std::vector<double> average_precision;  // per retained query

  double rank(std::size_t k) const;
};

// Throws EvaluationError when no query was retained.
RetrievalMetrics cmc_map(const RankResult& rr, std::size_t max_rank = 50);

enum class Polarity { kNegative, kPositive };

// curve[r-1] = share of queries (among those with >= r retained items) whose
// rank-r item has the requested identity relation and the query's label.
std::vector<double> same_bias_rank_prob(const RankResult& rr, std::string_view channel,
                                        Polarity polarity, std::size_t max_rank);

// Mean of the first k curve values.
double nauc(std::span<const double> curve, std::size_t k = 10);

}  // namespace bcareid
