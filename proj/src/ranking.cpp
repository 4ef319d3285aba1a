#include <algorithm>
#include <numeric>

#include "bcareid/errors.hpp"
#include "bcareid/evaluation.hpp"

namespace bcareid {

std::string Protocol::describe() const {
  return kind == ProtocolKind::kStandard ? "standard" : "nobias(" + channel + ")";
}

std::size_t RankResult::channel_index(std::string_view name) const {
  for (std::size_t c = 0; c < channels.size(); ++c)
    if (channels[c] == name) return c;
  throw ConfigError("ranking carries no bias channel '" + std::string(name) + "'");
}

std::size_t RankResult::longest_list() const {
  std::size_t n = 0;
  for (const auto& q : queries) n = std::max(n, q.gallery.size());
  return n;
}

RankResult rank_gallery(const EmbeddingSet& emb, const Protocol& protocol) {
  const auto& m = emb.meta;
  if (static_cast<std::size_t>(emb.embeddings.rows()) != m.size())
    throw AlignmentError("embedding rows differ from annotation count");
  std::vector<std::size_t> queries, gallery;
  for (std::size_t i = 0; i < m.size(); ++i) {
    if (m.splits[i] == Split::kQuery) queries.push_back(i);
    if (m.splits[i] == Split::kGallery) gallery.push_back(i);
  }
  if (queries.empty()) throw EvaluationError("no query samples");
  if (gallery.empty()) throw EvaluationError("no gallery samples");

  std::optional<std::size_t> exclusion_channel;
  if (protocol.kind == ProtocolKind::kNoBias) {
    if (protocol.channel.empty()) throw ConfigError("nobias protocol needs a channel");
    exclusion_channel = m.require_channel(protocol.channel);
  }

  RankResult rr;
  rr.protocol = protocol;
  for (const auto& c : m.channels) rr.channels.push_back(c.name);

  for (std::size_t q : queries) {
    std::vector<std::size_t> kept;
    for (std::size_t g : gallery) {
      const bool same_id = m.ids[g] == m.ids[q];
      if (same_id && m.cameras[g] == m.cameras[q]) continue;
      if (exclusion_channel && !same_id &&
          m.bias[*exclusion_channel][g] == m.bias[*exclusion_channel][q])
        continue;
      kept.push_back(g);
    }
    std::vector<double> dist(kept.size());
    const auto qrow = emb.embeddings.row(static_cast<Eigen::Index>(q));
    for (std::size_t j = 0; j < kept.size(); ++j)
      dist[j] = (qrow - emb.embeddings.row(static_cast<Eigen::Index>(kept[j]))).squaredNorm();
    std::vector<std::size_t> order(kept.size());
    std::iota(order.begin(), order.end(), 0);
    // kept is ascending in gallery row, so a stable sort breaks ties by row.
    std::stable_sort(order.begin(), order.end(),
                     [&](std::size_t a, std::size_t b) { return dist[a] < dist[b]; });

    QueryRanking r;
    r.query = q;
    r.same_bias.resize(m.channels.size());
    bool any_positive = false;
    for (std::size_t j : order) {
      const std::size_t g = kept[j];
      r.gallery.push_back(g);
      r.distances.push_back(dist[j]);
      const bool pos = m.ids[g] == m.ids[q];
      any_positive |= pos;
      r.positive.push_back(pos);
      for (std::size_t c = 0; c < m.channels.size(); ++c)
        r.same_bias[c].push_back(m.bias[c][g] == m.bias[c][q]);
    }
    if (!any_positive) {
      ++rr.dropped_queries;
      continue;
    }
    rr.queries.push_back(std::move(r));
  }
  return rr;
}

double RetrievalMetrics::rank(std::size_t k) const {
  if (k == 0 || cmc.empty()) return 0.0;
  return cmc[std::min(k, cmc.size()) - 1];
}

RetrievalMetrics cmc_map(const RankResult& rr, std::size_t max_rank) {
  if (rr.queries.empty()) throw EvaluationError("no retained queries to score");
  if (max_rank == 0) throw ConfigError("max_rank must be >= 1");
  RetrievalMetrics out;
  out.cmc.assign(max_rank, 0.0);
  for (const auto& q : rr.queries) {
    std::size_t hits = 0;
    double precision_sum = 0.0;
    std::optional<std::size_t> first;
    for (std::size_t i = 0; i < q.positive.size(); ++i) {
      if (!q.positive[i]) continue;
      if (!first) first = i;
      ++hits;
      precision_sum += static_cast<double>(hits) / static_cast<double>(i + 1);
    }
    if (hits == 0) throw EvaluationError("retained query without a positive");
    out.average_precision.push_back(precision_sum / static_cast<double>(hits));
    for (std::size_t k = *first; k < max_rank; ++k) out.cmc[k] += 1.0;
  }
  const double n = static_cast<double>(rr.queries.size());
  for (auto& v : out.cmc) v /= n;
  out.mean_ap = std::accumulate(out.average_precision.begin(), out.average_precision.end(), 0.0) / n;
  return out;
}

std::vector<double> same_bias_rank_prob(const RankResult& rr, std::string_view channel,
                                        Polarity polarity, std::size_t max_rank) {
  const std::size_t c = rr.channel_index(channel);
  if (max_rank == 0) throw ConfigError("max_rank must be >= 1");
  if (rr.longest_list() < max_rank)
    throw EvaluationError("rank " + std::to_string(max_rank) + " exceeds every retained list");
  std::vector<double> hits(max_rank, 0.0), totals(max_rank, 0.0);
  const bool want_positive = polarity == Polarity::kPositive;
  for (const auto& q : rr.queries) {
    const std::size_t n = std::min(max_rank, q.gallery.size());
    for (std::size_t r = 0; r < n; ++r) {
      totals[r] += 1.0;
      if (static_cast<bool>(q.positive[r]) == want_positive && q.same_bias[c][r]) hits[r] += 1.0;
    }
  }
  std::vector<double> curve(max_rank);
  for (std::size_t r = 0; r < max_rank; ++r) curve[r] = hits[r] / totals[r];
  return curve;
}

double nauc(std::span<const double> curve, std::size_t k) {
  if (k == 0 || k > curve.size())
    throw ConfigError("nauc: k=" + std::to_string(k) + " outside curve of length " +
                      std::to_string(curve.size()));
  return std::accumulate(curve.begin(), curve.begin() + static_cast<std::ptrdiff_t>(k), 0.0) /
         static_cast<double>(k);
}

}  // namespace bcareid
