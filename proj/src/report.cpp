#include <json.hpp>
#include <sstream>

#include "bcareid/errors.hpp"
#include "bcareid/report.hpp"
#include "bcareid/text.hpp"

namespace bcareid {

namespace {

std::string fmt(double v) { return format_double(v); }

}  // namespace

std::string ChannelReport::curves_csv() const {
  std::string out = "rank,p_neg,p_pos\n";
  for (std::size_t r = 0; r < p_neg.size(); ++r)
    out += std::to_string(r + 1) + "," + fmt(p_neg[r]) + "," + fmt(p_pos[r]) + "\n";
  return out;
}

const ChannelReport& EvalReport::channel(std::string_view name) const {
  for (const auto& c : channels)
    if (c.channel == name) return c;
  throw ConfigError("report has no channel '" + std::string(name) + "'");
}

std::string EvalReport::to_json() const {
  nlohmann::ordered_json j;
  j["protocol"] = protocol;
  j["queries"] = queries;
  j["dropped_queries"] = dropped_queries;
  j["rank1"] = metrics.rank(1);
  j["rank5"] = metrics.rank(5);
  j["rank10"] = metrics.rank(10);
  j["mAP"] = metrics.mean_ap;
  j["cmc"] = metrics.cmc;
  auto& chans = j["channels"] = nlohmann::ordered_json::array();
  for (const auto& c : channels) {
    nlohmann::ordered_json cj;
    cj["channel"] = c.channel;
    if (c.probe) {
      cj["probe"] = {{"accuracy", c.probe->accuracy},
                     {"chance", c.probe->chance},
                     {"classes", c.probe->classes},
                     {"train_rows", c.probe->train_rows},
                     {"test_rows", c.probe->test_rows}};
    } else {
      cj["probe"] = nullptr;
    }
    cj["nauc_k"] = c.nauc_k;
    cj["nauc_neg"] = c.nauc_neg;
    cj["nauc_pos"] = c.nauc_pos;
    cj["p_neg"] = c.p_neg;
    cj["p_pos"] = c.p_pos;
    chans.push_back(std::move(cj));
  }
  j["config"] = config;
  return j.dump(2) + "\n";
}

std::string EvalReport::metrics_csv() const {
  std::string header = "protocol,rank1,rank5,rank10,map,queries,dropped";
  std::string row = protocol + "," + fmt(metrics.rank(1)) + "," + fmt(metrics.rank(5)) + "," +
                    fmt(metrics.rank(10)) + "," + fmt(metrics.mean_ap) + "," +
                    std::to_string(queries) + "," + std::to_string(dropped_queries);
  for (const auto& c : channels) {
    header += "," + c.channel + "_probe_acc," + c.channel + "_nauc_neg," + c.channel + "_nauc_pos";
    row += "," + (c.probe ? fmt(c.probe->accuracy) : std::string()) + "," + fmt(c.nauc_neg) + "," +
           fmt(c.nauc_pos);
  }
  return header + "\n" + row + "\n";
}

EvalReport evaluate_embeddings(const EmbeddingSet& emb, const Protocol& protocol,
                               const EvaluateOptions& opts) {
  const auto rr = rank_gallery(emb, protocol);
  EvalReport report;
  report.protocol = protocol.describe();
  report.metrics = cmc_map(rr, opts.settings.max_rank);
  report.queries = rr.queries.size();
  report.dropped_queries = rr.dropped_queries;

  std::vector<std::string> names = opts.channels;
  if (names.empty())
    for (const auto& c : emb.meta.channels) names.push_back(c.name);
  const std::size_t depth = std::min(opts.settings.max_rank, rr.longest_list());
  for (const auto& name : names) {
    ChannelReport c;
    c.channel = name;
    c.p_neg = same_bias_rank_prob(rr, name, Polarity::kNegative, depth);
    c.p_pos = same_bias_rank_prob(rr, name, Polarity::kPositive, depth);
    c.nauc_k = std::min(opts.settings.nauc_k, depth);
    c.nauc_neg = nauc(c.p_neg, c.nauc_k);
    c.nauc_pos = nauc(c.p_pos, c.nauc_k);
    if (opts.run_probe) c.probe = probe_embeddings(emb, name, opts.probe);
    report.channels.push_back(std::move(c));
  }
  return report;
}

}  // namespace bcareid
