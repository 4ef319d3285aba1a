#include <algorithm>

#include "bcareid/embedder.hpp"
#include "bcareid/errors.hpp"

namespace bcareid {

bool SampleMeta::aligned_with(const SampleMeta& o) const {
  if (ids != o.ids || cameras != o.cameras || splits != o.splits) return false;
  if (channels.size() != o.channels.size()) return false;
  // class indices depend on parse order, so compare labels
  for (std::size_t c = 0; c < channels.size(); ++c) {
    if (channels[c].name != o.channels[c].name) return false;
    for (std::size_t i = 0; i < ids.size(); ++i)
      if (channels[c].classes.at(bias[c][i]) != o.channels[c].classes.at(o.bias[c][i]))
        return false;
  }
  return true;
}

std::optional<std::size_t> SampleMeta::channel_index(std::string_view name) const {
  for (std::size_t c = 0; c < channels.size(); ++c)
    if (channels[c].name == name) return c;
  return std::nullopt;
}

std::size_t SampleMeta::require_channel(std::string_view name) const {
  if (auto c = channel_index(name)) return *c;
  throw ConfigError("embeddings carry no bias channel '" + std::string(name) + "'");
}

void EmbeddingSet::validate() const {
  if (static_cast<std::size_t>(embeddings.rows()) != meta.size())
    throw AlignmentError("embedding rows differ from annotation count");
  Eigen::Index at = 0;
  for (const auto& s : provenance) {
    if (s.begin != at || s.end < s.begin) throw AlignmentError("provenance spans do not tile the descriptor");
    at = s.end;
  }
  if (at != embeddings.cols()) throw AlignmentError("provenance spans do not cover the descriptor");
}

namespace {

SampleMeta meta_rows(const SampleMeta& m, std::span<const std::size_t> rows) {
  SampleMeta out;
  out.channels = m.channels;
  out.bias.resize(m.channels.size());
  for (std::size_t r : rows) {
    out.ids.push_back(m.ids[r]);
    out.cameras.push_back(m.cameras[r]);
    out.splits.push_back(m.splits[r]);
    for (std::size_t c = 0; c < m.channels.size(); ++c) out.bias[c].push_back(m.bias[c][r]);
  }
  return out;
}

SampleMeta dataset_meta(const Dataset& ds, std::span<const std::size_t> rows) {
  SampleMeta m;
  m.channels = ds.channels;
  m.bias.resize(ds.channels.size());
  for (std::size_t r : rows) {
    const auto& s = ds.samples[r];
    m.ids.push_back(s.id);
    m.cameras.push_back(s.camera);
    m.splits.push_back(s.split);
    for (std::size_t c = 0; c < ds.channels.size(); ++c) m.bias[c].push_back(s.bias[c]);
  }
  return m;
}

std::vector<std::size_t> select_rows(const Dataset& ds, std::span<const Split> splits) {
  std::vector<std::size_t> rows;
  for (std::size_t i = 0; i < ds.samples.size(); ++i)
    if (splits.empty() ||
        std::find(splits.begin(), splits.end(), ds.samples[i].split) != splits.end())
      rows.push_back(i);
  return rows;
}

}  // namespace

EmbeddingSet EmbeddingSet::subset(std::span<const Split> splits) const {
  std::vector<std::size_t> rows;
  for (std::size_t i = 0; i < size(); ++i)
    if (std::find(splits.begin(), splits.end(), meta.splits[i]) != splits.end()) rows.push_back(i);
  EmbeddingSet out;
  out.meta = meta_rows(meta, rows);
  out.embeddings.resize(static_cast<Eigen::Index>(rows.size()), embeddings.cols());
  for (std::size_t r = 0; r < rows.size(); ++r)
    out.embeddings.row(static_cast<Eigen::Index>(r)) = embeddings.row(static_cast<Eigen::Index>(rows[r]));
  out.provenance = provenance;
  return out;
}

EmbeddingSet EmbeddingSet::from_dataset(const Dataset& ds, const std::string& branch) {
  const auto rows = select_rows(ds, {});
  EmbeddingSet out;
  out.embeddings = ds.feature_matrix(rows);
  out.meta = dataset_meta(ds, rows);
  out.provenance = {{branch, 0, out.embeddings.cols()}};
  return out;
}

Dataset EmbeddingSet::to_dataset() const {
  Dataset ds;
  ds.name = "embeddings";
  ds.channels = meta.channels;
  ds.feature_dim = static_cast<std::size_t>(embeddings.cols());
  for (std::size_t i = 0; i < size(); ++i) {
    Sample s;
    s.id = meta.ids[i];
    s.camera = meta.cameras[i];
    s.split = meta.splits[i];
    for (std::size_t c = 0; c < meta.channels.size(); ++c) s.bias.push_back(meta.bias[c][i]);
    const auto row = embeddings.row(static_cast<Eigen::Index>(i));
    s.features.assign(row.data(), row.data() + row.size());
    ds.samples.push_back(std::move(s));
  }
  return ds;
}

EmbeddingSet embed_all(const EncoderParams& params, const Dataset& ds,
                       std::span<const Split> splits, const EmbedOptions& opts) {
  if (static_cast<Eigen::Index>(ds.feature_dim) != params.input_dim())
    throw ConfigError("dataset feature dim " + std::to_string(ds.feature_dim) +
                      " != encoder input dim " + std::to_string(params.input_dim()));
  const auto rows = select_rows(ds, splits);
  EmbeddingSet out;
  if (rows.empty()) {
    out.embeddings.resize(0, params.output_dim());
  } else {
    out.embeddings = encode_only(params, ds.feature_matrix(rows));
    if (opts.l2_normalize)
      for (Eigen::Index r = 0; r < out.embeddings.rows(); ++r) {
        const double norm = out.embeddings.row(r).norm();
        if (norm > 0.0) out.embeddings.row(r) /= norm;
      }
  }
  out.meta = dataset_meta(ds, rows);
  out.provenance = {{opts.branch, 0, out.embeddings.cols()}};
  return out;
}

EmbeddingSet concat(std::span<const EmbeddingSet> sets) {
  if (sets.empty()) throw AlignmentError("concat needs at least one embedding set");
  const auto& first = sets.front();
  Eigen::Index total = 0;
  for (const auto& s : sets) {
    if (!s.meta.aligned_with(first.meta))
      throw AlignmentError("embedding sets describe different samples");
    if (s.embeddings.rows() != first.embeddings.rows())
      throw AlignmentError("embedding sets have different row counts");
    total += s.dim();
  }
  EmbeddingSet out;
  out.meta = first.meta;
  out.embeddings.resize(first.embeddings.rows(), total);
  Eigen::Index at = 0;
  for (const auto& s : sets) {
    out.embeddings.middleCols(at, s.dim()) = s.embeddings;
    for (const auto& span : s.provenance)
      out.provenance.push_back({span.branch, span.begin + at, span.end + at});
    at += s.dim();
  }
  return out;
}

}  // namespace bcareid
