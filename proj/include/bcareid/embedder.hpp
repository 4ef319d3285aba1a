#pragma once

#include <optional>
#include <string>
#include <vector>

#include "bcareid/dataset.hpp"
#include "bcareid/numerics.hpp"

namespace bcareid {

struct BranchSpan {
  std::string branch;
  Eigen::Index begin = 0;
  Eigen::Index end = 0;  // exclusive
  bool operator==(const BranchSpan&) const = default;
};

// Per-row annotations carried alongside embeddings. The embedding
// computation itself never reads them.
struct SampleMeta {
  std::vector<int> ids;
  std::vector<int> cameras;
  std::vector<Split> splits;
  std::vector<Channel> channels;
  std::vector<std::vector<int>> bias;  // [channel][row]

  std::size_t size() const { return ids.size(); }
  bool aligned_with(const SampleMeta& other) const;
  std::optional<std::size_t> channel_index(std::string_view name) const;
  std::size_t require_channel(std::string_view name) const;
};

struct EmbeddingSet {
  Matrix embeddings;  // [n x D]
  SampleMeta meta;
  std::vector<BranchSpan> provenance;

  Eigen::Index dim() const { return embeddings.cols(); }
  std::size_t size() const { return meta.size(); }

  // Checks the provenance spans tile [0, D).
  void validate() const;

  // Rows whose split is in `splits`, in original order.
  EmbeddingSet subset(std::span<const Split> splits) const;

  // Views a dataset (or an embedding CSV loaded as one) as an embedding set.
  static EmbeddingSet from_dataset(const Dataset& ds, const std::string& branch = "input");
  Dataset to_dataset() const;
};

struct EmbedOptions {
  bool l2_normalize = false;
  std::string branch = "branch";
};

// Applies the encoder to every sample whose split is in `splits` (all when empty).
EmbeddingSet embed_all(const EncoderParams& params, const Dataset& ds,
                       std::span<const Split> splits = {}, const EmbedOptions& opts = {});

// Column-wise concatenation of aligned sets. Throws AlignmentError when the
// sets do not describe the same samples in the same order.
EmbeddingSet concat(std::span<const EmbeddingSet> sets);

}  // namespace bcareid
