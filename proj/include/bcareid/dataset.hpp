#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "bcareid/numerics.hpp"
#include "bcareid/rng.hpp"

namespace bcareid {

enum class Split { kTrain, kQuery, kGallery };

std::string_view to_string(Split s);
std::optional<Split> parse_split(std::string_view s);

// A named categorical annotation (pose, camera, part, ...) and its class set.
struct Channel {
  std::string name;
  std::vector<std::string> classes;

  std::optional<int> index_of(std::string_view label) const;
  bool operator==(const Channel&) const = default;
};

struct Sample {
  std::vector<double> features;
  int id = 0;
  int camera = 0;
  std::vector<int> bias;  // class index per declared channel, aligned with Dataset::channels
  Split split = Split::kTrain;
};

struct ChannelSpec {
  std::string name;
  int classes = 2;
  int latent_dim = 8;
  double gain = 1.0;
};

struct GeneratorConfig {
  int n_ids = 100;
  int samples_per_id = 8;
  int d_id = 16;
  int d_in = 32;
  double sigma = 0.1;
  std::uint64_t mixing_seed = 7;
  int n_cameras = 2;             // used only when no channel is named "camera"
  double train_fraction = 0.5;   // share of identities tagged train
  std::vector<ChannelSpec> channels = {{"pose", 2, 8, 1.0}};

  void validate() const;
};

struct Dataset {
  std::string name;
  std::vector<Channel> channels;
  std::vector<Sample> samples;
  std::size_t feature_dim = 0;
  std::optional<GeneratorConfig> generator;
  std::uint64_t seed = 0;

  std::optional<std::size_t> channel_index(std::string_view name) const;
  std::size_t require_channel(std::string_view name) const;  // throws ConfigError
  const std::string& label(const Sample& s, std::size_t channel) const;

  std::vector<std::size_t> indices(Split split) const;
  Matrix feature_matrix(std::span<const std::size_t> rows) const;
  std::size_t count(Split split) const;

  // Throws DataError naming the first violated invariant.
  void validate() const;
};

// Label-level equality: channel names, per-sample label strings, ids,
// cameras, splits and features (bitwise) must all agree.
bool same_content(const Dataset& a, const Dataset& b);

// Generates samples as A*u_id + sum_c gain_c * B_c * v_{c,class} + sigma * noise.
// Identities [0, train_fraction * n_ids) are tagged train, the rest gallery;
// run split_query_gallery afterwards to carve out queries.
Dataset generate_synthetic(const GeneratorConfig& cfg, std::uint64_t seed);

// CSV: id,camera,split,<channels...>,f0..f{d-1} (or e0.. for embeddings).
Dataset load_dataset(const std::filesystem::path& path);
Dataset parse_dataset_csv(std::string_view text, std::string name = "csv");
void save_dataset(const Dataset& ds, const std::filesystem::path& path,
                  std::string_view feature_prefix = "f");
std::string dataset_to_csv(const Dataset& ds, std::string_view feature_prefix = "f");

struct SplitResult {
  Dataset dataset;
  std::size_t dropped_queries = 0;
};

// Tags a `fraction` of each held-out identity's samples as queries. Queries
// without a gallery positive on another camera are removed and counted.
SplitResult split_query_gallery(const Dataset& ds, double fraction, Rng& rng);

}  // namespace bcareid
