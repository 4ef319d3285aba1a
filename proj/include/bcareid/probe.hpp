#pragma once

#include <cstdint>
#include <span>
#include <string>

#include "bcareid/embedder.hpp"
#include "bcareid/numerics.hpp"

namespace bcareid {

struct ProbeConfig {
  int epochs = 200;    // full-batch
  double rate = 0.01;
  std::uint64_t seed = 0;
};

// PReLU with one learned slope, then a fully connected layer to class scores.
struct ProbeParams {
  double slope = 0.25;
  Matrix weight;  // [classes x dim]
  Vector bias;    // [classes]

  Eigen::Index classes() const { return weight.rows(); }
};

Matrix probe_scores(const ProbeParams& probe, const Matrix& features);

// Mean softmax cross-entropy and its gradient, packed as (slope, weight, bias).
double probe_loss(const ProbeParams& probe, const Matrix& features, std::span<const int> labels,
                  std::vector<double>* grad = nullptr);

// Trains on frozen features with Adam. Throws ConfigError when fewer than two
// classes are present or labels fall outside [0, n_classes).
ProbeParams train_probe(const Matrix& features, std::span<const int> labels, int n_classes,
                        const ProbeConfig& cfg);

double probe_accuracy(const ProbeParams& probe, const Matrix& features, std::span<const int> labels);

struct ProbeReport {
  std::string channel;
  double accuracy = 0.0;
  double chance = 0.0;  // majority-class rate on the test rows
  std::size_t train_rows = 0;
  std::size_t test_rows = 0;
  int classes = 0;
};

// Fits the probe on train-split rows and scores it on query + gallery rows.
// When either side is empty, rows alternate between fit and test by position.
ProbeReport probe_embeddings(const EmbeddingSet& emb, std::string_view channel,
                             const ProbeConfig& cfg);

}  // namespace bcareid
