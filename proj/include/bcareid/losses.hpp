#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "bcareid/numerics.hpp"

namespace bcareid {

struct TripletChoice {
  std::size_t anchor = 0;
  std::size_t positive = 0;
  std::size_t negative = 0;
  double argument = 0.0;  // margin + d2(a, pos) - d2(a, neg)
  bool active = false;    // the hinge passes gradient
  bool valid = true;      // false when the anchor lacked a positive or a negative
};

struct LossOutput {
  double value = 0.0;
  Matrix gradient;  // d value / d embeddings, [n x d]
  std::vector<TripletChoice> selection;
  std::size_t skipped_anchors = 0;

  double active_fraction() const;
};

// Squared Euclidean distances between all rows.
Matrix pairwise_sqdist(const Matrix& embeddings);

// Batch-hard triplet loss: per anchor the farthest same-id sample and the
// nearest other-id sample, sum of [m + d2(a,p) - d2(a,n)]_+.
// Ties resolve to the lowest index. Throws BatchCompositionError if any
// anchor lacks a positive or a negative.
LossOutput reid_hard_loss(const Matrix& embeddings, std::span<const int> ids, double margin);

// Easy-pair bias loss: per anchor the nearest same-bias sample and the
// farthest different-bias sample, identities ignored. Anchors missing either
// are skipped and counted; if all are skipped, BatchCompositionError.
// With hinge=false the [.]_+ is dropped and every valid anchor contributes.
LossOutput bias_easy_loss(const Matrix& embeddings, std::span<const int> bias, double margin,
                          bool hinge = true);

enum class BranchMode { kReduce, kEnhance };

struct CombinedWeights {
  double lambda_dr = 1.0;
  double lambda_db = 0.0;  // stored unsigned; the mode carries the sign
  double margin_dr = 0.3;
  double margin_db = 0.3;
  bool bias_hinge = true;
};

struct CombinedLoss {
  LossOutput total;
  LossOutput reid;
  LossOutput bias;
};

// reduce: lambda_dr * L_Dr - lambda_db * L_Db; enhance: lambda_dr * L_Dr + lambda_db * L_Db.
// The bias term is skipped entirely when lambda_db == 0.
CombinedLoss combined_loss(const Matrix& embeddings, std::span<const int> ids,
                           std::span<const int> bias, BranchMode mode, const CombinedWeights& w);

}  // namespace bcareid
