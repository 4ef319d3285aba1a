#pragma once

#include <cstddef>
#include <vector>

#include "bcareid/dataset.hpp"

namespace bcareid {

// P identities x K instances, stored identity-major.
struct Batch {
  std::vector<std::size_t> indices;  // rows of the source dataset
  std::vector<int> ids;
  std::vector<int> cameras;
  std::vector<std::vector<int>> bias;  // [channel][position]

  std::size_t size() const { return indices.size(); }
};

// Draws P x K batches from the train split. Identities are visited in a
// shuffled cycle: none repeats until every identity has been drawn once.
// Instances are drawn without replacement when an identity has >= K samples,
// with replacement otherwise.
class PkSampler {
 public:
  PkSampler(const Dataset& ds, int p, int k, Rng rng);

  Batch next();
  int p() const { return p_; }
  int k() const { return k_; }
  std::size_t identity_count() const { return by_id_.size(); }

 private:
  void refill();

  const Dataset* ds_;
  int p_;
  int k_;
  Rng rng_;
  std::vector<std::vector<std::size_t>> by_id_;
  std::vector<std::size_t> cycle_;
  std::size_t cursor_ = 0;
};

// One-shot convenience over a fresh sampler.
Batch pk_sample(const Dataset& ds, int p, int k, Rng& rng);

}  // namespace bcareid
