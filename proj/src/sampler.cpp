#include <algorithm>
#include <map>
#include <numeric>

#include "bcareid/errors.hpp"
#include "bcareid/sampler.hpp"

namespace bcareid {

PkSampler::PkSampler(const Dataset& ds, int p, int k, Rng rng)
    : ds_(&ds), p_(p), k_(k), rng_(std::move(rng)) {
  if (p < 1 || k < 1) throw ConfigError("P and K must be >= 1");
  std::map<int, std::vector<std::size_t>> groups;
  for (std::size_t i = 0; i < ds.samples.size(); ++i)
    if (ds.samples[i].split == Split::kTrain) groups[ds.samples[i].id].push_back(i);
  for (auto& [id, rows] : groups) by_id_.push_back(std::move(rows));
  if (by_id_.size() < static_cast<std::size_t>(p))
    throw ConfigError("train split has " + std::to_string(by_id_.size()) +
                      " identities, fewer than P=" + std::to_string(p));
}

void PkSampler::refill() {
  // Identities left over from the previous cycle keep their place at the
  // front so nothing repeats before the cycle completes.
  std::vector<std::size_t> rest(cycle_.begin() + static_cast<std::ptrdiff_t>(cursor_), cycle_.end());
  std::vector<std::size_t> fresh(by_id_.size());
  std::iota(fresh.begin(), fresh.end(), 0);
  std::shuffle(fresh.begin(), fresh.end(), rng_);
  // Avoid drawing the same identity twice in one batch across the boundary.
  std::vector<std::size_t> tail;
  for (std::size_t id : fresh) {
    if (std::find(rest.begin(), rest.end(), id) != rest.end())
      tail.push_back(id);
    else
      rest.push_back(id);
  }
  rest.insert(rest.end(), tail.begin(), tail.end());
  cycle_ = std::move(rest);
  cursor_ = 0;
}

Batch PkSampler::next() {
  if (cycle_.size() - cursor_ < static_cast<std::size_t>(p_)) refill();
  Batch b;
  const std::size_t channels = ds_->channels.size();
  b.bias.resize(channels);
  for (int pi = 0; pi < p_; ++pi) {
    const auto& rows = by_id_[cycle_[cursor_++]];
    std::vector<std::size_t> picks;
    if (rows.size() >= static_cast<std::size_t>(k_)) {
      picks = rows;
      std::shuffle(picks.begin(), picks.end(), rng_);
      picks.resize(static_cast<std::size_t>(k_));
    } else {
      std::uniform_int_distribution<std::size_t> pick(0, rows.size() - 1);
      for (int ki = 0; ki < k_; ++ki) picks.push_back(rows[pick(rng_)]);
    }
    for (std::size_t row : picks) {
      const auto& s = ds_->samples[row];
      b.indices.push_back(row);
      b.ids.push_back(s.id);
      b.cameras.push_back(s.camera);
      for (std::size_t c = 0; c < channels; ++c) b.bias[c].push_back(s.bias[c]);
    }
  }
  return b;
}

Batch pk_sample(const Dataset& ds, int p, int k, Rng& rng) {
  PkSampler sampler(ds, p, k, Rng(rng()));
  return sampler.next();
}

}  // namespace bcareid
