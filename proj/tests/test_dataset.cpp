#include <map>
#include <set>

#include <gtest/gtest.h>

#include "bcareid/errors.hpp"
#include "bcareid/sampler.hpp"

namespace bcareid {
namespace {

GeneratorConfig small_cfg() {
  GeneratorConfig c;
  c.n_ids = 20;
  c.samples_per_id = 6;
  return c;
}

TEST(Generator, NoiseAndBiasFreeIdentitiesCoincide) {
  auto c = small_cfg();
  c.sigma = 0.0;
  c.channels[0].gain = 0.0;
  auto ds = generate_synthetic(c, 3);
  ASSERT_EQ(ds.samples.size(), 120u);
  for (std::size_t i = 1; i < ds.samples.size(); ++i) {
    const auto& a = ds.samples[i - 1];
    const auto& b = ds.samples[i];
    if (a.id == b.id) EXPECT_EQ(a.features, b.features);
  }
}

TEST(Generator, Deterministic) {
  auto a = generate_synthetic(small_cfg(), 11);
  auto b = generate_synthetic(small_cfg(), 11);
  EXPECT_EQ(dataset_to_csv(a), dataset_to_csv(b));
  auto c = generate_synthetic(small_cfg(), 12);
  EXPECT_NE(dataset_to_csv(a), dataset_to_csv(c));
}

TEST(Generator, UniformClasses) {
  GeneratorConfig c;
  c.n_ids = 200;
  c.samples_per_id = 10;
  c.channels = {{"pose", 3, 8, 1.0}, {"part", 2, 8, 1.0}};
  auto ds = generate_synthetic(c, 5);
  for (std::size_t ch = 0; ch < 2; ++ch) {
    std::map<int, int> freq;
    for (const auto& s : ds.samples) ++freq[s.bias[ch]];
    double k = ds.channels[ch].classes.size();
    ASSERT_EQ(freq.size(), std::size_t(k));
    for (auto [cls, n] : freq) EXPECT_NEAR(n / 2000.0, 1.0 / k, 0.05) << ds.channels[ch].name;
  }
  EXPECT_EQ(ds.channels[0].classes, (std::vector<std::string>{"frontal", "side", "oblique"}));
}

TEST(Generator, StrongPoseDrivesNearestNeighbour) {
  auto c = small_cfg();
  c.sigma = 0.0;
  c.channels[0].gain = 4.0;
  auto ds = generate_synthetic(c, 9);
  int agree = 0;
  const auto n = ds.samples.size();
  for (std::size_t i = 0; i < n; ++i) {
    double best = 1e300;
    std::size_t arg = 0;
    for (std::size_t j = 0; j < n; ++j) {
      if (j == i || ds.samples[j].id == ds.samples[i].id) continue;
      double d = 0;
      for (std::size_t k = 0; k < ds.feature_dim; ++k) {
        double t = ds.samples[i].features[k] - ds.samples[j].features[k];
        d += t * t;
      }
      if (d < best) best = d, arg = j;
    }
    agree += ds.samples[arg].bias[0] == ds.samples[i].bias[0];
  }
  EXPECT_GT(agree / double(n), 0.5 + 0.1);
}

TEST(Generator, RejectsDegenerate) {
  auto c = small_cfg();
  c.n_ids = 1;
  EXPECT_THROW(generate_synthetic(c, 0), ConfigError);
  c = small_cfg();
  c.samples_per_id = 0;
  EXPECT_THROW(generate_synthetic(c, 0), ConfigError);
}

TEST(Csv, HandFixture) {
  auto ds = parse_dataset_csv(
      "id,camera,split,pose,f0,f1\n"
      "1,0,train,front,0.5,1\n"
      "1,1,train,side,-2,3e-1\n"
      "2,0,gallery,front,0,0\n");
  ASSERT_EQ(ds.channels.size(), 1u);
  EXPECT_EQ(ds.channels[0].name, "pose");
  EXPECT_EQ(ds.channels[0].classes, (std::vector<std::string>{"front", "side"}));
  EXPECT_EQ(ds.feature_dim, 2u);
  ASSERT_EQ(ds.samples.size(), 3u);
  EXPECT_EQ(ds.samples[1].features, (std::vector<double>{-2, 0.3}));
  EXPECT_EQ(ds.samples[1].camera, 1);
  EXPECT_EQ(ds.samples[2].split, Split::kGallery);
}

TEST(Csv, HeaderOnly) {
  auto ds = parse_dataset_csv("id,camera,split,pose,f0\n");
  EXPECT_TRUE(ds.samples.empty());
  EXPECT_NO_THROW(ds.validate());
}

TEST(Csv, Errors) {
  auto row_of = [](const char* text) -> std::pair<std::size_t, std::string> {
    try {
      parse_dataset_csv(text);
    } catch (const ParseError& e) {
      return {e.row, e.column};
    }
    return {0, ""};
  };
  EXPECT_EQ(row_of("id,camera,split,f0,f1\n1,0,train,1,2\n1,0,train,1\n").first, 3u);
  EXPECT_EQ(row_of("id,camera,split,f0\n1,0,test,1\n").second, "split");
  EXPECT_EQ(row_of("id,camera,split,f0\n1,0,train,abc\n").second, "f0");
  EXPECT_EQ(row_of("id,split,f0\n").first, 1u);
}

TEST(Csv, RoundTrip) {
  auto a = generate_synthetic(small_cfg(), 21);
  auto b = parse_dataset_csv(dataset_to_csv(a));
  EXPECT_TRUE(same_content(a, b));
}

TEST(Sampler, Shape) {
  auto ds = generate_synthetic(small_cfg(), 1);
  auto rng = derive_rng(1, "t");
  auto b = pk_sample(ds, 2, 2, rng);
  ASSERT_EQ(b.size(), 4u);
  EXPECT_EQ(b.ids[0], b.ids[1]);
  EXPECT_EQ(b.ids[2], b.ids[3]);
  EXPECT_NE(b.ids[0], b.ids[2]);
}

TEST(Sampler, ReplacementForSingleton) {
  auto ds = parse_dataset_csv(
      "id,camera,split,pose,f0\n"
      "1,0,train,a,0\n"
      "2,0,train,a,1\n2,0,train,b,2\n2,1,train,a,3\n2,1,train,b,4\n");
  auto rng = derive_rng(2, "t");
  PkSampler s(ds, 2, 4, rng);
  auto b = s.next();
  std::size_t ones = 0;
  std::set<std::size_t> twos;
  for (std::size_t i = 0; i < b.size(); ++i) {
    if (b.ids[i] == 1) {
      EXPECT_EQ(b.indices[i], 0u);
      ++ones;
    } else {
      twos.insert(b.indices[i]);
    }
  }
  EXPECT_EQ(ones, 4u);
  EXPECT_EQ(twos.size(), 4u);  // enough samples: no repeats
}

TEST(Sampler, EpochCycling) {
  auto c = small_cfg();
  c.n_ids = 32;
  c.train_fraction = 0.5;
  auto ds = generate_synthetic(c, 4);
  PkSampler s(ds, 4, 2, derive_rng(3, "t"));
  ASSERT_EQ(s.identity_count(), 16u);
  for (int epoch = 0; epoch < 3; ++epoch) {
    std::set<int> seen;
    for (int b = 0; b < 4; ++b)
      for (int id : s.next().ids) seen.insert(id);
    EXPECT_EQ(seen.size(), 16u);
  }
}

TEST(Sampler, BatchInvariantsHold) {
  auto ds = generate_synthetic(small_cfg(), 6);
  PkSampler s(ds, 4, 4, derive_rng(6, "t"));
  for (int t = 0; t < 200; ++t) {
    auto b = s.next();
    ASSERT_EQ(b.size(), 16u);
    std::map<int, int> per_id;
    for (std::size_t i = 0; i < b.size(); ++i) {
      ++per_id[b.ids[i]];
      EXPECT_EQ(ds.samples[b.indices[i]].id, b.ids[i]);
      EXPECT_EQ(ds.samples[b.indices[i]].split, Split::kTrain);
    }
    EXPECT_EQ(per_id.size(), 4u);
    for (auto [id, n] : per_id) EXPECT_EQ(n, 4);
  }
}

TEST(Sampler, TooFewIdentities) {
  auto ds = generate_synthetic(small_cfg(), 1);
  auto rng = derive_rng(0, "t");
  EXPECT_THROW(pk_sample(ds, 11, 2, rng), ConfigError);
}

TEST(Split, BothCamerasNothingDropped) {
  auto ds = parse_dataset_csv(
      "id,camera,split,f0\n"
      "1,0,gallery,0\n1,1,gallery,1\n1,0,gallery,2\n1,1,gallery,3\n");
  auto rng = derive_rng(0, "t");
  auto r = split_query_gallery(ds, 0.5, rng);
  EXPECT_EQ(r.dropped_queries, 0u);
  EXPECT_EQ(r.dataset.count(Split::kQuery), 2u);
}

TEST(Split, SingleCameraIdentityDropped) {
  auto ds = parse_dataset_csv(
      "id,camera,split,f0\n"
      "1,0,gallery,0\n1,1,gallery,1\n1,0,gallery,2\n1,1,gallery,3\n"
      "2,1,gallery,4\n2,1,gallery,5\n2,1,gallery,6\n2,1,gallery,7\n");
  auto rng = derive_rng(0, "t");
  auto r = split_query_gallery(ds, 0.5, rng);
  EXPECT_EQ(r.dropped_queries, 2u);
  for (const auto& s : r.dataset.samples)
    if (s.split == Split::kQuery) EXPECT_EQ(s.id, 1);
}

TEST(Split, ZeroFraction) {
  auto ds = generate_synthetic(small_cfg(), 1);
  auto rng = derive_rng(0, "t");
  EXPECT_THROW(split_query_gallery(ds, 0.0, rng), EvaluationError);
}

}  // namespace
}  // namespace bcareid
