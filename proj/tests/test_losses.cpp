#include <algorithm>
#include <numeric>

#include <gtest/gtest.h>

#include "bcareid/errors.hpp"
#include "bcareid/losses.hpp"
#include "oracles.hpp"

namespace bcareid {
namespace {

Matrix col(std::initializer_list<double> v) {
  Matrix m(v.size(), 1);
  Eigen::Index i = 0;
  for (double x : v) m(i++, 0) = x;
  return m;
}

TEST(Sqdist, HandAndNaive) {
  auto d = pairwise_sqdist(col({0, 3}));
  EXPECT_EQ(d(0, 1), 9.0);
  EXPECT_EQ(d(1, 0), 9.0);
  EXPECT_EQ(d(0, 0), 0.0);

  EXPECT_TRUE(pairwise_sqdist(Matrix::Constant(4, 3, 1.5)).isZero(0.0));

  Matrix e = Matrix::Random(5, 3);
  auto full = pairwise_sqdist(e);
  for (int i = 0; i < 5; ++i)
    for (int j = 0; j < 5; ++j) EXPECT_NEAR(full(i, j), oracle::sqdist(e, i, j), 1e-12);
}

TEST(ReidLoss, Examples) {
  std::vector<int> ids{0, 0, 1, 1};
  EXPECT_DOUBLE_EQ(reid_hard_loss(col({0, 2, 1, 3}), ids, 1.0).value, 16.0);
  auto zero = reid_hard_loss(col({0, 1, 3, 4}), ids, 1.0);
  EXPECT_DOUBLE_EQ(zero.value, 0.0);
  EXPECT_TRUE(zero.gradient.isZero(0.0));
  EXPECT_DOUBLE_EQ(reid_hard_loss(Matrix::Zero(4, 2), ids, 0.3).value, 4 * 0.3);
}

TEST(ReidLoss, MissingPositive) {
  std::vector<int> ids{0, 1, 1};
  EXPECT_THROW(reid_hard_loss(col({0, 1, 2}), ids, 1.0), BatchCompositionError);
  std::vector<int> same{0, 0};
  EXPECT_THROW(reid_hard_loss(col({0, 1}), same, 1.0), BatchCompositionError);
}

TEST(BiasLoss, Examples) {
  std::vector<int> bias{0, 0, 1, 1};
  auto out = bias_easy_loss(col({0, 3, 1, 2}), bias, 1.0);
  EXPECT_DOUBLE_EQ(out.value, 12.0);
  EXPECT_DOUBLE_EQ(out.selection[0].argument, 6.0);
  EXPECT_DOUBLE_EQ(out.selection[1].argument, 6.0);
  EXPECT_FALSE(out.selection[2].active);
  EXPECT_FALSE(out.selection[3].active);
  EXPECT_DOUBLE_EQ(bias_easy_loss(col({0, 1, 3, 4}), bias, 1.0).value, 0.0);
  EXPECT_DOUBLE_EQ(bias_easy_loss(Matrix::Zero(4, 3), bias, 0.3).value, 4 * 0.3);
}

TEST(BiasLoss, SkipsAnchorsWithoutPair) {
  std::vector<int> bias{0, 0, 1};  // the lone class-1 sample has no same-bias partner
  auto out = bias_easy_loss(col({0, 1, 5}), bias, 1.0);
  EXPECT_EQ(out.skipped_anchors, 1u);
  EXPECT_FALSE(out.selection[2].valid);
  EXPECT_TRUE(out.gradient.isZero(0.0));  // both valid anchors are far from the hinge
  std::vector<int> all_same{1, 1, 1};
  EXPECT_THROW(bias_easy_loss(col({0, 1, 2}), all_same, 1.0), BatchCompositionError);
}

TEST(BiasLoss, HingeOffKeepsNegativeArguments) {
  std::vector<int> bias{0, 0, 1, 1};
  auto e = col({0, 1, 3, 4});
  auto ref = oracle::triplet_loss(e, bias, 1.0, false, false);
  EXPECT_DOUBLE_EQ(bias_easy_loss(e, bias, 1.0, false).value, ref.value);
  EXPECT_LT(ref.value, 0.0);
}

TEST(Combined, ComposedExample) {
  CombinedWeights w{1.0, 0.01, 1.0, 1.0, true};
  // the two worked examples live on different embeddings, so compose them
  auto r = reid_hard_loss(col({0, 2, 1, 3}), std::vector<int>{0, 0, 1, 1}, 1.0);
  auto b = bias_easy_loss(col({0, 3, 1, 2}), std::vector<int>{0, 0, 1, 1}, 1.0);
  EXPECT_DOUBLE_EQ(w.lambda_dr * r.value - w.lambda_db * b.value, 15.88);

  // and on one shared embedding, against the brute-force bias value
  auto e = col({0, 2, 1, 3});
  std::vector<int> ids{0, 0, 1, 1};
  std::vector<int> bias{0, 1, 0, 1};
  auto bref = oracle::triplet_loss(e, bias, 1.0, false);
  auto c = combined_loss(e, ids, bias, BranchMode::kReduce, w);
  EXPECT_DOUBLE_EQ(c.total.value, 16.0 - 0.01 * bref.value);
}

TEST(Combined, ZeroBiasWeight) {
  Matrix e = Matrix::Random(8, 3);
  std::vector<int> ids{0, 0, 1, 1, 2, 2, 3, 3}, bias{0, 1, 0, 1, 0, 1, 0, 1};
  auto ref = reid_hard_loss(e, ids, 0.3);
  for (auto mode : {BranchMode::kReduce, BranchMode::kEnhance}) {
    auto c = combined_loss(e, ids, bias, mode, {1.0, 0.0, 0.3, 0.3, true});
    EXPECT_EQ(c.total.value, ref.value);
    EXPECT_EQ(c.total.gradient, ref.gradient);
  }
}

TEST(Combined, EnhanceWithoutReid) {
  Matrix e = Matrix::Random(8, 3);
  std::vector<int> ids{0, 0, 1, 1, 2, 2, 3, 3}, bias{0, 1, 0, 1, 1, 1, 0, 0};
  auto ref = bias_easy_loss(e, bias, 0.3);
  auto c = combined_loss(e, ids, bias, BranchMode::kEnhance, {0.0, 0.05, 0.3, 0.3, true});
  EXPECT_DOUBLE_EQ(c.total.value, 0.05 * ref.value);
  EXPECT_LE((c.total.gradient - 0.05 * ref.gradient).cwiseAbs().maxCoeff(), 1e-15);
}

TEST(Losses, MatchBruteForce) {
  auto rng = derive_rng(4, "losses");
  std::uniform_int_distribution<int> lab(0, 2);
  std::normal_distribution<double> n;
  for (int t = 0; t < 50; ++t) {
    Matrix e(9, 2);
    for (auto& v : e.reshaped()) v = n(rng);
    std::vector<int> ids{0, 0, 0, 1, 1, 1, 2, 2, 2}, bias(9);
    for (auto& b : bias) b = lab(rng);
    auto r = reid_hard_loss(e, ids, 0.5);
    auto ro = oracle::triplet_loss(e, ids, 0.5, true);
    EXPECT_NEAR(r.value, ro.value, 1e-12);
    for (std::size_t a = 0; a < 9; ++a) {
      EXPECT_EQ(r.selection[a].positive, ro.picks[a].pos);
      EXPECT_EQ(r.selection[a].negative, ro.picks[a].neg);
    }
    auto bo = oracle::triplet_loss(e, bias, 0.5, false);
    if (bo.skipped == bias.size()) continue;
    auto b = bias_easy_loss(e, bias, 0.5);
    EXPECT_NEAR(b.value, bo.value, 1e-12);
    EXPECT_EQ(b.skipped_anchors, bo.skipped);
  }
}

TEST(Losses, PermutationEquivariance) {
  auto rng = derive_rng(5, "losses");
  std::normal_distribution<double> n;
  Matrix e(8, 3);
  for (auto& v : e.reshaped()) v = n(rng);
  std::vector<int> ids{0, 0, 1, 1, 2, 2, 3, 3}, bias{0, 1, 1, 0, 1, 0, 0, 1};
  std::vector<int> perm(8);
  std::iota(perm.begin(), perm.end(), 0);
  std::shuffle(perm.begin(), perm.end(), rng);
  Matrix pe(8, 3);
  std::vector<int> pids(8), pbias(8);
  for (int i = 0; i < 8; ++i) {
    pe.row(i) = e.row(perm[i]);
    pids[i] = ids[perm[i]];
    pbias[i] = bias[perm[i]];
  }
  CombinedWeights w{1.0, 0.1, 0.3, 5.0, true};
  auto a = combined_loss(e, ids, bias, BranchMode::kReduce, w);
  auto b = combined_loss(pe, pids, pbias, BranchMode::kReduce, w);
  EXPECT_NEAR(a.total.value, b.total.value, 1e-12);
  for (int i = 0; i < 8; ++i)
    EXPECT_LE((a.total.gradient.row(perm[i]) - b.total.gradient.row(i)).cwiseAbs().maxCoeff(),
              1e-12);
}

TEST(Losses, InactiveAnchorsContributeNoGradient) {
  // two tight, far apart clusters: every reid hinge is inactive
  auto e = col({0, 0.1, 10, 10.1});
  auto out = reid_hard_loss(e, std::vector<int>{0, 0, 1, 1}, 0.3);
  EXPECT_EQ(out.active_fraction(), 0.0);
  EXPECT_TRUE(out.gradient.isZero(0.0));
}

}  // namespace
}  // namespace bcareid
