#include <cstring>
#include <numeric>

#include <gtest/gtest.h>

#include "bcareid/errors.hpp"
#include "bcareid/evaluation.hpp"
#include "bcareid/experiment.hpp"
#include "bcareid/probe.hpp"
#include "oracles.hpp"

namespace bcareid {
namespace {

struct Row {
  int id, cam;
  Split split;
  int pose;
  std::vector<double> x;
};

EmbeddingSet make_set(const std::vector<Row>& rows) {
  Dataset ds;
  ds.channels = {{"pose", {"a", "b"}}};
  ds.feature_dim = rows.empty() ? 1 : rows[0].x.size();
  for (const auto& r : rows) ds.samples.push_back({r.x, r.id, r.cam, {r.pose}, r.split});
  return EmbeddingSet::from_dataset(ds);
}

constexpr Split Q = Split::kQuery;
constexpr Split G = Split::kGallery;

std::vector<std::size_t> ranked(const QueryRanking& q) { return q.gallery; }

TEST(Rank, StandardExclusion) {
  auto emb = make_set({{1, 1, G, 0, {1}}, {1, 2, G, 0, {2}}, {2, 1, G, 0, {3}}, {1, 1, Q, 0, {0}}});
  auto rr = rank_gallery(emb);
  ASSERT_EQ(rr.queries.size(), 1u);
  EXPECT_EQ(ranked(rr.queries[0]), (std::vector<std::size_t>{1, 2}));
  EXPECT_EQ(rr.queries[0].positive, (std::vector<char>{1, 0}));
}

TEST(Rank, NoBiasKeepsOnlyPositives) {
  auto emb = make_set({{1, 1, G, 0, {5}}, {2, 0, G, 0, {1}}, {3, 0, G, 0, {2}}, {1, 0, Q, 0, {0}}});
  auto rr = rank_gallery(emb, Protocol::nobias("pose"));
  EXPECT_EQ(ranked(rr.queries[0]), (std::vector<std::size_t>{0}));
}

TEST(Rank, PlainSortWithoutExclusions) {
  auto emb = make_set({{2, 0, G, 0, {3}}, {1, 1, G, 0, {-1}}, {3, 0, G, 1, {2}}, {1, 0, Q, 0, {0}}});
  auto rr = rank_gallery(emb);
  EXPECT_EQ(ranked(rr.queries[0]), (std::vector<std::size_t>{1, 2, 0}));
  EXPECT_EQ(rr.queries[0].distances, (std::vector<double>{1, 4, 9}));
}

TEST(Rank, TiesByGalleryRow) {
  auto emb = make_set({{2, 0, G, 0, {1}}, {1, 1, G, 0, {-1}}, {1, 0, Q, 0, {0}}});
  EXPECT_EQ(ranked(rank_gallery(emb).queries[0]), (std::vector<std::size_t>{0, 1}));
}

TEST(Rank, DropsQueriesWithoutPositive) {
  auto emb = make_set({{1, 0, G, 0, {1}}, {2, 1, G, 0, {2}}, {1, 0, Q, 0, {0}}, {2, 0, Q, 0, {0}}});
  auto rr = rank_gallery(emb);
  EXPECT_EQ(rr.queries.size(), 1u);
  EXPECT_EQ(rr.dropped_queries, 1u);
}

TEST(Metrics, HandCases) {
  auto both = make_set({{1, 1, G, 0, {1}}, {1, 1, G, 0, {2}}, {1, 0, Q, 0, {0}}});
  auto m = cmc_map(rank_gallery(both), 2);
  EXPECT_EQ(m.rank(1), 1.0);
  EXPECT_EQ(m.mean_ap, 1.0);

  auto second = make_set({{2, 1, G, 0, {1}}, {1, 1, G, 0, {2}}, {3, 1, G, 0, {3}}, {1, 0, Q, 0, {0}}});
  auto s = cmc_map(rank_gallery(second), 3);
  EXPECT_EQ(s.rank(1), 0.0);
  EXPECT_EQ(s.rank(2), 1.0);
  EXPECT_EQ(s.mean_ap, 0.5);
}

TEST(Metrics, NoQueries) {
  auto emb = make_set({{1, 0, G, 0, {1}}, {1, 0, Q, 0, {0}}});
  auto rr = rank_gallery(emb);
  EXPECT_THROW(cmc_map(rr), EvaluationError);
}

TEST(Metrics, MatchReference) {
  auto rng = derive_rng(8, "metrics");
  std::uniform_int_distribution<int> id(0, 4), cam(0, 2), len(4, 20), nq(1, 5);
  std::normal_distribution<double> n;
  for (int t = 0; t < 100; ++t) {
    std::vector<Row> rows;
    int g = len(rng), q = nq(rng);
    for (int i = 0; i < g + q; ++i)
      rows.push_back({id(rng), cam(rng), i < g ? G : Q, 0, {n(rng), n(rng)}});
    auto emb = make_set(rows);
    std::vector<int> ids, cams;
    std::vector<bool> is_q;
    for (const auto& r : rows) ids.push_back(r.id), cams.push_back(r.cam), is_q.push_back(r.split == Q);
    auto ref = oracle::retrieval(emb.embeddings, ids, cams, is_q, 10);
    auto rr = rank_gallery(emb);
    if (ref.queries == 0) {
      EXPECT_THROW(cmc_map(rr, 10), EvaluationError);
      continue;
    }
    auto m = cmc_map(rr, 10);
    EXPECT_NEAR(m.mean_ap, ref.mean_ap, 1e-12);
    for (int k = 0; k < 10; ++k) EXPECT_NEAR(m.cmc[k], ref.cmc[k], 1e-12);
    for (int k = 1; k < 10; ++k) EXPECT_LE(m.cmc[k - 1], m.cmc[k]);
  }
}

// Gallery rows 0-4, then three camera-0 queries; see the expected counts.
std::vector<Row> three_queries() {
  return {{1, 1, G, 0, {1}},  {2, 0, G, 0, {2}},  {3, 0, G, 1, {3}},  {2, 1, G, 1, {10}},
          {3, 1, G, 0, {11}}, {1, 0, Q, 0, {0}},  {2, 0, Q, 1, {2.9}}, {3, 0, Q, 0, {12}}};
}

TEST(RankProb, HandFixture) {
  auto rr = rank_gallery(make_set(three_queries()));
  ASSERT_EQ(rr.queries.size(), 3u);
  auto neg = same_bias_rank_prob(rr, "pose", Polarity::kNegative, 5);
  auto pos = same_bias_rank_prob(rr, "pose", Polarity::kPositive, 5);
  std::vector<double> want_neg{1.0 / 3, 1.0 / 3, 1.0 / 3, 1.0 / 3, 1.0};
  std::vector<double> want_pos{2.0 / 3, 0.0, 1.0 / 3, 0.0, 0.0};
  for (int r = 0; r < 5; ++r) {
    EXPECT_DOUBLE_EQ(neg[r], want_neg[r]) << "rank " << r + 1;
    EXPECT_DOUBLE_EQ(pos[r], want_pos[r]) << "rank " << r + 1;
  }
  EXPECT_THROW(same_bias_rank_prob(rr, "pose", Polarity::kNegative, 6), EvaluationError);
}

TEST(RankProb, Saturated) {
  auto emb = make_set({{2, 0, G, 1, {1}}, {1, 1, G, 0, {5}}, {3, 0, G, 1, {9}},
                       {1, 0, Q, 1, {0}}, {1, 1, Q, 1, {0.5}}});
  auto curve = same_bias_rank_prob(rank_gallery(emb), "pose", Polarity::kNegative, 1);
  EXPECT_EQ(curve[0], 1.0);
}

TEST(RankProb, RandomLabelsHalveNegativeRate) {
  auto rng = derive_rng(9, "labels");
  std::uniform_int_distribution<int> id(0, 39), coin(0, 1);
  std::normal_distribution<double> n;
  std::vector<Row> rows;
  for (int i = 0; i < 600; ++i) rows.push_back({id(rng), coin(rng), G, coin(rng), {n(rng), n(rng)}});
  for (int i = 0; i < 600; ++i) rows.push_back({id(rng), coin(rng), Q, coin(rng), {n(rng), n(rng)}});
  auto rr = rank_gallery(make_set(rows));
  auto curve = same_bias_rank_prob(rr, "pose", Polarity::kNegative, 10);
  for (std::size_t r = 0; r < 10; ++r) {
    double neg = 0;
    for (const auto& q : rr.queries) neg += !q.positive[r];
    EXPECT_NEAR(curve[r], 0.5 * neg / rr.queries.size(), 0.05);
  }
}

TEST(RankProb, NoBiasCurveIsZero) {
  auto rr = rank_gallery(make_set(three_queries()), Protocol::nobias("pose"));
  for (double v : same_bias_rank_prob(rr, "pose", Polarity::kNegative, rr.longest_list()))
    EXPECT_EQ(v, 0.0);
}

TEST(Nauc, Examples) {
  std::vector<double> half(12, 0.5);
  EXPECT_DOUBLE_EQ(nauc(half, 10), 0.5);
  std::vector<double> spike(10, 0.0);
  spike[0] = 1.0;
  EXPECT_DOUBLE_EQ(nauc(spike, 10), 0.1);
  std::vector<double> mono{0.9, 0.8, 0.7, 0.6, 0.5, 0.4, 0.3, 0.2, 0.1, 0.05};
  double v = nauc(mono, 10);
  EXPECT_GE(v, 0.05);
  EXPECT_LE(v, 0.9);
  EXPECT_THROW(nauc(mono, 11), ConfigError);
}

TEST(Probe, OneHotSeparable) {
  const int n = 300, c = 3;
  Matrix x = Matrix::Zero(n, c);
  std::vector<int> y(n);
  for (int i = 0; i < n; ++i) y[i] = i % c, x(i, i % c) = 1.0;
  auto p = train_probe(x, y, c, {});
  EXPECT_GE(probe_accuracy(p, x, y), 0.99);
}

TEST(Probe, ShuffledLabelsAtChance) {
  auto rng = derive_rng(10, "probe");
  std::normal_distribution<double> n;
  const int rows = 400;
  Matrix x(rows, 8);
  for (auto& v : x.reshaped()) v = n(rng);
  std::vector<int> y(rows);
  for (int i = 0; i < rows; ++i) y[i] = i % 2;
  std::shuffle(y.begin(), y.end(), rng);
  auto p = train_probe(x.topRows(200), std::span(y).first(200), 2, {});
  EXPECT_NEAR(probe_accuracy(p, x.bottomRows(200), std::span(y).last(200)), 0.5, 0.1);
}

TEST(Probe, NoiseThreeClasses) {
  auto rng = derive_rng(11, "probe");
  std::normal_distribution<double> n;
  Matrix x(600, 6);
  for (auto& v : x.reshaped()) v = n(rng);
  std::vector<int> y(600);
  for (int i = 0; i < 600; ++i) y[i] = i % 3;
  auto p = train_probe(x.topRows(300), std::span(y).first(300), 3, {});
  EXPECT_NEAR(probe_accuracy(p, x.bottomRows(300), std::span(y).last(300)), 1.0 / 3, 0.1);
}

TEST(Probe, SingleClassRejected) {
  Matrix x = Matrix::Random(10, 2);
  std::vector<int> y(10, 1);
  EXPECT_THROW(train_probe(x, y, 2, {}), ConfigError);
}

TEST(Probe, GradientMatchesFiniteDifferences) {
  auto rng = derive_rng(12, "probe");
  std::normal_distribution<double> n;
  Matrix x(20, 4);
  for (auto& v : x.reshaped()) v = n(rng);
  std::vector<int> y(20);
  for (int i = 0; i < 20; ++i) y[i] = i % 3;
  ProbeParams p{0.3, Matrix(3, 4), Vector(3)};
  for (auto& v : p.weight.reshaped()) v = n(rng);
  for (auto& v : p.bias) v = n(rng);
  std::vector<double> grad;
  probe_loss(p, x, y, &grad);
  std::vector<double> point{p.slope};
  for (double v : p.weight.reshaped<Eigen::RowMajor>()) point.push_back(v);
  for (double v : p.bias) point.push_back(v);
  auto loss = [&](std::span<const double> t) {
    ProbeParams q = p;
    q.slope = t[0];
    std::size_t k = 1;
    for (Eigen::Index i = 0; i < 3; ++i)
      for (Eigen::Index j = 0; j < 4; ++j) q.weight(i, j) = t[k++];
    for (Eigen::Index i = 0; i < 3; ++i) q.bias(i) = t[k++];
    return probe_loss(q, x, y);
  };
  EXPECT_LT(finite_difference_check(loss, point, grad).max_relative_error, 1e-5);
}

RunConfig tiny_run() {
  RunConfig cfg = preset("preset-pose2");
  cfg.generator.n_ids = 40;
  cfg.branch.epochs = 3;
  cfg.probe.epochs = 30;
  cfg.seed = 5;
  cfg.sync_seeds();
  return cfg;
}

TEST(Probe, LeavesEncoderUntouched) {
  auto cfg = tiny_run();
  auto ds = prepare_dataset(cfg).dataset;
  auto run = run_branch(ds, cfg);
  const auto before = flatten(run.train.state.params);
  probe_embeddings(run.embeddings, "pose", cfg.probe);
  auto after = flatten(run.train.state.params);
  EXPECT_EQ(std::memcmp(before.data(), after.data(), before.size() * sizeof(double)), 0);
}

TEST(Sweep, ZeroLambdaIsBaseline) {
  auto cfg = tiny_run();
  auto ds = prepare_dataset(cfg).dataset;
  double zero[] = {0.0};
  auto rows = lambda_sweep(ds, cfg, BranchMode::kReduce, zero);
  ASSERT_EQ(rows.size(), 1u);
  auto base = cfg;
  base.branch.lambda_db = 0.0;
  auto run = run_branch(ds, base);
  auto rep = evaluate_embeddings(run.embeddings, Protocol::standard(), evaluate_options(base));
  EXPECT_EQ(rows[0].rank1, rep.rank1());
  EXPECT_EQ(rows[0].mean_ap, rep.metrics.mean_ap);
  EXPECT_EQ(rows[0].probe_accuracy, rep.channel("pose").probe->accuracy);
  EXPECT_EQ(rows[0].nauc_neg, rep.channel("pose").nauc_neg);
  auto csv = sweep_csv(rows);
  EXPECT_EQ(csv.substr(0, csv.find('\n')), "lambda_db,rank1,map,probe_acc,nauc_neg,nauc_pos");
}

TEST(Report, FieldsPopulated) {
  auto cfg = tiny_run();
  auto ds = prepare_dataset(cfg).dataset;
  auto run = run_branch(ds, cfg);
  auto rep = evaluate_embeddings(run.embeddings, Protocol::standard(), evaluate_options(cfg));
  EXPECT_GT(rep.queries, 0u);
  EXPECT_EQ(rep.metrics.cmc.size(), cfg.eval.max_rank);
  for (double v : rep.metrics.cmc) EXPECT_TRUE(v >= 0 && v <= 1);
  const auto& ch = rep.channel("pose");
  ASSERT_TRUE(ch.probe.has_value());
  EXPECT_EQ(ch.p_neg.size(), cfg.eval.max_rank);
  auto json = rep.to_json();
  for (const char* key : {"\"rank1\"", "\"rank5\"", "\"rank10\"", "\"mAP\"", "\"nauc_neg\"",
                          "\"probe\"", "\"dropped_queries\"", "\"config\""})
    EXPECT_NE(json.find(key), std::string::npos) << key;
  EXPECT_EQ(ch.curves_csv().substr(0, 15), "rank,p_neg,p_po");
}

}  // namespace
}  // namespace bcareid
