#include <gtest/gtest.h>

#include <random>
#include <set>

#include "ocssvm/eval.hpp"
#include "support/mcc_oracle.hpp"

namespace ocssvm {
namespace {

using testing::mcc_oracle;

TEST(Confusion, CountsByHand) {
  const std::vector<int> truths = {1, -1};
  EXPECT_EQ(confusion(truths, truths), (ConfusionCounts{1, 0, 1, 0}));
  const std::vector<int> flipped = {-1, 1};
  const auto c = confusion(flipped, truths);
  EXPECT_EQ(c.tp, 0u);
  EXPECT_EQ(c.tn, 0u);

  std::mt19937_64 rng(1);
  std::vector<int> p(20), t(20);
  for (int i = 0; i < 20; ++i) {
    p[i] = rng() % 2 ? 1 : -1;
    t[i] = rng() % 2 ? 1 : -1;
  }
  ConfusionCounts tally;
  for (int i = 0; i < 20; ++i) {
    if (p[i] == 1 && t[i] == 1) ++tally.tp;
    if (p[i] == 1 && t[i] == -1) ++tally.fp;
    if (p[i] == -1 && t[i] == -1) ++tally.tn;
    if (p[i] == -1 && t[i] == 1) ++tally.fn;
  }
  EXPECT_EQ(confusion(p, t), tally);
  EXPECT_EQ(confusion(p, t).total(), 20u);
}

TEST(Confusion, Errors) {
  const std::vector<int> a = {1, -1}, b = {1};
  EXPECT_THROW(confusion(a, b), DimensionError);
  const std::vector<int> bad = {1, 0};
  EXPECT_THROW(confusion(bad, a), DomainError);
  EXPECT_THROW(confusion(std::vector<int>{}, std::vector<int>{}), DimensionError);
}

TEST(Mcc, Examples) {
  EXPECT_EQ(mcc({50, 0, 50, 0}).value, 1.0);
  EXPECT_EQ(mcc({0, 50, 0, 50}).value, -1.0);
  // (6*3 - 1*2) / sqrt(8 * 7 * 5 * 4)
  EXPECT_NEAR(mcc({6, 2, 3, 1}).value, 16.0 / std::sqrt(1120.0), 1e-15);
  EXPECT_NEAR(mcc({6, 2, 3, 1}).value, 0.47809, 1e-5);
  const Metric undefined = mcc({5, 0, 0, 3});
  EXPECT_FALSE(undefined.defined);
  EXPECT_EQ(undefined.value, 0.0);
}

TEST(Mcc, SymmetriesAndBounds) {
  std::mt19937_64 rng(2);
  for (int i = 0; i < 2000; ++i) {
    const ConfusionCounts c{rng() % 100, rng() % 100, rng() % 100, rng() % 100};
    const Metric m = mcc(c);
    EXPECT_GE(m.value, -1.0);
    EXPECT_LE(m.value, 1.0);
    EXPECT_EQ(mcc({c.tn, c.fn, c.tp, c.fp}).value, m.value);
    // Negated predictions swap tp<->fn and tn<->fp.
    EXPECT_NEAR(mcc({c.fn, c.tn, c.fp, c.tp}).value, -m.value, 1e-15);
  }
}

TEST(Mcc, MatchesExactArithmetic) {
  std::mt19937_64 rng(3);
  double worst = 0.0;
  for (int i = 0; i < 1000; ++i) {
    const std::uint64_t scale = i % 2 ? 1000000000ULL : 1000ULL;
    const ConfusionCounts c{rng() % scale, rng() % scale, rng() % scale, rng() % scale};
    worst = std::max(worst, std::abs(mcc(c).value - mcc_oracle(c)));
  }
  EXPECT_LE(worst, 1e-12);
}

TEST(PrecisionRecallF1, Examples) {
  const auto perfect = precision_recall_f1({5, 0, 5, 0});
  EXPECT_EQ(perfect.precision.value, 1.0);
  EXPECT_EQ(perfect.recall.value, 1.0);
  EXPECT_EQ(perfect.f1.value, 1.0);

  const auto none = precision_recall_f1({0, 0, 5, 3});
  EXPECT_FALSE(none.precision.defined);
  EXPECT_TRUE(none.recall.defined);
  EXPECT_EQ(none.recall.value, 0.0);

  const auto r = precision_recall_f1({6, 2, 3, 1});
  EXPECT_DOUBLE_EQ(r.precision.value, 0.75);
  EXPECT_DOUBLE_EQ(r.recall.value, 6.0 / 7.0);
  const double harmonic = 2.0 * 0.75 * (6.0 / 7.0) / (0.75 + 6.0 / 7.0);
  EXPECT_DOUBLE_EQ(r.f1.value, harmonic);
  EXPECT_DOUBLE_EQ(r.f1.value, 0.8);
}

// Stub with the model interface used by one_vs_rest_eval.
struct ThresholdModel {
  double threshold;
  Eigen::Index dim() const { return 1; }
};
template <typename V>
int predict(const ThresholdModel& m, const Eigen::DenseBase<V>& x) {
  return x(0) > m.threshold ? 1 : -1;
}

TEST(OneVsRestEval, ConstantModels) {
  FeatureMatrix pos(3, 1), neg(2, 1);
  pos << 1, 2, 3;
  neg << -1, -2;
  const EvalReport all_pos = one_vs_rest_eval(ThresholdModel{-100}, pos, neg);
  EXPECT_EQ(all_pos.recall.value, 1.0);
  EXPECT_EQ(all_pos.counts.tn, 0u);
  const EvalReport all_neg = one_vs_rest_eval(ThresholdModel{100}, pos, neg);
  EXPECT_EQ(all_neg.counts.tp, 0u);
  const EvalReport perfect = one_vs_rest_eval(ThresholdModel{0}, pos, neg);
  EXPECT_EQ(perfect.mcc.value, 1.0);
  EXPECT_THROW(one_vs_rest_eval(ThresholdModel{0}, pos, FeatureMatrix(0, 1)), DomainError);
  EXPECT_THROW(one_vs_rest_eval(ThresholdModel{0}, pos, FeatureMatrix::Zero(2, 2)), DimensionError);
}

TEST(OneVsRestEval, ToyModelMatchesRawPredictions) {
  ToyConfig toy;
  toy.count = 200;
  const Dataset d = sample_bivariate_normal(toy);
  SlabTrainConfig cfg;
  cfg.kernel = KernelSpec::rbf(0.5);
  cfg.nu1 = 0.1;
  cfg.nu2 = 0.05;
  const SlabModel model = train_slab(d.features.topRows(150), cfg);
  ToyConfig far;
  far.count = 40;
  far.seed = 2;
  far.mean << 2.5, 2.5;
  const FeatureMatrix pos = d.features.bottomRows(50);
  const FeatureMatrix neg = sample_bivariate_normal(far).features;
  std::vector<int> preds, truths;
  for (Eigen::Index i = 0; i < pos.rows(); ++i) {
    preds.push_back(predict(model, pos.row(i)));
    truths.push_back(1);
  }
  for (Eigen::Index i = 0; i < neg.rows(); ++i) {
    preds.push_back(predict(model, neg.row(i)));
    truths.push_back(-1);
  }
  const EvalReport report = one_vs_rest_eval(model, pos, neg);
  EXPECT_EQ(report.counts, confusion(preds, truths));
  EXPECT_EQ(report.mcc.value, mcc(confusion(preds, truths)).value);
}

TEST(LowerMedian, OddAndEven) {
  EXPECT_EQ(lower_median({3, 1, 2}), 2.0);
  EXPECT_EQ(lower_median({4, 1, 3, 2}), 2.0);
  EXPECT_EQ(lower_median({7}), 7.0);
  EXPECT_THROW(lower_median({}), DomainError);
}

TEST(KFold, PartitionProperties) {
  const auto folds = k_fold_split(6, 3, 1);
  ASSERT_EQ(folds.size(), 3u);
  for (const auto& f : folds) {
    EXPECT_EQ(f.validation.size(), 2u);
    EXPECT_EQ(f.train.size(), 4u);
  }
  for (int m : {7, 10, 23}) {
    for (int k : {2, 3, 5}) {
      const auto fs = k_fold_split(m, k, 99);
      std::set<Eigen::Index> seen;
      std::size_t smallest = m, largest = 0;
      for (const auto& f : fs) {
        smallest = std::min(smallest, f.validation.size());
        largest = std::max(largest, f.validation.size());
        for (auto i : f.validation) EXPECT_TRUE(seen.insert(i).second);
        std::set<Eigen::Index> both(f.train.begin(), f.train.end());
        both.insert(f.validation.begin(), f.validation.end());
        EXPECT_EQ(both.size(), static_cast<std::size_t>(m));
      }
      EXPECT_EQ(seen.size(), static_cast<std::size_t>(m));
      EXPECT_LE(largest - smallest, 1u);
    }
  }
}

TEST(KFold, DeterministicAndValidated) {
  const auto a = k_fold_split(30, 5, 7);
  const auto b = k_fold_split(30, 5, 7);
  for (std::size_t f = 0; f < a.size(); ++f) EXPECT_EQ(a[f].validation, b[f].validation);
  const auto c = k_fold_split(30, 5, 8);
  bool differs = false;
  for (std::size_t f = 0; f < a.size(); ++f) differs |= a[f].validation != c[f].validation;
  EXPECT_TRUE(differs);
  EXPECT_THROW(k_fold_split(10, 1, 0), DomainError);
  EXPECT_THROW(k_fold_split(2, 3, 0), DomainError);
}

FeatureMatrix toy_rows(Eigen::Index n, std::uint64_t seed) {
  ToyConfig toy;
  toy.count = n;
  toy.seed = seed;
  return sample_bivariate_normal(toy).features;
}

TEST(GridSearch, SingleConfig) {
  GridSearchSpec spec;
  spec.folds = 3;
  spec.gammas = {0.5};
  spec.nu2s = {0.05};
  const auto results = grid_search(toy_rows(60, 1), spec);
  ASSERT_EQ(results.size(), 1u);
  EXPECT_FALSE(results[0].error.has_value());
  EXPECT_EQ(results[0].fold_metrics.size(), 3u);
  EXPECT_EQ(results[0].config.kernel, KernelSpec::rbf(0.5));
}

// A huge nu1 leaves almost nothing strictly inside; the small one wins.
TEST(GridSearch, RanksByRecall) {
  GridSearchSpec spec;
  spec.folds = 3;
  spec.gammas = {0.5};
  spec.nu1s = {0.9, 0.05};
  spec.nu2s = {0.05};
  const auto results = grid_search(toy_rows(90, 2), spec);
  ASSERT_EQ(results.size(), 2u);
  EXPECT_EQ(results[0].config.nu1, 0.05);
  EXPECT_GT(results[0].mean_metric, results[1].mean_metric);
}

TEST(GridSearch, MatchesManualRunsAndIsThreadIndependent) {
  const FeatureMatrix x = toy_rows(80, 3);
  GridSearchSpec spec;
  spec.folds = 4;
  spec.seed = 5;
  spec.gammas = {0.1, 2.0};
  spec.nu1s = {0.1, 0.3};
  spec.nu2s = {0.05};
  const auto serial = grid_search(x, spec);
  spec.threads = 3;
  const auto parallel = grid_search(x, spec);
  ASSERT_EQ(serial.size(), 4u);
  ASSERT_EQ(parallel.size(), 4u);
  for (std::size_t i = 0; i < serial.size(); ++i) {
    EXPECT_EQ(serial[i].index, parallel[i].index);
    EXPECT_EQ(serial[i].fold_metrics, parallel[i].fold_metrics);
  }

  const auto folds = k_fold_split(x.rows(), 4, 5);
  std::vector<std::pair<double, std::size_t>> manual;
  const auto configs = expand_grid(spec);
  for (std::size_t c = 0; c < configs.size(); ++c) {
    double total = 0.0;
    for (const auto& f : folds) {
      SlabTrainConfig tc;
      tc.kernel = configs[c].kernel;
      tc.nu1 = configs[c].nu1;
      tc.nu2 = configs[c].nu2;
      tc.epsilon = configs[c].epsilon;
      const SlabModel m = train_slab(gather_rows(x, f.train), tc);
      total += fraction_positive(m, gather_rows(x, f.validation));
    }
    manual.emplace_back(total / 4.0, c);
  }
  std::stable_sort(manual.begin(), manual.end(), [](auto& a, auto& b) { return a.first > b.first; });
  for (std::size_t i = 0; i < manual.size(); ++i) {
    EXPECT_EQ(serial[i].index, manual[i].second);
    EXPECT_DOUBLE_EQ(serial[i].mean_metric, manual[i].first);
  }
}

TEST(GridSearch, FailuresAreRecordedNotThrown) {
  GridSearchSpec spec;
  spec.folds = 2;
  spec.classifiers = {Classifier::slab, Classifier::ocsvm};
  spec.kernels = {KernelFamily::chi_squared};
  spec.nu2s = {0.05};
  FeatureMatrix x = toy_rows(20, 4);  // negative values: additive kernels reject them
  const auto results = grid_search(x, spec);
  ASSERT_EQ(results.size(), 2u);
  for (const auto& r : results) EXPECT_TRUE(r.error.has_value());

  spec.folds = 1;
  EXPECT_THROW(grid_search(x, spec), DomainError);
}

}  // namespace
}  // namespace ocssvm
