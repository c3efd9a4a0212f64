#pragma once

// Confusion-matrix metrics, the one-vs-rest protocol, k-fold splits and grid
// search over classifier and kernel parameters.

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdint>
#include <exception>
#include <numeric>
#include <optional>
#include <span>
#include <string>
#include <thread>
#include <vector>

#include "ocssvm/data.hpp"
#include "ocssvm/errors.hpp"
#include "ocssvm/slab_svm.hpp"

namespace ocssvm {

struct ConfusionCounts {
  std::uint64_t tp = 0;
  std::uint64_t fp = 0;
  std::uint64_t tn = 0;
  std::uint64_t fn = 0;

  std::uint64_t total() const { return tp + fp + tn + fn; }
  friend bool operator==(const ConfusionCounts&, const ConfusionCounts&) = default;
};

// A metric whose denominator may vanish. `value` is 0 when undefined.
struct Metric {
  double value = 0.0;
  bool defined = true;
};

struct EvalReport {
  ConfusionCounts counts;
  Metric mcc;
  Metric precision;
  Metric recall;
  Metric f1;
};

inline ConfusionCounts confusion(std::span<const int> predictions, std::span<const int> truths) {
  if (predictions.size() != truths.size()) {
    throw DimensionError("predictions and truths differ in length: " + std::to_string(predictions.size()) +
                         " vs " + std::to_string(truths.size()));
  }
  if (predictions.empty()) throw DimensionError("confusion counts need at least one sample");
  ConfusionCounts c;
  for (std::size_t i = 0; i < predictions.size(); ++i) {
    const int p = predictions[i], t = truths[i];
    if ((p != 1 && p != -1) || (t != 1 && t != -1)) {
      throw DomainError("labels must be +1 or -1 (sample " + std::to_string(i) + ")");
    }
    if (p == 1) ++(t == 1 ? c.tp : c.fp);
    else ++(t == 1 ? c.fn : c.tn);
  }
  return c;
}

// (tp tn - fn fp) / sqrt((tp+fp)(tp+fn)(tn+fp)(tn+fn)); 0 and undefined when
// any factor of the denominator is zero.
inline Metric mcc(const ConfusionCounts& c) {
  const std::uint64_t f1 = c.tp + c.fp, f2 = c.tp + c.fn, f3 = c.tn + c.fp, f4 = c.tn + c.fn;
  if (f1 == 0 || f2 == 0 || f3 == 0 || f4 == 0) return {0.0, false};
  if (c.fp == 0 && c.fn == 0) return {1.0, true};
  if (c.tp == 0 && c.tn == 0) return {-1.0, true};
  using i128 = __int128;
  const i128 numerator = static_cast<i128>(c.tp) * c.tn - static_cast<i128>(c.fn) * c.fp;
  const long double denominator =
      std::sqrt(static_cast<long double>(f1) * static_cast<long double>(f2)) *
      std::sqrt(static_cast<long double>(f3) * static_cast<long double>(f4));
  const long double value = static_cast<long double>(numerator) / denominator;
  return {static_cast<double>(std::clamp(value, -1.0L, 1.0L)), true};
}

struct PrecisionRecallF1 {
  Metric precision;
  Metric recall;
  Metric f1;
};

inline PrecisionRecallF1 precision_recall_f1(const ConfusionCounts& c) {
  auto ratio = [](std::uint64_t num, std::uint64_t den) -> Metric {
    if (den == 0) return {0.0, false};
    return {static_cast<double>(num) / static_cast<double>(den), true};
  };
  // f1 = 2 tp / (2 tp + fp + fn), the harmonic mean of precision and recall.
  return {ratio(c.tp, c.tp + c.fp), ratio(c.tp, c.tp + c.fn), ratio(2 * c.tp, 2 * c.tp + c.fp + c.fn)};
}

inline EvalReport make_report(const ConfusionCounts& c) {
  const auto prf = precision_recall_f1(c);
  return {c, mcc(c), prf.precision, prf.recall, prf.f1};
}

// Predicts every row; truths are +1 for `positives` and -1 for `negatives`.
template <typename Model>
EvalReport one_vs_rest_eval(const Model& model, const FeatureMatrix& positives, const FeatureMatrix& negatives) {
  if (positives.rows() < 1) throw DomainError("one-vs-rest evaluation needs positive test rows");
  if (negatives.rows() < 1) throw DomainError("one-vs-rest evaluation needs negative test rows");
  if (positives.cols() != model.dim() || negatives.cols() != model.dim()) {
    throw DimensionError("test rows have dimension " + std::to_string(positives.cols()) + "/" +
                         std::to_string(negatives.cols()) + ", model expects " + std::to_string(model.dim()));
  }
  ConfusionCounts c;
  for (Eigen::Index i = 0; i < positives.rows(); ++i) ++(predict(model, positives.row(i)) == 1 ? c.tp : c.fn);
  for (Eigen::Index i = 0; i < negatives.rows(); ++i) ++(predict(model, negatives.row(i)) == 1 ? c.fp : c.tn);
  return make_report(c);
}

// Fraction of rows predicted +1.
template <typename Model>
double fraction_positive(const Model& model, const FeatureMatrix& rows) {
  if (rows.rows() == 0) return 0.0;
  Eigen::Index positive = 0;
  for (Eigen::Index i = 0; i < rows.rows(); ++i) positive += predict(model, rows.row(i)) == 1;
  return static_cast<double>(positive) / static_cast<double>(rows.rows());
}

// Lower median: element (n - 1) / 2 of the sorted values.
inline double lower_median(std::vector<double> values) {
  if (values.empty()) throw DomainError("median of an empty list");
  const auto mid = values.begin() + static_cast<std::ptrdiff_t>((values.size() - 1) / 2);
  std::nth_element(values.begin(), mid, values.end());
  return *mid;
}

struct Fold {
  std::vector<Eigen::Index> train;
  std::vector<Eigen::Index> validation;
};

// Shuffles 0..m-1 (Fisher-Yates driven by SplitMix64) and cuts it into k
// contiguous blocks whose sizes differ by at most one. Index lists are sorted.
inline std::vector<Fold> k_fold_split(Eigen::Index m, int k, std::uint64_t seed) {
  if (k < 2) throw DomainError("k-fold split needs k >= 2");
  if (m < k) throw DomainError("k-fold split needs at least k samples");
  std::vector<Eigen::Index> order(static_cast<std::size_t>(m));
  std::iota(order.begin(), order.end(), Eigen::Index{0});
  SplitMix64 rng(seed);
  for (std::size_t i = order.size() - 1; i > 0; --i) {
    std::swap(order[i], order[static_cast<std::size_t>(rng.below(i + 1))]);
  }
  std::vector<Fold> folds(static_cast<std::size_t>(k));
  const auto mu = static_cast<std::size_t>(m);
  const auto ku = static_cast<std::size_t>(k);
  for (std::size_t f = 0; f < ku; ++f) {
    const std::size_t begin = f * mu / ku, end = (f + 1) * mu / ku;
    for (std::size_t i = 0; i < mu; ++i) {
      (i >= begin && i < end ? folds[f].validation : folds[f].train).push_back(order[i]);
    }
    std::sort(folds[f].validation.begin(), folds[f].validation.end());
    std::sort(folds[f].train.begin(), folds[f].train.end());
  }
  return folds;
}

inline FeatureMatrix gather_rows(const FeatureMatrix& x, const std::vector<Eigen::Index>& idx) {
  FeatureMatrix out(static_cast<Eigen::Index>(idx.size()), x.cols());
  for (std::size_t r = 0; r < idx.size(); ++r) out.row(static_cast<Eigen::Index>(r)) = x.row(idx[r]);
  return out;
}

enum class Classifier { slab, ocsvm };

inline std::string_view to_string(Classifier c) { return c == Classifier::slab ? "ocssvm" : "ocsvm"; }

// Only recall is available: one-class validation folds contain positives only.
enum class SelectionMetric { recall };

struct GridSearchSpec {
  std::vector<Classifier> classifiers = {Classifier::slab};
  std::vector<KernelFamily> kernels = {KernelFamily::rbf};
  std::vector<double> gammas = {1.0};  // used by rbf only
  std::vector<double> nu1s = {0.10};
  std::vector<double> nu2s = {0.01};
  std::vector<double> epsilons = {kDefaultEpsilon};
  std::vector<double> nus = {0.10};  // one-class SVM baseline
  int folds = 5;
  SelectionMetric metric = SelectionMetric::recall;
  std::uint64_t seed = 1;
  unsigned threads = 1;
  SolverConfig solver;

  void validate() const {
    if (classifiers.empty() || kernels.empty()) throw DomainError("grid search needs classifiers and kernels");
    if (std::find(kernels.begin(), kernels.end(), KernelFamily::rbf) != kernels.end() && gammas.empty()) {
      throw DomainError("grid search over rbf needs at least one gamma");
    }
    const bool slab = std::find(classifiers.begin(), classifiers.end(), Classifier::slab) != classifiers.end();
    const bool ocsvm = std::find(classifiers.begin(), classifiers.end(), Classifier::ocsvm) != classifiers.end();
    if (slab && (nu1s.empty() || nu2s.empty() || epsilons.empty())) {
      throw DomainError("grid search over the slab model needs nu1, nu2 and epsilon values");
    }
    if (ocsvm && nus.empty()) throw DomainError("grid search over the one-class SVM needs nu values");
    if (folds < 2) throw DomainError("grid search needs at least 2 folds");
    if (threads < 1) throw DomainError("grid search needs at least 1 thread");
  }
};

struct GridConfig {
  Classifier classifier = Classifier::slab;
  KernelSpec kernel = KernelSpec::linear();
  double nu1 = 0.0, nu2 = 0.0, epsilon = 0.0;  // slab
  double nu = 0.0;                             // one-class SVM
};

struct GridResult {
  GridConfig config;
  std::size_t index = 0;  // position in the expanded grid
  double mean_metric = 0.0;
  std::vector<double> fold_metrics;
  std::optional<std::string> error;
};

// Cartesian product in a fixed order: classifier, kernel, gamma, then the
// classifier's own parameters.
inline std::vector<GridConfig> expand_grid(const GridSearchSpec& spec) {
  std::vector<GridConfig> out;
  for (const Classifier c : spec.classifiers) {
    for (const KernelFamily family : spec.kernels) {
      std::vector<KernelSpec> kernels;
      if (family == KernelFamily::rbf) {
        for (double g : spec.gammas) kernels.push_back(KernelSpec::rbf(g));
      } else {
        kernels.push_back(KernelSpec::make(family));
      }
      for (const auto& kernel : kernels) {
        if (c == Classifier::slab) {
          for (double nu1 : spec.nu1s) {
            for (double nu2 : spec.nu2s) {
              for (double eps : spec.epsilons) out.push_back({c, kernel, nu1, nu2, eps, 0.0});
            }
          }
        } else {
          for (double nu : spec.nus) out.push_back({c, kernel, 0.0, 0.0, 0.0, nu});
        }
      }
    }
  }
  return out;
}

namespace detail {

inline double fold_recall(const GridConfig& cfg, const FeatureMatrix& train, const FeatureMatrix& validation,
                          const SolverConfig& solver) {
  if (cfg.classifier == Classifier::slab) {
    SlabTrainConfig tc;
    tc.nu1 = cfg.nu1;
    tc.nu2 = cfg.nu2;
    tc.epsilon = cfg.epsilon;
    tc.kernel = cfg.kernel;
    tc.solver = solver;
    const SlabModel model = train_slab(train, tc);
    if (!model.converged()) throw Error("solver did not converge");
    return fraction_positive(model, validation);
  }
  const OcsvmModel model = train_ocsvm(train, cfg.nu, cfg.kernel, solver);
  if (!model.converged()) throw Error("solver did not converge");
  return fraction_positive(model, validation);
}

}  // namespace detail

// Trains every configuration on each fold's training part and scores recall on
// its validation part. Returns results ranked by mean metric (descending);
// ties and failed configurations keep grid order, failures last.
inline std::vector<GridResult> grid_search(const FeatureMatrix& x, const GridSearchSpec& spec) {
  spec.validate();
  const auto configs = expand_grid(spec);
  const auto folds = k_fold_split(x.rows(), spec.folds, spec.seed);
  std::vector<GridResult> results(configs.size());

  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t i = next++; i < configs.size(); i = next++) {
      GridResult& r = results[i];
      r.config = configs[i];
      r.index = i;
      try {
        for (const auto& fold : folds) {
          r.fold_metrics.push_back(detail::fold_recall(configs[i], gather_rows(x, fold.train),
                                                       gather_rows(x, fold.validation), spec.solver));
        }
        r.mean_metric = std::accumulate(r.fold_metrics.begin(), r.fold_metrics.end(), 0.0) /
                        static_cast<double>(r.fold_metrics.size());
      } catch (const std::exception& e) {
        r.error = e.what();
        r.fold_metrics.clear();
        r.mean_metric = 0.0;
      }
    }
  };
  const unsigned workers = std::min<unsigned>(spec.threads, static_cast<unsigned>(configs.size()));
  if (workers <= 1) {
    worker();
  } else {
    std::vector<std::jthread> pool;
    for (unsigned t = 0; t < workers; ++t) pool.emplace_back(worker);
  }

  std::stable_sort(results.begin(), results.end(), [](const GridResult& a, const GridResult& b) {
    if (a.error.has_value() != b.error.has_value()) return !a.error.has_value();
    return a.mean_metric > b.mean_metric;
  });
  return results;
}

}  // namespace ocssvm
