#pragma once

// Drivers for the two reproducible experiments: the epsilon sweep on a 2-D
// Normal cloud and the one-vs-rest letter benchmark against the one-class SVM.

#include <atomic>
#include <exception>
#include <istream>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <thread>
#include <vector>

#include "ocssvm/data.hpp"
#include "ocssvm/eval.hpp"
#include "ocssvm/slab_svm.hpp"

namespace ocssvm {

// epsilon = 1/6, 2/6, ..., 5/6
inline std::vector<double> toy_epsilons() {
  std::vector<double> out;
  for (int k = 1; k <= 5; ++k) out.push_back(k / 6.0);
  return out;
}

struct ToyPoint {
  double epsilon = 0.0;
  double fraction_positive = 0.0;
  double rho1 = 0.0;
  double rho2 = 0.0;
  bool converged = false;
  bool degenerate = false;
};

inline ToyPoint summarize_toy(const SlabModel& model, const FeatureMatrix& x) {
  return {model.train_config().epsilon, fraction_positive(model, x), model.rho1(), model.rho2(),
          model.converged(),           model.offsets().degenerate};
}

inline std::vector<ToyPoint> toy_sweep(const FeatureMatrix& x, SlabTrainConfig config,
                                       const std::vector<double>& epsilons) {
  std::vector<ToyPoint> out;
  for (const double eps : epsilons) {
    config.epsilon = eps;
    out.push_back(summarize_toy(train_slab(x, config), x));
  }
  return out;
}

struct GridPoint {
  double x = 0.0;
  double y = 0.0;
  double score = 0.0;
  int label = 0;
};

// resolution x resolution points spanning the data's bounding box widened by
// `margin` on every side, x varying fastest.
inline std::vector<GridPoint> score_grid(const SlabModel& model, const FeatureMatrix& data, int resolution = 200,
                                         double margin = 1.0) {
  if (data.cols() != 2) throw DimensionError("score grids need 2-D data");
  if (resolution < 2) throw DomainError("score grid resolution must be >= 2");
  const Eigen::Vector2d lo = data.colwise().minCoeff().transpose().array() - margin;
  const Eigen::Vector2d hi = data.colwise().maxCoeff().transpose().array() + margin;
  const double steps = resolution - 1;
  std::vector<GridPoint> out;
  out.reserve(static_cast<std::size_t>(resolution) * static_cast<std::size_t>(resolution));
  Eigen::Vector2d p;
  for (int r = 0; r < resolution; ++r) {
    p(1) = lo(1) + (hi(1) - lo(1)) * r / steps;
    for (int c = 0; c < resolution; ++c) {
      p(0) = lo(0) + (hi(0) - lo(0)) * c / steps;
      const double s = score(model, p);
      out.push_back({p(0), p(1), s, slab_decision(s, model.rho1(), model.rho2())});
    }
  }
  return out;
}

// RBF widths picked per letter by cross-validation.
inline std::map<std::string, double> default_letter_gammas() {
  return {{"A", 1.0}, {"B", 0.5}, {"C", 1.0}, {"D", 1.0}, {"E", 1.0}, {"F", 1.0}, {"G", 1.0},
          {"H", 1.0}, {"I", 1.0}, {"J", 1.0}, {"K", 1.0}, {"L", 1.0}, {"M", 0.5}, {"N", 1.0},
          {"O", 0.5}, {"P", 0.5}, {"Q", 2.0}, {"R", 0.5}, {"S", 2.0}, {"T", 1.0}, {"U", 1.0},
          {"V", 0.5}, {"W", 1.0}, {"X", 0.5}, {"Y", 1.0}, {"Z", 1.0}};
}

// One `<class> <gamma>` pair per line (comma or whitespace separated); blank
// lines and lines starting with '#' are skipped.
inline std::map<std::string, double> parse_gamma_table(std::istream& in, const std::string& name = "gamma table") {
  std::map<std::string, double> out;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    for (char& ch : line) {
      if (ch == ',') ch = ' ';
    }
    const auto trimmed = text::trim(line);
    if (trimmed.empty() || trimmed.front() == '#') continue;
    const auto fields = text::split_whitespace(trimmed);
    const std::string where = name + ":" + std::to_string(line_no);
    if (fields.size() != 2) throw FormatError(where + ": expected '<class> <gamma>'");
    const auto gamma = text::parse_double(fields[1]);
    if (!gamma || !(*gamma > 0.0)) throw FormatError(where + ": gamma must be a positive number");
    if (!out.emplace(std::string(fields[0]), *gamma).second) {
      throw FormatError(where + ": duplicate class '" + std::string(fields[0]) + "'");
    }
  }
  return out;
}

struct LetterBenchConfig {
  KernelFamily kernel = KernelFamily::rbf;
  std::map<std::string, double> gammas = default_letter_gammas();  // rbf only
  double nu1 = 0.10;
  double nu2 = 0.01;
  double epsilon = kDefaultEpsilon;
  double nu = 0.10;
  Eigen::Index train_rows = kLetterTrainRows;
  unsigned threads = 1;
  SolverConfig solver;
};

struct LetterClassResult {
  std::string label;
  KernelSpec kernel = KernelSpec::linear();
  EvalReport slab;
  EvalReport ocsvm;
  bool slab_converged = false;
  bool ocsvm_converged = false;
  bool slab_degenerate = false;
};

struct LetterBenchResult {
  std::vector<LetterClassResult> classes;  // sorted by label
  double median_slab_mcc = 0.0;
  double median_ocsvm_mcc = 0.0;

  bool all_converged() const {
    for (const auto& c : classes) {
      if (!c.slab_converged || !c.ocsvm_converged) return false;
    }
    return true;
  }
};

inline KernelSpec letter_kernel(const LetterBenchConfig& config, const std::string& label) {
  if (config.kernel != KernelFamily::rbf) return KernelSpec::make(config.kernel);
  const auto it = config.gammas.find(label);
  if (it == config.gammas.end()) throw DomainError("gamma table has no entry for class '" + label + "'");
  return KernelSpec::rbf(it->second);
}

inline LetterClassResult run_letter_class(const Dataset& data, const std::string& label,
                                          const LetterBenchConfig& config) {
  const auto split = one_vs_rest(data, label, PartitionSplit::at(config.train_rows));
  LetterClassResult r;
  r.label = label;
  r.kernel = letter_kernel(config, label);

  SlabTrainConfig tc;
  tc.nu1 = config.nu1;
  tc.nu2 = config.nu2;
  tc.epsilon = config.epsilon;
  tc.kernel = r.kernel;
  tc.solver = config.solver;
  const SlabModel slab = train_slab(split.train_positives, tc);
  r.slab = one_vs_rest_eval(slab, split.test_positives, split.test_negatives);
  r.slab_converged = slab.converged();
  r.slab_degenerate = slab.offsets().degenerate;

  const OcsvmModel ocsvm = train_ocsvm(split.train_positives, config.nu, r.kernel, config.solver);
  r.ocsvm = one_vs_rest_eval(ocsvm, split.test_positives, split.test_negatives);
  r.ocsvm_converged = ocsvm.converged();
  return r;
}

// Trains both classifiers for every class on the training partition and scores
// them one-vs-rest on the test partition. Classes run on up to
// `config.threads` workers; the result order is independent of scheduling.
inline LetterBenchResult letter_benchmark(const Dataset& data, const LetterBenchConfig& config) {
  data.validate();
  const std::set<std::string> labels(data.labels.begin(), data.labels.end());
  if (config.kernel == KernelFamily::rbf) {
    for (const auto& [label, gamma] : config.gammas) {
      if (!labels.contains(label)) throw DomainError("gamma table names unknown class '" + label + "'");
    }
    for (const auto& label : labels) letter_kernel(config, label);
  }
  const std::vector<std::string> order(labels.begin(), labels.end());

  LetterBenchResult out;
  out.classes.resize(order.size());
  std::vector<std::exception_ptr> errors(order.size());
  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t i = next++; i < order.size(); i = next++) {
      try {
        out.classes[i] = run_letter_class(data, order[i], config);
      } catch (...) {
        errors[i] = std::current_exception();
      }
    }
  };
  const unsigned workers = std::min<unsigned>(std::max(1u, config.threads), static_cast<unsigned>(order.size()));
  if (workers <= 1) {
    worker();
  } else {
    std::vector<std::jthread> pool;
    for (unsigned t = 0; t < workers; ++t) pool.emplace_back(worker);
  }
  for (const auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }

  std::vector<double> slab_mcc, ocsvm_mcc;
  for (const auto& c : out.classes) {
    slab_mcc.push_back(c.slab.mcc.value);
    ocsvm_mcc.push_back(c.ocsvm.mcc.value);
  }
  out.median_slab_mcc = lower_median(slab_mcc);
  out.median_ocsvm_mcc = lower_median(ocsvm_mcc);
  return out;
}

}  // namespace ocssvm
