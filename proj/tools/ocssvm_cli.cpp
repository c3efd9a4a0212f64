#include <CLI11.hpp>
#include <fmt/core.h>
#include <fmt/ostream.h>
#include <json.hpp>

#include <cmath>
#include <cstdint>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <variant>
#include <vector>

#include "ocssvm/ocssvm.hpp"

namespace {

using namespace ocssvm;

constexpr int kExitOk = 0;
constexpr int kExitData = 1;
constexpr int kExitUsage = 2;
constexpr int kExitNotConverged = 3;

class UsageError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Runs `f`, reporting DomainError from parameter checks as a usage error.
template <typename F>
decltype(auto) as_usage(F&& f) {
  try {
    return f();
  } catch (const DomainError& e) {
    throw UsageError(e.what());
  }
}

enum class OutputFormat { text, csv, json_lines };

using Field = std::variant<std::string, double, std::int64_t, bool>;
using Record = std::vector<std::pair<std::string, Field>>;

std::string field_text(const Field& f) {
  return std::visit(
      [](const auto& v) -> std::string {
        using T = std::decay_t<decltype(v)>;
        if constexpr (std::is_same_v<T, std::string>) return v;
        else if constexpr (std::is_same_v<T, double>) return text::format_double(v);
        else if constexpr (std::is_same_v<T, bool>) return v ? "true" : "false";
        else return std::to_string(v);
      },
      f);
}

// text: `key=value ...` per line. csv: a header whenever the set of keys
// changes, then one row per record. json-lines: one object per line.
class RecordWriter {
 public:
  RecordWriter(std::ostream& out, OutputFormat format) : out_(out), format_(format) {}

  void write(const Record& record) {
    switch (format_) {
      case OutputFormat::text: {
        std::string line;
        for (const auto& [key, value] : record) {
          if (!line.empty()) line += ' ';
          line += key + '=' + field_text(value);
        }
        out_ << line << '\n';
        break;
      }
      case OutputFormat::csv: {
        std::vector<std::string> keys;
        for (const auto& kv : record) keys.push_back(kv.first);
        if (keys != header_) {
          header_ = keys;
          out_ << join(keys) << '\n';
        }
        std::vector<std::string> values;
        for (const auto& kv : record) values.push_back(field_text(kv.second));
        out_ << join(values) << '\n';
        break;
      }
      case OutputFormat::json_lines: {
        nlohmann::ordered_json obj = nlohmann::ordered_json::object();
        for (const auto& [key, value] : record) {
          std::visit([&](const auto& v) { obj[key] = v; }, value);
        }
        out_ << obj.dump() << '\n';
        break;
      }
    }
  }

  OutputFormat format() const { return format_; }
  std::ostream& stream() { return out_; }

 private:
  static std::string join(const std::vector<std::string>& parts) {
    std::string out;
    for (std::size_t i = 0; i < parts.size(); ++i) {
      if (i) out += ',';
      out += parts[i];
    }
    return out;
  }

  std::ostream& out_;
  OutputFormat format_;
  std::vector<std::string> header_;
};

// `-` is stdout.
class OutputSink {
 public:
  explicit OutputSink(const std::string& path) {
    if (path == "-") return;
    file_.emplace(path, std::ios::binary);
    if (!*file_) throw IoError("cannot open '" + path + "' for writing");
  }
  std::ostream& stream() { return file_ ? static_cast<std::ostream&>(*file_) : std::cout; }
  void finish() {
    stream().flush();
    if (!stream()) throw IoError("failed writing output");
  }

 private:
  std::optional<std::ofstream> file_;
};

struct GlobalOptions {
  std::uint64_t seed = 1;
  unsigned threads = 1;
  std::string output = "-";
  OutputFormat format = OutputFormat::text;
};

struct DataOptions {
  std::string path;
  std::string format = "letter";
  int label_column = 0;
};

void add_data_format_options(CLI::App* cmd, DataOptions& opts) {
  cmd->add_option("--data-format", opts.format, "letter, libsvm or csv")
      ->check(CLI::IsMember({"letter", "libsvm", "csv"}))
      ->capture_default_str();
  cmd->add_option("--label-column", opts.label_column, "CSV class column (-1: none)")->capture_default_str();
}

std::string read_source(const std::string& path) {
  if (path == "-") return read_all(std::cin);
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open '" + path + "'");
  return read_all(in);
}

Dataset parse_dataset(const std::string& content, const std::string& name, const DataOptions& opts) {
  std::istringstream in(content);
  if (opts.format == "letter") {
    LoadWarnings warnings;
    Dataset d = load_letter(in, name, &warnings);
    for (const auto& w : warnings) fmt::print(stderr, "warning: {}\n", w);
    return d;
  }
  if (opts.format == "libsvm") return load_libsvm(in, name);
  return load_csv(in, opts.label_column, name);
}

Dataset load_dataset(const std::string& path, const DataOptions& opts) {
  return parse_dataset(read_source(path), path == "-" ? "stdin" : path, opts);
}

FeatureMatrix rows_matching(const Dataset& data, const std::string& label, Eigen::Index limit) {
  std::vector<Eigen::Index> idx;
  for (Eigen::Index i = 0; i < std::min(limit, data.size()); ++i) {
    if (data.labels[static_cast<std::size_t>(i)] == label) idx.push_back(i);
  }
  if (idx.empty()) throw DomainError("no training rows for class '" + label + "'");
  return gather_rows(data.features, idx);
}

KernelSpec make_kernel(const std::string& name, std::optional<double> gamma) {
  return as_usage([&] {
    const KernelFamily family = parse_kernel_family(name);
    if (family != KernelFamily::rbf) return KernelSpec::make(family);
    if (!gamma) throw UsageError("the rbf kernel needs --gamma");
    return KernelSpec::rbf(*gamma);
  });
}

std::vector<std::string> kernel_names() {
  std::vector<std::string> out;
  for (auto f : {KernelFamily::linear, KernelFamily::rbf, KernelFamily::intersection, KernelFamily::hellinger,
                 KernelFamily::chi_squared}) {
    out.emplace_back(to_string(f));
  }
  return out;
}

std::string gamma_text(const KernelSpec& k) { return k.gamma() ? text::format_double(*k.gamma()) : ""; }

// ---- train ----------------------------------------------------------------

struct TrainOptions {
  DataOptions data;
  std::optional<std::string> target;
  std::string kernel = "rbf";
  std::optional<double> gamma;
  double nu1 = 0.10;
  double nu2 = 0.01;
  double epsilon = kDefaultEpsilon;
  bool baseline = false;
  double nu = 0.10;
  std::optional<Eigen::Index> train_rows;
  bool unit_scale = false;
  std::string model_out;
};

int cmd_train(const TrainOptions& opts, const GlobalOptions& global) {
  const bool letter = opts.data.format == "letter";
  if (letter && !opts.target) throw UsageError("--target is required for letter data");
  std::optional<double> gamma = opts.gamma;
  if (!gamma && letter && opts.kernel == "rbf") {
    const auto table = default_letter_gammas();
    if (const auto it = table.find(*opts.target); it != table.end()) gamma = it->second;
  }
  SlabTrainConfig cfg;
  cfg.nu1 = opts.nu1;
  cfg.nu2 = opts.nu2;
  cfg.epsilon = opts.epsilon;
  cfg.kernel = make_kernel(opts.kernel, gamma);
  if (opts.baseline) {
    if (!(opts.nu > 0.0 && opts.nu <= 1.0)) throw UsageError("--nu must lie in (0, 1]");
  } else {
    as_usage([&] { cfg.validate(); });
  }

  if (opts.unit_scale && !letter) throw UsageError("--unit-scale applies to letter data only");
  Dataset data = load_dataset(opts.data.path, opts.data);
  if (opts.unit_scale) data.features /= kLetterFeatureMax;
  const Eigen::Index limit = opts.train_rows.value_or(letter ? kLetterTrainRows : data.size());
  const FeatureMatrix x = opts.target ? rows_matching(data, *opts.target, limit)
                                      : FeatureMatrix(data.features.topRows(std::min(limit, data.size())));

  OutputSink model_sink(opts.model_out.empty() ? global.output : opts.model_out);
  bool converged = false;
  Record summary;
  if (opts.baseline) {
    const OcsvmModel model = train_ocsvm(x, opts.nu, cfg.kernel);
    save_model(model, model_sink.stream());
    converged = model.converged();
    summary = {{"classifier", std::string("ocsvm")}, {"m", std::int64_t{model.m()}},
               {"rho", model.rho()},                 {"support_vectors", std::int64_t{model.support_vectors().rows()}},
               {"iterations", std::int64_t{model.solver_iterations()}}, {"converged", converged}};
  } else {
    const SlabModel model = train_slab(x, cfg);
    save_model(model, model_sink.stream());
    converged = model.converged();
    summary = {{"classifier", std::string("ocssvm")},
               {"m", std::int64_t{model.m()}},
               {"rho1", model.rho1()},
               {"rho2", model.rho2()},
               {"n_sv1", std::int64_t{model.n_sv1()}},
               {"n_sv2", std::int64_t{model.n_sv2()}},
               {"degenerate", model.offsets().degenerate},
               {"iterations", std::int64_t{model.solver_iterations()}},
               {"converged", converged}};
  }
  model_sink.finish();
  // With no --model-out the model itself occupies --output.
  if (!opts.model_out.empty()) {
    OutputSink sink(global.output);
    RecordWriter(sink.stream(), global.format).write(summary);
    sink.finish();
  }
  if (!converged) fmt::print(stderr, "warning: solver did not converge; model written anyway\n");
  return converged ? kExitOk : kExitNotConverged;
}

// ---- predict --------------------------------------------------------------

struct PredictOptions {
  std::string model;
  DataOptions data;
};

int cmd_predict(const PredictOptions& opts, const GlobalOptions& global) {
  const AnyModel any = load_model(std::filesystem::path(opts.model));
  const std::string content = read_source(opts.data.path);
  OutputSink sink(global.output);
  if (text::trim(content).empty()) {
    sink.finish();
    return kExitOk;
  }
  const Dataset data = parse_dataset(content, opts.data.path, opts.data);
  RecordWriter writer(sink.stream(), global.format);
  std::visit(
      [&](const auto& model) {
        if (data.dim() != model.dim()) {
          throw DimensionError("data has " + std::to_string(data.dim()) + " features, model expects " +
                               std::to_string(model.dim()));
        }
        for (Eigen::Index i = 0; i < data.size(); ++i) {
          const double s = score(model, data.features.row(i));
          const int label = predict(model, data.features.row(i));
          if (global.format == OutputFormat::text) {
            sink.stream() << (label > 0 ? "+1 " : "-1 ") << text::format_double(s) << '\n';
          } else {
            writer.write({{"label", std::int64_t{label}}, {"score", s}});
          }
        }
      },
      any);
  sink.finish();
  return kExitOk;
}

// ---- eval -----------------------------------------------------------------

struct EvalOptions {
  std::string model;
  std::string positives;
  std::string negatives;
  DataOptions data;
};

Record report_record(const EvalReport& r) {
  return {{"tp", static_cast<std::int64_t>(r.counts.tp)},
          {"fp", static_cast<std::int64_t>(r.counts.fp)},
          {"tn", static_cast<std::int64_t>(r.counts.tn)},
          {"fn", static_cast<std::int64_t>(r.counts.fn)},
          {"mcc", r.mcc.value},
          {"mcc_defined", r.mcc.defined},
          {"precision", r.precision.value},
          {"recall", r.recall.value},
          {"f1", r.f1.value}};
}

int cmd_eval(const EvalOptions& opts, const GlobalOptions& global) {
  const AnyModel any = load_model(std::filesystem::path(opts.model));
  const Dataset pos = load_dataset(opts.positives, opts.data);
  const Dataset neg = load_dataset(opts.negatives, opts.data);
  const EvalReport report =
      std::visit([&](const auto& model) { return one_vs_rest_eval(model, pos.features, neg.features); }, any);
  OutputSink sink(global.output);
  RecordWriter(sink.stream(), global.format).write(report_record(report));
  sink.finish();
  return kExitOk;
}

// ---- toy ------------------------------------------------------------------

struct ToyOptions {
  Eigen::Index count = 1500;
  std::string kernel = "rbf";
  double gamma = 0.5;
  double nu1 = 0.10;
  double nu2 = 0.05;
  double epsilon = kDefaultEpsilon;
  bool sweep = false;
  double mean_x = 0.0;
  double mean_y = 0.0;
  std::string grid_out;
};

int cmd_toy(const ToyOptions& opts, const GlobalOptions& global) {
  if (opts.count < 2) throw UsageError("--count must be at least 2");
  SlabTrainConfig cfg;
  cfg.nu1 = opts.nu1;
  cfg.nu2 = opts.nu2;
  cfg.epsilon = opts.epsilon;
  cfg.kernel = make_kernel(opts.kernel, opts.gamma);
  as_usage([&] { cfg.validate(); });
  const std::vector<double> epsilons = opts.sweep ? toy_epsilons() : std::vector<double>{opts.epsilon};
  for (const double eps : epsilons) {
    SlabTrainConfig c = cfg;
    c.epsilon = eps;
    as_usage([&] { c.validate(); });
  }

  ToyConfig toy;
  toy.count = opts.count;
  toy.mean = Eigen::Vector2d(opts.mean_x, opts.mean_y);
  toy.seed = global.seed;
  const FeatureMatrix x = sample_bivariate_normal(toy).features;

  OutputSink sink(global.output);
  RecordWriter writer(sink.stream(), global.format);
  bool converged = true;
  std::optional<SlabModel> grid_model;
  for (const double eps : epsilons) {
    SlabTrainConfig c = cfg;
    c.epsilon = eps;
    SlabModel model = train_slab(x, c);
    const ToyPoint p = summarize_toy(model, x);
    converged = converged && p.converged;
    writer.write({{"kernel", std::string(to_string(cfg.kernel.family()))},
                  {"epsilon", p.epsilon},
                  {"fraction_positive", p.fraction_positive},
                  {"rho1", p.rho1},
                  {"rho2", p.rho2},
                  {"degenerate", p.degenerate},
                  {"converged", p.converged}});
    if (std::abs(eps - opts.epsilon) < 1e-12) grid_model.emplace(std::move(model));
  }
  sink.finish();

  if (!opts.grid_out.empty()) {
    if (!grid_model) {
      grid_model.emplace(train_slab(x, cfg));
      converged = converged && grid_model->converged();
    }
    OutputSink grid(opts.grid_out);
    grid.stream() << "x,y,score,label\n";
    for (const auto& g : score_grid(*grid_model, x)) {
      grid.stream() << text::format_double(g.x) << ',' << text::format_double(g.y) << ','
                    << text::format_double(g.score) << ',' << g.label << '\n';
    }
    grid.finish();
  }
  return converged ? kExitOk : kExitNotConverged;
}

// ---- letter-bench ---------------------------------------------------------

struct LetterOptions {
  std::string data;
  std::string kernel = "rbf";
  std::string gamma_table;
  double nu1 = 0.10;
  double nu2 = 0.01;
  double epsilon = kDefaultEpsilon;
  double nu = 0.10;
  Eigen::Index train_rows = kLetterTrainRows;
  bool unit_scale = false;
};

int cmd_letter_bench(const LetterOptions& opts, const GlobalOptions& global) {
  LetterBenchConfig cfg;
  cfg.kernel = as_usage([&] { return parse_kernel_family(opts.kernel); });
  cfg.nu1 = opts.nu1;
  cfg.nu2 = opts.nu2;
  cfg.epsilon = opts.epsilon;
  cfg.nu = opts.nu;
  cfg.train_rows = opts.train_rows;
  cfg.threads = global.threads;
  SlabTrainConfig check;
  check.nu1 = cfg.nu1;
  check.nu2 = cfg.nu2;
  check.epsilon = cfg.epsilon;
  as_usage([&] { check.validate(); });
  if (!(cfg.nu > 0.0 && cfg.nu <= 1.0)) throw UsageError("--nu must lie in (0, 1]");
  if (!opts.gamma_table.empty()) {
    std::istringstream in(read_source(opts.gamma_table));
    cfg.gammas = parse_gamma_table(in, opts.gamma_table);
  }

  Dataset data = load_dataset(opts.data, DataOptions{opts.data, "letter", 0});
  if (opts.unit_scale) data.features /= kLetterFeatureMax;
  const LetterBenchResult result = letter_benchmark(data, cfg);

  OutputSink sink(global.output);
  RecordWriter writer(sink.stream(), global.format);
  for (const auto& c : result.classes) {
    writer.write({{"class", c.label},
                  {"gamma", gamma_text(c.kernel)},
                  {"mcc_ocssvm", c.slab.mcc.value},
                  {"mcc_ocsvm", c.ocsvm.mcc.value},
                  {"converged", c.slab_converged && c.ocsvm_converged}});
  }
  writer.write({{"class", std::string("median")},
                {"gamma", std::string()},
                {"mcc_ocssvm", result.median_slab_mcc},
                {"mcc_ocsvm", result.median_ocsvm_mcc},
                {"converged", result.all_converged()}});
  sink.finish();
  return result.all_converged() ? kExitOk : kExitNotConverged;
}

// ---- gridsearch -----------------------------------------------------------

struct GridOptions {
  DataOptions data;
  std::optional<std::string> target;
  std::optional<Eigen::Index> train_rows;
  std::vector<std::string> classifiers = {"ocssvm"};
  std::vector<std::string> kernels = {"rbf"};
  std::vector<double> gammas = {1.0};
  std::vector<double> nu1s = {0.10};
  std::vector<double> nu2s = {0.01};
  std::vector<double> epsilons = {kDefaultEpsilon};
  std::vector<double> nus = {0.10};
  int folds = 5;
};

int cmd_gridsearch(const GridOptions& opts, const GlobalOptions& global) {
  const bool letter = opts.data.format == "letter";
  if (letter && !opts.target) throw UsageError("--target is required for letter data");
  GridSearchSpec spec;
  spec.classifiers.clear();
  for (const auto& c : opts.classifiers) {
    if (c == "ocssvm") spec.classifiers.push_back(Classifier::slab);
    else if (c == "ocsvm") spec.classifiers.push_back(Classifier::ocsvm);
    else throw UsageError("unknown classifier '" + c + "' (expected ocssvm or ocsvm)");
  }
  spec.kernels.clear();
  for (const auto& k : opts.kernels) spec.kernels.push_back(as_usage([&] { return parse_kernel_family(k); }));
  spec.gammas = opts.gammas;
  spec.nu1s = opts.nu1s;
  spec.nu2s = opts.nu2s;
  spec.epsilons = opts.epsilons;
  spec.nus = opts.nus;
  spec.folds = opts.folds;
  spec.seed = global.seed;
  spec.threads = global.threads;
  as_usage([&] { spec.validate(); });
  for (const double eps : spec.epsilons) {
    if (eps == 1.0) throw UsageError("epsilon must differ from 1");
  }

  const Dataset data = load_dataset(opts.data.path, opts.data);
  const Eigen::Index limit = opts.train_rows.value_or(letter ? kLetterTrainRows : data.size());
  const FeatureMatrix x = opts.target ? rows_matching(data, *opts.target, limit)
                                      : FeatureMatrix(data.features.topRows(std::min(limit, data.size())));
  const auto results = grid_search(x, spec);

  OutputSink sink(global.output);
  RecordWriter writer(sink.stream(), global.format);
  std::int64_t rank = 0;
  for (const auto& r : results) {
    const bool slab = r.config.classifier == Classifier::slab;
    auto param = [&](bool used, double v) { return used ? text::format_double(v) : std::string(); };
    writer.write({{"rank", ++rank},
                  {"index", static_cast<std::int64_t>(r.index)},
                  {"classifier", std::string(to_string(r.config.classifier))},
                  {"kernel", std::string(to_string(r.config.kernel.family()))},
                  {"gamma", gamma_text(r.config.kernel)},
                  {"nu1", param(slab, r.config.nu1)},
                  {"nu2", param(slab, r.config.nu2)},
                  {"epsilon", param(slab, r.config.epsilon)},
                  {"nu", param(!slab, r.config.nu)},
                  {"mean_recall", r.mean_metric},
                  {"error", r.error.value_or("")}});
  }
  sink.finish();
  return kExitOk;
}

// ---- kkt-report -----------------------------------------------------------

struct KktOptions {
  std::string model;
  std::string data;
  DataOptions data_format;
  bool counts_only = false;
};

int cmd_kkt_report(const KktOptions& opts, const GlobalOptions& global) {
  const SlabModel model = load_model_as<SlabModel>(std::filesystem::path(opts.model));
  if (!opts.data.empty()) {
    const Dataset data = load_dataset(opts.data, opts.data_format);
    if (data.features != model.training_rows()) {
      throw DimensionError("--data does not match the rows the model was trained on");
    }
  }
  const auto report = classify_kkt_cases(model, gram_matrix(model.kernel(), model.training_rows()));

  OutputSink sink(global.output);
  RecordWriter writer(sink.stream(), global.format);
  if (!opts.counts_only) {
    for (Eigen::Index i = 0; i < model.m(); ++i) {
      writer.write({{"index", std::int64_t{i}},
                    {"case", std::string(to_string(report.labels[static_cast<std::size_t>(i)]))},
                    {"score", report.scores(i)},
                    {"alpha", model.alpha()(i)},
                    {"alpha_bar", model.alpha_bar()(i)}});
    }
  }
  Record counts;
  for (const KktCase c : kAllKktCases) counts.emplace_back(std::string(to_string(c)), std::int64_t(report.count(c)));
  const auto& cfg = model.train_config();
  const double m = static_cast<double>(model.m());
  counts.emplace_back("total", std::int64_t{model.m()});
  counts.emplace_back("below_limit", static_cast<std::int64_t>(std::ceil(cfg.nu1 * m)));
  counts.emplace_back("above_limit", static_cast<std::int64_t>(std::ceil(cfg.nu2 * m)));
  writer.write(counts);
  sink.finish();
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"One-class slab SVM: training, prediction and the reference experiments"};
  app.require_subcommand(1, 1);
  app.fallthrough();

  GlobalOptions global;
  const std::map<std::string, OutputFormat> formats = {
      {"text", OutputFormat::text}, {"csv", OutputFormat::csv}, {"json-lines", OutputFormat::json_lines}};
  app.add_option("--seed", global.seed, "Seed for generated data and fold shuffles")->capture_default_str();
  app.add_option("--threads", global.threads, "Worker threads for letter-bench and gridsearch")
      ->check(CLI::PositiveNumber)
      ->capture_default_str();
  app.add_option("--output", global.output, "Output path, - for stdout")->capture_default_str();
  std::string format_name = "text";
  app.add_option("--format", format_name, "text, csv or json-lines")
      ->check(CLI::IsMember({"text", "csv", "json-lines"}))
      ->capture_default_str();

  const auto kernels = kernel_names();

  TrainOptions train;
  auto* train_cmd = app.add_subcommand("train", "Train a model and write the model file");
  train_cmd->add_option("--data", train.data.path, "Training data (- for stdin)")->required();
  add_data_format_options(train_cmd, train.data);
  train_cmd->add_option("--target", train.target, "Class to train on (required for letter data)");
  train_cmd->add_option("--kernel", train.kernel)->check(CLI::IsMember(kernels))->capture_default_str();
  train_cmd->add_option("--gamma", train.gamma, "RBF width (letter data defaults to the per-class table)");
  train_cmd->add_option("--nu1", train.nu1)->capture_default_str();
  train_cmd->add_option("--nu2", train.nu2)->capture_default_str();
  train_cmd->add_option("--epsilon", train.epsilon)->capture_default_str();
  train_cmd->add_flag("--baseline-ocsvm", train.baseline, "Train the one-class SVM instead");
  train_cmd->add_option("--nu", train.nu, "One-class SVM nu")->capture_default_str();
  train_cmd->add_option("--train-rows", train.train_rows, "Use only rows before this index (letter: 16000)");
  train_cmd->add_flag("--unit-scale", train.unit_scale, "Divide letter features by 15");
  train_cmd->add_option("--model-out", train.model_out, "Model path (default: --output)");

  PredictOptions pred;
  auto* predict_cmd = app.add_subcommand("predict", "Print +1/-1 and the score for every row");
  predict_cmd->add_option("--model", pred.model)->required();
  predict_cmd->add_option("--data", pred.data.path, "Rows to classify (- for stdin)")->required();
  add_data_format_options(predict_cmd, pred.data);

  EvalOptions ev;
  auto* eval_cmd = app.add_subcommand("eval", "Confusion counts, MCC, precision, recall and F1");
  eval_cmd->add_option("--model", ev.model)->required();
  eval_cmd->add_option("--positives", ev.positives)->required();
  eval_cmd->add_option("--negatives", ev.negatives)->required();
  add_data_format_options(eval_cmd, ev.data);

  ToyOptions toy;
  auto* toy_cmd = app.add_subcommand("toy", "Fraction positive on a 2-D Normal cloud");
  toy_cmd->add_option("--count", toy.count)->capture_default_str();
  toy_cmd->add_option("--kernel", toy.kernel)->check(CLI::IsMember({"linear", "rbf"}))->capture_default_str();
  toy_cmd->add_option("--gamma", toy.gamma)->capture_default_str();
  toy_cmd->add_option("--nu1", toy.nu1)->capture_default_str();
  toy_cmd->add_option("--nu2", toy.nu2)->capture_default_str();
  toy_cmd->add_option("--epsilon", toy.epsilon, "Single epsilon, also the one used for --grid-out")
      ->capture_default_str();
  toy_cmd->add_flag("--epsilon-sweep", toy.sweep, "Run epsilon = 1/6 .. 5/6");
  toy_cmd->add_option("--mean-x", toy.mean_x)->capture_default_str();
  toy_cmd->add_option("--mean-y", toy.mean_y)->capture_default_str();
  toy_cmd->add_option("--grid-out", toy.grid_out, "Write x,y,score,label over a 200x200 grid");

  LetterOptions letter;
  auto* letter_cmd = app.add_subcommand("letter-bench", "Per-class MCC of both classifiers on letter data");
  letter_cmd->add_option("--data", letter.data)->required();
  letter_cmd->add_option("--kernel", letter.kernel)->check(CLI::IsMember(kernels))->capture_default_str();
  letter_cmd->add_option("--gamma-table", letter.gamma_table, "Lines of '<class> <gamma>' (rbf only)");
  letter_cmd->add_option("--nu1", letter.nu1)->capture_default_str();
  letter_cmd->add_option("--nu2", letter.nu2)->capture_default_str();
  letter_cmd->add_option("--epsilon", letter.epsilon)->capture_default_str();
  letter_cmd->add_option("--nu", letter.nu)->capture_default_str();
  letter_cmd->add_option("--train-rows", letter.train_rows)->capture_default_str();
  letter_cmd->add_flag("--unit-scale", letter.unit_scale, "Divide features by 15 before training");

  GridOptions grid;
  auto* grid_cmd = app.add_subcommand("gridsearch", "k-fold recall over a parameter grid, ranked");
  grid_cmd->add_option("--data", grid.data.path)->required();
  add_data_format_options(grid_cmd, grid.data);
  grid_cmd->add_option("--target", grid.target, "Class to search on (required for letter data)");
  grid_cmd->add_option("--train-rows", grid.train_rows, "Use only rows before this index (letter: 16000)");
  grid_cmd->add_option("--classifiers", grid.classifiers, "ocssvm, ocsvm")->delimiter(',')->capture_default_str();
  grid_cmd->add_option("--kernels", grid.kernels)->delimiter(',')->check(CLI::IsMember(kernels));
  grid_cmd->add_option("--gammas", grid.gammas)->delimiter(',');
  grid_cmd->add_option("--nu1s", grid.nu1s)->delimiter(',');
  grid_cmd->add_option("--nu2s", grid.nu2s)->delimiter(',');
  grid_cmd->add_option("--epsilons", grid.epsilons)->delimiter(',');
  grid_cmd->add_option("--nus", grid.nus)->delimiter(',');
  grid_cmd->add_option("--folds", grid.folds)->capture_default_str();

  KktOptions kkt;
  auto* kkt_cmd = app.add_subcommand("kkt-report", "Classify each training row by its dual pair");
  kkt_cmd->add_option("--model", kkt.model)->required();
  kkt_cmd->add_option("--data", kkt.data, "Training rows, checked against the model");
  add_data_format_options(kkt_cmd, kkt.data_format);
  kkt_cmd->add_flag("--counts-only", kkt.counts_only);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e) == 0 ? kExitOk : kExitUsage;
  }
  global.format = formats.at(format_name);

  try {
    if (*train_cmd) return cmd_train(train, global);
    if (*predict_cmd) return cmd_predict(pred, global);
    if (*eval_cmd) return cmd_eval(ev, global);
    if (*toy_cmd) return cmd_toy(toy, global);
    if (*letter_cmd) return cmd_letter_bench(letter, global);
    if (*grid_cmd) return cmd_gridsearch(grid, global);
    if (*kkt_cmd) return cmd_kkt_report(kkt, global);
  } catch (const UsageError& e) {
    fmt::print(stderr, "usage error: {}\n", e.what());
    return kExitUsage;
  } catch (const std::exception& e) {
    fmt::print(stderr, "error: {}\n", e.what());
    return kExitData;
  }
  return kExitUsage;
}
