#include <gtest/gtest.h>
#include <sys/wait.h>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <random>
#include <string>

#include "ocssvm/ocssvm.hpp"

namespace ocssvm {
namespace {

namespace fs = std::filesystem;

struct RunResult {
  int exit_code = -1;
  std::string out;
};

RunResult run(const std::string& args) {
  const std::string cmd = std::string(OCSSVM_CLI) + " " + args + " 2>/dev/null";
  FILE* pipe = popen(cmd.c_str(), "r");
  if (!pipe) return {};
  RunResult r;
  char buf[4096];
  while (const std::size_t n = fread(buf, 1, sizeof(buf), pipe)) r.out.append(buf, n);
  const int status = pclose(pipe);
  r.exit_code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  return r;
}

class CliTest : public ::testing::Test {
 protected:
  void SetUp() override {
    dir_ = fs::temp_directory_path() /
           ("ocssvm_cli_test_" + std::string(::testing::UnitTest::GetInstance()->current_test_info()->name()));
    fs::create_directories(dir_);
  }
  void TearDown() override { fs::remove_all(dir_); }

  std::string path(const std::string& name) const { return (dir_ / name).string(); }

  std::string write(const std::string& name, const std::string& content) const {
    std::ofstream(path(name), std::ios::binary) << content;
    return path(name);
  }

  // 2-D Normal cloud as `label,x,y` CSV with a header.
  std::string toy_csv(const std::string& name, Eigen::Index count, std::uint64_t seed) const {
    ToyConfig cfg;
    cfg.count = count;
    cfg.seed = seed;
    Dataset d = sample_bivariate_normal(cfg);
    std::ofstream out(path(name), std::ios::binary);
    write_csv(out, d);
    return path(name);
  }

  fs::path dir_;
};

TEST_F(CliTest, UsageErrorsExitTwo) {
  EXPECT_EQ(run("").exit_code, 2);
  EXPECT_EQ(run("train --data " + std::string(OCSSVM_LETTER_DATA) + " --model-out " + path("m")).exit_code, 2);
  EXPECT_EQ(run("train --data " + std::string(OCSSVM_LETTER_DATA) + " --target A --epsilon 1.0 --model-out " +
                path("m"))
                .exit_code,
            2);
  EXPECT_EQ(run("toy --no-such-flag").exit_code, 2);
  EXPECT_EQ(run("--format xml toy").exit_code, 2);
  EXPECT_EQ(run("toy --kernel rbf --gamma -1").exit_code, 2);
}

TEST_F(CliTest, TrainLetterClassWithTableGamma) {
  const auto r = run("train --data " + std::string(OCSSVM_LETTER_DATA) + " --target A --kernel rbf --gamma 1.0 " +
                     "--model-out " + path("a.model"));
  EXPECT_EQ(r.exit_code, 0);
  EXPECT_NE(r.out.find("converged=true"), std::string::npos);
  const SlabModel model = load_model_as<SlabModel>(fs::path(path("a.model")));
  EXPECT_EQ(model.kernel(), KernelSpec::rbf(1.0));
  EXPECT_EQ(model.dim(), 16);
}

TEST_F(CliTest, PredictOnTrainingRows) {
  const auto data = toy_csv("toy.csv", 400, 3);
  ASSERT_EQ(run("train --data " + data + " --data-format csv --kernel rbf --gamma 0.5 --nu1 0.1 --nu2 0.05 " +
                "--model-out " + path("m"))
                .exit_code,
            0);
  const auto r = run("predict --model " + path("m") + " --data " + data + " --data-format csv");
  ASSERT_EQ(r.exit_code, 0);
  int pos = 0, lines = 0;
  for (const auto line : text::split(r.out, '\n')) {
    if (line.empty()) continue;
    ++lines;
    pos += line.starts_with("+1 ");
  }
  EXPECT_EQ(lines, 400);
  // At most nu1 + nu2 of the training rows lie strictly outside the slab.
  EXPECT_NEAR(pos / 400.0, 1.0 - 0.1 - 0.05, 0.03);
}

TEST_F(CliTest, PredictEdgeCases) {
  const auto data = toy_csv("toy.csv", 50, 4);
  ASSERT_EQ(run("train --data " + data + " --data-format csv --kernel linear --model-out " + path("m")).exit_code, 0);
  const auto empty = run("predict --model " + path("m") + " --data " + write("empty.csv", ""));
  EXPECT_EQ(empty.exit_code, 0);
  EXPECT_EQ(empty.out, "");
  const auto wide = write("wide.csv", "a,1,2,3\n");
  EXPECT_EQ(run("predict --model " + path("m") + " --data " + wide + " --data-format csv").exit_code, 1);
  EXPECT_EQ(run("predict --model " + path("missing") + " --data " + wide).exit_code, 1);
}

TEST_F(CliTest, EvalMatchesLibrary) {
  const auto data = toy_csv("toy.csv", 300, 5);
  ASSERT_EQ(run("train --data " + data + " --data-format csv --kernel rbf --gamma 0.5 --nu1 0.1 --nu2 0.05 " +
                "--model-out " + path("m"))
                .exit_code,
            0);
  const SlabModel model = load_model_as<SlabModel>(fs::path(path("m")));

  // Split fresh points by the model's own verdict: a perfect labelling.
  ToyConfig cfg;
  cfg.count = 500;
  cfg.seed = 77;
  const Dataset probe = sample_bivariate_normal(cfg);
  Dataset accepted, rejected;
  std::vector<Eigen::Index> acc, rej;
  for (Eigen::Index i = 0; i < probe.size(); ++i) (predict(model, probe.features.row(i)) > 0 ? acc : rej).push_back(i);
  ASSERT_FALSE(acc.empty());
  ASSERT_FALSE(rej.empty());
  accepted.features = gather_rows(probe.features, acc);
  accepted.labels.assign(acc.size(), "p");
  rejected.features = gather_rows(probe.features, rej);
  rejected.labels.assign(rej.size(), "n");
  {
    std::ofstream a(path("pos.csv")), b(path("neg.csv"));
    write_csv(a, accepted);
    write_csv(b, rejected);
  }
  const std::string base = "eval --model " + path("m") + " --data-format csv ";
  const auto perfect = run("--format json-lines " + base + "--positives " + path("pos.csv") + " --negatives " +
                           path("neg.csv"));
  ASSERT_EQ(perfect.exit_code, 0);
  EXPECT_NE(perfect.out.find("\"mcc\":1.0"), std::string::npos) << perfect.out;
  const auto inverted = run(base + "--positives " + path("neg.csv") + " --negatives " + path("pos.csv"));
  EXPECT_NE(inverted.out.find("mcc=-1 "), std::string::npos) << inverted.out;

  // A mixed split against the library's own report.
  const auto mixed = run("--format csv " + base + "--positives " + data + " --negatives " + path("pos.csv"));
  const Dataset train = load_csv(fs::path(data));
  const EvalReport expected = one_vs_rest_eval(model, train.features, accepted.features);
  const auto rows = text::split(mixed.out, '\n');
  ASSERT_GE(rows.size(), 2u);
  EXPECT_EQ(rows[0], "tp,fp,tn,fn,mcc,mcc_defined,precision,recall,f1");
  const auto fields = text::split(rows[1], ',');
  EXPECT_EQ(fields[0], std::to_string(expected.counts.tp));
  EXPECT_EQ(fields[1], std::to_string(expected.counts.fp));
  EXPECT_EQ(fields[4], text::format_double(expected.mcc.value));
}

TEST_F(CliTest, ToyGridAndDeterminism) {
  const auto a = run("--seed 9 --format csv toy --count 200 --grid-out " + path("grid.csv"));
  const auto b = run("--seed 9 --format csv toy --count 200");
  ASSERT_EQ(a.exit_code, 0);
  EXPECT_EQ(a.out, b.out);
  std::ifstream grid(path("grid.csv"));
  std::string line;
  std::getline(grid, line);
  EXPECT_EQ(line, "x,y,score,label");
  int rows = 0;
  while (std::getline(grid, line)) ++rows;
  EXPECT_EQ(rows, 40000);
  const auto sweep = run("--seed 9 toy --count 200 --epsilon-sweep");
  EXPECT_EQ(std::count(sweep.out.begin(), sweep.out.end(), '\n'), 5);
}

TEST_F(CliTest, LetterBenchRejectsUnknownTableClass) {
  write("gammas.txt", "A 1\nAA 2\n");
  EXPECT_EQ(run("letter-bench --data " + std::string(OCSSVM_LETTER_DATA) + " --gamma-table " + path("gammas.txt"))
                .exit_code,
            1);
}

TEST_F(CliTest, GridSearchSingleConfig) {
  const auto data = toy_csv("toy.csv", 100, 6);
  const auto r = run("--format csv gridsearch --data " + data +
                     " --data-format csv --kernels linear --nu1s 0.2 --nu2s 0.1 --epsilons 0.5 --folds 4");
  ASSERT_EQ(r.exit_code, 0);
  const auto rows = text::split(r.out, '\n');
  ASSERT_EQ(rows.size(), 3u);  // header, one row, trailing empty
  EXPECT_TRUE(rows[1].starts_with("1,0,ocssvm,linear,,0.2,0.1,0.5,,")) << rows[1];
}

TEST_F(CliTest, KktReportOnToyModel) {
  const auto data = toy_csv("toy.csv", 300, 8);
  ASSERT_EQ(run("train --data " + data + " --data-format csv --kernel rbf --gamma 0.5 --nu1 0.1 --nu2 0.05 " +
                "--model-out " + path("m"))
                .exit_code,
            0);
  const auto r = run("--format json-lines kkt-report --model " + path("m") + " --data " + data +
                     " --data-format csv --counts-only");
  ASSERT_EQ(r.exit_code, 0);
  const SlabModel model = load_model_as<SlabModel>(fs::path(path("m")));
  ASSERT_FALSE(model.offsets().degenerate);
  EXPECT_NE(r.out.find("\"invalid\":0"), std::string::npos) << r.out;
  EXPECT_NE(r.out.find("\"total\":300"), std::string::npos) << r.out;

  const auto full = run("kkt-report --model " + path("m"));
  EXPECT_EQ(std::count(full.out.begin(), full.out.end(), '\n'), 301);
  EXPECT_EQ(run("kkt-report --model " + path("m") + " --data " + toy_csv("other.csv", 300, 9) +
                " --data-format csv")
                .exit_code,
            1);
}

}  // namespace
}  // namespace ocssvm
