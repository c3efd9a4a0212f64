#include <gtest/gtest.h>

#include <filesystem>
#include <random>

#include "ocssvm/model_io.hpp"

namespace ocssvm {
namespace {

FeatureMatrix random_rows(std::mt19937_64& rng, Eigen::Index m, Eigen::Index dim) {
  std::uniform_real_distribution<double> u(0.0, 3.0);
  FeatureMatrix x(m, dim);
  for (Eigen::Index i = 0; i < x.size(); ++i) x.data()[i] = u(rng);
  return x;
}

SlabModel small_slab(std::uint64_t seed, KernelSpec kernel = KernelSpec::rbf(0.7)) {
  std::mt19937_64 rng(seed);
  SlabTrainConfig cfg;
  cfg.kernel = kernel;
  cfg.nu1 = 0.2;
  cfg.nu2 = 0.1;
  return train_slab(random_rows(rng, 40, 3), cfg);
}

TEST(ModelIo, SlabRoundTripIsBitExact) {
  const KernelSpec kernels[] = {KernelSpec::linear(), KernelSpec::rbf(0.7), KernelSpec::intersection(),
                                KernelSpec::hellinger(), KernelSpec::chi_squared()};
  std::mt19937_64 rng(5);
  std::uint64_t seed = 1;
  for (const auto& kernel : kernels) {
    const SlabModel model = small_slab(seed++, kernel);
    const std::string text = serialize(model);
    const SlabModel back = std::get<SlabModel>(parse_model(text));
    EXPECT_EQ(back.alpha(), model.alpha());
    EXPECT_EQ(back.alpha_bar(), model.alpha_bar());
    EXPECT_EQ(back.rho1(), model.rho1());
    EXPECT_EQ(back.rho2(), model.rho2());
    EXPECT_EQ(back.kernel(), model.kernel());
    EXPECT_EQ(back.n_sv1(), model.n_sv1());
    EXPECT_EQ(back.n_sv2(), model.n_sv2());
    EXPECT_EQ(back.offsets().degenerate, model.offsets().degenerate);
    const FeatureMatrix probes = random_rows(rng, 100, 3);
    for (Eigen::Index i = 0; i < probes.rows(); ++i) {
      EXPECT_EQ(score(back, probes.row(i)), score(model, probes.row(i)));
    }
    EXPECT_EQ(serialize(back), text);
  }
}

TEST(ModelIo, OcsvmRoundTrip) {
  std::mt19937_64 rng(6);
  const OcsvmModel model = train_ocsvm(random_rows(rng, 30, 2), 0.2, KernelSpec::rbf(1.5));
  const std::string text = serialize(model);
  EXPECT_TRUE(text.starts_with("OCSVM-MODEL v1\n"));
  const OcsvmModel back = std::get<OcsvmModel>(parse_model(text));
  EXPECT_EQ(back.rho(), model.rho());
  EXPECT_EQ(back.nu(), model.nu());
  const FeatureMatrix probes = random_rows(rng, 100, 2);
  for (Eigen::Index i = 0; i < probes.rows(); ++i) {
    EXPECT_EQ(score(back, probes.row(i)), score(model, probes.row(i)));
  }
}

TEST(ModelIo, FileLayout) {
  const std::string text = serialize(small_slab(3));
  const auto lines = text::split(text, '\n');
  EXPECT_EQ(lines[0], "OCSSVM-MODEL v1");
  EXPECT_EQ(lines[1], "kernel rbf gamma 0.7");
  EXPECT_EQ(lines[2], "params nu1 0.2 nu2 0.1 epsilon 0.6666666666666666");
  EXPECT_TRUE(lines[3].starts_with("offsets rho1 "));
  EXPECT_EQ(lines[4], "m 40 dim 3");
  EXPECT_TRUE(lines[5].starts_with("sv "));
  EXPECT_EQ(text::split_whitespace(lines[5]).size(), 6u);
  EXPECT_TRUE(lines[45].starts_with("end "));
  const auto body_end = text.rfind("end ");
  EXPECT_EQ(lines[45].substr(4), text::to_hex(text::fnv1a(text.substr(0, body_end))));
}

TEST(ModelIo, Errors) {
  const std::string text = serialize(small_slab(4));
  EXPECT_THROW(parse_model(text.substr(0, text.size() / 2)), FormatError);
  EXPECT_THROW(parse_model(""), FormatError);

  std::string future = text;
  future.replace(future.find("v1"), 2, "v999");
  EXPECT_THROW(parse_model(future), VersionError);

  std::string tampered = text;
  const auto sv = tampered.find("\nsv ") + 4;
  tampered[sv] = tampered[sv] == '1' ? '2' : '1';
  EXPECT_THROW(parse_model(tampered), ChecksumError);

  EXPECT_THROW(parse_model("HELLO v1\nend 0\n"), FormatError);
  EXPECT_THROW(load_model(std::filesystem::path("/nonexistent/model.txt")), IoError);
  EXPECT_THROW(load_model_as<OcsvmModel>(std::filesystem::path("/nonexistent/model.txt")), IoError);
}

TEST(ModelIo, MalformedBodyWithValidChecksum) {
  auto reseal = [](std::string body) {
    const auto sum = text::fnv1a(body);
    return body + "end " + text::to_hex(sum) + "\n";
  };
  EXPECT_THROW(parse_model(reseal("OCSSVM-MODEL v1\nkernel rbf\n")), DomainError);
  EXPECT_THROW(parse_model(reseal("OCSSVM-MODEL v1\nkernel linear\nparams nu1 0.5 nu2 0.5 epsilon 0.5\n"
                                  "offsets rho1 0 rho2 1\nm 2 dim 1\nsv 0.5 0.25 1\n")),
               FormatError);
  EXPECT_THROW(parse_model(reseal("OCSSVM-MODEL v1\nkernel linear\nparams nu1 0.5 nu2 0.5 epsilon 0.5\n"
                                  "offsets rho1 0 rho2 1\nm 1 dim 1\nsv 0.5 x 1\n")),
               FormatError);
  const AnyModel ok = parse_model(reseal(
      "OCSSVM-MODEL v1\nkernel linear\nparams nu1 0.5 nu2 0.5 epsilon 0.5\noffsets rho1 0 rho2 1\nm 2 dim 1\n"
      "sv 0.5 0.25 1\nsv 0.5 0.25 3\n"));
  EXPECT_TRUE(std::holds_alternative<SlabModel>(ok));
}

TEST(ModelIo, FileRoundTrip) {
  const SlabModel model = small_slab(8);
  const auto path = std::filesystem::temp_directory_path() / "ocssvm_model_io_test.model";
  save_model(model, path);
  const SlabModel back = load_model_as<SlabModel>(path);
  EXPECT_EQ(back.alpha(), model.alpha());
  EXPECT_THROW(load_model_as<OcsvmModel>(path), FormatError);
  std::filesystem::remove(path);
}

}  // namespace
}  // namespace ocssvm
