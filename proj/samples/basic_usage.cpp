// Trains a slab model on a 2-D Normal cloud, classifies a few probes and
// round-trips the model through its file format.

#include <fmt/core.h>

#include <sstream>

#include "ocssvm/ocssvm.hpp"

int main() {
  using namespace ocssvm;

  ToyConfig toy;
  toy.count = 500;
  toy.seed = 42;
  const Dataset data = sample_bivariate_normal(toy);

  SlabTrainConfig cfg;
  cfg.kernel = KernelSpec::rbf(0.5);
  cfg.nu1 = 0.1;
  cfg.nu2 = 0.05;
  const SlabModel model = train_slab(data.features, cfg);
  fmt::print("converged={} rho1={:.6g} rho2={:.6g} on-plane={}/{}\n", model.converged(), model.rho1(),
             model.rho2(), model.n_sv1(), model.n_sv2());
  fmt::print("fraction of training points inside the slab: {:.3f}\n", fraction_positive(model, data.features));

  // Centre, a typical point and a far outlier.
  for (const auto& [x, y] : {std::pair{0.0, 0.0}, std::pair{1.0, 0.5}, std::pair{4.0, 4.0}}) {
    const Eigen::Vector2d p(x, y);
    fmt::print("({}, {}) score={:.6g} -> {:+d}\n", x, y, score(model, p), predict(model, p));
  }

  std::stringstream file;
  save_model(model, file);
  const SlabModel back = load_model_as<SlabModel>(file);
  const Eigen::Vector2d probe(1.0, 0.5);
  fmt::print("reloaded model agrees: {}\n", score(back, probe) == score(model, probe));
}
