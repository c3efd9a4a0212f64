#pragma once

#include <boost/multiprecision/cpp_bin_float.hpp>
#include <boost/multiprecision/cpp_int.hpp>

#include "ocssvm/eval.hpp"

namespace ocssvm::testing {

// Exact integer numerator, 200-bit float square root.
inline double mcc_oracle(const ConfusionCounts& c) {
  namespace mp = boost::multiprecision;
  const mp::cpp_int tp = c.tp, fp = c.fp, tn = c.tn, fn = c.fn;
  const mp::cpp_int den = (tp + fp) * (tp + fn) * (tn + fp) * (tn + fn);
  if (den == 0) return 0.0;
  using big = mp::number<mp::cpp_bin_float<200>>;
  const big value = big(tp * tn - fn * fp) / mp::sqrt(big(den));
  return value.convert_to<double>();
}

}  // namespace ocssvm::testing
