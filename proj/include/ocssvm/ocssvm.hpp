#pragma once

#include "ocssvm/data.hpp"
#include "ocssvm/errors.hpp"
#include "ocssvm/eval.hpp"
#include "ocssvm/experiments.hpp"
#include "ocssvm/kernels.hpp"
#include "ocssvm/model_io.hpp"
#include "ocssvm/qp_solver.hpp"
#include "ocssvm/slab_svm.hpp"
#include "ocssvm/text.hpp"
#include "ocssvm/types.hpp"
