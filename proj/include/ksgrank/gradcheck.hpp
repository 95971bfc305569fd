#pragma once

#include "ksgrank/params.hpp"
#include "ksgrank/tape.hpp"

#include <functional>
#include <string>
#include <vector>

namespace ksgrank::num {

struct GradCheckReport {
  double max_rel_err = 0.0;
  std::string worst;  // "input[2] @ 5" or parameter name and flat index

  bool ok(double tol = 1e-4) const { return max_rel_err <= tol; }
};

// relative error of analytic vs central-difference gradient:
// |a - n| / max(|a|, |n|, 0.01)
double grad_rel_err(double analytic, double numeric);

using BuildFn = std::function<Var(Tape&, const std::vector<Var>&)>;

// Central finite differences over every coordinate of every input.
// `build` must construct a scalar loss from the given input leaves.
GradCheckReport gradcheck(const BuildFn& build, const std::vector<Tensor>& inputs, double eps = 1e-5);

using ParamLossFn = std::function<Var(Tape&, ParamBinding&)>;

// Same check, sweeping every registered parameter coordinate. The
// parameter set is perturbed in place and restored.
GradCheckReport gradcheck_params(const ParamLossFn& loss, ParameterSet& params, double eps = 1e-5);

}  // namespace ksgrank::num
