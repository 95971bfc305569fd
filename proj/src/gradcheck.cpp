#include "ksgrank/gradcheck.hpp"

#include <algorithm>
#include <cmath>

namespace ksgrank::num {

double grad_rel_err(double analytic, double numeric) {
  const double denom = std::max({std::abs(analytic), std::abs(numeric), 0.01});
  return std::abs(analytic - numeric) / denom;
}

GradCheckReport gradcheck(const BuildFn& build, const std::vector<Tensor>& inputs, double eps) {
  // analytic pass
  std::vector<Tensor> analytic;
  {
    Tape tape;
    std::vector<Var> leaves;
    leaves.reserve(inputs.size());
    for (const Tensor& t : inputs) leaves.push_back(tape.input(t));
    Var loss = build(tape, leaves);
    tape.backward(loss);
    for (Var v : leaves) analytic.push_back(v.grad());
  }

  auto forward_at = [&](const std::vector<Tensor>& pts) {
    Tape tape;
    std::vector<Var> leaves;
    leaves.reserve(pts.size());
    for (const Tensor& t : pts) leaves.push_back(tape.constant(t));
    return build(tape, leaves).value().scalar_value();
  };

  GradCheckReport report;
  std::vector<Tensor> probe = inputs;
  for (std::size_t k = 0; k < inputs.size(); ++k) {
    for (std::size_t i = 0; i < inputs[k].size(); ++i) {
      const double orig = probe[k][i];
      probe[k][i] = orig + eps;
      const double fp = forward_at(probe);
      probe[k][i] = orig - eps;
      const double fm = forward_at(probe);
      probe[k][i] = orig;
      const double numeric = (fp - fm) / (2.0 * eps);
      const double err = grad_rel_err(analytic[k][i], numeric);
      if (err > report.max_rel_err) {
        report.max_rel_err = err;
        report.worst = "input[" + std::to_string(k) + "] @ " + std::to_string(i);
      }
    }
  }
  return report;
}

GradCheckReport gradcheck_params(const ParamLossFn& loss, ParameterSet& params, double eps) {
  GradMap analytic;
  {
    Tape tape;
    ParamBinding pb(tape, params);
    Var l = loss(tape, pb);
    tape.backward(l);
    pb.collect_grads(analytic);
  }

  auto forward = [&]() {
    Tape tape;
    ParamBinding pb(tape, params);
    return loss(tape, pb).value().scalar_value();
  };

  GradCheckReport report;
  for (const std::string& name : params.names()) {
    Tensor& p = params.get(name);
    const Tensor* g = analytic.find(name);
    for (std::size_t i = 0; i < p.size(); ++i) {
      const double orig = p[i];
      p[i] = orig + eps;
      const double fp = forward();
      p[i] = orig - eps;
      const double fm = forward();
      p[i] = orig;
      const double numeric = (fp - fm) / (2.0 * eps);
      const double a = g ? (*g)[i] : 0.0;
      const double err = grad_rel_err(a, numeric);
      if (err > report.max_rel_err) {
        report.max_rel_err = err;
        report.worst = name + " @ " + std::to_string(i);
      }
    }
  }
  return report;
}

}  // namespace ksgrank::num
