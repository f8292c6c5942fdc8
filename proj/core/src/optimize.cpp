#include "tempcal/optimize.hpp"

#include <cmath>

namespace tempcal {

namespace {

double grad_norm(const std::vector<double>& g) {
  double s = 0.0;
  for (double x : g) s += x * x;
  return std::sqrt(s);
}

}  // namespace

OptimizeResult minimize(const Objective& objective, std::vector<double> init,
                        const OptimizerConfig& config) {
  if (init.empty()) throw InvalidInputError("minimize: empty parameter vector");
  const std::size_t dim = init.size();

  std::vector<double> grad(dim, 0.0);
  double value = objective(init, grad);
  if (!std::isfinite(value)) {
    throw FitError("minimize: objective not finite at initial point");
  }

  OptimizeResult res;
  res.params = std::move(init);
  res.value = value;
  if (config.keep_trace) res.trace.push_back(value);

  double step = config.initial_step;
  std::vector<double> trial(dim), trial_grad(dim);

  for (int iter = 0; iter < config.max_iterations; ++iter) {
    const double gnorm = grad_norm(grad);
    res.gradient_norm = gnorm;
    if (gnorm <= config.grad_tol) {
      res.converged = true;
      res.stop_reason = "gradient norm below tolerance";
      res.iterations = iter;
      return res;
    }

    const double gsq = gnorm * gnorm;
    bool accepted = false;
    double trial_value = 0.0;
    for (int halving = 0; halving <= config.max_halvings; ++halving) {
      for (std::size_t i = 0; i < dim; ++i) trial[i] = res.params[i] - step * grad[i];
      trial_value = objective(trial, trial_grad);
      if (std::isfinite(trial_value) &&
          trial_value <= res.value - config.armijo_c1 * step * gsq) {
        accepted = true;
        break;
      }
      step *= 0.5;
    }
    if (!accepted) {
      if (!std::isfinite(trial_value)) {
        throw FitError("minimize: objective stayed non-finite after backtracking");
      }
      res.stop_reason = "line search failed to improve";
      res.iterations = iter + 1;
      return res;
    }

    const double prev = res.value;
    res.params.swap(trial);
    res.value = trial_value;
    grad.swap(trial_grad);
    step *= 2.0;
    if (config.keep_trace) res.trace.push_back(res.value);

    const double rel = std::abs(prev - res.value) / std::max(1.0, std::abs(prev));
    if (rel <= config.rel_improvement_tol) {
      res.converged = true;
      res.stop_reason = "relative improvement below tolerance";
      res.iterations = iter + 1;
      res.gradient_norm = grad_norm(grad);
      return res;
    }
  }

  res.stop_reason = "iteration limit reached";
  res.iterations = config.max_iterations;
  res.gradient_norm = grad_norm(grad);
  return res;
}

std::vector<double> numerical_gradient(const Objective& objective,
                                       const std::vector<double>& params, double h) {
  std::vector<double> grad(params.size(), 0.0);
  std::vector<double> scratch(params.size(), 0.0);
  std::vector<double> point = params;
  for (std::size_t i = 0; i < params.size(); ++i) {
    point[i] = params[i] + h;
    const double hi = objective(point, scratch);
    point[i] = params[i] - h;
    const double lo = objective(point, scratch);
    point[i] = params[i];
    grad[i] = (hi - lo) / (2.0 * h);
  }
  return grad;
}

}  // namespace tempcal
