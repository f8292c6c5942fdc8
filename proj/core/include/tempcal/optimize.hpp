#pragma once

#include <functional>
#include <string>
#include <vector>

#include "tempcal/types.hpp"

namespace tempcal {

// Evaluates the objective at `params` and fills `grad` (same length). Must
// return the objective value; non-finite values trigger step backtracking.
using Objective = std::function<double(const std::vector<double>&, std::vector<double>&)>;

struct OptimizerConfig {
  int max_iterations = 10000;
  double grad_tol = 1e-6;
  double rel_improvement_tol = 1e-10;
  double initial_step = 1.0;
  int max_halvings = 50;
  double armijo_c1 = 1e-4;
  bool keep_trace = false;
};

struct OptimizeResult {
  std::vector<double> params;
  double value = 0.0;
  double gradient_norm = 0.0;
  int iterations = 0;
  bool converged = false;
  std::string stop_reason;
  std::vector<double> trace;  // objective value per accepted iterate, if kept
};

// Deterministic full-batch gradient descent with Armijo backtracking line
// search. Throws FitError if no finite objective value can be reached.
OptimizeResult minimize(const Objective& objective, std::vector<double> init,
                        const OptimizerConfig& config = {});

// Central-difference gradient, mostly for checking analytic gradients.
std::vector<double> numerical_gradient(const Objective& objective,
                                       const std::vector<double>& params, double h = 1e-5);

}  // namespace tempcal
