#pragma once

#include <span>
#include <string>
#include <variant>
#include <vector>

#include "tempcal/metrics.hpp"
#include "tempcal/optimize.hpp"
#include "tempcal/types.hpp"

namespace tempcal {

struct IdentityCalibrator {};

struct TemperatureCalibrator {
  double tau = 1.0;
};

// Binary logistic map on the class-1 logit: sigmoid(slope * z + intercept).
struct PlattCalibrator {
  double slope = 1.0;
  double intercept = 0.0;
};

// One binary logistic map per class on that class's margin; outputs renormalized.
struct PlattOvrCalibrator {
  std::vector<PlattCalibrator> per_class;
};

enum class AffineStructure { full, diagonal };
enum class AffineInput { logits, log_probabilities };

// softmax(W x + b) where x is the logit vector or the clamped log-probability
// vector. Diagonal structure keeps off-diagonal weights exactly zero.
struct AffineCalibrator {
  int num_classes = 0;
  AffineStructure structure = AffineStructure::full;
  AffineInput input = AffineInput::logits;
  std::vector<double> weight;  // row-major num_classes x num_classes
  std::vector<double> bias;    // length num_classes
};

// Calibrated class-1 logit = slope_pos*ln(p) - slope_neg*ln(1-p) + intercept,
// with p the clamped class-1 probability.
struct BetaCalibrator {
  double slope_pos = 1.0;
  double slope_neg = 1.0;
  double intercept = 0.0;
};

// Piecewise-constant map on the class-1 probability.
struct HistogramCalibrator {
  std::vector<double> edges;   // strictly ascending, from 0 to 1
  std::vector<double> values;  // one per bin
};

// Monotone step function on the class-1 probability; constant beyond the
// extreme breakpoints.
struct IsotonicCalibrator {
  std::vector<double> breakpoints;  // ascending block-start scores
  std::vector<double> levels;       // non-decreasing fitted probabilities
};

using CalibratorModel =
    std::variant<IdentityCalibrator, TemperatureCalibrator, PlattCalibrator, PlattOvrCalibrator,
                 AffineCalibrator, BetaCalibrator, HistogramCalibrator, IsotonicCalibrator>;

struct FitDiagnostics {
  double initial_nll = 0.0;
  double final_nll = 0.0;
  double gradient_norm = 0.0;
  int iterations = 0;
  bool converged = true;
  std::vector<double> nll_trace;
  std::vector<std::string> warnings;
};

template <typename Model>
struct Fitted {
  Model model;
  FitDiagnostics diagnostics;
};

// Class-1 logit of a binary record: logits[1] - logits[0].
double binary_logit(std::span<const double> logits);

// One-vs-rest margin for class m: z_m - logsumexp of the other logits.
// For two classes and m=1 this reduces to binary_logit.
double class_margin(std::span<const double> logits, std::size_t m);

ProbabilityVector apply(const CalibratorModel& model, std::span<const double> logits);
std::vector<ProbabilityVector> apply_all(const CalibratorModel& model, const Dataset& ds);
double model_nll(const CalibratorModel& model, const Dataset& ds);

Fitted<TemperatureCalibrator> fit_temperature(const Dataset& cal);
Fitted<PlattCalibrator> fit_platt(const Dataset& cal);

// Two-class input delegates to fit_platt; three or more classes fit one
// logistic map per class.
Fitted<CalibratorModel> fit_platt_ovr(const Dataset& cal);

Fitted<AffineCalibrator> fit_affine(const Dataset& cal, AffineStructure structure,
                                    AffineInput input);
Fitted<BetaCalibrator> fit_beta(const Dataset& cal);
Fitted<HistogramCalibrator> fit_histogram(const Dataset& cal, const BinningSpec& spec = {});
Fitted<IsotonicCalibrator> fit_isotonic(const Dataset& cal);

// Least-squares monotone (non-decreasing) fit of values, by pooling adjacent
// violating blocks. weights empty means unit weights.
std::vector<double> pava(const std::vector<double>& values,
                         const std::vector<double>& weights = {});

enum class GlobalMethod {
  identity,
  temperature,
  platt,
  platt_ovr,
  vector_scaling,
  matrix_scaling,
  dirichlet,
  beta,
  histogram,
  isotonic,
};

// Names as accepted on the command line: identity, temperature, platt,
// platt-ovr, vector, matrix, dirichlet, beta, histogram, isotonic.
GlobalMethod parse_global_method(const std::string& name);
std::string method_name(GlobalMethod method);

Fitted<CalibratorModel> fit_global(const Dataset& cal, GlobalMethod method,
                                   const BinningSpec& spec = {});

inline constexpr double kTauMin = 1e-2;
inline constexpr double kTauMax = 1e2;

}  // namespace tempcal
