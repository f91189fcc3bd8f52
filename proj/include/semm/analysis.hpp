#ifndef SEMM_ANALYSIS_HPP
#define SEMM_ANALYSIS_HPP

#include "semm/types.hpp"

#include <Eigen/Core>

#include <functional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace semm {

/// Normalised sinc: sin(πx)/(πx).
double sinc(double x);

/// |cos(2π k A)| for ions aligned with the field.
double model_cos(double area, double k);

/// Ceramic orientation average with the field perpendicular to the light
/// polarisation: ∫₀^{π/2} cos(2πkA cosθ) sin⁴θ dθ, divided by its value 3π/16
/// at A = 0. Adaptive Gauss–Kronrod, absolute tolerance 1e-9 or better.
double model_ceramic(double area, double k);

/// Closed form of model_ceramic: 8 J₂(x)/x² with x = 2πkA.
double model_ceramic_bessel(double area, double k);

/// |sinc(2kA)| e^{-bA}.
double model_nano(double area, double k, double b);

class FitError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct FitResult {
  std::vector<std::string> names;
  Eigen::VectorXd params;
  Eigen::VectorXd stderrs;  ///< empty unless converged
  double residual_rms = 0.0;
  bool converged = false;
  int iterations = 0;

  double param(const std::string& name) const;
  double stderr_of(const std::string& name) const;
};

/// y = f(x; p).
struct Model {
  std::string name;
  std::vector<std::string> names;
  std::function<double(double, const Eigen::VectorXd&)> eval;
};

enum class StarkModel { cos, ceramic, nano };

/// Echo-modulation magnitudes with a free amplitude, A0 |model|: params
/// (A0, k) or (A0, k, b).
Model stark_model(StarkModel which);
StarkModel parse_stark_model(const std::string& name);

/// Levenberg–Marquardt least squares. Stops when the relative parameter step
/// drops below 1e-8 or after 200 iterations (then converged = false).
/// Throws ValidationError with fewer than 3 points per parameter and FitError
/// when the Jacobian at the optimum is singular.
FitResult fit(const Model& model, std::span<const double> x, std::span<const double> y,
              const Eigen::VectorXd& init, std::span<const double> weights = {});

/// A0 e^{-t/T2}; log-linear start, then least squares. Params (A0, T2).
/// Non-decaying data is reported as converged = false.
FitResult fit_exp_decay(std::span<const double> t, std::span<const double> amplitude);

struct LinearFit {
  double slope = 0.0;
  double intercept = 0.0;
  double r = 0.0;  ///< Pearson correlation; 0 when y is constant
};

LinearFit linear_fit(std::span<const double> x, std::span<const double> y);

/// Shifts each y_i by a multiple of 2π onto the branch nearest reference_i.
std::vector<double> unwrap_to_reference(std::span<const double> y,
                                        std::span<const double> reference);

}  // namespace semm

#endif  // SEMM_ANALYSIS_HPP
