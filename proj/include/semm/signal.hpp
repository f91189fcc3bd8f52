#ifndef SEMM_SIGNAL_HPP
#define SEMM_SIGNAL_HPP

#include "semm/ensemble.hpp"
#include "semm/types.hpp"

#include <Eigen/Core>

namespace semm {

/// Uniformly sampled signal; sample j sits at t0 + j * dt.
template <typename Sample>
struct SignalTrace {
  double t0 = 0.0;
  double dt = 0.002;
  Eigen::Matrix<Sample, Eigen::Dynamic, 1> samples;

  Eigen::Index size() const { return samples.size(); }
  double time(Eigen::Index j) const { return t0 + static_cast<double>(j) * dt; }
  void validate() const {
    if (!(dt > 0.0)) throw ValidationError("trace dt must be > 0");
    if (samples.size() < 2) throw ValidationError("trace needs at least two samples");
  }
};

using ComplexTrace = SignalTrace<Complex>;
using RealTrace = SignalTrace<double>;

/// Forward DFT normalised by 1/N: bin k = (1/N) Σ_j x_j e^{-i2π jk/N}.
/// Phases refer to the first sample time (time_origin). Parseval reads
/// Σ|x|² / N = Σ|X|².
struct Spectrum {
  double df = 0.0;
  double time_origin = 0.0;
  Eigen::VectorXcd bins;

  Eigen::Index size() const { return bins.size(); }
  /// Signed frequency of bin k (bins above N/2 map to negative frequencies).
  double frequency(Eigen::Index k) const;
};

enum class EmissionWeighting {
  uniform,   ///< plain ensemble mean of <sigma^->
  coupling,  ///< weighted by ion.coupling
};

double emission_weight(const IonParams& ion, EmissionWeighting weighting);

/// Weighted mean coherence at time t_at, given states recorded at t_from and
/// free evolution in between.
Complex ensemble_coherence(const Ensemble& ions, const Eigen::Matrix3Xd& states, double t_from,
                           double t_at, double t2,
                           EmissionWeighting weighting = EmissionWeighting::uniform);

/// Macroscopic emission (1/Σw) Σ w_i <sigma^->_i(t) on [t_a, t_b) with spacing dt.
/// `states` must hold the ensemble at t_a and no event may overlap the window.
ComplexTrace emitted_field(const Eigen::Matrix3Xd& states, const Ensemble& ions, double t_a,
                           double t_b, double dt, double t2,
                           EmissionWeighting weighting = EmissionWeighting::uniform);

/// Re[trace(t) e^{-i(2π lo t + lo_phase)}]. A trace component e^{-i2π f t}
/// shows up as a beat at lo + f.
RealTrace heterodyne(const ComplexTrace& trace, double lo_offset, double lo_phase = 0.0,
                     double max_signal_frequency = 0.0);

Spectrum spectrum(const RealTrace& trace);
Spectrum spectrum(const ComplexTrace& trace);
ComplexTrace inverse(const Spectrum& spec, double dt);

struct Peak {
  double amplitude = 0.0;
  double phase = 0.0;      ///< atan2(imag, real) of the bin
  double frequency = 0.0;
  Complex value;
};

/// Largest-magnitude bin with frequency in [f - half_window, f + half_window].
Peak peak(const Spectrum& spec, double f, double half_window);

/// phase(f1) - phase(f2) wrapped to (-π, π]. Throws when either peak is
/// below noise_floor.
double relative_phase(const Spectrum& spec, double f1, double f2, double half_window,
                      double noise_floor = 0.0);

/// Wraps to (-π, π].
double wrap_phase(double phi);

}  // namespace semm

#endif  // SEMM_SIGNAL_HPP
