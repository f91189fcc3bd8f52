#include "semm/signal.hpp"

#include "semm/dynamics.hpp"
#include "semm/parallel.hpp"

#include <unsupported/Eigen/FFT>

#include <cmath>
#include <vector>

namespace semm {

double Spectrum::frequency(Eigen::Index k) const {
  const Eigen::Index n = bins.size();
  const Eigen::Index signed_k = (2 * k < n) ? k : k - n;
  return static_cast<double>(signed_k) * df;
}

double emission_weight(const IonParams& ion, EmissionWeighting weighting) {
  return weighting == EmissionWeighting::coupling ? ion.coupling : 1.0;
}

namespace {

double total_weight(const Ensemble& ions, EmissionWeighting weighting) {
  return chunked_sum(ions.size(), 0.0, [&](std::size_t b, std::size_t e) {
    double s = 0.0;
    for (std::size_t i = b; i < e; ++i) s += emission_weight(ions[i], weighting);
    return s;
  });
}

void check_states(const Ensemble& ions, const Eigen::Matrix3Xd& states) {
  if (static_cast<std::size_t>(states.cols()) != ions.size())
    throw ValidationError("state matrix does not match the ensemble size");
}

}  // namespace

Complex ensemble_coherence(const Ensemble& ions, const Eigen::Matrix3Xd& states, double t_from,
                           double t_at, double t2, EmissionWeighting weighting) {
  check_states(ions, states);
  if (t_at < t_from) throw ValidationError("cannot evolve coherence backwards");
  const double norm = total_weight(ions, weighting);
  if (norm <= 0.0) return {0.0, 0.0};
  const double dt = t_at - t_from;
  const double decay = std::isfinite(t2) ? std::exp(-dt / t2) : 1.0;
  const Complex sum = chunked_sum(ions.size(), Complex{0.0, 0.0}, [&](std::size_t b, std::size_t e) {
    Complex s{0.0, 0.0};
    for (std::size_t i = b; i < e; ++i) {
      const Complex c = coherence<double>(states.col(static_cast<Eigen::Index>(i)));
      s += emission_weight(ions[i], weighting) * c *
           std::polar(1.0, -kTwoPi * ions[i].detuning * dt);
    }
    return s;
  });
  return sum * (decay / norm);
}

ComplexTrace emitted_field(const Eigen::Matrix3Xd& states, const Ensemble& ions, double t_a,
                           double t_b, double dt, double t2, EmissionWeighting weighting) {
  check_states(ions, states);
  if (!(t_b > t_a)) throw ValidationError("emission window needs t_b > t_a");
  if (!(dt > 0.0)) throw ValidationError("emission dt must be > 0");
  const auto n = static_cast<Eigen::Index>(std::llround((t_b - t_a) / dt));
  if (n < 2) throw ValidationError("emission window needs at least two samples");

  const double norm = total_weight(ions, weighting);
  const double decay = std::isfinite(t2) ? std::exp(-dt / t2) : 1.0;

  std::vector<Eigen::VectorXcd> parts(chunk_count(ions.size()));
  parallel_chunks(ions.size(), [&](std::size_t c, std::size_t b, std::size_t e) {
    Eigen::VectorXcd acc = Eigen::VectorXcd::Zero(n);
    for (std::size_t i = b; i < e; ++i) {
      const double w = emission_weight(ions[i], weighting);
      if (w == 0.0) continue;
      Complex value = w * coherence<double>(states.col(static_cast<Eigen::Index>(i)));
      const Complex step = decay * std::polar(1.0, -kTwoPi * ions[i].detuning * dt);
      for (Eigen::Index j = 0; j < n; ++j) {
        acc[j] += value;
        value *= step;
      }
    }
    parts[c] = std::move(acc);
  });

  ComplexTrace trace;
  trace.t0 = t_a;
  trace.dt = dt;
  trace.samples = Eigen::VectorXcd::Zero(n);
  for (const auto& p : parts) trace.samples += p;
  if (norm > 0.0) trace.samples /= norm;
  return trace;
}

RealTrace heterodyne(const ComplexTrace& trace, double lo_offset, double lo_phase,
                     double max_signal_frequency) {
  trace.validate();
  const double top = std::abs(lo_offset) + std::abs(max_signal_frequency);
  if (top > 0.0 && trace.dt > 1.0 / (4.0 * top))
    throw ValidationError("heterodyne sampling violates the Nyquist margin (dt > 1/(4 f_max))");
  RealTrace out;
  out.t0 = trace.t0;
  out.dt = trace.dt;
  out.samples.resize(trace.size());
  for (Eigen::Index j = 0; j < trace.size(); ++j) {
    const double phase = kTwoPi * lo_offset * trace.time(j) + lo_phase;
    out.samples[j] = (trace.samples[j] * std::polar(1.0, -phase)).real();
  }
  return out;
}

namespace {

Spectrum forward(const Eigen::VectorXcd& x, double dt, double t0) {
  Eigen::FFT<double> fft;
  Spectrum s;
  s.df = 1.0 / (static_cast<double>(x.size()) * dt);
  s.time_origin = t0;
  fft.fwd(s.bins, x);
  s.bins /= static_cast<double>(x.size());
  return s;
}

}  // namespace

Spectrum spectrum(const RealTrace& trace) {
  trace.validate();
  return forward(trace.samples.cast<Complex>(), trace.dt, trace.t0);
}

Spectrum spectrum(const ComplexTrace& trace) {
  trace.validate();
  return forward(trace.samples, trace.dt, trace.t0);
}

ComplexTrace inverse(const Spectrum& spec, double dt) {
  Eigen::FFT<double> fft;
  ComplexTrace out;
  out.t0 = spec.time_origin;
  out.dt = dt;
  Eigen::VectorXcd scaled = spec.bins * static_cast<double>(spec.size());
  fft.inv(out.samples, scaled);
  return out;
}

Peak peak(const Spectrum& spec, double f, double half_window) {
  Peak best;
  bool found = false;
  for (Eigen::Index k = 0; k < spec.size(); ++k) {
    const double fk = spec.frequency(k);
    if (fk < f - half_window || fk > f + half_window) continue;
    const double a = std::abs(spec.bins[k]);
    if (!found || a > best.amplitude) {
      best.amplitude = a;
      best.value = spec.bins[k];
      best.phase = std::atan2(spec.bins[k].imag(), spec.bins[k].real());
      best.frequency = fk;
      found = true;
    }
  }
  if (!found) throw ValidationError("no spectral bin inside the requested window");
  return best;
}

double wrap_phase(double phi) {
  double w = std::remainder(phi, kTwoPi);
  if (w <= -kPi) w += kTwoPi;
  return w;
}

double relative_phase(const Spectrum& spec, double f1, double f2, double half_window,
                      double noise_floor) {
  const Peak p1 = peak(spec, f1, half_window);
  const Peak p2 = peak(spec, f2, half_window);
  if (p1.amplitude <= noise_floor || p2.amplitude <= noise_floor)
    throw ValidationError("peak below the noise floor; relative phase undefined");
  return wrap_phase(p1.phase - p2.phase);
}

}  // namespace semm
