#ifndef SEMM_DYNAMICS_HPP
#define SEMM_DYNAMICS_HPP

// Piecewise-analytic Bloch-vector propagation in the laser rotating frame.
//
// State r = (u, v, w); (0, 0, -1) is the ground state. The coherence is
// <sigma^-> = (u - i v) / 2. Every segment obeys dr/dt = r x W with
//   W = 2π (Ω cos φ, Ω sin φ, -Δ),
// so free precession at detuning δ turns (u, v) counter-clockwise by 2πδt and
// <sigma^-> picks up e^{-i 2π δ t}. A resonant pulse with phase φ leaves the
// ground state with <sigma^-> ∝ i e^{-iφ}. Pulse phases are referenced to
// absolute time: a pulse at offset ν drives with phase φ + 2πν t.

#include "semm/ensemble.hpp"
#include "semm/types.hpp"

#include <Eigen/Geometry>

#include <cmath>
#include <span>
#include <vector>

namespace semm {

template <typename Scalar>
using BlochVector = Vector3<Scalar>;
using BlochState = BlochVector<double>;

template <typename Scalar = double>
BlochVector<Scalar> ground_state() {
  return BlochVector<Scalar>(Scalar(0), Scalar(0), Scalar(-1));
}

template <typename Scalar>
std::complex<Scalar> coherence(const BlochVector<Scalar>& r) {
  return {r.x() / Scalar(2), -r.y() / Scalar(2)};
}

struct OpticalPulse {
  double start = 0.0;
  double duration = 1.0;
  double rabi = 0.25;   ///< MHz; area in turns is rabi * duration
  double phase = 0.0;
  double offset = 0.0;  ///< MHz from the laser reference

  double end() const { return start + duration; }
  double center() const { return start + 0.5 * duration; }
  void validate() const;
};

struct StarkPulse {
  double start = 0.0;
  double duration = 1.0;
  double field = 0.0;  ///< V/cm

  double end() const { return start + duration; }
  double area() const { return field * duration; }
  void validate() const;
};

/// Rotation of r about `axis` by `angle` (right-handed, Rodrigues form).
template <typename Scalar>
BlochVector<Scalar> rotate(const BlochVector<Scalar>& r, const Vector3<Scalar>& axis,
                           Scalar angle) {
  return Eigen::AngleAxis<Scalar>(angle, axis) * r;
}

/// Turns (u, v) counter-clockwise by `angle`; w untouched.
template <typename Scalar>
BlochVector<Scalar> rotate_transverse(const BlochVector<Scalar>& r, Scalar angle) {
  const Scalar c = std::cos(angle);
  const Scalar s = std::sin(angle);
  return {c * r.x() - s * r.y(), s * r.x() + c * r.y(), r.z()};
}

/// Exact solution of dr/dt = r x W over `duration` for constant W (rad/µs).
template <typename Scalar>
BlochVector<Scalar> precess(const BlochVector<Scalar>& r, const Vector3<Scalar>& w,
                            Scalar duration) {
  const Scalar norm = w.norm();
  if (norm == Scalar(0) || duration == Scalar(0)) return r;
  return rotate<Scalar>(r, w / norm, -norm * duration);
}

template <typename Scalar>
BlochVector<Scalar> damp_transverse(BlochVector<Scalar> r, Scalar dt, Scalar t2) {
  if (std::isfinite(t2)) {
    const Scalar f = std::exp(-dt / t2);
    r.x() *= f;
    r.y() *= f;
  }
  return r;
}

/// Free precession at `detuning` (MHz) for `dt` µs with transverse decay.
template <typename Scalar>
BlochVector<Scalar> free_evolve(const BlochVector<Scalar>& state, Scalar dt, Scalar detuning,
                                Scalar t2) {
  return damp_transverse(rotate_transverse(state, Scalar(kTwoPi) * detuning * dt), dt, t2);
}

inline BlochState free_evolve(const BlochState& state, double dt, const IonParams& ion,
                              double t2) {
  return free_evolve<double>(state, dt, ion.detuning, t2);
}

/// Square optical pulse. In the pulse frame the rotation vector is
/// 2π(Ω cos φ, Ω sin φ, -(δ - ν)) with Ω = rabi * coupling.
BlochState apply_optical_pulse(const BlochState& state, const OpticalPulse& pulse,
                               const IonParams& ion, double t2);

/// Square Stark pulse: z rotation by 2π (δ + k E p) T_s, where p is the local
/// field projection on the ion axis.
BlochState apply_stark_pulse(const BlochState& state, const StarkPulse& pulse,
                             const IonParams& ion, const Vec3& field_direction, double t2);

/// Several tones sharing one time slot. The drive is sampled on a uniform
/// slice grid and each slice is an exact rotation.
struct Chord {
  double start = 0.0;
  double duration = 0.0;
  double frame_offset = 0.0;        ///< MHz, mean tone offset
  std::vector<Complex> slice_drive; ///< Ω e^{iφ} per slice in the frame, MHz

  static Chord from_tones(std::span<const OpticalPulse> tones, double slices_per_us = 1000.0);
  double end() const { return start + duration; }
};

BlochState apply_chord(const BlochState& state, const Chord& chord, const IonParams& ion,
                       double t2);

/// The chord as a linear map on the Bloch vector (columns: images of x, y, z).
Eigen::Matrix3d chord_map(const Chord& chord, const IonParams& ion, double t2);

}  // namespace semm

#endif  // SEMM_DYNAMICS_HPP
