#include "semm/dynamics.hpp"

#include <algorithm>
#include <cmath>

namespace semm {

void OpticalPulse::validate() const {
  if (!(duration > 0.0)) throw ValidationError("optical pulse duration must be > 0");
  if (!(rabi >= 0.0)) throw ValidationError("optical pulse rabi must be >= 0");
  if (!std::isfinite(start) || !std::isfinite(phase) || !std::isfinite(offset))
    throw ValidationError("optical pulse fields must be finite");
}

void StarkPulse::validate() const {
  if (!(duration > 0.0)) throw ValidationError("Stark pulse duration must be > 0");
  if (!(field >= 0.0)) throw ValidationError("Stark pulse field must be >= 0");
  if (!std::isfinite(start) || !std::isfinite(field))
    throw ValidationError("Stark pulse fields must be finite");
}

BlochState apply_optical_pulse(const BlochState& state, const OpticalPulse& pulse,
                               const IonParams& ion, double t2) {
  const double omega = pulse.rabi * ion.coupling;
  const double delta = ion.detuning - pulse.offset;
  const Vec3 w = kTwoPi * Vec3(omega * std::cos(pulse.phase), omega * std::sin(pulse.phase),
                               -delta);

  BlochState r = rotate_transverse(state, -kTwoPi * pulse.offset * pulse.start);
  r = precess<double>(r, w, pulse.duration);
  r = rotate_transverse(r, kTwoPi * pulse.offset * pulse.end());
  return damp_transverse(r, pulse.duration, t2);
}

BlochState apply_stark_pulse(const BlochState& state, const StarkPulse& pulse,
                             const IonParams& ion, const Vec3& field_direction, double t2) {
  const double shift = ion.stark_k * pulse.field * local_field_projection(ion, field_direction);
  return free_evolve<double>(state, pulse.duration, ion.detuning + shift, t2);
}

Chord Chord::from_tones(std::span<const OpticalPulse> tones, double slices_per_us) {
  if (tones.empty()) throw ValidationError("chord needs at least one tone");
  if (!(slices_per_us > 0.0)) throw ValidationError("slices_per_us must be > 0");
  Chord chord;
  chord.start = tones.front().start;
  chord.duration = tones.front().duration;
  double mean = 0.0;
  for (const auto& t : tones) {
    t.validate();
    if (t.start != chord.start || t.duration != chord.duration)
      throw ValidationError("chord tones must share start and duration");
    mean += t.offset;
  }
  chord.frame_offset = mean / static_cast<double>(tones.size());

  const auto n = static_cast<std::size_t>(std::max(1.0, std::ceil(chord.duration * slices_per_us)));
  const double h = chord.duration / static_cast<double>(n);
  chord.slice_drive.resize(n);
  for (std::size_t s = 0; s < n; ++s) {
    const double t_mid = chord.start + (static_cast<double>(s) + 0.5) * h;
    Complex drive{0.0, 0.0};
    for (const auto& t : tones)
      drive += t.rabi * std::polar(1.0, t.phase + kTwoPi * (t.offset - chord.frame_offset) * t_mid);
    chord.slice_drive[s] = drive;
  }
  return chord;
}

BlochState apply_chord(const BlochState& state, const Chord& chord, const IonParams& ion,
                       double t2) {
  const double n = static_cast<double>(chord.slice_drive.size());
  const double h = chord.duration / n;
  const double delta = ion.detuning - chord.frame_offset;

  // The frame rotates at frame_offset from t = 0, so the chord drive phases
  // above are absolute.
  BlochState r = rotate_transverse(state, -kTwoPi * chord.frame_offset * chord.start);
  for (const Complex& d : chord.slice_drive) {
    const Complex omega = d * ion.coupling;
    const Vec3 w = kTwoPi * Vec3(omega.real(), omega.imag(), -delta);
    r = precess<double>(r, w, h);
  }
  r = rotate_transverse(r, kTwoPi * chord.frame_offset * chord.end());
  return damp_transverse(r, chord.duration, t2);
}

Eigen::Matrix3d chord_map(const Chord& chord, const IonParams& ion, double t2) {
  Eigen::Matrix3d m;
  for (int j = 0; j < 3; ++j) m.col(j) = apply_chord(BlochState::Unit(j), chord, ion, t2);
  return m;
}

}  // namespace semm
