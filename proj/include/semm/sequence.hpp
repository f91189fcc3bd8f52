#ifndef SEMM_SEQUENCE_HPP
#define SEMM_SEQUENCE_HPP

#include "semm/dynamics.hpp"
#include "semm/ensemble.hpp"

#include <Eigen/Core>

#include <variant>
#include <vector>

namespace semm {

struct DetectionWindow {
  double start = 0.0;
  double duration = 1.0;
  double lo = 30.0;   ///< local-oscillator offset, MHz
  double dt = 0.002;  ///< sample spacing, µs

  double end() const { return start + duration; }
  void validate() const;
};

/// Optical pulses that share start and duration exactly form a multi-tone
/// chord; any other overlap between pulses is rejected.
struct PulseSequence {
  std::vector<OpticalPulse> optical;
  std::vector<StarkPulse> stark;
  std::vector<DetectionWindow> detections;
  double horizon = kInfinity;

  bool empty() const { return optical.empty() && stark.empty() && detections.empty(); }
  /// Throws ValidationError on overlap, bad durations, or horizon violation.
  void validate() const;
  /// Earliest start over all events and windows (0 for an empty sequence).
  double origin() const;
};

bool operator==(const OpticalPulse& a, const OpticalPulse& b);
bool operator==(const StarkPulse& a, const StarkPulse& b);
bool operator==(const DetectionWindow& a, const DetectionWindow& b);
bool operator==(const PulseSequence& a, const PulseSequence& b);

/// Propagation environment shared by every ion of a run.
struct PropagationContext {
  Vec3 field_direction = Vec3::UnitZ();
  double t2 = kInfinity;
  double chord_slices_per_us = 1000.0;
};

/// Time-ordered, compiled form of a PulseSequence.
class Timeline {
 public:
  using Event = std::variant<OpticalPulse, Chord, StarkPulse>;

  Timeline() = default;
  explicit Timeline(const PulseSequence& sequence, double chord_slices_per_us = 1000.0);

  const std::vector<Event>& events() const { return events_; }
  double origin() const { return origin_; }
  /// Start/end times of every event, ascending.
  std::vector<double> boundaries() const;
  /// True when t lies strictly inside an event.
  bool inside_event(double t) const;

 private:
  std::vector<Event> events_;
  double origin_ = 0.0;
};

double event_start(const Timeline::Event& e);
double event_end(const Timeline::Event& e);

/// Per-worker memo of chord maps keyed on (detuning, coupling), the only ion
/// properties a chord depends on. Ions sharing a detuning block reuse it.
class ChordCache {
 public:
  const Eigen::Matrix3d& map(std::size_t event, const Chord& chord, const IonParams& ion,
                             double t2);

 private:
  struct Entry {
    bool valid = false;
    double detuning = 0.0;
    double coupling = 0.0;
    Eigen::Matrix3d m;
  };
  std::vector<Entry> entries_;
};

/// State of one ion at time t (t must not fall strictly inside an event).
/// Chords go through `cache` when one is given.
BlochState propagate(const IonParams& ion, const Timeline& timeline, double t,
                     const PropagationContext& ctx, ChordCache* cache = nullptr);

/// All ion states at time t as columns of a 3 x N matrix.
Eigen::Matrix3Xd states_at(const Ensemble& ions, const Timeline& timeline, double t,
                           const PropagationContext& ctx);

struct SequenceRun {
  std::vector<double> times;            ///< event boundaries
  std::vector<Eigen::Matrix3Xd> states; ///< one 3 x N block per boundary
};

/// Propagates every ion through the sequence and records the state at each
/// event boundary. Ions start in the ground state at the sequence origin.
SequenceRun run_sequence(const Ensemble& ions, const PulseSequence& sequence,
                         const PropagationContext& ctx);

}  // namespace semm

#endif  // SEMM_SEQUENCE_HPP
