#include "semm/sequence.hpp"

#include "semm/parallel.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <sstream>
#include <utility>

namespace semm {

void DetectionWindow::validate() const {
  if (!(duration > 0.0)) throw ValidationError("detection duration must be > 0");
  if (!(dt > 0.0)) throw ValidationError("detection dt must be > 0");
  if (duration / dt < 2.0 - 1e-9)
    throw ValidationError("detection window must hold at least two samples");
  if (!std::isfinite(start) || !std::isfinite(lo))
    throw ValidationError("detection fields must be finite");
}

namespace {

struct Slot {
  double start;
  double end;
  std::string label;
};

std::string describe(const char* kind, double start, double end) {
  std::ostringstream os;
  os << kind << " [" << start << ", " << end << "]";
  return os.str();
}

/// Groups optical pulses by (start, duration); keeps first-seen order inside.
std::vector<std::vector<OpticalPulse>> group_chords(const std::vector<OpticalPulse>& optical) {
  std::map<std::pair<double, double>, std::vector<OpticalPulse>> groups;
  for (const auto& p : optical) groups[{p.start, p.duration}].push_back(p);
  std::vector<std::vector<OpticalPulse>> out;
  out.reserve(groups.size());
  for (auto& [key, tones] : groups) out.push_back(std::move(tones));
  return out;
}

}  // namespace

void PulseSequence::validate() const {
  std::vector<Slot> slots;
  for (const auto& p : optical) p.validate();
  for (const auto& s : stark) s.validate();
  for (const auto& d : detections) d.validate();

  for (const auto& chord : group_chords(optical))
    slots.push_back({chord.front().start, chord.front().end(),
                     describe("optical pulse", chord.front().start, chord.front().end())});
  for (const auto& s : stark)
    slots.push_back({s.start, s.end(), describe("Stark pulse", s.start, s.end())});

  std::sort(slots.begin(), slots.end(),
            [](const Slot& a, const Slot& b) { return a.start < b.start; });
  for (std::size_t i = 1; i < slots.size(); ++i) {
    if (slots[i].start < slots[i - 1].end)
      throw ValidationError("overlapping events: " + slots[i - 1].label + " and " +
                            slots[i].label);
  }
  for (const auto& d : detections) {
    for (const auto& s : slots) {
      if (d.start < s.end && s.start < d.end())
        throw ValidationError(describe("detection window", d.start, d.end()) + " overlaps " +
                              s.label);
    }
  }
  if (std::isfinite(horizon)) {
    for (const auto& s : slots)
      if (s.end > horizon) throw ValidationError(s.label + " exceeds the horizon");
    for (const auto& d : detections)
      if (d.end() > horizon)
        throw ValidationError(describe("detection window", d.start, d.end()) +
                              " exceeds the horizon");
  }
}

double PulseSequence::origin() const {
  double t = kInfinity;
  for (const auto& p : optical) t = std::min(t, p.start);
  for (const auto& s : stark) t = std::min(t, s.start);
  for (const auto& d : detections) t = std::min(t, d.start);
  return std::isfinite(t) ? t : 0.0;
}

bool operator==(const OpticalPulse& a, const OpticalPulse& b) {
  return a.start == b.start && a.duration == b.duration && a.rabi == b.rabi &&
         a.phase == b.phase && a.offset == b.offset;
}

bool operator==(const StarkPulse& a, const StarkPulse& b) {
  return a.start == b.start && a.duration == b.duration && a.field == b.field;
}

bool operator==(const DetectionWindow& a, const DetectionWindow& b) {
  return a.start == b.start && a.duration == b.duration && a.lo == b.lo && a.dt == b.dt;
}

bool operator==(const PulseSequence& a, const PulseSequence& b) {
  const bool horizon_eq =
      a.horizon == b.horizon || (!std::isfinite(a.horizon) && !std::isfinite(b.horizon));
  return a.optical == b.optical && a.stark == b.stark && a.detections == b.detections &&
         horizon_eq;
}

double event_start(const Timeline::Event& e) {
  return std::visit([](const auto& x) { return x.start; }, e);
}

double event_end(const Timeline::Event& e) {
  return std::visit([](const auto& x) { return x.end(); }, e);
}

Timeline::Timeline(const PulseSequence& sequence, double chord_slices_per_us) {
  sequence.validate();
  origin_ = sequence.origin();
  for (const auto& chord : group_chords(sequence.optical)) {
    if (chord.size() == 1)
      events_.emplace_back(chord.front());
    else
      events_.emplace_back(Chord::from_tones(chord, chord_slices_per_us));
  }
  for (const auto& s : sequence.stark) events_.emplace_back(s);
  std::sort(events_.begin(), events_.end(),
            [](const Event& a, const Event& b) { return event_start(a) < event_start(b); });
}

std::vector<double> Timeline::boundaries() const {
  std::vector<double> out;
  for (const auto& e : events_) {
    if (out.empty() || out.back() != event_start(e)) out.push_back(event_start(e));
    out.push_back(event_end(e));
  }
  return out;
}

bool Timeline::inside_event(double t) const {
  return std::any_of(events_.begin(), events_.end(),
                     [t](const Event& e) { return event_start(e) < t && t < event_end(e); });
}

namespace {

BlochState apply_event(const BlochState& r, std::size_t index, const Timeline::Event& e,
                       const IonParams& ion, const PropagationContext& ctx, ChordCache* cache) {
  if (const auto* p = std::get_if<OpticalPulse>(&e)) return apply_optical_pulse(r, *p, ion, ctx.t2);
  if (const auto* c = std::get_if<Chord>(&e)) {
    if (cache) return cache->map(index, *c, ion, ctx.t2) * r;
    return apply_chord(r, *c, ion, ctx.t2);
  }
  return apply_stark_pulse(r, std::get<StarkPulse>(e), ion, ctx.field_direction, ctx.t2);
}

}  // namespace

const Eigen::Matrix3d& ChordCache::map(std::size_t event, const Chord& chord, const IonParams& ion,
                                       double t2) {
  if (entries_.size() <= event) entries_.resize(event + 1);
  Entry& e = entries_[event];
  if (!e.valid || e.detuning != ion.detuning || e.coupling != ion.coupling) {
    e.m = chord_map(chord, ion, t2);
    e.detuning = ion.detuning;
    e.coupling = ion.coupling;
    e.valid = true;
  }
  return e.m;
}

BlochState propagate(const IonParams& ion, const Timeline& timeline, double t,
                     const PropagationContext& ctx, ChordCache* cache) {
  BlochState r = ground_state();
  double now = timeline.origin();
  if (t <= now) return r;
  const auto& events = timeline.events();
  for (std::size_t k = 0; k < events.size(); ++k) {
    const auto& e = events[k];
    const double start = event_start(e);
    if (start >= t) break;
    const double end = event_end(e);
    if (end > t) throw ValidationError("query time lies inside an event");
    r = free_evolve(r, start - now, ion, ctx.t2);
    r = apply_event(r, k, e, ion, ctx, cache);
    now = end;
  }
  return free_evolve(r, t - now, ion, ctx.t2);
}

Eigen::Matrix3Xd states_at(const Ensemble& ions, const Timeline& timeline, double t,
                           const PropagationContext& ctx) {
  if (timeline.inside_event(t)) throw ValidationError("query time lies inside an event");
  Eigen::Matrix3Xd out(3, static_cast<Eigen::Index>(ions.size()));
  parallel_chunks(ions.size(), [&](std::size_t, std::size_t b, std::size_t e) {
    ChordCache cache;
    for (std::size_t i = b; i < e; ++i)
      out.col(static_cast<Eigen::Index>(i)) = propagate(ions[i], timeline, t, ctx, &cache);
  });
  return out;
}

SequenceRun run_sequence(const Ensemble& ions, const PulseSequence& sequence,
                         const PropagationContext& ctx) {
  const Timeline timeline(sequence, ctx.chord_slices_per_us);
  SequenceRun run;
  run.times = timeline.boundaries();
  const auto n = static_cast<Eigen::Index>(ions.size());
  run.states.assign(run.times.size(), Eigen::Matrix3Xd(3, n));

  parallel_chunks(ions.size(), [&](std::size_t, std::size_t b, std::size_t e) {
    ChordCache cache;
    const auto& events = timeline.events();
    for (std::size_t i = b; i < e; ++i) {
      const auto col = static_cast<Eigen::Index>(i);
      BlochState r = ground_state();
      double now = timeline.origin();
      std::size_t k = 0;
      for (std::size_t j = 0; j < events.size(); ++j) {
        const auto& ev = events[j];
        r = free_evolve(r, event_start(ev) - now, ions[i], ctx.t2);
        if (run.times[k] == event_start(ev)) run.states[k++].col(col) = r;
        r = apply_event(r, j, ev, ions[i], ctx, &cache);
        now = event_end(ev);
        run.states[k++].col(col) = r;
      }
    }
  });
  return run;
}

}  // namespace semm
