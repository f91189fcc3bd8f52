#include "semm/protocols.hpp"

#include "semm/parallel.hpp"

#include "rng.hpp"

#include <algorithm>
#include <cmath>

namespace semm {

RunOptions RunOptions::from(const EnsembleConfig& config) {
  RunOptions opts;
  opts.ctx.field_direction = config.field_direction;
  opts.ctx.t2 = config.t2;
  return opts;
}

OpticalPulse make_pulse(double center, double duration, double area, double phase,
                        double offset) {
  OpticalPulse p;
  p.start = center - 0.5 * duration;
  p.duration = duration;
  p.rabi = area / (kTwoPi * duration);
  p.phase = phase;
  p.offset = offset;
  return p;
}

Complex echo_amplitude(const Ensemble& ions, const Timeline& timeline, double t,
                       const RunOptions& opts) {
  if (timeline.inside_event(t)) throw ValidationError("echo time lies inside an event");
  const double norm = chunked_sum(ions.size(), 0.0, [&](std::size_t b, std::size_t e) {
    double s = 0.0;
    for (std::size_t i = b; i < e; ++i) s += emission_weight(ions[i], opts.weighting);
    return s;
  });
  if (norm <= 0.0) return {0.0, 0.0};
  const Complex sum = chunked_sum(ions.size(), Complex{0.0, 0.0}, [&](std::size_t b, std::size_t e) {
    ChordCache cache;
    Complex s{0.0, 0.0};
    for (std::size_t i = b; i < e; ++i) {
      const double w = emission_weight(ions[i], opts.weighting);
      if (w != 0.0) s += w * coherence<double>(propagate(ions[i], timeline, t, opts.ctx, &cache));
    }
    return s;
  });
  return sum / norm;
}

namespace {

double max_abs_detuning(const Ensemble& ions) {
  double m = 0.0;
  for (const auto& ion : ions) m = std::max(m, std::abs(ion.detuning));
  return m;
}

ComplexTrace window_field(const Ensemble& ions, const Timeline& timeline,
                          const DetectionWindow& window, const RunOptions& opts) {
  const Eigen::Matrix3Xd states = states_at(ions, timeline, window.start, opts.ctx);
  return emitted_field(states, ions, window.start, window.end(), window.dt, opts.ctx.t2,
                       opts.weighting);
}

Detection finish_detection(const Ensemble& ions, const DetectionWindow& window, ComplexTrace field,
                           double lo_phase) {
  Detection d;
  d.window = window;
  d.field = std::move(field);
  d.beat = heterodyne(d.field, window.lo, lo_phase, max_abs_detuning(ions));
  d.spec = spectrum(d.beat);
  return d;
}

}  // namespace

Detection detect(const Ensemble& ions, const Timeline& timeline, const DetectionWindow& window,
                 const RunOptions& opts, double lo_phase) {
  window.validate();
  return finish_detection(ions, window, window_field(ions, timeline, window, opts), lo_phase);
}

Complex echo_amplitude(const Ensemble& ions, const CycledTimeline& timeline, double t,
                       const RunOptions& opts) {
  const Complex a = echo_amplitude(ions, timeline.base, t, opts);
  if (!timeline.flipped) return a;
  return 0.5 * (a - echo_amplitude(ions, *timeline.flipped, t, opts));
}

Detection detect(const Ensemble& ions, const CycledTimeline& timeline,
                 const DetectionWindow& window, const RunOptions& opts, double lo_phase) {
  window.validate();
  ComplexTrace field = window_field(ions, timeline.base, window, opts);
  if (timeline.flipped) {
    const ComplexTrace other = window_field(ions, *timeline.flipped, window, opts);
    field.samples = 0.5 * (field.samples - other.samples);
  }
  return finish_detection(ions, window, std::move(field), lo_phase);
}

namespace {

/// Builds the timeline pair for p.input_phase_cycle.
template <typename Build>
CycledTimeline cycled(const SemmParams& p, double slices_per_us, Build build) {
  CycledTimeline tl{Timeline(build(p), slices_per_us), std::nullopt};
  if (p.input_phase_cycle) {
    SemmParams q = p;
    q.input_phase += kPi;
    tl.flipped.emplace(build(q), slices_per_us);
  }
  return tl;
}

}  // namespace

// ---------------------------------------------------------------------------

PulseSequence two_pulse_echo(const TwoPulseEchoParams& p) {
  if (!(p.pulse_duration > 0.0)) throw ValidationError("pulse duration must be > 0");
  if (!(p.tau > p.pulse_duration))
    throw ValidationError("tau must exceed the pulse duration");
  PulseSequence seq;
  seq.optical.push_back(make_pulse(0.0, p.pulse_duration, p.input_area, p.input_phase, p.offset));
  seq.optical.push_back(
      make_pulse(p.tau, p.pulse_duration, p.rephase_area, p.rephase_phase, p.offset));
  if (p.stark) {
    if (!(p.tau - p.pulse_duration > p.stark_duration))
      throw ValidationError("Stark pulse does not fit between the two optical pulses");
    seq.stark.push_back({0.5 * p.tau - 0.5 * p.stark_duration, p.stark_duration, p.stark_field});
  }
  DetectionWindow w{p.echo_time() - 0.5 * p.detect_duration, p.detect_duration, p.lo, p.dt};
  if (w.start < p.tau + 0.5 * p.pulse_duration)
    throw ValidationError("echo detection window overlaps the rephasing pulse");
  seq.detections.push_back(w);
  seq.validate();
  return seq;
}

Complex two_pulse_echo_amplitude(const TwoPulseEchoParams& params, const Ensemble& ions,
                                 const RunOptions& opts) {
  if (!params.phase_cycle)
    return echo_amplitude(ions, Timeline(two_pulse_echo(params)), params.echo_time(), opts);
  TwoPulseEchoParams p = params;
  Complex sum{0.0, 0.0};
  for (int step = 0; step < 4; ++step) {
    const double shift = 0.5 * kPi * step;
    p.rephase_phase = params.rephase_phase + shift;
    sum += std::polar(1.0, 2.0 * shift) *
           echo_amplitude(ions, Timeline(two_pulse_echo(p)), p.echo_time(), opts);
  }
  return 0.25 * sum;
}

std::vector<SweepPoint> stark_sweep(const TwoPulseEchoParams& base, const std::vector<double>& areas,
                                    const Ensemble& ions, const RunOptions& opts) {
  if (areas.empty()) throw ValidationError("Stark sweep needs at least one area");
  TwoPulseEchoParams p = base;
  p.stark = true;
  p.stark_field = 0.0;
  const Complex reference = two_pulse_echo_amplitude(p, ions, opts);

  std::vector<SweepPoint> out;
  out.reserve(areas.size());
  for (double area : areas) {
    if (!(area >= 0.0)) throw ValidationError("Stark areas must be >= 0");
    p.stark_field = area / p.stark_duration;
    const Complex raw = two_pulse_echo_amplitude(p, ions, opts);
    const Complex normalized = std::abs(reference) > 0.0 ? raw / reference : Complex{0.0, 0.0};
    out.push_back({area, normalized, raw});
  }
  return out;
}

std::vector<LabelledFit> stark_coefficient_scan(const EnsembleConfig& config,
                                                const std::vector<double>& labels,
                                                const TwoPulseEchoParams& params,
                                                const std::vector<double>& areas) {
  StarkModel which = StarkModel::nano;
  if (config.mode == MaterialMode::ceramic) which = StarkModel::ceramic;
  if (config.mode == MaterialMode::single_crystal) which = StarkModel::cos;
  const Model model = stark_model(which);

  std::vector<LabelledFit> out;
  for (std::size_t i = 0; i < labels.size(); ++i) {
    EnsembleConfig c = config;
    c.seed = detail::mix_seed(config.seed, i + 1);
    const Ensemble ions = sample_ensemble(c);
    const auto sweep = stark_sweep(params, areas, ions, RunOptions::from(c));

    std::vector<double> x, y;
    for (const auto& pt : sweep) {
      x.push_back(pt.area);
      y.push_back(std::abs(pt.amplitude));
    }
    Eigen::VectorXd init(model.names.size());
    init(0) = 1.0;
    init(1) = config.k_mean;
    if (init.size() > 2) init(2) = 0.01;
    out.push_back({labels[i], fit(model, x, y, init)});
  }
  return out;
}

// ---------------------------------------------------------------------------

void SemmParams::validate() const {
  const double d = pulse_duration;
  const double half_window = 0.5 * detect_duration;
  if (!(d > 0.0)) throw ValidationError("pulse duration must be > 0");
  if (!(stark_duration > 0.0)) throw ValidationError("Stark duration must be > 0");
  if (!(stark_area >= 0.0)) throw ValidationError("Stark area must be >= 0");
  if (!(detect_duration > 0.0)) throw ValidationError("detection duration must be > 0");
  if (!(t1 > 0.0) || !(t2p > t1)) throw ValidationError("need 0 < t1 < t2p");
  if (!(t1 - d > stark_duration))
    throw ValidationError("Stark pulse 1 does not fit strictly between input and pi1");
  if (echo1_time() - half_window < t1 + 0.5 * d)
    throw ValidationError("echo-1 window overlaps pi1");
  if (!((t2p - 0.5 * d) - (echo1_time() + half_window) > stark_duration))
    throw ValidationError("Stark pulse 2 does not fit strictly between echo 1 and pi2");
  if (output_time() - half_window < t2p + 0.5 * d)
    throw ValidationError("output window overlaps pi2");
  if (std::abs(stimulated_time() - output_time()) < detect_duration)
    throw ValidationError("output echo collides with the stimulated echo (t2p too close to 3 t1)");
}

namespace {

StarkPulse centred_stark(double gap_begin, double gap_end, double duration, double field) {
  return {0.5 * (gap_begin + gap_end) - 0.5 * duration, duration, field};
}

DetectionWindow centred_window(double center, double duration, const SemmParams& p) {
  return {center - 0.5 * duration, duration, p.lo, p.dt};
}

}  // namespace

PulseSequence semm_sequence(const SemmParams& p) {
  p.validate();
  const double d = p.pulse_duration;
  PulseSequence seq;
  seq.optical.push_back(make_pulse(0.0, d, p.input_area, p.input_phase, p.input_offset));
  seq.optical.push_back(make_pulse(p.t1, d, p.pi1_area, p.pi1_phase, p.pi_offset));
  seq.optical.push_back(make_pulse(p.t2p, d, p.pi2_area, p.pi2_phase, p.pi_offset));
  if (p.stark_enabled) {
    seq.stark.push_back(centred_stark(0.5 * d, p.t1 - 0.5 * d, p.stark_duration, p.stark_field()));
    seq.stark.push_back(centred_stark(p.echo1_time() + 0.5 * p.detect_duration,
                                      p.t2p - 0.5 * d, p.stark_duration, p.stark_field()));
  }
  seq.detections.push_back(centred_window(p.echo1_time(), p.detect_duration, p));
  seq.detections.push_back(centred_window(p.output_time(), p.detect_duration, p));
  seq.detections.push_back(centred_window(p.stimulated_time(), p.detect_duration, p));
  seq.validate();
  return seq;
}

SemmResult semm(const SemmParams& params, const Ensemble& ions, const RunOptions& opts) {
  SemmResult r;
  r.sequence = semm_sequence(params);
  const CycledTimeline timeline = cycled(params, opts.ctx.chord_slices_per_us, semm_sequence);
  r.echo1 = echo_amplitude(ions, timeline, params.echo1_time(), opts);
  r.output = echo_amplitude(ions, timeline, params.output_time(), opts);
  r.stimulated = echo_amplitude(ions, timeline, params.stimulated_time(), opts);

  r.echo1_window = detect(ions, timeline, r.sequence.detections[0], opts);
  r.output_window = detect(ions, timeline, r.sequence.detections[1], opts);
  r.stimulated_window = detect(ions, timeline, r.sequence.detections[2], opts);

  const double beat = params.lo + params.input_offset;
  const double half = 0.5 * r.echo1_window.spec.df;
  r.echo1_fft = peak(r.echo1_window.spec, beat, half).amplitude;
  r.output_fft = peak(r.output_window.spec, beat, half).amplitude;
  r.stimulated_fft = peak(r.stimulated_window.spec, beat, half).amplitude;
  return r;
}

SemmComparison semm_compare(SemmParams params, const Ensemble& ions, const RunOptions& opts) {
  SemmComparison c;
  params.stark_enabled = true;
  c.on = semm(params, ions, opts);
  params.stark_enabled = false;
  c.off = semm(params, ions, opts);
  auto ratio = [](double a, double b) { return b > 0.0 ? a / b : kInfinity; };
  c.echo1_ratio = ratio(c.on.echo1_fft, c.off.echo1_fft);
  c.output_ratio = ratio(c.on.output_fft, c.off.output_fft);
  c.stimulated_ratio = ratio(c.on.stimulated_fft, c.off.stimulated_fft);
  return c;
}

SemmParams decay_defaults() {
  SemmParams p;
  p.pulse_duration = 0.25;
  p.stark_duration = 0.25;
  p.detect_duration = 0.4;
  p.t1 = 1.25;
  p.t2p = 3.25;
  p.input_phase_cycle = true;
  return p;
}

std::vector<DecayPoint> memory_decay(const SemmParams& params,
                                     const std::vector<double>& storage_times,
                                     const Ensemble& ions, const RunOptions& opts) {
  if (storage_times.empty()) throw ValidationError("memory decay needs at least one storage time");
  const double gap = params.t2p - 2.0 * params.t1;
  std::vector<DecayPoint> out;
  out.reserve(storage_times.size());
  for (double storage : storage_times) {
    SemmParams p = params;
    p.t1 = 0.5 * storage - gap;
    p.t2p = 2.0 * p.t1 + gap;
    const CycledTimeline timeline = cycled(p, opts.ctx.chord_slices_per_us, semm_sequence);
    out.push_back({p.storage_time(), std::abs(echo_amplitude(ions, timeline, p.output_time(), opts))});
  }
  return out;
}

// ---------------------------------------------------------------------------

double MultiplexParams::window_length() const {
  return window > 0.0 ? window : channel_delay + base.detect_duration;
}

void MultiplexParams::validate() const {
  base.validate();
  const SemmParams& p = base;
  const double d = p.pulse_duration;
  const double s = channel_delay;
  if (!(delta_f >= 0.0)) throw ValidationError("delta_f must be >= 0");
  if (!(window >= 0.0)) throw ValidationError("window must be >= 0");
  if (delta_f == 0.0) return;
  const double lead = 0.5 * (window_length() - s);
  const double tail = window_length() - lead;
  if (!(s >= d)) throw ValidationError("channel delay must be at least one pulse duration");
  if (!(lead > 0.0)) throw ValidationError("window must be longer than the channel delay");
  if (!((p.t1 - 0.5 * d) - (s + 0.5 * d) > p.stark_duration))
    throw ValidationError("Stark pulse 1 does not fit after both inputs");
  if (p.echo1_time() - lead < p.t1 + s + 0.5 * d)
    throw ValidationError("echo-1 window overlaps the channel-2 pi1 pulse");
  if (!((p.t2p - 0.5 * d) - (p.echo1_time() + tail) > p.stark_duration))
    throw ValidationError("Stark pulse 2 does not fit after the echo-1 window");
  if (p.output_time() - lead < p.t2p + s + 0.5 * d)
    throw ValidationError("output window overlaps the channel-2 pi2 pulse");
  if (p.stimulated_time() < p.output_time() + tail)
    throw ValidationError("output window reaches the stimulated echo");
  if (delta_f * window_length() < 1.0)
    throw ValidationError("channels are not resolvable within the detection window");
}

PulseSequence multiplexed_sequence(const MultiplexParams& params) {
  params.validate();
  if (params.delta_f == 0.0) return semm_sequence(params.base);
  const SemmParams& p = params.base;
  const double d = p.pulse_duration;
  const double s = params.channel_delay;
  const double length = params.window_length();
  const double lead = 0.5 * (length - s);

  PulseSequence seq;
  for (int c = 0; c < 2; ++c) {
    const double shift = c == 0 ? 0.0 : s;
    const double offset = c == 0 ? p.input_offset : p.input_offset - params.delta_f;
    const double pi_offset = c == 0 ? p.pi_offset : p.pi_offset - params.delta_f;
    if (params.input_enabled[static_cast<std::size_t>(c)])
      seq.optical.push_back(make_pulse(shift, d, p.input_area, p.input_phase, offset));
    seq.optical.push_back(make_pulse(p.t1 + shift, d, p.pi1_area, p.pi1_phase, pi_offset));
    seq.optical.push_back(make_pulse(p.t2p + shift, d, p.pi2_area, p.pi2_phase, pi_offset));
  }
  if (p.stark_enabled) {
    seq.stark.push_back(centred_stark(s + 0.5 * d, p.t1 - 0.5 * d, p.stark_duration, p.stark_field()));
    seq.stark.push_back(centred_stark(p.echo1_time() - lead + length, p.t2p - 0.5 * d,
                                      p.stark_duration, p.stark_field()));
  }
  seq.detections.push_back({p.echo1_time() - lead, length, p.lo, p.dt});
  seq.detections.push_back({p.output_time() - lead, length, p.lo, p.dt});
  seq.validate();
  return seq;
}

MultiplexResult multiplexed_semm(const MultiplexParams& params, const Ensemble& ions,
                                 const RunOptions& opts) {
  MultiplexResult r;
  r.sequence = multiplexed_sequence(params);
  const CycledTimeline timeline =
      cycled(params.base, opts.ctx.chord_slices_per_us, [&params](const SemmParams& base) {
        MultiplexParams q = params;
        q.base = base;
        return multiplexed_sequence(q);
      });
  r.echo1_window = detect(ions, timeline, r.sequence.detections[0], opts);
  r.output_window = detect(ions, timeline, r.sequence.detections[1], opts);

  const double half = params.delta_f == 0.0 ? 0.5 * r.echo1_window.spec.df : params.half_window;
  for (std::size_t c = 0; c < 2; ++c) {
    const double beat = params.base.lo + params.base.input_offset - (c == 0 ? 0.0 : params.delta_f);
    r.echo1[c] = peak(r.echo1_window.spec, beat, half).amplitude;
    r.output[c] = peak(r.output_window.spec, beat, half).amplitude;
  }
  return r;
}

// ---------------------------------------------------------------------------

namespace {

constexpr double kFidelityOutputWindow = 2.0;

}  // namespace

PulseSequence two_color_sequence(const FidelityParams& params, double phase_in) {
  if (!(params.delta_f > 0.0)) throw ValidationError("two-colour storage needs delta_f > 0");
  const SemmParams& p = params.base;
  PulseSequence base = semm_sequence(p);
  PulseSequence seq;
  seq.stark = base.stark;
  for (std::size_t i = 0; i < base.optical.size(); ++i) {
    OpticalPulse reference = base.optical[i];
    OpticalPulse shifted = reference;
    shifted.offset -= params.delta_f;
    if (i == 0) shifted.phase = reference.phase + phase_in;
    seq.optical.push_back(reference);
    seq.optical.push_back(shifted);
  }
  const double width = std::max(p.detect_duration, kFidelityOutputWindow);
  seq.detections.push_back({p.output_time() - 0.5 * width, width, p.lo, p.dt});
  seq.validate();
  return seq;
}

namespace {

double beat_reference(const FidelityParams& params) {
  return params.base.lo + params.base.input_offset;
}

}  // namespace

std::vector<FidelityPoint> two_color_fidelity(const FidelityParams& params,
                                              const std::vector<double>& phases_in,
                                              const Ensemble& ions, const RunOptions& opts) {
  std::vector<FidelityPoint> out;
  out.reserve(phases_in.size());
  RunOptions chord_opts = opts;
  chord_opts.ctx.chord_slices_per_us = params.slices_per_us;
  const double f_ref = beat_reference(params);
  const double f_shift = f_ref - params.delta_f;
  for (double phi : phases_in) {
    const PulseSequence seq = two_color_sequence(params, phi);
    const CycledTimeline timeline =
        cycled(params.base, params.slices_per_us, [&params, phi](const SemmParams& base) {
          FidelityParams q = params;
          q.base = base;
          return two_color_sequence(q, phi);
        });
    const Detection det = detect(ions, timeline, seq.detections.front(), chord_opts);
    FidelityPoint pt;
    pt.phase_in = phi;
    pt.phase_out = relative_phase(det.spec, f_shift, f_ref, params.half_window);
    pt.bin_shifted = peak(det.spec, f_shift, params.half_window).value;
    pt.bin_reference = peak(det.spec, f_ref, params.half_window).value;
    out.push_back(pt);
  }
  return out;
}

ShotAverage post_selected_average(const FidelityParams& params, double phase_in,
                                  std::size_t shots, std::uint64_t seed, const Ensemble& ions,
                                  const RunOptions& opts) {
  RunOptions chord_opts = opts;
  chord_opts.ctx.chord_slices_per_us = params.slices_per_us;
  const PulseSequence seq = two_color_sequence(params, phase_in);
  const CycledTimeline timeline =
      cycled(params.base, params.slices_per_us, [&params, phase_in](const SemmParams& base) {
        FidelityParams q = params;
        q.base = base;
        return two_color_sequence(q, phase_in);
      });
  const DetectionWindow& window = seq.detections.front();
  const Detection det = detect(ions, timeline, window, chord_opts);
  const double max_detuning = max_abs_detuning(ions);

  const double f_ref = beat_reference(params);
  const double f_shift = f_ref - params.delta_f;
  detail::Rng rng(seed);
  ShotAverage avg;
  for (std::size_t s = 0; s < shots; ++s) {
    const double lo_phase = rng.uniform(0.0, kTwoPi);
    const Spectrum spec = spectrum(heterodyne(det.field, window.lo, lo_phase, max_detuning));
    const Complex shifted = peak(spec, f_shift, params.half_window).value;
    if (shifted.real() <= 0.0) continue;
    avg.bin_shifted += shifted;
    avg.bin_reference += peak(spec, f_ref, params.half_window).value;
    ++avg.kept;
  }
  if (avg.kept > 0) {
    avg.bin_shifted /= static_cast<double>(avg.kept);
    avg.bin_reference /= static_cast<double>(avg.kept);
  }
  return avg;
}

}  // namespace semm
