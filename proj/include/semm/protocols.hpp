#ifndef SEMM_PROTOCOLS_HPP
#define SEMM_PROTOCOLS_HPP

// Pulse-sequence builders and runners for the echo experiments.
//
// Builder times are pulse centres measured from the centre of the input pulse
// (t = 0); pulse areas are rotation angles in radians.

#include "semm/analysis.hpp"
#include "semm/ensemble.hpp"
#include "semm/sequence.hpp"
#include "semm/signal.hpp"

#include <array>
#include <cstdint>
#include <optional>
#include <vector>

namespace semm {

struct RunOptions {
  PropagationContext ctx;
  EmissionWeighting weighting = EmissionWeighting::uniform;

  static RunOptions from(const EnsembleConfig& config);
};

/// Optical pulse of rotation angle `area` (rad) centred at `center`.
OpticalPulse make_pulse(double center, double duration, double area, double phase = 0.0,
                        double offset = 0.0);

/// Mean coherence at t computed straight from the timeline (no state storage).
Complex echo_amplitude(const Ensemble& ions, const Timeline& timeline, double t,
                       const RunOptions& opts);

struct Detection {
  DetectionWindow window;
  ComplexTrace field;
  RealTrace beat;
  Spectrum spec;
};

/// Emission inside one detection window, heterodyned against window.lo.
Detection detect(const Ensemble& ions, const Timeline& timeline, const DetectionWindow& window,
                 const RunOptions& opts, double lo_phase = 0.0);

/// Timelines of a two-step phase cycle; `flipped` is empty when not cycling.
struct CycledTimeline {
  Timeline base;
  std::optional<Timeline> flipped;
};

/// (x(base) - x(flipped)) / 2, or x(base) without a cycle.
Complex echo_amplitude(const Ensemble& ions, const CycledTimeline& timeline, double t,
                       const RunOptions& opts);
Detection detect(const Ensemble& ions, const CycledTimeline& timeline,
                 const DetectionWindow& window, const RunOptions& opts, double lo_phase = 0.0);

// ---------------------------------------------------------------------------
// Two-pulse (Stark-modulated) photon echo

struct TwoPulseEchoParams {
  double tau = 4.0;
  double pulse_duration = 1.0;
  double input_area = kPi / 2.0;
  double rephase_area = kPi;
  double input_phase = 0.0;
  double rephase_phase = 0.0;
  double offset = 0.0;
  bool stark = false;
  double stark_duration = 1.0;
  double stark_field = 0.0;
  double detect_duration = 1.0;
  double lo = 30.0;
  double dt = 0.002;
  /// Four-step cycle of the rephasing-pulse phase (weights e^{2i phi}) that
  /// keeps only the echo pathway.
  bool phase_cycle = true;

  double echo_time() const { return 2.0 * tau; }
};

/// Input at 0, rephasing pulse at tau, optional Stark pulse centred between
/// them, detection window centred on 2 tau.
PulseSequence two_pulse_echo(const TwoPulseEchoParams& params);

struct SweepPoint {
  double area = 0.0;      ///< A_S, V/cm µs
  Complex amplitude;      ///< echo coherence divided by the A_S = 0 coherence
  Complex raw;            ///< un-normalised echo coherence
};

/// Coherence at 2 tau, phase cycled when params.phase_cycle is set.
Complex two_pulse_echo_amplitude(const TwoPulseEchoParams& params, const Ensemble& ions,
                                 const RunOptions& opts);

/// Echo amplitude at 2 tau for each Stark area (field = area / stark_duration).
std::vector<SweepPoint> stark_sweep(const TwoPulseEchoParams& base, const std::vector<double>& areas,
                                    const Ensemble& ions, const RunOptions& opts);

/// One Stark sweep per optical-frequency label (GHz from the line centre).
/// The laser follows the label, so each label only draws a fresh ensemble
/// (seed mixed with the label index); k is then fitted with the model that
/// matches config.mode (nano for powder, ceramic, cos for single crystal).
struct LabelledFit {
  double label = 0.0;
  FitResult fit;
};

std::vector<LabelledFit> stark_coefficient_scan(const EnsembleConfig& config,
                                                const std::vector<double>& labels,
                                                const TwoPulseEchoParams& params,
                                                const std::vector<double>& areas);

// ---------------------------------------------------------------------------
// Stark echo modulation memory

struct SemmParams {
  double t1 = 4.0;   ///< input -> first rephasing pulse
  double t2p = 10.0; ///< input -> second rephasing pulse
  double pulse_duration = 1.0;
  double input_area = kPi / 2.0;
  double input_phase = 0.0;
  double input_offset = 0.0;
  double pi1_area = kPi;
  double pi1_phase = 0.0;
  double pi2_area = kPi;
  double pi2_phase = 0.0;
  double pi_offset = 0.0;
  double stark_area = 10.10;
  double stark_duration = 1.0;
  bool stark_enabled = true;
  double detect_duration = 0.8;
  double lo = 30.0;
  double dt = 0.002;
  /// Two-step cycle of the input phase (0, pi), signals subtracted: removes
  /// every contribution that does not carry the input coherence.
  bool input_phase_cycle = false;

  double stark_field() const { return stark_area / stark_duration; }
  double echo1_time() const { return 2.0 * t1; }
  double output_time() const { return 2.0 * t2p - 2.0 * t1; }
  double stimulated_time() const { return t1 + t2p; }
  double storage_time() const { return output_time(); }
  void validate() const;
};

/// input(0) - Stark1 - pi1(t1) - [echo 1 at 2 t1] - Stark2 - pi2(t2p) -
/// output(2 t2p - 2 t1); detection windows on echo 1, output and the
/// stimulated echo (t1 + t2p), in that order.
PulseSequence semm_sequence(const SemmParams& params);

struct SemmResult {
  PulseSequence sequence;
  Complex echo1;       ///< coherence at the echo centres
  Complex output;
  Complex stimulated;
  Detection echo1_window;
  Detection output_window;
  Detection stimulated_window;
  double echo1_fft = 0.0;  ///< |FFT| at the beat note of each window
  double output_fft = 0.0;
  double stimulated_fft = 0.0;
};

SemmResult semm(const SemmParams& params, const Ensemble& ions, const RunOptions& opts);

struct SemmComparison {
  SemmResult on;
  SemmResult off;
  double echo1_ratio = 0.0;      ///< FFT amplitude on/off
  double output_ratio = 0.0;
  double stimulated_ratio = 0.0;
};

/// Runs the sequence with and without Stark pulses.
SemmComparison semm_compare(SemmParams params, const Ensemble& ions, const RunOptions& opts);

/// SEMM timing for storage scans down to 4 us: 0.25 us optical and Stark
/// pulses (same Stark area), 0.4 us windows, echo-1-to-pi2 gap 0.75 us,
/// input phase cycle on.
SemmParams decay_defaults();

struct DecayPoint {
  double storage_time = 0.0;
  double amplitude = 0.0;  ///< |output coherence|
};

/// Varies t1 while holding the echo-1-to-pi2 gap (t2p - 2 t1) of `params`.
std::vector<DecayPoint> memory_decay(const SemmParams& params,
                                     const std::vector<double>& storage_times,
                                     const Ensemble& ions, const RunOptions& opts);

// ---------------------------------------------------------------------------
// Frequency-multiplexed storage

struct MultiplexParams {
  SemmParams base = [] {
    SemmParams p;
    p.t1 = 10.0;
    p.t2p = 24.2;
    p.input_phase_cycle = true;
    return p;
  }();
  double delta_f = 3.0;        ///< channel 2 sits at -delta_f
  double channel_delay = 1.2;  ///< channel 2 pulses trail channel 1 by this
  /// Detection window length; 0 means channel_delay + base.detect_duration.
  /// Windows are centred between the two channels' echoes.
  double window = 4.0;
  std::array<bool, 2> input_enabled{true, true};
  double half_window = 0.26;   ///< MHz, peak search half-width

  double window_length() const;
  void validate() const;
};

PulseSequence multiplexed_sequence(const MultiplexParams& params);

struct MultiplexResult {
  PulseSequence sequence;
  Detection echo1_window;
  Detection output_window;
  std::array<double, 2> echo1{};   ///< FFT amplitude at each channel's beat
  std::array<double, 2> output{};
};

MultiplexResult multiplexed_semm(const MultiplexParams& params, const Ensemble& ions,
                                 const RunOptions& opts);

// ---------------------------------------------------------------------------
// Two-colour phase fidelity

struct FidelityParams {
  SemmParams base = [] {
    SemmParams p;
    p.input_phase_cycle = true;
    return p;
  }();
  double delta_f = 3.0;
  double half_window = 0.26;
  double slices_per_us = 1000.0;
};

/// Every optical pulse becomes a two-tone chord (offsets 0 and -delta_f); the
/// input's -delta_f tone carries phase `phase_in`, all other tones phase 0.
/// One detection window of at least 2 us is centred on the output echo.
PulseSequence two_color_sequence(const FidelityParams& params, double phase_in);

struct FidelityPoint {
  double phase_in = 0.0;
  double phase_out = 0.0;     ///< phase(lo - delta_f) - phase(lo), wrapped
  Complex bin_shifted;        ///< output spectrum at the -delta_f beat
  Complex bin_reference;      ///< output spectrum at the reference beat
};

std::vector<FidelityPoint> two_color_fidelity(const FidelityParams& params,
                                              const std::vector<double>& phases_in,
                                              const Ensemble& ions, const RunOptions& opts);

/// Repeats the readout with random LO phases, keeps shots whose -delta_f beat
/// has a positive real part and averages their spectra at both beats.
struct ShotAverage {
  std::size_t kept = 0;
  Complex bin_shifted;
  Complex bin_reference;
};

ShotAverage post_selected_average(const FidelityParams& params, double phase_in,
                                  std::size_t shots, std::uint64_t seed, const Ensemble& ions,
                                  const RunOptions& opts);

}  // namespace semm

#endif  // SEMM_PROTOCOLS_HPP
