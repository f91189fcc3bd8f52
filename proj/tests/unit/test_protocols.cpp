#include <doctest.h>

#include "../oracles.hpp"

#include "semm/protocols.hpp"

#include <cmath>
#include <random>
#include <vector>

using namespace semm;

namespace {

EnsembleConfig powder(std::size_t n, std::uint64_t seed = 1) {
  EnsembleConfig c;
  c.n_ions = n;
  c.seed = seed;
  return c;
}

// Time of the largest |mean coherence| on a grid around `guess`.
double scan_peak(const Ensemble& ions, const Timeline& tl, double guess, const RunOptions& opts,
                 double half = 0.3, double step = 0.005) {
  double best_t = guess, best = -1.0;
  const int n = static_cast<int>(std::lround(2.0 * half / step));
  for (int i = 0; i <= n; ++i) {
    const double t = guess - half + step * i;
    const double a = std::abs(echo_amplitude(ions, tl, t, opts));
    if (a > best) {
      best = a;
      best_t = t;
    }
  }
  return best_t;
}

}  // namespace

TEST_SUITE("protocols") {

TEST_CASE("two-pulse echo layout") {
  TwoPulseEchoParams p;
  p.stark = true;
  p.stark_field = 5.0;
  const PulseSequence s = two_pulse_echo(p);
  REQUIRE(s.optical.size() == 2);
  CHECK(s.optical[0].center() == doctest::Approx(0.0));
  CHECK(s.optical[1].center() == doctest::Approx(4.0));
  CHECK(s.optical[0].rabi * s.optical[0].duration == doctest::Approx(0.25));
  CHECK(s.optical[1].rabi * s.optical[1].duration == doctest::Approx(0.5));
  REQUIRE(s.stark.size() == 1);
  CHECK(s.stark[0].start >= s.optical[0].end());
  CHECK(s.stark[0].end() <= s.optical[1].start);
  CHECK(s.stark[0].area() == doctest::Approx(5.0));
  REQUIRE(s.detections.size() == 1);
  CHECK(s.detections[0].start + 0.5 * s.detections[0].duration == doctest::Approx(8.0));

  TwoPulseEchoParams bad;
  bad.tau = 0.8;
  CHECK_THROWS_AS(two_pulse_echo(bad), ValidationError);
}

TEST_CASE("two-pulse echo peaks at 8 us for tau = 4") {
  EnsembleConfig c = powder(10000);
  c.t2 = kInfinity;
  const Ensemble ions = sample_ensemble(c);
  TwoPulseEchoParams p;
  p.pulse_duration = 0.01;  // see the sequence suite: square 1 us pulses shift the maximum
  const Timeline tl(two_pulse_echo(p));
  CHECK(std::abs(scan_peak(ions, tl, 8.0, RunOptions::from(c), 0.3, 0.002) - 8.0) <= 0.002 + 1e-12);
}

TEST_CASE("single crystal at the cosine zero cancels the echo") {
  EnsembleConfig c = powder(2000);
  c.mode = MaterialMode::single_crystal;
  const Ensemble ions = sample_ensemble(c);
  const RunOptions opts = RunOptions::from(c);
  TwoPulseEchoParams p;
  const Complex off = two_pulse_echo_amplitude(p, ions, opts);
  p.stark = true;
  p.stark_field = 1.0 / (4.0 * c.k_mean) / p.stark_duration;
  const Complex on = two_pulse_echo_amplitude(p, ions, opts);
  CHECK(std::abs(on) < 1e-3 * std::abs(off));
}

TEST_CASE("zero input area gives no echo") {
  const EnsembleConfig c = powder(2000);
  TwoPulseEchoParams p;
  p.input_area = 0.0;
  CHECK(std::abs(two_pulse_echo_amplitude(p, sample_ensemble(c), RunOptions::from(c))) < 1e-15);
}

TEST_CASE("stark sweep normalisation") {
  const EnsembleConfig c = powder(2000);
  const Ensemble ions = sample_ensemble(c);
  const auto s = stark_sweep(TwoPulseEchoParams{}, {0.0, 5.0, 10.1}, ions, RunOptions::from(c));
  REQUIRE(s.size() == 3);
  CHECK(s[0].amplitude == Complex(1.0, 0.0));
  CHECK(std::abs(s[2].amplitude) < std::abs(s[1].amplitude));
  CHECK_THROWS_AS(stark_sweep(TwoPulseEchoParams{}, {}, ions, RunOptions::from(c)), ValidationError);
}

TEST_CASE("SEMM default timing and layout") {
  const SemmParams p;
  CHECK(p.echo1_time() == 8.0);
  CHECK(p.output_time() == 12.0);
  CHECK(p.stimulated_time() == 14.0);
  const PulseSequence s = semm_sequence(p);
  REQUIRE(s.optical.size() == 3);
  REQUIRE(s.stark.size() == 2);
  CHECK(s.stark[0].start > s.optical[0].end());
  CHECK(s.stark[0].end() < s.optical[1].start);
  CHECK(s.stark[1].start > p.echo1_time());
  CHECK(s.stark[1].end() < s.optical[2].start);
  REQUIRE(s.detections.size() == 3);
  const double centres[] = {8.0, 12.0, 14.0};
  for (std::size_t i = 0; i < 3; ++i)
    CHECK(s.detections[i].start + 0.5 * s.detections[i].duration == doctest::Approx(centres[i]));

  SemmParams off;
  off.stark_enabled = false;
  CHECK(semm_sequence(off).stark.empty());
}

TEST_CASE("SEMM parameter validation") {
  SemmParams p;
  p.t1 = 4.0;
  p.t2p = 12.0;
  CHECK_THROWS_AS(p.validate(), ValidationError);
  CHECK_THROWS_AS(semm_sequence(p), ValidationError);
  SemmParams q;
  q.t2p = 8.5;  // no room for the second Stark pulse
  CHECK_THROWS_AS(semm_sequence(q), ValidationError);
}

TEST_CASE("without Stark pulses echo 1 is a plain two-pulse echo") {
  const EnsembleConfig c = powder(5000);
  const Ensemble ions = sample_ensemble(c);
  const RunOptions opts = RunOptions::from(c);
  SemmParams p;
  p.stark_enabled = false;
  const SemmResult r = semm::semm(p, ions, opts);
  TwoPulseEchoParams e;
  e.phase_cycle = false;
  const Complex two = two_pulse_echo_amplitude(e, ions, opts);
  CHECK(std::abs(r.echo1 - two) < 1e-12);
  CHECK(std::abs(r.echo1) > 1e-3);
  CHECK(r.echo1_fft > 0.0);
  CHECK(r.output_fft > 0.0);
}

TEST_CASE("output coherence of every ion is untouched by the Stark pair") {
  // Resonant ions see ideal rotations, so the output phase must match ion by ion.
  EnsembleConfig c = powder(400, 5);
  c.field_hwhm = 0.05;
  c.k_spread = 0.1;
  Ensemble ions = sample_ensemble(c);
  for (auto& ion : ions) ion.detuning = 0.0;
  SemmParams p;
  const PropagationContext ctx = RunOptions::from(c).ctx;
  const Timeline on(semm_sequence(p));
  p.stark_enabled = false;
  const Timeline off(semm_sequence(p));
  double worst = 0.0, worst_echo1 = 0.0;
  for (const auto& ion : ions) {
    const Complex a = coherence(propagate(ion, on, p.output_time(), ctx));
    const Complex b = coherence(propagate(ion, off, p.output_time(), ctx));
    REQUIRE(std::abs(b) > 1e-3);
    worst = std::max(worst, std::abs(std::arg(a / b)));
    const Complex e1 = coherence(propagate(ion, on, p.echo1_time(), ctx));
    const Complex e0 = coherence(propagate(ion, off, p.echo1_time(), ctx));
    worst_echo1 = std::max(worst_echo1, std::abs(std::arg(e1 / e0)));
  }
  CHECK(worst <= 1e-9);
  CHECK(worst_echo1 > 0.5);  // echo 1 does carry the Stark phase
}

TEST_CASE("stimulated echo suppression grows with orientation spread") {
  SemmParams p;
  p.input_phase_cycle = true;
  auto stim_ratio = [&](MaterialMode mode) {
    EnsembleConfig c = powder(20000, 3);
    c.mode = mode;
    return semm_compare(p, sample_ensemble(c), RunOptions::from(c)).stimulated_ratio;
  };
  const double crystal = stim_ratio(MaterialMode::single_crystal);
  const double ceramic = stim_ratio(MaterialMode::ceramic);
  const double spread = stim_ratio(MaterialMode::powder);
  CAPTURE(crystal);
  CAPTURE(ceramic);
  CAPTURE(spread);
  CHECK(spread < crystal);
  CHECK(spread < 0.3);
  CHECK(crystal > 0.9);
}

TEST_CASE("output and stimulated echoes land at their predicted times") {
  EnsembleConfig c = powder(4000, 11);
  c.t2 = kInfinity;
  const Ensemble ions = sample_ensemble(c);
  const RunOptions opts = RunOptions::from(c);
  std::mt19937_64 g(2024);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  int done = 0;
  while (done < 10) {
    SemmParams p;
    p.pulse_duration = 0.01;
    // Hard pi pulses leave no stimulated echo; 2 rad pulses leave plenty.
    p.pi1_area = 2.0;
    p.pi2_area = 2.0;
    p.stark_enabled = false;
    p.t1 = 2.0 + 4.0 * u(g);
    p.t2p = 2.0 * p.t1 + 1.6 + 6.0 * u(g);
    if (std::abs(p.t2p - 3.0 * p.t1) < 1.0) continue;
    ++done;
    const Timeline tl(semm_sequence(p));
    CAPTURE(p.t1);
    CAPTURE(p.t2p);
    CHECK(std::abs(scan_peak(ions, tl, 2.0 * p.t2p - 2.0 * p.t1, opts) - p.output_time()) <= 0.005 + 1e-9);
    CHECK(std::abs(scan_peak(ions, tl, p.t1 + p.t2p, opts) - p.stimulated_time()) <= 0.005 + 1e-9);
  }
}

TEST_CASE("multiplexed storage shows two outputs 3 MHz apart") {
  const EnsembleConfig c = powder(20000, 4);
  const Ensemble ions = sample_ensemble(c);
  const RunOptions opts = RunOptions::from(c);
  MultiplexParams mp;
  const MultiplexResult r = multiplexed_semm(mp, ions, opts);
  const Peak a = peak(r.output_window.spec, 30.0, 0.26);
  const Peak b = peak(r.output_window.spec, 27.0, 0.26);
  CHECK(a.frequency - b.frequency == doctest::Approx(3.0));
  const Peak mid = peak(r.output_window.spec, 28.5, 0.3);
  CHECK(mid.amplitude < 0.5 * std::min(a.amplitude, b.amplitude));
  CHECK(r.output[0] == doctest::Approx(a.amplitude));
  CHECK(r.output[1] == doctest::Approx(b.amplitude));
}

TEST_CASE("multiplexing with zero separation is single-channel SEMM") {
  MultiplexParams mp;
  mp.delta_f = 0.0;
  CHECK(multiplexed_sequence(mp) == semm_sequence(mp.base));
  MultiplexParams tight;
  tight.window = 0.2;
  CHECK_THROWS_AS(tight.validate(), ValidationError);
}

TEST_CASE("multiplexed outputs superpose") {
  const EnsembleConfig c = powder(20000, 6);
  const Ensemble ions = sample_ensemble(c);
  const RunOptions opts = RunOptions::from(c);
  MultiplexParams mp;
  mp.base.input_area = 0.05;
  const auto both = multiplexed_semm(mp, ions, opts);
  mp.input_enabled = {true, false};
  const auto one = multiplexed_semm(mp, ions, opts);
  mp.input_enabled = {false, true};
  const auto two = multiplexed_semm(mp, ions, opts);
  const Eigen::VectorXcd sum = one.output_window.spec.bins + two.output_window.spec.bins;
  CHECK((both.output_window.spec.bins - sum).norm() <= 0.01 * both.output_window.spec.bins.norm());
}

TEST_CASE("zeroing one channel leaves the other output alone") {
  const EnsembleConfig c = powder(20000, 8);
  const Ensemble ions = sample_ensemble(c);
  const RunOptions opts = RunOptions::from(c);
  MultiplexParams mp;
  const auto both = multiplexed_semm(mp, ions, opts);
  mp.input_enabled = {true, false};
  const auto one = multiplexed_semm(mp, ions, opts);
  CHECK(one.output[0] == doctest::Approx(both.output[0]).epsilon(0.01));
}

TEST_CASE("memory decay without dephasing is flat") {
  EnsembleConfig c = powder(10000, 9);
  c.t2 = kInfinity;
  const auto pts = memory_decay(decay_defaults(), {4, 8, 16, 24, 32, 40}, sample_ensemble(c),
                                RunOptions::from(c));
  double lo = kInfinity, hi = 0.0;
  for (const auto& d : pts) {
    lo = std::min(lo, d.amplitude);
    hi = std::max(hi, d.amplitude);
  }
  CHECK(hi / lo - 1.0 < 0.05);
  CHECK(pts.front().storage_time == doctest::Approx(4.0));
  CHECK_THROWS_AS(memory_decay(decay_defaults(), {}, sample_ensemble(c), RunOptions::from(c)),
                  ValidationError);
}

TEST_CASE("memory decay at 40 us follows exp(-40/5.7)") {
  const EnsembleConfig c = powder(10000, 10);
  std::vector<double> times;
  for (int i = 1; i <= 10; ++i) times.push_back(4.0 * i);
  const auto pts = memory_decay(decay_defaults(), times, sample_ensemble(c), RunOptions::from(c));
  std::vector<double> t, a;
  for (const auto& d : pts) {
    t.push_back(d.storage_time);
    a.push_back(d.amplitude);
  }
  const FitResult f = fit_exp_decay(t, a);
  REQUIRE(f.converged);
  CHECK(f.param("T2") == doctest::Approx(5.7).epsilon(0.1));
  const double ratio = a.back() / f.param("A0");
  CHECK(ratio == doctest::Approx(std::exp(-40.0 / 5.7)).epsilon(0.1));
  CHECK(ratio > 1e-4);
}

TEST_CASE("Stark coefficient scan recovers k at every label") {
  EnsembleConfig c = powder(5000, 12);
  std::vector<double> areas;
  for (int i = 0; i <= 30; ++i) areas.push_back(i);
  const auto scan = stark_coefficient_scan(c, {0.0, 5.0, 10.0, 15.0}, TwoPulseEchoParams{}, areas);
  REQUIRE(scan.size() == 4);
  for (const auto& s : scan) {
    CAPTURE(s.label);
    REQUIRE(s.fit.converged);
    CHECK(s.fit.names.size() == 3);
    const double k = s.fit.param("k");
    const double se = s.fit.stderr_of("k");
    CHECK(std::abs(k - c.k_mean) <= std::max(4.0 * se, 0.03 * c.k_mean));
  }
  CHECK(scan[1].fit.params != scan[2].fit.params);
}

}

TEST_SUITE("fidelity") {

// Default two-colour storage: 1 us pulses, 3 MHz apart.

TEST_CASE("equal input phases come out equal") {
  const EnsembleConfig c = powder(20000, 1);
  const auto pts = two_color_fidelity(FidelityParams{}, {0.0}, sample_ensemble(c), RunOptions::from(c));
  CHECK(std::abs(pts[0].phase_out) <= 0.02);
}

TEST_CASE("a pi/2 input shift comes out as pi/2 with a positive real part") {
  const EnsembleConfig c = powder(20000, 1);
  const auto pts =
      two_color_fidelity(FidelityParams{}, {oracle::pi / 2}, sample_ensemble(c), RunOptions::from(c));
  CHECK(std::abs(pts[0].phase_out - oracle::pi / 2) <= 0.05);
  CHECK(pts[0].bin_shifted.real() > 0.0);
}

TEST_CASE("relative phase follows the input over the full circle") {
  const EnsembleConfig c = powder(20000, 1);
  std::vector<double> in;
  for (int i = 0; i < 8; ++i) in.push_back(2.0 * oracle::pi * i / 8.0);
  const auto pts = two_color_fidelity(FidelityParams{}, in, sample_ensemble(c), RunOptions::from(c));
  std::vector<double> out;
  for (const auto& p : pts) out.push_back(p.phase_out);
  const auto un = unwrap_to_reference(out, in);
  const LinearFit lf = linear_fit(in, un);
  CHECK(lf.slope == doctest::Approx(1.0).epsilon(0.02));
  CHECK(lf.r >= 0.99);
}

TEST_CASE("wider separation and shorter pulses remove the crosstalk offset") {
  const EnsembleConfig c = powder(20000, 1);
  FidelityParams fp;
  fp.delta_f = 10.0;
  const auto pts = two_color_fidelity(fp, {0.0, oracle::pi / 2}, sample_ensemble(c), RunOptions::from(c));
  CHECK(std::abs(pts[0].phase_out) <= 0.05);
  CHECK(std::abs(pts[1].phase_out - oracle::pi / 2) <= 0.05);
}

TEST_CASE("post-selection keeps shots with a positive shifted beat") {
  const EnsembleConfig c = powder(5000, 2);
  const Ensemble ions = sample_ensemble(c);
  const ShotAverage a = post_selected_average(FidelityParams{}, oracle::pi / 2, 50, 7, ions,
                                              RunOptions::from(c));
  CHECK(a.kept > 0);
  CHECK(a.kept < 50);
  CHECK(a.bin_shifted.real() > 0.0);
  const ShotAverage b = post_selected_average(FidelityParams{}, oracle::pi / 2, 50, 7, ions,
                                              RunOptions::from(c));
  CHECK(a.kept == b.kept);
  CHECK(a.bin_shifted == b.bin_shifted);
}

TEST_CASE("two-colour sequence validation") {
  FidelityParams fp;
  fp.delta_f = 0.0;
  CHECK_THROWS_AS(two_color_sequence(fp, 0.0), ValidationError);
  const PulseSequence s = two_color_sequence(FidelityParams{}, 1.0);
  CHECK(s.detections.size() == 1);
  CHECK(s.detections[0].duration >= 2.0);
}

}
