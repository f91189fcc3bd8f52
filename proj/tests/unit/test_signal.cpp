#include <doctest.h>

#include "../oracles.hpp"

#include "semm/protocols.hpp"
#include "semm/signal.hpp"

#include <cmath>
#include <random>

using namespace semm;

namespace {

RealTrace tone(double f, double amplitude, double phase, double t0 = 0.0, double length = 2.0,
               double dt = 0.002) {
  RealTrace t;
  t.t0 = t0;
  t.dt = dt;
  const auto n = static_cast<Eigen::Index>(std::llround(length / dt));
  t.samples.resize(n);
  for (Eigen::Index j = 0; j < n; ++j)
    t.samples[j] = amplitude * std::cos(2.0 * oracle::pi * f * (j * dt) + phase);
  return t;
}

}  // namespace

TEST_SUITE("signal") {

TEST_CASE("ground-state ensemble emits nothing") {
  EnsembleConfig c;
  c.n_ions = 100;
  const Ensemble ions = sample_ensemble(c);
  Eigen::Matrix3Xd s(3, 100);
  for (Eigen::Index i = 0; i < 100; ++i) s.col(i) = ground_state();
  const ComplexTrace tr = emitted_field(s, ions, 0.0, 1.0, 0.002, 5.7);
  CHECK(tr.samples.cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("single resonant ion has constant coherence 1/2") {
  Ensemble ions(1);
  ions[0].detuning = 0.0;
  Eigen::Matrix3Xd s(3, 1);
  s.col(0) = Vec3(1.0, 0.0, 0.0);
  const ComplexTrace tr = emitted_field(s, ions, 0.0, 3.0, 0.002, kInfinity);
  CHECK((tr.samples.cwiseAbs().array() - 0.5).abs().maxCoeff() < 1e-15);
}

TEST_CASE("doubling every coherence doubles every sample") {
  EnsembleConfig c;
  c.n_ions = 3000;
  const Ensemble ions = sample_ensemble(c);
  std::mt19937_64 g(1);
  Eigen::Matrix3Xd s(3, 3000);
  for (Eigen::Index i = 0; i < s.cols(); ++i) s.col(i) = 0.5 * oracle::random_unit(g);
  const ComplexTrace a = emitted_field(s, ions, 1.0, 2.0, 0.002, 5.7);
  const ComplexTrace b = emitted_field(2.0 * s, ions, 1.0, 2.0, 0.002, 5.7);
  CHECK(b.samples == 2.0 * a.samples);
}

TEST_CASE("echo width follows the inverse detuning window") {
  // Short strong pulses: the echo envelope is the transform of the uniform
  // detuning window, |sinc(2 W t)|, whose FWHM is 0.6034 / W.
  EnsembleConfig c;
  c.n_ions = 20000;
  c.t2 = kInfinity;
  c.detuning_window = 10.0;
  const Ensemble ions = sample_ensemble(c);
  PulseSequence seq;
  seq.optical.push_back(make_pulse(0.0, 0.005, kPi / 2));
  seq.optical.push_back(make_pulse(4.0, 0.005, kPi));
  const double dt = 0.001;
  const Eigen::Matrix3Xd s = states_at(ions, Timeline(seq), 7.0, PropagationContext{});
  const ComplexTrace tr = emitted_field(s, ions, 7.0, 9.0, dt, kInfinity);
  const Eigen::VectorXd mag = tr.samples.cwiseAbs();
  Eigen::Index best = 0;
  const double top = mag.maxCoeff(&best);
  CHECK(std::abs(tr.time(best) - 8.0) <= dt + 1e-12);
  Eigen::Index lo = best, hi = best;
  while (lo > 0 && mag[lo] > 0.5 * top) --lo;
  while (hi + 1 < mag.size() && mag[hi] > 0.5 * top) ++hi;
  const double fwhm = (hi - lo) * dt;
  CHECK(fwhm == doctest::Approx(0.6034 / c.detuning_window).epsilon(0.1));
}

TEST_CASE("coherence at the echo centre agrees with the trace peak") {
  EnsembleConfig c;
  c.n_ions = 20000;
  const Ensemble ions = sample_ensemble(c);
  const RunOptions opts = RunOptions::from(c);
  TwoPulseEchoParams p;
  p.detect_duration = 2.0;
  p.phase_cycle = false;
  const PulseSequence seq = two_pulse_echo(p);
  const Timeline tl(seq);
  const Complex centre = echo_amplitude(ions, tl, p.echo_time(), opts);
  const Detection d = detect(ions, tl, seq.detections.front(), opts);
  const double trace_peak = d.field.samples.cwiseAbs().maxCoeff();
  CHECK(std::abs(centre) == doctest::Approx(trace_peak).epsilon(0.02));
}

TEST_CASE("heterodyne examples") {
  ComplexTrace zero;
  zero.samples = Eigen::VectorXcd::Zero(1000);
  CHECK(heterodyne(zero, 30.0).samples.cwiseAbs().maxCoeff() == 0.0);

  ComplexTrace flat;
  flat.dt = 0.002;
  flat.samples = Eigen::VectorXcd::Constant(1000, Complex(1.0, 0.0));
  const Spectrum s = spectrum(heterodyne(flat, 30.0));
  Eigen::Index k = 0;
  s.bins.head(s.size() / 2).cwiseAbs().maxCoeff(&k);
  CHECK(s.frequency(k) == doctest::Approx(30.0));

  CHECK_THROWS_AS(heterodyne(flat, 200.0), ValidationError);
}

TEST_CASE("an ion 3 MHz below the laser beats 3 MHz below the LO") {
  // FFT axes are read relative to the 30 MHz LO, so the -3 MHz colour sits
  // at 27 MHz.
  Ensemble ions(1);
  ions[0].detuning = -3.0;
  Eigen::Matrix3Xd s(3, 1);
  s.col(0) = Vec3(1.0, 0.0, 0.0);
  const ComplexTrace tr = emitted_field(s, ions, 0.0, 2.0, 0.002, kInfinity);
  const Spectrum spec = spectrum(heterodyne(tr, 30.0, 0.0, 3.0));
  CHECK(peak(spec, 28.5, 10.0).frequency == doctest::Approx(27.0));
}

TEST_CASE("peak magnitude is linear in the tone amplitude") {
  const double base = peak(spectrum(tone(30.0, 1.0, 0.3)), 30.0, 0.3).amplitude;
  for (double a : {0.001, 0.5, 7.0, 1000.0})
    CHECK(std::abs(peak(spectrum(tone(30.0, a, 0.3)), 30.0, 0.3).amplitude / base - a) <= 1e-6 * a);
}

TEST_CASE("two tones 3 MHz apart are resolved in a 2 us window") {
  RealTrace t = tone(30.0, 1.0, 0.0);
  t.samples += tone(27.0, 0.7, 1.0).samples;
  const Spectrum s = spectrum(t);
  const Peak a = peak(s, 30.0, 0.3);
  const Peak b = peak(s, 27.0, 0.3);
  CHECK(a.frequency == doctest::Approx(30.0));
  CHECK(b.frequency == doctest::Approx(27.0));
  CHECK(std::abs(peak(s, 28.5, 0.3).value) < 0.01 * b.amplitude);
}

TEST_CASE("tone phase is read from the peak bin") {
  CHECK(peak(spectrum(tone(30.0, 1.0, oracle::pi / 2)), 30.0, 0.3).phase ==
        doctest::Approx(oracle::pi / 2).epsilon(0.01 / (oracle::pi / 2)));
  CHECK(std::abs(peak(spectrum(tone(30.0, 1.0, oracle::pi / 2)), 30.0, 0.3).phase - oracle::pi / 2) <= 0.01);
}

TEST_CASE("relative phase") {
  RealTrace same = tone(30.0, 1.0, 0.4);
  same.samples += tone(27.0, 1.0, 0.4).samples;
  CHECK(std::abs(relative_phase(spectrum(same), 27.0, 30.0, 0.3)) < 1e-9);

  RealTrace quarter = tone(30.0, 1.0, 0.2);
  quarter.samples += tone(27.0, 0.8, 0.2 + oracle::pi / 2).samples;
  CHECK(std::abs(relative_phase(spectrum(quarter), 27.0, 30.0, 0.3) - oracle::pi / 2) <= 0.02);

  CHECK_THROWS_AS(relative_phase(spectrum(tone(30.0, 1.0, 0.0)), 27.0, 30.0, 0.3, 1e-3), ValidationError);
}

TEST_CASE("relative phase ignores a global phase") {
  // Complex two-tone trace multiplied by e^{i alpha}.
  ComplexTrace t;
  t.dt = 0.002;
  t.samples.resize(1000);
  for (Eigen::Index j = 0; j < 1000; ++j) {
    const double time = j * t.dt;
    t.samples[j] = std::polar(1.0, 2.0 * oracle::pi * 3.0 * time + 0.3) +
                   0.5 * std::polar(1.0, 2.0 * oracle::pi * 6.0 * time - 1.2);
  }
  const double ref = relative_phase(spectrum(t), 3.0, 6.0, 0.3);
  for (double alpha : {0.1, 1.7, -2.9}) {
    ComplexTrace r = t;
    r.samples *= std::polar(1.0, alpha);
    CHECK(std::abs(wrap_phase(relative_phase(spectrum(r), 3.0, 6.0, 0.3) - ref)) < 1e-9);
  }
}

TEST_CASE("relative phase ignores a common envelope shift") {
  // Two echo-like Gaussian envelopes under fixed carriers; moving both
  // envelopes together keeps the relative phase.
  auto trace = [](double centre) {
    RealTrace t;
    t.dt = 0.002;
    t.samples.resize(2000);
    for (Eigen::Index j = 0; j < 2000; ++j) {
      const double time = j * t.dt;
      const double env = std::exp(-std::pow((time - centre) / 0.4, 2));
      t.samples[j] = env * (std::cos(2.0 * oracle::pi * 30.0 * time) +
                            std::cos(2.0 * oracle::pi * 27.0 * time + 0.9));
    }
    return t;
  };
  const double a = relative_phase(spectrum(trace(2.0)), 27.0, 30.0, 0.3);
  CHECK(std::abs(a - 0.9) <= 0.02);
  for (double c : {1.5, 1.8, 2.3, 2.5})
    CHECK(std::abs(wrap_phase(relative_phase(spectrum(trace(c)), 27.0, 30.0, 0.3) - a)) <= 0.02);
}

TEST_CASE("Parseval and inverse round trip") {
  std::mt19937_64 g(2);
  std::normal_distribution<double> n(0.0, 1.0);
  ComplexTrace t;
  t.t0 = 1.25;
  t.dt = 0.002;
  t.samples.resize(777);
  for (auto& x : t.samples) x = Complex(n(g), n(g));
  const Spectrum s = spectrum(t);
  CHECK(t.samples.squaredNorm() / 777.0 == doctest::Approx(s.bins.squaredNorm()).epsilon(1e-12));
  const ComplexTrace back = inverse(s, t.dt);
  CHECK(back.t0 == t.t0);
  CHECK((back.samples - t.samples).norm() <= 1e-9 * t.samples.norm());
}

TEST_CASE("wrap_phase range") {
  CHECK(wrap_phase(oracle::pi) == doctest::Approx(oracle::pi));
  CHECK(wrap_phase(-oracle::pi) == doctest::Approx(oracle::pi));
  CHECK(wrap_phase(3.0 * oracle::pi / 2) == doctest::Approx(-oracle::pi / 2));
  CHECK(wrap_phase(0.0) == 0.0);
}

TEST_CASE("spectrum frequencies are signed") {
  Spectrum s;
  s.df = 0.5;
  s.bins = Eigen::VectorXcd::Zero(8);
  CHECK(s.frequency(1) == 0.5);
  CHECK(s.frequency(4) == -2.0);
  CHECK(s.frequency(7) == -0.5);
  CHECK_THROWS_AS(peak(s, 100.0, 0.1), ValidationError);
}

}
