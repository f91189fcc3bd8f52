#include "semm/analysis.hpp"
#include "semm/io.hpp"
#include "semm/parallel.hpp"
#include "semm/protocols.hpp"

#include <CLI11.hpp>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

namespace fs = std::filesystem;
using namespace semm;

namespace {

constexpr int kExitValidation = 2;
constexpr int kExitNoConvergence = 3;

const char* const kDescription =
    "Stark echo modulation memory simulator.\n"
    "Units: time us, frequency MHz, field V/cm, Stark area V/cm.us, k MHz/(V/cm).\n"
    "All phases and pulse areas are in radians.";

struct NotConverged : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct Globals {
  std::optional<std::string> seed, ions, mode, k, t2, field_hwhm, detuning_window, strata;
  std::string config_path;
  std::string out = ".";
  std::string format = "csv";
  std::optional<unsigned> threads;
  bool deterministic = false;

  EnsembleConfig config() const {
    EnsembleConfig c;
    if (!config_path.empty()) {
      std::ifstream in(config_path);
      if (!in) throw ValidationError("cannot read config file '" + config_path + "'");
      std::stringstream ss;
      ss << in.rdbuf();
      c = parse_config(ss.str(), c);
    }
    const std::pair<const char*, const std::optional<std::string>*> flags[] = {
        {"seed", &seed},           {"n_ions", &ions},
        {"mode", &mode},           {"k_mean", &k},
        {"t2", &t2},               {"field_hwhm", &field_hwhm},
        {"detuning_window", &detuning_window}, {"orientation_strata", &strata},
    };
    for (const auto& [key, value] : flags)
      if (*value) apply_config_entry(c, key, **value);
    c.validate();
    return c;
  }
};

class Output {
 public:
  Output(const Globals& g, RunMetadata meta) : dir_(g.out), json_(g.format == "json"), meta_(std::move(meta)) {
    fs::create_directories(dir_);
  }

  void table(const std::string& name, const Table& t) const {
    json_ ? write(name + ".json", table_json(t, meta_).dump(2) + "\n")
          : write(name + ".csv", table_csv(t, meta_));
  }
  void trace(const std::string& name, const RealTrace& t) const {
    json_ ? write(name + ".json", trace_json(t, meta_).dump(2) + "\n")
          : write(name + ".csv", trace_csv(t, meta_));
  }
  void spectrum(const std::string& name, const Spectrum& s) const {
    json_ ? write(name + ".json", spectrum_json(s, meta_).dump(2) + "\n")
          : write(name + ".csv", spectrum_csv(s, meta_));
  }
  void sequence(const std::string& name, const PulseSequence& seq) const {
    write(name + ".seq", emit_sequence(seq));
  }
  void fit(const std::string& name, const FitResult& f) const {
    if (json_) {
      nlohmann::json j = fit_json(f);
      j["metadata"] = metadata_json(meta_);
      write(name + ".json", j.dump(2) + "\n");
    } else {
      write(name + ".txt", csv_header(meta_) + fit_text(f));
    }
  }
  void report(const std::string& name, const nlohmann::json& body, const std::string& text) const {
    if (json_) {
      nlohmann::json j = body;
      j["metadata"] = metadata_json(meta_);
      write(name + ".json", j.dump(2) + "\n");
    } else {
      write(name + ".txt", csv_header(meta_) + text);
    }
  }

 private:
  void write(const std::string& file, const std::string& content) const {
    std::ofstream os(dir_ / file, std::ios::binary);
    if (!os) throw std::runtime_error("cannot write " + (dir_ / file).string());
    os << content;
  }

  fs::path dir_;
  bool json_;
  RunMetadata meta_;
};

/// argv without the flags that do not change any output byte.
std::string canonical_command(int argc, char** argv) {
  std::string cmd = "stark-sim";
  for (int i = 1; i < argc; ++i) {
    const std::string a = argv[i];
    if (a == "--out" || a == "--threads") {
      ++i;
      continue;
    }
    if (a.rfind("--out=", 0) == 0 || a.rfind("--threads=", 0) == 0 || a == "--deterministic")
      continue;
    cmd += ' ';
    cmd += a;
  }
  return cmd;
}

std::vector<double> grid(double lo, double hi, double step) {
  if (!(step > 0.0)) throw ValidationError("grid step must be > 0");
  if (!(hi >= lo)) throw ValidationError("grid upper bound must be >= lower bound");
  std::vector<double> out;
  const auto n = static_cast<long>(std::floor((hi - lo) / step + 1e-9));
  for (long i = 0; i <= n; ++i) out.push_back(lo + static_cast<double>(i) * step);
  return out;
}

std::string fmt(double v) { return format_exact(v); }

void add_semm_timing(CLI::App* sub, SemmParams& p) {
  sub->add_option("--t1", p.t1, "input to first pi pulse, us")->capture_default_str();
  sub->add_option("--t2p", p.t2p, "input to second pi pulse, us")->capture_default_str();
  sub->add_option("--pulse-duration", p.pulse_duration, "optical pulse length, us")->capture_default_str();
  sub->add_option("--stark-area", p.stark_area, "Stark pulse area, V/cm.us")->capture_default_str();
  sub->add_option("--stark-duration", p.stark_duration, "Stark pulse length, us")->capture_default_str();
  sub->add_option("--detect-duration", p.detect_duration, "detection window, us")->capture_default_str();
  sub->add_option("--lo", p.lo, "local-oscillator offset, MHz")->capture_default_str();
  sub->add_option("--dt", p.dt, "sample spacing, us")->capture_default_str();
}

// ---------------------------------------------------------------------------

struct SweepArgs {
  TwoPulseEchoParams p;
  double area_max = 30.0;
  double area_step = 0.5;
  std::optional<double> input_area, rephase_area;
  bool no_cycle = false;
};

void run_sweep(const Globals& g, const SweepArgs& a, const RunMetadata& meta) {
  const EnsembleConfig c = meta.config;
  TwoPulseEchoParams p = a.p;
  const bool weak = c.mode == MaterialMode::ceramic;
  p.input_area = a.input_area.value_or(weak ? 0.05 : kPi / 2.0);
  p.rephase_area = a.rephase_area.value_or(weak ? 0.05 : kPi);
  p.phase_cycle = !a.no_cycle;

  const Ensemble ions = sample_ensemble(c);
  const auto points = stark_sweep(p, grid(0.0, a.area_max, a.area_step), ions, RunOptions::from(c));

  Table t{{"area", "amplitude", "real", "imag"}, {}};
  for (const auto& pt : points)
    t.rows.push_back({pt.area, std::abs(pt.amplitude), pt.amplitude.real(), pt.amplitude.imag()});
  const Output out(g, meta);
  out.table("stark_sweep", t);
  p.stark = true;
  p.stark_field = a.area_max / p.stark_duration;
  out.sequence("stark_sweep_last", two_pulse_echo(p));
  std::cout << "stark-sweep: " << points.size() << " points written\n";
}

// ---------------------------------------------------------------------------

void run_semm(const Globals& g, SemmParams p, const RunMetadata& meta) {
  const EnsembleConfig c = meta.config;
  const Ensemble ions = sample_ensemble(c);
  const SemmComparison cmp = semm_compare(p, ions, RunOptions::from(c));
  const Output out(g, meta);

  const char* names[] = {"echo1", "output", "stimulated"};
  const SemmResult* runs[] = {&cmp.on, &cmp.off};
  const char* tags[] = {"on", "off"};
  for (int r = 0; r < 2; ++r) {
    const Detection* dets[] = {&runs[r]->echo1_window, &runs[r]->output_window,
                               &runs[r]->stimulated_window};
    for (int w = 0; w < 3; ++w) {
      const std::string base = std::string("semm_") + tags[r] + "_" + names[w];
      out.trace(base + "_trace", dets[w]->beat);
      out.spectrum(base + "_spectrum", dets[w]->spec);
    }
    out.sequence(std::string("semm_") + tags[r], runs[r]->sequence);
  }

  const double times[] = {p.echo1_time(), p.output_time(), p.stimulated_time()};
  const double on[] = {cmp.on.echo1_fft, cmp.on.output_fft, cmp.on.stimulated_fft};
  const double off[] = {cmp.off.echo1_fft, cmp.off.output_fft, cmp.off.stimulated_fft};
  const double ratio[] = {cmp.echo1_ratio, cmp.output_ratio, cmp.stimulated_ratio};
  Table t{{"window", "center_time", "fft_on", "fft_off", "ratio_on_off"}, {}};
  std::ostringstream text;
  text << "window  center  fft_on  fft_off  on/off  suppression\n";
  for (int w = 0; w < 3; ++w) {
    t.rows.push_back({static_cast<double>(w), times[w], on[w], off[w], ratio[w]});
    text << names[w] << ' ' << fmt(times[w]) << ' ' << fmt(on[w]) << ' ' << fmt(off[w]) << ' '
         << fmt(ratio[w]) << ' ' << fmt(1.0 / ratio[w]) << '\n';
  }
  out.table("semm_report", t);
  std::cout << "semm: windows 0=echo1 1=output 2=stimulated\n" << text.str();
}

// ---------------------------------------------------------------------------

struct DecayArgs {
  SemmParams p = decay_defaults();
  double t_min = 4.0, t_max = 40.0, t_step = 4.0;
  bool no_cycle = false;
};

void run_decay(const Globals& g, const DecayArgs& a, const RunMetadata& meta) {
  const EnsembleConfig c = meta.config;
  SemmParams p = a.p;
  p.input_phase_cycle = !a.no_cycle;
  const Ensemble ions = sample_ensemble(c);
  const auto points = memory_decay(p, grid(a.t_min, a.t_max, a.t_step), ions, RunOptions::from(c));

  Table t{{"storage_time", "amplitude"}, {}};
  std::vector<double> ts, as;
  for (const auto& pt : points) {
    t.rows.push_back({pt.storage_time, pt.amplitude});
    ts.push_back(pt.storage_time);
    as.push_back(pt.amplitude);
  }
  const Output out(g, meta);
  out.table("decay", t);
  const FitResult f = fit_exp_decay(ts, as);
  out.fit("decay_fit", f);
  std::cout << "decay: " << fit_text(f);
  if (!f.converged) throw NotConverged("exponential fit did not converge");
}

// ---------------------------------------------------------------------------

void run_multiplex(const Globals& g, MultiplexParams p, const RunMetadata& meta) {
  const EnsembleConfig c = meta.config;
  const Ensemble ions = sample_ensemble(c);
  const RunOptions opts = RunOptions::from(c);
  p.base.stark_enabled = true;
  const MultiplexResult on = multiplexed_semm(p, ions, opts);
  p.base.stark_enabled = false;
  const MultiplexResult off = multiplexed_semm(p, ions, opts);

  const Output out(g, meta);
  out.spectrum("multiplex_on_echo1_spectrum", on.echo1_window.spec);
  out.spectrum("multiplex_on_output_spectrum", on.output_window.spec);
  out.spectrum("multiplex_off_echo1_spectrum", off.echo1_window.spec);
  out.spectrum("multiplex_off_output_spectrum", off.output_window.spec);
  out.sequence("multiplex_on", on.sequence);
  out.sequence("multiplex_off", off.sequence);

  Table t{{"channel", "beat", "echo1_on", "echo1_off", "output_on", "output_off"}, {}};
  std::ostringstream text;
  for (std::size_t ch = 0; ch < 2; ++ch) {
    const double beat = p.base.lo + p.base.input_offset - (ch == 0 ? 0.0 : p.delta_f);
    t.rows.push_back({static_cast<double>(ch + 1), beat, on.echo1[ch], off.echo1[ch],
                      on.output[ch], off.output[ch]});
    text << "channel " << ch + 1 << " (" << fmt(beat) << " MHz): echo1 suppression "
         << fmt(off.echo1[ch] / on.echo1[ch]) << ", output on/off "
         << fmt(on.output[ch] / off.output[ch]) << '\n';
  }
  out.table("multiplex_report", t);
  std::cout << "multiplex:\n" << text.str();
}

// ---------------------------------------------------------------------------

struct FidelityArgs {
  FidelityParams p;
  int phases = 8;
  std::size_t shots = 200;
  bool no_cycle = false;
};

void run_fidelity(const Globals& g, const FidelityArgs& a, const RunMetadata& meta) {
  if (a.phases < 3) throw ValidationError("--phases must be >= 3");
  const EnsembleConfig c = meta.config;
  FidelityParams p = a.p;
  p.base.input_phase_cycle = !a.no_cycle;
  const Ensemble ions = sample_ensemble(c);
  const RunOptions opts = RunOptions::from(c);

  std::vector<double> in;
  for (int i = 0; i < a.phases; ++i)
    in.push_back(kTwoPi * static_cast<double>(i) / static_cast<double>(a.phases));
  const auto points = two_color_fidelity(p, in, ions, opts);
  std::vector<double> raw;
  for (const auto& pt : points) raw.push_back(pt.phase_out);
  const std::vector<double> unwrapped = unwrap_to_reference(raw, in);
  const LinearFit lf = linear_fit(in, unwrapped);

  Table t{{"phase_in", "phase_out", "phase_out_unwrapped", "shifted_re", "shifted_im",
           "reference_re", "reference_im"},
          {}};
  for (std::size_t i = 0; i < points.size(); ++i)
    t.rows.push_back({points[i].phase_in, points[i].phase_out, unwrapped[i],
                      points[i].bin_shifted.real(), points[i].bin_shifted.imag(),
                      points[i].bin_reference.real(), points[i].bin_reference.imag()});

  const ShotAverage avg = post_selected_average(p, kPi / 2.0, a.shots, c.seed, ions, opts);

  const Output out(g, meta);
  out.table("fidelity", t);
  out.sequence("fidelity_input_phase_0", two_color_sequence(p, 0.0));
  std::ostringstream text;
  text << "slope = " << fmt(lf.slope) << "\nintercept = " << fmt(lf.intercept)
       << "\nr = " << fmt(lf.r) << "\npost_selected_kept = " << avg.kept << "/" << a.shots
       << "\npost_selected_shifted = " << fmt(avg.bin_shifted.real()) << " "
       << fmt(avg.bin_shifted.imag()) << "\npost_selected_reference = "
       << fmt(avg.bin_reference.real()) << " " << fmt(avg.bin_reference.imag()) << '\n';
  const nlohmann::json body = {
      {"slope", lf.slope},
      {"intercept", lf.intercept},
      {"r", lf.r},
      {"post_selected",
       {{"phase_in", kPi / 2.0},
        {"kept", avg.kept},
        {"shots", a.shots},
        {"shifted", {avg.bin_shifted.real(), avg.bin_shifted.imag()}},
        {"reference", {avg.bin_reference.real(), avg.bin_reference.imag()}}}}};
  out.report("fidelity_fit", body, text.str());
  std::cout << "fidelity:\n" << text.str();
}

// ---------------------------------------------------------------------------

struct FitArgs {
  std::string input;
  std::string model = "nano";
  std::string x = "area";
  std::string y = "amplitude";
  double k0 = 0.05;
  double b0 = 0.05;
  std::optional<double> a0;
};

void run_fit(const Globals& g, const FitArgs& a, const RunMetadata& meta) {
  std::ifstream in(a.input);
  if (!in) throw ValidationError("cannot read '" + a.input + "'");
  std::stringstream ss;
  ss << in.rdbuf();
  const Table table = read_table_csv(ss.str());
  auto column = [&](const std::string& name) {
    for (std::size_t i = 0; i < table.columns.size(); ++i)
      if (table.columns[i] == name) {
        std::vector<double> v;
        for (const auto& row : table.rows) v.push_back(row[i]);
        return v;
      }
    throw ValidationError("column '" + name + "' not found in " + a.input);
  };
  const std::vector<double> x = column(a.x), y = column(a.y);
  if (x.empty()) throw ValidationError("no data rows in " + a.input);

  const Model model = stark_model(parse_stark_model(a.model));
  Eigen::VectorXd init(static_cast<Eigen::Index>(model.names.size()));
  init[0] = a.a0.value_or(y.front());
  init[1] = a.k0;
  if (init.size() > 2) init[2] = a.b0;

  FitResult f;
  try {
    f = fit(model, x, y, init);
  } catch (const FitError& e) {
    throw NotConverged(e.what());
  }
  Output(g, meta).fit("fit_" + model.name, f);
  std::cout << "fit " << model.name << ": " << fit_text(f);
  if (!f.converged) throw NotConverged("fit did not converge");
}

// ---------------------------------------------------------------------------

void run_file(const Globals& g, const std::string& path, const RunMetadata& meta) {
  std::ifstream in(path);
  if (!in) throw ValidationError("cannot read sequence file '" + path + "'");
  std::stringstream ss;
  ss << in.rdbuf();
  const PulseSequence seq = parse_sequence(ss.str());
  if (seq.detections.empty()) throw ValidationError("sequence has no detect directive");

  const EnsembleConfig c = meta.config;
  const Ensemble ions = sample_ensemble(c);
  const RunOptions opts = RunOptions::from(c);
  const Timeline timeline(seq, opts.ctx.chord_slices_per_us);
  const Output out(g, meta);
  out.sequence("run_sequence", seq);
  for (std::size_t i = 0; i < seq.detections.size(); ++i) {
    const Detection d = detect(ions, timeline, seq.detections[i], opts);
    out.trace("run_window" + std::to_string(i) + "_trace", d.beat);
    out.spectrum("run_window" + std::to_string(i) + "_spectrum", d.spec);
  }
  std::cout << "run: " << seq.detections.size() << " detection window(s) written\n";
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{kDescription, "stark-sim"};
  app.set_version_flag("--version", std::string(SEMM_VERSION));
  app.require_subcommand(1);
  app.fallthrough();

  Globals g;
  app.add_option("--seed", g.seed, "RNG seed (default 1)");
  app.add_option("--ions", g.ions, "number of ions (default 10000)");
  app.add_option("--mode", g.mode, "single_crystal | ceramic | powder (default powder)");
  app.add_option("--k", g.k, "Stark coefficient, MHz/(V/cm) (default 0.0495)");
  app.add_option("--t2", g.t2, "optical coherence lifetime, us, or inf (default 5.7)");
  app.add_option("--field-hwhm", g.field_hwhm, "local-field Cauchy HWHM, in units of the applied field (default 0)");
  app.add_option("--detuning-window", g.detuning_window, "half-width of the detuning window, MHz (default 10)");
  app.add_option("--strata", g.strata, "orientation strata per detuning block (default 16)");
  app.add_option("--config", g.config_path, "key = value file; flags override its entries");
  app.add_option("--out", g.out, "output directory")->capture_default_str();
  app.add_option("--format", g.format, "csv | json")
      ->check(CLI::IsMember({"csv", "json"}))
      ->capture_default_str();
  app.add_option("--threads", g.threads, "worker threads (fallback: STARK_SIM_THREADS, else 1)");
  app.add_flag("--deterministic", g.deterministic,
               "fixed-order reductions (always on: results never depend on --threads)");

  SweepArgs sweep;
  auto* s_sweep = app.add_subcommand("stark-sweep", "two-pulse echo amplitude vs Stark area");
  s_sweep->add_option("--area-max", sweep.area_max, "largest Stark area, V/cm.us")->capture_default_str();
  s_sweep->add_option("--area-step", sweep.area_step, "Stark area step")->capture_default_str();
  s_sweep->add_option("--tau", sweep.p.tau, "pulse separation, us")->capture_default_str();
  s_sweep->add_option("--pulse-duration", sweep.p.pulse_duration, "optical pulse length, us")->capture_default_str();
  s_sweep->add_option("--stark-duration", sweep.p.stark_duration, "Stark pulse length, us")->capture_default_str();
  s_sweep->add_option("--input-area", sweep.input_area, "input pulse area (default pi/2; 0.05 for ceramic)");
  s_sweep->add_option("--rephase-area", sweep.rephase_area, "rephasing pulse area (default pi; 0.05 for ceramic)");
  s_sweep->add_flag("--no-phase-cycle", sweep.no_cycle, "single shot instead of the 4-step cycle");

  SemmParams semm_p;
  auto* s_semm = app.add_subcommand("semm", "Stark echo modulation memory, Stark on vs off");
  add_semm_timing(s_semm, semm_p);
  s_semm->add_flag("--phase-cycle", semm_p.input_phase_cycle, "2-step input phase cycle");

  DecayArgs decay;
  auto* s_decay = app.add_subcommand("decay", "output amplitude vs storage time + exponential fit");
  add_semm_timing(s_decay, decay.p);
  s_decay->add_option("--t-min", decay.t_min, "shortest storage time, us")->capture_default_str();
  s_decay->add_option("--t-max", decay.t_max, "longest storage time, us")->capture_default_str();
  s_decay->add_option("--t-step", decay.t_step, "storage time step, us")->capture_default_str();
  s_decay->add_flag("--no-phase-cycle", decay.no_cycle, "disable the 2-step input phase cycle");

  MultiplexParams mux;
  auto* s_mux = app.add_subcommand("multiplex", "two frequency channels stored in one sequence");
  add_semm_timing(s_mux, mux.base);
  s_mux->add_option("--delta-f", mux.delta_f, "channel separation, MHz")->capture_default_str();
  s_mux->add_option("--channel-delay", mux.channel_delay, "channel-2 delay, us")->capture_default_str();
  s_mux->add_option("--window", mux.window, "detection window length, us")->capture_default_str();

  FidelityArgs fid;
  auto* s_fid = app.add_subcommand("fidelity", "two-colour storage: output vs input relative phase");
  add_semm_timing(s_fid, fid.p.base);
  s_fid->add_option("--phases", fid.phases, "number of input phases")->capture_default_str();
  s_fid->add_option("--delta-f", fid.p.delta_f, "colour separation, MHz")->capture_default_str();
  s_fid->add_option("--slices", fid.p.slices_per_us, "chord slices per us")->capture_default_str();
  s_fid->add_option("--shots", fid.shots, "random-LO shots for the pi/2 post-selection")->capture_default_str();
  s_fid->add_flag("--no-phase-cycle", fid.no_cycle, "disable the 2-step input phase cycle");

  FitArgs fit_args;
  auto* s_fit = app.add_subcommand("fit", "fit a Stark sweep table");
  s_fit->add_option("input", fit_args.input, "CSV table (e.g. stark_sweep.csv)")->required();
  s_fit->add_option("--model", fit_args.model, "cos | ceramic | nano")
      ->check(CLI::IsMember({"cos", "ceramic", "nano"}))
      ->capture_default_str();
  s_fit->add_option("--x", fit_args.x, "x column")->capture_default_str();
  s_fit->add_option("--y", fit_args.y, "y column")->capture_default_str();
  s_fit->add_option("--k0", fit_args.k0, "initial k")->capture_default_str();
  s_fit->add_option("--b0", fit_args.b0, "initial b (nano)")->capture_default_str();
  s_fit->add_option("--a0", fit_args.a0, "initial amplitude (default: first y)");

  std::string seq_path;
  auto* s_run = app.add_subcommand("run", "propagate an arbitrary sequence file");
  s_run->add_option("sequence", seq_path, "sequence file")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : kExitValidation;
  }

  try {
    if (g.threads) {
      if (*g.threads == 0) throw ValidationError("--threads must be >= 1");
      set_thread_count(*g.threads);
    }
    RunMetadata meta;
    meta.command = canonical_command(argc, argv);
    meta.config = g.config();
    meta.seed = meta.config.seed;
    meta.config_hash = config_hash(meta.config);

    if (*s_sweep) run_sweep(g, sweep, meta);
    else if (*s_semm) run_semm(g, semm_p, meta);
    else if (*s_decay) run_decay(g, decay, meta);
    else if (*s_mux) run_multiplex(g, mux, meta);
    else if (*s_fid) run_fidelity(g, fid, meta);
    else if (*s_fit) run_fit(g, fit_args, meta);
    else if (*s_run) run_file(g, seq_path, meta);
  } catch (const ValidationError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitValidation;
  } catch (const NotConverged& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitNoConvergence;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
