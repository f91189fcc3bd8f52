#include "semm/io.hpp"

#include <array>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <map>
#include <set>
#include <sstream>

namespace semm {

std::string format_shortest(double value) {
  std::array<char, 64> buf{};
  const auto res = std::to_chars(buf.data(), buf.data() + buf.size(), value);
  return std::string(buf.data(), res.ptr);
}

std::string format_exact(double value) {
  if (std::isinf(value)) return value > 0 ? "inf" : "-inf";
  std::array<char, 64> buf{};
  std::snprintf(buf.data(), buf.size(), "%.17g", value);
  return buf.data();
}

namespace {

struct Token {
  std::string_view text;
  int column;
};

std::vector<Token> split_tokens(std::string_view line) {
  std::vector<Token> out;
  std::size_t i = 0;
  while (i < line.size()) {
    while (i < line.size() && (line[i] == ' ' || line[i] == '\t' || line[i] == '\r')) ++i;
    if (i >= line.size()) break;
    const std::size_t begin = i;
    while (i < line.size() && line[i] != ' ' && line[i] != '\t' && line[i] != '\r') ++i;
    out.push_back({line.substr(begin, i - begin), static_cast<int>(begin) + 1});
  }
  return out;
}

bool parse_number(std::string_view text, double& out) {
  if (text.empty()) return false;
  if (text.front() == '+') return false;
  const auto res = std::from_chars(text.data(), text.data() + text.size(), out);
  return res.ec == std::errc{} && res.ptr == text.data() + text.size() && std::isfinite(out);
}

struct Directive {
  std::map<std::string, double, std::less<>> values;
  std::map<std::string, int, std::less<>> columns;
};

Directive parse_fields(const std::vector<Token>& tokens, const std::vector<std::string>& keys,
                       int line) {
  Directive d;
  const std::set<std::string, std::less<>> allowed(keys.begin(), keys.end());
  for (std::size_t t = 1; t < tokens.size(); ++t) {
    const auto& tok = tokens[t];
    const auto eq = tok.text.find('=');
    if (eq == std::string_view::npos || eq == 0)
      throw ParseError(line, tok.column, "expected key=value, got '" + std::string(tok.text) + "'");
    const std::string_view key = tok.text.substr(0, eq);
    const std::string_view value = tok.text.substr(eq + 1);
    if (!allowed.contains(key))
      throw ParseError(line, tok.column, "unknown key '" + std::string(key) + "'");
    if (d.values.contains(key))
      throw ParseError(line, tok.column, "duplicate key '" + std::string(key) + "'");
    double v = 0.0;
    if (!parse_number(value, v))
      throw ParseError(line, tok.column + static_cast<int>(eq) + 1,
                       "invalid number '" + std::string(value) + "'");
    d.values.emplace(std::string(key), v);
    d.columns.emplace(std::string(key), tok.column);
  }
  for (const auto& key : keys)
    if (!d.values.contains(key))
      throw ParseError(line, tokens.front().column, "missing key '" + key + "'");
  return d;
}

void require_positive(const Directive& d, const char* key, int line) {
  if (!(d.values.at(key) > 0.0))
    throw ParseError(line, d.columns.at(key), std::string(key) + " must be > 0");
}

void require_nonnegative(const Directive& d, const char* key, int line) {
  if (!(d.values.at(key) >= 0.0))
    throw ParseError(line, d.columns.at(key), std::string(key) + " must be >= 0");
}

}  // namespace

PulseSequence parse_sequence(std::string_view text) {
  PulseSequence seq;
  int line_no = 0;
  std::size_t pos = 0;
  while (pos <= text.size()) {
    const std::size_t nl = text.find('\n', pos);
    std::string_view line =
        text.substr(pos, nl == std::string_view::npos ? std::string_view::npos : nl - pos);
    pos = nl == std::string_view::npos ? text.size() + 1 : nl + 1;
    ++line_no;

    if (const auto hash = line.find('#'); hash != std::string_view::npos)
      line = line.substr(0, hash);
    const auto tokens = split_tokens(line);
    if (tokens.empty()) continue;

    const std::string_view kind = tokens.front().text;
    if (kind == "optical") {
      const auto d = parse_fields(tokens, {"start", "dur", "rabi", "phase", "offset"}, line_no);
      require_positive(d, "dur", line_no);
      require_nonnegative(d, "rabi", line_no);
      seq.optical.push_back({d.values.at("start"), d.values.at("dur"), d.values.at("rabi"),
                             d.values.at("phase"), d.values.at("offset")});
    } else if (kind == "stark") {
      const auto d = parse_fields(tokens, {"start", "dur", "field"}, line_no);
      require_positive(d, "dur", line_no);
      require_nonnegative(d, "field", line_no);
      seq.stark.push_back({d.values.at("start"), d.values.at("dur"), d.values.at("field")});
    } else if (kind == "detect") {
      const auto d = parse_fields(tokens, {"start", "dur", "lo", "dt"}, line_no);
      require_positive(d, "dur", line_no);
      require_positive(d, "dt", line_no);
      seq.detections.push_back(
          {d.values.at("start"), d.values.at("dur"), d.values.at("lo"), d.values.at("dt")});
    } else {
      throw ParseError(line_no, tokens.front().column,
                       "unknown directive '" + std::string(kind) + "'");
    }

    try {
      seq.validate();
    } catch (const ParseError&) {
      throw;
    } catch (const ValidationError& e) {
      throw ParseError(line_no, tokens.front().column, e.what());
    }
  }
  return seq;
}

std::string emit_sequence(const PulseSequence& seq) {
  std::ostringstream os;
  for (const auto& p : seq.optical)
    os << "optical start=" << format_shortest(p.start) << " dur=" << format_shortest(p.duration)
       << " rabi=" << format_shortest(p.rabi) << " phase=" << format_shortest(p.phase)
       << " offset=" << format_shortest(p.offset) << '\n';
  for (const auto& s : seq.stark)
    os << "stark start=" << format_shortest(s.start) << " dur=" << format_shortest(s.duration)
       << " field=" << format_shortest(s.field) << '\n';
  for (const auto& d : seq.detections)
    os << "detect start=" << format_shortest(d.start) << " dur=" << format_shortest(d.duration)
       << " lo=" << format_shortest(d.lo) << " dt=" << format_shortest(d.dt) << '\n';
  return os.str();
}

// ---------------------------------------------------------------------------

namespace {

std::string_view trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

double config_number(std::string_view key, std::string_view value) {
  double v = 0.0;
  if (!parse_number(trim(value), v))
    throw ValidationError("invalid number for '" + std::string(key) + "': '" +
                          std::string(value) + "'");
  return v;
}

Vec3 config_vector(std::string_view key, std::string_view value) {
  Vec3 v;
  std::string s(value);
  for (char& c : s)
    if (c == ',') c = ' ';
  const auto tokens = split_tokens(s);
  if (tokens.size() != 3)
    throw ValidationError("'" + std::string(key) + "' needs three components");
  for (int i = 0; i < 3; ++i) v[i] = config_number(key, tokens[static_cast<std::size_t>(i)].text);
  return v;
}

std::uint64_t config_integer(std::string_view key, std::string_view value) {
  value = trim(value);
  std::uint64_t v = 0;
  const auto res = std::from_chars(value.data(), value.data() + value.size(), v);
  if (res.ec != std::errc{} || res.ptr != value.data() + value.size())
    throw ValidationError("invalid integer for '" + std::string(key) + "': '" +
                          std::string(value) + "'");
  return v;
}

}  // namespace

void apply_config_entry(EnsembleConfig& c, std::string_view key, std::string_view value) {
  key = trim(key);
  if (key == "n_ions" || key == "ions") {
    c.n_ions = static_cast<std::size_t>(config_integer(key, value));
  } else if (key == "seed") {
    c.seed = config_integer(key, value);
  } else if (key == "mode") {
    c.mode = parse_mode(trim(value));
  } else if (key == "detuning_window") {
    c.detuning_window = config_number(key, value);
  } else if (key == "k_mean" || key == "k") {
    c.k_mean = config_number(key, value);
  } else if (key == "k_spread") {
    c.k_spread = config_number(key, value);
  } else if (key == "field_hwhm") {
    c.field_hwhm = config_number(key, value);
  } else if (key == "field_scale_hwhm") {
    c.field_scale_hwhm = config_number(key, value);
  } else if (key == "t2") {
    const auto v = trim(value);
    c.t2 = (v == "inf" || v == "infinity") ? kInfinity : config_number(key, value);
  } else if (key == "field_direction") {
    c.field_direction = config_vector(key, value);
  } else if (key == "light_polarization") {
    c.light_polarization = config_vector(key, value);
  } else if (key == "orientation_strata") {
    c.orientation_strata = static_cast<int>(config_integer(key, value));
  } else {
    throw ValidationError("unknown config key '" + std::string(key) + "'");
  }
}

EnsembleConfig parse_config(std::string_view text, EnsembleConfig base) {
  std::size_t pos = 0;
  int line_no = 0;
  while (pos <= text.size()) {
    const std::size_t nl = text.find('\n', pos);
    std::string_view line =
        text.substr(pos, nl == std::string_view::npos ? std::string_view::npos : nl - pos);
    pos = nl == std::string_view::npos ? text.size() + 1 : nl + 1;
    ++line_no;
    if (const auto hash = line.find('#'); hash != std::string_view::npos)
      line = line.substr(0, hash);
    if (trim(line).empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string_view::npos)
      throw ParseError(line_no, 1, "expected 'key = value'");
    try {
      apply_config_entry(base, line.substr(0, eq), line.substr(eq + 1));
    } catch (const ParseError&) {
      throw;
    } catch (const ValidationError& e) {
      throw ParseError(line_no, 1, e.what());
    }
  }
  base.validate();
  return base;
}

std::string emit_config(const EnsembleConfig& c) {
  auto vec = [](const Vec3& v) {
    return format_shortest(v[0]) + ", " + format_shortest(v[1]) + ", " + format_shortest(v[2]);
  };
  std::ostringstream os;
  os << "n_ions = " << c.n_ions << '\n'
     << "seed = " << c.seed << '\n'
     << "mode = " << to_string(c.mode) << '\n'
     << "detuning_window = " << format_shortest(c.detuning_window) << '\n'
     << "k_mean = " << format_shortest(c.k_mean) << '\n'
     << "k_spread = " << format_shortest(c.k_spread) << '\n'
     << "field_hwhm = " << format_shortest(c.field_hwhm) << '\n'
     << "field_scale_hwhm = " << format_shortest(c.field_scale_hwhm) << '\n'
     << "t2 = " << (std::isfinite(c.t2) ? format_shortest(c.t2) : std::string("inf")) << '\n'
     << "field_direction = " << vec(c.field_direction) << '\n'
     << "light_polarization = " << vec(c.light_polarization) << '\n'
     << "orientation_strata = " << c.orientation_strata << '\n';
  return os.str();
}

// ---------------------------------------------------------------------------

namespace {

std::string hex64(std::uint64_t v) {
  std::array<char, 17> buf{};
  std::snprintf(buf.data(), buf.size(), "%016llx", static_cast<unsigned long long>(v));
  return buf.data();
}

nlohmann::json exact_number(double v) {
  if (std::isfinite(v)) return v;
  return format_exact(v);
}

}  // namespace

nlohmann::json metadata_json(const RunMetadata& meta) {
  const auto& c = meta.config;
  return {
      {"command", meta.command},
      {"seed", meta.seed},
      {"config_hash", hex64(meta.config_hash)},
      {"version", meta.version},
      {"config",
       {{"n_ions", c.n_ions},
        {"mode", std::string(to_string(c.mode))},
        {"detuning_window", c.detuning_window},
        {"k_mean", c.k_mean},
        {"k_spread", c.k_spread},
        {"field_hwhm", c.field_hwhm},
        {"field_scale_hwhm", c.field_scale_hwhm},
        {"t2", exact_number(c.t2)},
        {"field_direction", {c.field_direction[0], c.field_direction[1], c.field_direction[2]}},
        {"light_polarization",
         {c.light_polarization[0], c.light_polarization[1], c.light_polarization[2]}},
        {"orientation_strata", c.orientation_strata}}},
  };
}

std::string csv_header(const RunMetadata& meta) {
  std::ostringstream os;
  os << "# command=" << meta.command << '\n'
     << "# seed=" << meta.seed << '\n'
     << "# config_hash=" << hex64(meta.config_hash) << '\n'
     << "# version=" << meta.version << '\n';
  std::istringstream cfg(emit_config(meta.config));
  for (std::string line; std::getline(cfg, line);) os << "# config." << line << '\n';
  return os.str();
}

namespace {

template <typename Trace, typename Get>
std::string trace_csv_impl(const Trace& trace, const RunMetadata& meta, Get get) {
  std::ostringstream os;
  os << csv_header(meta) << "# units: t in us; dt=" << format_exact(trace.dt) << '\n'
     << "t,real,imag\n";
  for (Eigen::Index j = 0; j < trace.size(); ++j) {
    const Complex v = get(trace.samples[j]);
    os << format_exact(trace.time(j)) << ',' << format_exact(v.real()) << ','
       << format_exact(v.imag()) << '\n';
  }
  return os.str();
}

template <typename Trace, typename Get>
nlohmann::json trace_json_impl(const Trace& trace, const RunMetadata& meta, Get get) {
  nlohmann::json data = nlohmann::json::array();
  for (Eigen::Index j = 0; j < trace.size(); ++j) {
    const Complex v = get(trace.samples[j]);
    data.push_back({trace.time(j), v.real(), v.imag()});
  }
  return {{"metadata", metadata_json(meta)},
          {"kind", "trace"},
          {"units", {{"t", "us"}}},
          {"t0", trace.t0},
          {"dt", trace.dt},
          {"columns", {"t", "real", "imag"}},
          {"data", std::move(data)}};
}

}  // namespace

std::string trace_csv(const ComplexTrace& trace, const RunMetadata& meta) {
  return trace_csv_impl(trace, meta, [](const Complex& c) { return c; });
}

std::string trace_csv(const RealTrace& trace, const RunMetadata& meta) {
  return trace_csv_impl(trace, meta, [](double v) { return Complex{v, 0.0}; });
}

nlohmann::json trace_json(const ComplexTrace& trace, const RunMetadata& meta) {
  return trace_json_impl(trace, meta, [](const Complex& c) { return c; });
}

nlohmann::json trace_json(const RealTrace& trace, const RunMetadata& meta) {
  return trace_json_impl(trace, meta, [](double v) { return Complex{v, 0.0}; });
}

std::string spectrum_csv(const Spectrum& spec, const RunMetadata& meta) {
  std::ostringstream os;
  os << csv_header(meta) << "# units: f in MHz; df=" << format_exact(spec.df)
     << "; phase origin t=" << format_exact(spec.time_origin) << " us\n"
     << "f,real,imag\n";
  for (Eigen::Index k = 0; k < spec.size(); ++k)
    os << format_exact(spec.frequency(k)) << ',' << format_exact(spec.bins[k].real()) << ','
       << format_exact(spec.bins[k].imag()) << '\n';
  return os.str();
}

nlohmann::json spectrum_json(const Spectrum& spec, const RunMetadata& meta) {
  nlohmann::json data = nlohmann::json::array();
  for (Eigen::Index k = 0; k < spec.size(); ++k)
    data.push_back({spec.frequency(k), spec.bins[k].real(), spec.bins[k].imag()});
  return {{"metadata", metadata_json(meta)},
          {"kind", "spectrum"},
          {"units", {{"f", "MHz"}}},
          {"df", spec.df},
          {"time_origin", spec.time_origin},
          {"columns", {"f", "real", "imag"}},
          {"data", std::move(data)}};
}

std::string table_csv(const Table& table, const RunMetadata& meta) {
  std::ostringstream os;
  os << csv_header(meta);
  for (std::size_t i = 0; i < table.columns.size(); ++i)
    os << (i ? "," : "") << table.columns[i];
  os << '\n';
  for (const auto& row : table.rows) {
    for (std::size_t i = 0; i < row.size(); ++i) os << (i ? "," : "") << format_exact(row[i]);
    os << '\n';
  }
  return os.str();
}

nlohmann::json table_json(const Table& table, const RunMetadata& meta) {
  nlohmann::json rows = nlohmann::json::array();
  for (const auto& row : table.rows) {
    nlohmann::json r = nlohmann::json::array();
    for (double v : row) r.push_back(exact_number(v));
    rows.push_back(std::move(r));
  }
  return {{"metadata", metadata_json(meta)},
          {"kind", "table"},
          {"columns", table.columns},
          {"data", std::move(rows)}};
}

Table read_table_csv(std::string_view text) {
  Table table;
  std::istringstream in{std::string(text)};
  bool header = false;
  int line_no = 0;
  for (std::string line; std::getline(in, line);) {
    ++line_no;
    const auto body = trim(line);
    if (body.empty() || body.front() == '#') continue;
    std::vector<std::string_view> cells;
    std::size_t pos = 0;
    while (true) {
      const auto comma = body.find(',', pos);
      cells.push_back(trim(body.substr(pos, comma == std::string_view::npos ? std::string_view::npos
                                                                            : comma - pos)));
      if (comma == std::string_view::npos) break;
      pos = comma + 1;
    }
    if (!header) {
      for (auto c : cells) table.columns.emplace_back(c);
      header = true;
      continue;
    }
    if (cells.size() != table.columns.size())
      throw ParseError(line_no, 1, "row has " + std::to_string(cells.size()) + " cells, expected " +
                                       std::to_string(table.columns.size()));
    std::vector<double> row;
    for (auto c : cells) {
      double v = 0.0;
      if (c == "inf") v = kInfinity;
      else if (!parse_number(c, v)) throw ParseError(line_no, 1, "invalid number '" + std::string(c) + "'");
      row.push_back(v);
    }
    table.rows.push_back(std::move(row));
  }
  if (!header) throw ValidationError("CSV table has no header row");
  return table;
}

nlohmann::json fit_json(const FitResult& fit) {
  nlohmann::json params = nlohmann::json::object();
  nlohmann::json errs = nlohmann::json::object();
  for (std::size_t i = 0; i < fit.names.size(); ++i) {
    params[fit.names[i]] = exact_number(fit.params[static_cast<Eigen::Index>(i)]);
    if (fit.stderrs.size() > 0) errs[fit.names[i]] = fit.stderrs[static_cast<Eigen::Index>(i)];
  }
  return {{"params", params},
          {"stderr", errs},
          {"residual_rms", fit.residual_rms},
          {"iterations", fit.iterations},
          {"converged", fit.converged}};
}

std::string fit_text(const FitResult& fit) {
  std::ostringstream os;
  os << (fit.converged ? "converged" : "NOT converged") << " after " << fit.iterations
     << " iterations, residual rms " << format_exact(fit.residual_rms) << '\n';
  for (std::size_t i = 0; i < fit.names.size(); ++i) {
    os << "  " << fit.names[i] << " = " << format_exact(fit.params[static_cast<Eigen::Index>(i)]);
    if (fit.stderrs.size() > 0)
      os << " +/- " << format_exact(fit.stderrs[static_cast<Eigen::Index>(i)]);
    os << '\n';
  }
  return os.str();
}

}  // namespace semm
