#ifndef SEMM_IO_HPP
#define SEMM_IO_HPP

// Sequence files are line oriented:
//
//   # comment
//   optical start=<us> dur=<us> rabi=<MHz> phase=<rad> offset=<MHz>
//   stark   start=<us> dur=<us> field=<V/cm>
//   detect  start=<us> dur=<us> lo=<MHz> dt=<us>
//
// Every key is required exactly once. The emitter writes the shortest decimal
// form that reads back to the same double, so emit(parse(emit(s))) == emit(s).

#include "semm/analysis.hpp"
#include "semm/ensemble.hpp"
#include "semm/sequence.hpp"
#include "semm/signal.hpp"

#include <json.hpp>

#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

namespace semm {

PulseSequence parse_sequence(std::string_view text);
std::string emit_sequence(const PulseSequence& sequence);

/// Shortest round-trip decimal form.
std::string format_shortest(double value);
/// 17 significant digits (CSV and JSON payloads).
std::string format_exact(double value);

/// Applies one `key = value` entry; throws ValidationError on unknown keys.
void apply_config_entry(EnsembleConfig& config, std::string_view key, std::string_view value);
/// Plain-text `key = value` configuration; later keys override `base`.
EnsembleConfig parse_config(std::string_view text, EnsembleConfig base = {});
std::string emit_config(const EnsembleConfig& config);

struct RunMetadata {
  std::string command;
  std::uint64_t seed = 0;
  std::uint64_t config_hash = 0;
  std::string version = SEMM_VERSION;
  EnsembleConfig config;
};

nlohmann::json metadata_json(const RunMetadata& meta);

/// `# key=value` header lines followed by a CSV body.
std::string csv_header(const RunMetadata& meta);
std::string trace_csv(const ComplexTrace& trace, const RunMetadata& meta);
std::string trace_csv(const RealTrace& trace, const RunMetadata& meta);
std::string spectrum_csv(const Spectrum& spec, const RunMetadata& meta);
nlohmann::json trace_json(const ComplexTrace& trace, const RunMetadata& meta);
nlohmann::json trace_json(const RealTrace& trace, const RunMetadata& meta);
nlohmann::json spectrum_json(const Spectrum& spec, const RunMetadata& meta);

/// Generic numeric table with a fixed column order.
struct Table {
  std::vector<std::string> columns;
  std::vector<std::vector<double>> rows;
};

std::string table_csv(const Table& table, const RunMetadata& meta);
nlohmann::json table_json(const Table& table, const RunMetadata& meta);
/// Reads a CSV table (header row required, `#` lines skipped).
Table read_table_csv(std::string_view text);

nlohmann::json fit_json(const FitResult& fit);
std::string fit_text(const FitResult& fit);

}  // namespace semm

#endif  // SEMM_IO_HPP
