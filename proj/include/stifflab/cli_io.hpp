#pragma once

// Configuration parsing, CSV / manifest / SVG output and the four commands
// behind the stifflab executable.
//
// Configs are JSON documents with nested tables:
//
//   { "seed": 7,
//     "scenario": { "box_half_width": 5,
//                   "speed": {"kind": "lebesgue"},
//                   "resistance": {"kind": "conductivity",
//                                  "conductivity": {"kind": "power_cusp", "beta": 0.5}},
//                   "grid": {"h": 0.01, "barrier_cells": 16},
//                   "phase": {"kind": "snapping", "kappa": 2} },
//     "solve": {...} | "heat": {...} | "sweep": {...} | "mc": {...} | "check": {...} }
//
// Validation failures raise ValidationError naming the dotted key.

#include "stifflab/convergence_lab.hpp"
#include "stifflab/scenario.hpp"
#include "stifflab/snapping_mc.hpp"

#include <json.hpp>

#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

namespace stifflab {

using Json = nlohmann::json;

/// Reads a JSON config; parse failures become ValidationError("<file>", ...).
Json load_config(const std::filesystem::path& path);

/// Parsers resolve relative paths (tabulated CSVs) against `base_dir`.
Scenario parse_scenario(const Json& j, const std::filesystem::path& base_dir = {}, const std::string& key = "scenario");
MeasureSpec parse_measure(const Json& j, const std::string& key, const std::filesystem::path& base_dir = {});
Conductivity parse_conductivity(const Json& j, const std::string& key);
BarrierFamily parse_barrier_family(const Json& j, const std::string& key);
Probe parse_probe(const Json& j, const std::string& key);
SweepSpec parse_sweep(const Json& config, const std::filesystem::path& base_dir = {});

/// Two-column (x, cdf) CSV with a header row.
MeasureSpec load_tabulated_csv(const std::filesystem::path& path, const std::string& key);

/// 64-bit FNV-1a, rendered as 16 hex digits.
std::string fnv1a_hex(const std::string& bytes);

struct CsvTable
{
    std::vector<std::string> header;
    std::vector<std::vector<std::string>> rows;
};
CsvTable read_csv(const std::filesystem::path& path);

/// Writes rows with %.17g numbers; append mode writes the header only for
/// a new or empty file.
class CsvWriter
{
  public:
    CsvWriter(const std::filesystem::path& path, const std::vector<std::string>& header, bool append = false);
    ~CsvWriter();
    CsvWriter(const CsvWriter&) = delete;
    CsvWriter& operator=(const CsvWriter&) = delete;

    CsvWriter& field(double v);
    CsvWriter& field(long long v);
    CsvWriter& field(std::size_t v) { return field(static_cast<long long>(v)); }
    CsvWriter& field(int v) { return field(static_cast<long long>(v)); }
    CsvWriter& field(const std::string& s);
    void end_row();

  private:
    std::FILE* file_ = nullptr;
    bool first_ = true;
};

struct RunManifest
{
    std::string run_id;
    std::string tool_version;
    std::string config_hash;
    std::vector<std::string> inputs;
    std::vector<std::string> outputs;
    double wall_clock_seconds = 0.0;
    std::vector<std::uint64_t> seeds;
    std::string command;

    Json to_json() const;
    void write(const std::filesystem::path& path) const;
};

struct SvgSeries
{
    std::string label;
    std::vector<double> x;
    std::vector<double> y;
};

/// Minimal line plot; log axes drop nonpositive points.
void write_svg_plot(const std::filesystem::path& path,
                    const std::string& title,
                    const std::vector<SvgSeries>& series,
                    bool log_x,
                    bool log_y,
                    const std::string& x_label,
                    const std::string& y_label);

struct CliFlags
{
    std::filesystem::path config;
    std::filesystem::path out_dir = "out";
    std::optional<std::uint64_t> seed;
    int threads = 0;
    bool svg = false;
};

/// Commands return the process exit code on success (0, or 1 when a
/// verdict fails); errors propagate as exceptions.
int cmd_solve(const CliFlags& flags, const std::string& subcommand, std::ostream& out);
int cmd_sweep(const CliFlags& flags, std::ostream& out);
int cmd_mc(const CliFlags& flags, std::ostream& out);
int cmd_check(const CliFlags& flags, std::ostream& out);

/// Exit code for an exception escaping a command: 2 for input / validation
/// problems, 3 for numerical and invariant failures.
int exit_code_for(const std::exception& e);

} // namespace stifflab
