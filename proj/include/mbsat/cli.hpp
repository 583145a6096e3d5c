#pragma once

#include <filesystem>
#include <iosfwd>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include <json.hpp>

#include "mbsat/montecarlo.hpp"

namespace mbsat::cli {

/// A base configuration plus the sweep axes declared next to it.
/// An axis left empty takes the single value of the base configuration.
struct Experiment {
    SimConfig base;
    SweepAxes axes;

    SweepAxes effective_axes() const;
};

/// Reads `key = value` lines (`[section]` headers prefix keys, `#` comments), then applies
/// `key=value` overrides. An empty path means defaults only. Relative paths inside a file are
/// resolved against the file's directory.
Experiment parse_config(const std::filesystem::path& path, const std::vector<std::string>& overrides = {});
Experiment parse_config(std::istream& in, const std::string& source, const std::filesystem::path& base_dir,
                        const std::vector<std::string>& overrides = {});

/// Applies one `key=value` assignment.
void apply_setting(Experiment& e, std::string_view assignment, const std::filesystem::path& base_dir = {});

std::vector<std::string> config_keys();

/// Every key with its effective value, in registry order.
std::vector<std::pair<std::string, std::string>> config_echo(const Experiment& e);

struct SummaryRow {
    std::string algorithm;
    std::string metric;
    std::string precoder;
    int K = 0;
    double rho = 0.0;
    double psat = 0.0;
    double avg_rate = 0.0;
    double outage_frac = 0.0;

    friend bool operator==(const SummaryRow&, const SummaryRow&) = default;
};

SummaryRow summary_row(const GridPoint& point, const RateReport& report);
void write_summary_csv(std::ostream& out, const std::vector<SummaryRow>& rows);
std::vector<SummaryRow> read_summary_csv(std::istream& in, const std::string& source);

nlohmann::json point_json(const GridPoint& point, const RateReport& report, bool with_detail);
SummaryRow summary_row(const nlohmann::json& point);

/// Replaces `path` with `content`; IoError on failure.
void write_file(const std::filesystem::path& path, const std::string& content);
std::string read_file(const std::filesystem::path& path);
/// Creates `dir` and checks that it is writable; IoError otherwise.
void ensure_output_dir(const std::filesystem::path& dir);

struct Invocation {
    std::string command; ///< run | sweep | validate | emit-plots
    std::filesystem::path config;
    std::filesystem::path out = "out";
    std::filesystem::path plots; ///< emit-plots target, default <out>/plots
    std::vector<std::string> overrides;
    int jobs = 0; ///< 0: hardware concurrency
    bool seed_set = false;
    std::uint64_t seed = 0;
    bool detail = false;
    bool resume = false;
    bool check_grid = false;
    int verbosity = 0;
};

Experiment load_experiment(const Invocation& inv);

int cmd_run(const Invocation& inv);
int cmd_sweep(const Invocation& inv);
int cmd_validate(const Invocation& inv);
int cmd_emit_plots(const Invocation& inv);

/// Parses argv and dispatches; returns the process exit code
/// (0 ok, 2 configuration, 3 runtime, 4 I/O).
int run_main(int argc, char** argv);

} // namespace mbsat::cli
