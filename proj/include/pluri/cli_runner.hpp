#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

namespace pluri {

// Values come from a flat key = value file with [section] headers and from flags.
// Lookup order: flag, "<subcommand>.<key>" from the file, "<key>" from the file, default.
struct ExperimentConfig {
    std::string subcommand;
    std::map<std::string, std::string> file;
    std::map<std::string, std::string> flags;

    bool has(const std::string& key) const;
    std::string text(const std::string& key, const std::string& fallback) const;
    double number(const std::string& key, double fallback) const;
    int integer(const std::string& key, int fallback) const;
    std::vector<double> list(const std::string& key, const std::vector<double>& fallback) const;
    std::uint64_t seed() const;
    std::string output_dir() const;

    // Every key visible to this subcommand after applying the lookup order.
    std::map<std::string, std::string> resolved() const;
    // FNV-1a of the resolved configuration, 16 hex digits.
    std::string hash() const;
};

const std::vector<std::string>& subcommands();

// Parses config text into cfg.file; throws a Usage error on malformed lines.
void parse_config_text(const std::string& text, ExperimentConfig& cfg);
// "--key value" and "--key=value" pairs into cfg.flags; throws a Usage error otherwise.
void parse_flag_pairs(const std::vector<std::string>& args, ExperimentConfig& cfg);

struct RunResult {
    int exit_code = 0;  // 0 pass, 1 check failure, 2 usage
    std::string report;  // JSON
    std::string table;   // CSV
    std::string plot;    // gnuplot script, empty when there is nothing to plot
    std::vector<std::string> failed;
};

// Dispatches to the owning module. Never writes files.
RunResult run(const ExperimentConfig& cfg);
// run() plus report.json, table.csv and plot.gp under cfg.output_dir(); `all` writes one directory per subcommand.
RunResult run_and_write(const ExperimentConfig& cfg);

// Rounds to 12 significant digits, the printed precision of every report.
double round12(double x);

}  // namespace pluri
