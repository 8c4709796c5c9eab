#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "mou/timeseries.hpp"

namespace mou::cli {

struct RunConfig {
    std::string command;                  // simulate, estimate, sweep-nodes,
                                          // sweep-samples, diagnose, classify, rerun
    std::filesystem::path config_path;    // manifest path for rerun
    std::filesystem::path output_dir;
    std::uint64_t seed = 12345;
    int workers = 1;
    std::optional<double> dt_flag;        // estimate: overrides the sample interval
};

/// Parses argv (without the program name).  Returns nullopt when help was
/// requested and printed.  Throws ConfigError on usage errors.
std::optional<RunConfig> parse_args(const std::vector<std::string>& args);

/// Executes a parsed command.  Returns the process exit code:
/// 0 success, 2 configuration error, 3 numerical failure, 4 I/O failure.
int run(const RunConfig& cfg);

/// Flat key=value config file ('#' comments, blank lines ignored).
std::map<std::string, std::string> load_config_file(const std::filesystem::path& path);

/// Loads a series CSV; the sample interval comes from the dt flag, the config,
/// or a manifest.json sidecar next to the file, in that order.
TimeSeries load_timeseries(const std::filesystem::path& csv_path,
                           std::optional<double> dt_flag,
                           std::optional<double> dt_config);

/// argv-style entry point used by main().
int main_entry(int argc, const char* const* argv);

}  // namespace mou::cli
