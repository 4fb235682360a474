#ifndef QUADTUNE_COMMANDS_HPP
#define QUADTUNE_COMMANDS_HPP

#include <cstdint>
#include <string>
#include <vector>

namespace quadtune {

// Exit codes shared by every subcommand.
constexpr int exit_ok = 0;
constexpr int exit_config_error = 2;
constexpr int exit_numeric_failure = 3;
constexpr int exit_schema_mismatch = 4;

struct CliOptions {
  std::string config_path;
  std::string out_dir = ".";
  std::uint64_t seed = 0;              // recorded in the manifest
  std::string format;                  // "", "csv" or "json"; "" = config choice
  std::string model;                   // fit: gn | fq-angular | scaling
  int order = 1;                       // fit fq-angular: 1 = outer+, 2 = inner
  std::vector<std::string> data_files; // fit inputs
};

// QUADTUNE_THREADS override, else hardware concurrency; always >= 1.
int thread_count();

// Each command returns one of the exit codes above and reports problems on
// standard error. All algorithms are deterministic: identical config, seed
// and data produce byte-identical output files.
int cmd_spectrum(const CliOptions& opt);
int cmd_sweep(const CliOptions& opt);
int cmd_decay(const CliOptions& opt);
int cmd_fit(const CliOptions& opt);
int cmd_forecast(const CliOptions& opt);

// name in {spectrum, sweep, decay, fit, forecast}
int run_command(const std::string& name, const CliOptions& opt);

}  // namespace quadtune

#endif
