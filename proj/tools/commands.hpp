#pragma once

#include <iosfwd>
#include <string>
#include <vector>

#include "run_config.hpp"

namespace superlase::cli {

inline constexpr const char* kSoftwareVersion = "0.1.0";
inline constexpr const char* kOutputDirEnv = "SUPERLASE_OUTPUT_DIR";

enum class Command { steady, spectrum, sweep, critical_pump, crosscorr };

const char* to_string(Command c);

/// One unit of work inside `reproduce`: a subcommand with its config. Outputs
/// land in a sub-directory named after the job.
struct Job {
  std::string name;
  Command command;
  RunConfig config;
};

/// Figure ids accepted by `reproduce`.
std::vector<std::string> preset_ids();

/// Built-in parameter sets for one figure.
std::vector<Job> preset_jobs(const std::string& id);

/// Full command line (without the program name). Writes results under the
/// output directory; returns the process exit status and reports failures as
/// a JSON object on `err`.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace superlase::cli
