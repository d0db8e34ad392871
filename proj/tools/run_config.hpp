#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include <json.hpp>

#include "superlase/experiments.hpp"

namespace superlase::cli {

using Json = nlohmann::ordered_json;

struct SweepSpec {
  std::vector<AxisSpec> axes;
  std::size_t max_points = 10000;
};

struct CriticalPumpSpec {
  double r_min = 0.001;
  double r_max = 0.2;
  double tolerance = 0.001;
  int prescan_points = 8;
};

struct CrossCorrSpec {
  std::vector<double> pumps;
};

struct OutputSpec {
  std::string dir = ".";
  bool normalize = false;  // scale written spectra to max S = 1
};

/// Everything a subcommand needs, after defaults, file and overrides.
struct RunConfig {
  ModelConfig model;
  SweepSpec sweep;
  CriticalPumpSpec critical_pump;
  CrossCorrSpec crosscorr;
  OutputSpec output;

  void validate() const;
};

/// Config tree from an INI (sections + key = value) or JSON file; the format
/// is picked from the extension, and JSON is also sniffed from a leading '{'.
Json load_config_tree(const std::string& path);

/// Applies "section.key=value" to the tree. Values stay strings until
/// conversion, exactly as if they had been written in an INI file.
void apply_override(Json& tree, const std::string& assignment);

/// Strict conversion: unknown sections or keys are rejected.
RunConfig from_tree(const Json& tree);

/// Effective config with every field spelled out. from_tree(to_tree(c)) == c.
Json to_tree(const RunConfig& c);

/// "1,2,3", "linspace(a,b,n)" or "logspace(a,b,n)" (endpoints, not exponents).
std::vector<double> parse_value_list(const std::string& text);

/// "N: 100,1000; R: logspace(0.001,0.1,5)".
std::vector<AxisSpec> parse_axes(const std::string& text);

/// "detuning:coupling:population; ...".
std::vector<Cluster> parse_cluster_list(const std::string& text);

/// 64-bit FNV-1a.
std::uint64_t fnv1a(const std::string& bytes);

}  // namespace superlase::cli
