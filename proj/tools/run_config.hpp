#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "robabs/eval.hpp"
#include "robabs/radius.hpp"

namespace robabs::cli {

/// Bad values or structure in a run configuration (exit code 2).
class ConfigError : public Error {
 public:
  using Error::Error;
};

/// Structurally valid request that cannot be run as asked (exit code 1).
class UsageError : public Error {
 public:
  using Error::Error;
};

struct RunConfig {
  std::string dataset = "slc";
  /// Structural weight overrides keyed "From->To".
  WeightOverrides weights;
  std::filesystem::path dataset_dir;
  std::filesystem::path output_dir = "runs";
  int n_samples = 10000;
  std::uint64_t root_seed = 0;
  Setting setting = Setting::kGaussian;
  /// Methods after expanding every DiRoCA entry over the radius list.
  std::vector<MethodSpec> methods;
  ConcentrationConfig concentration;
  GridSpec grid;
  std::optional<FMisspecSpec> f_misspec;
  std::optional<OmegaMisspecSpec> omega_misspec;
};

/// Parses and validates a configuration. Relative paths are resolved against
/// the directory of the config file.
RunConfig load_config(const std::filesystem::path& path);
RunConfig parse_config(const std::string& text, const std::filesystem::path& base_dir);

/// Concentration config with sample counts filled in for one training fold.
ConcentrationConfig fold_concentration(const RunConfig& cfg);

}  // namespace robabs::cli
