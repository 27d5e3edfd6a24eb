#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "robabs/datasets.hpp"
#include "robabs/solvers.hpp"

namespace robabs::io {

namespace fs = std::filesystem;

/// A required input file is absent or unreadable.
class MissingArtifact : public Error {
 public:
  using Error::Error;
};

std::string read_text(const fs::path& path);
/// Creates parent directories as needed.
void write_text(const fs::path& path, const std::string& text);

/// Shortest decimal form that round-trips exactly.
std::string format_double(double v);

/// Numeric CSV with a header row of column names.
std::string matrix_to_csv(const Mat& m, const std::vector<std::string>& columns);
Mat matrix_from_csv(const std::string& text, std::vector<std::string>* columns = nullptr);

/// Model file: {"variables": [...], "edges": [{"from", "to", "weight"}],
/// "noise": {name: {"mean", "std"} | {"samples_path"}}}. samples_path names a
/// one-column CSV relative to the model file.
struct ScmFile {
  LinearScm scm;
  std::optional<GaussianEnv> gaussian;
  std::optional<EmpiricalEnv> empirical;
};

std::string scm_to_json(const LinearScm& scm, const GaussianEnv& env);
ScmFile scm_from_json(const std::string& text, const fs::path& base_dir = {});

/// Intervention list: [{"targets": {name: value, ...}}], {} targets is null.
std::string interventions_to_json(const std::vector<Intervention>& list, const LinearScm& scm);
std::vector<Intervention> interventions_from_json(const std::string& text, const LinearScm& scm);

/// omega file: [{"low": i, "high": j}], one entry per low-level intervention.
std::string omega_to_json(const InterventionMap& omega);
std::vector<int> omega_image_from_json(const std::string& text, std::size_t n_low);

struct MapMetadata {
  std::string method;
  double eps_low = 0.0;
  double eps_high = 0.0;
  std::uint64_t seed = 0;
  std::string dataset_hash;
  int fold = 0;
};

/// {"shape": [h, l], "entries": [row-major], "metadata": {...}}.
std::string map_to_json(const AbstractionMap& map, const MapMetadata& meta);
AbstractionMap map_from_json(const std::string& text, MapMetadata* meta = nullptr);

/// A dataset directory as written by write_dataset.
struct DatasetDir {
  DatasetBundle bundle;
  DatasetSamples samples;
  std::string hash;
};

/// Writes model, intervention, omega and per-intervention sample files plus a
/// manifest. Returns the written paths.
std::vector<fs::path> write_dataset(const fs::path& dir, const DatasetBundle& bundle,
                                    const DatasetSamples& samples, std::uint64_t seed);
/// Throws MissingArtifact when a file is absent or the contents no longer match
/// the manifest hash.
DatasetDir read_dataset(const fs::path& dir);

/// FNV-1a over a byte string, as 16 hex digits.
std::string hash_hex(const std::string& bytes);

}  // namespace robabs::io
