#include "robabs/io.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <iomanip>
#include <sstream>

#include <json.hpp>

#include "robabs/random.hpp"

namespace robabs::io {

using nlohmann::json;
using nlohmann::ordered_json;

namespace {

json parse_json(const std::string& text, const std::string& what) {
  try {
    return json::parse(text);
  } catch (const json::exception& e) {
    throw InvalidArgument(what + ": " + e.what());
  }
}

template <typename T>
T get_field(const json& j, const char* key, const std::string& what) {
  require(j.is_object() && j.contains(key), what + ": missing field '" + key + "'");
  try {
    return j.at(key).get<T>();
  } catch (const json::exception&) {
    throw InvalidArgument(what + ": field '" + key + "' has the wrong type");
  }
}

std::string index_name(const char* level, std::size_t i) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%s_%02zu.csv", level, i);
  return buf;
}

}  // namespace

std::string read_text(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw MissingArtifact("cannot read " + path.string());
  std::ostringstream os;
  os << in.rdbuf();
  return os.str();
}

void write_text(const fs::path& path, const std::string& text) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write " + path.string());
  out << text;
  if (!out) throw Error("write failed for " + path.string());
}

std::string format_double(double v) {
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, res.ptr);
}

std::string matrix_to_csv(const Mat& m, const std::vector<std::string>& columns) {
  require(static_cast<Eigen::Index>(columns.size()) == m.cols(), "matrix_to_csv: column names");
  std::string out;
  for (std::size_t c = 0; c < columns.size(); ++c) {
    if (c) out += ',';
    out += columns[c];
  }
  out += '\n';
  for (Eigen::Index r = 0; r < m.rows(); ++r) {
    for (Eigen::Index c = 0; c < m.cols(); ++c) {
      if (c) out += ',';
      out += format_double(m(r, c));
    }
    out += '\n';
  }
  return out;
}

Mat matrix_from_csv(const std::string& text, std::vector<std::string>* columns) {
  std::istringstream is(text);
  std::string line;
  require(static_cast<bool>(std::getline(is, line)), "CSV: missing header");
  std::vector<std::string> names;
  {
    std::stringstream ls(line);
    std::string cell;
    while (std::getline(ls, cell, ',')) names.push_back(cell);
  }
  std::vector<double> values;
  std::size_t rows = 0;
  while (std::getline(is, line)) {
    if (line.empty()) continue;
    std::size_t count = 0;
    const char* p = line.data();
    const char* end = p + line.size();
    while (p <= end) {
      const char* comma = std::find(p, end, ',');
      double v = 0.0;
      const auto res = std::from_chars(p, comma, v);
      require(res.ec == std::errc() && res.ptr == comma, "CSV: bad number in row " +
                                                             std::to_string(rows + 1));
      values.push_back(v);
      ++count;
      p = comma + 1;
    }
    require(count == names.size(), "CSV: ragged row " + std::to_string(rows + 1));
    ++rows;
  }
  Mat m(static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(names.size()));
  for (std::size_t r = 0; r < rows; ++r) {
    for (std::size_t c = 0; c < names.size(); ++c) {
      m(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)) = values[r * names.size() + c];
    }
  }
  if (columns) *columns = std::move(names);
  return m;
}

std::string scm_to_json(const LinearScm& scm, const GaussianEnv& env) {
  require(env.dim() == scm.dim(), "scm_to_json: environment dimension mismatch");
  require(env.cov().isApprox(Mat(env.cov().diagonal().asDiagonal()), 0.0),
          "scm_to_json: only independent noise can be written");
  ordered_json j;
  j["variables"] = scm.variables();
  j["edges"] = json::array();
  for (const Edge& e : scm.edges()) {
    j["edges"].push_back({{"from", scm.variables()[e.from]},
                          {"to", scm.variables()[e.to]},
                          {"weight", e.weight}});
  }
  ordered_json noise = ordered_json::object();
  for (int i = 0; i < scm.dim(); ++i) {
    noise[scm.variables()[i]] = {{"mean", env.mean()(i)}, {"std", std::sqrt(env.cov()(i, i))}};
  }
  j["noise"] = noise;
  return j.dump(2) + "\n";
}

ScmFile scm_from_json(const std::string& text, const fs::path& base_dir) {
  const std::string what = "model file";
  const json j = parse_json(text, what);
  const auto vars = get_field<std::vector<std::string>>(j, "variables", what);
  const LinearScm names_only(vars, Mat::Zero(static_cast<Eigen::Index>(vars.size()),
                                             static_cast<Eigen::Index>(vars.size())));
  std::vector<Edge> edges;
  for (const auto& e : get_field<json>(j, "edges", what)) {
    edges.push_back({names_only.index_of(get_field<std::string>(e, "from", what)),
                     names_only.index_of(get_field<std::string>(e, "to", what)),
                     get_field<double>(e, "weight", what)});
  }
  ScmFile out{LinearScm(vars, edges), std::nullopt, std::nullopt};
  if (!j.contains("noise")) return out;

  const json& noise = j.at("noise");
  const int d = out.scm.dim();
  Vec mean(d);
  Vec sd(d);
  std::vector<Vec> columns(d);
  int moment_vars = 0;
  for (int i = 0; i < d; ++i) {
    const json& spec = noise.at(vars[i]);
    if (spec.contains("samples_path")) {
      const fs::path p = base_dir / get_field<std::string>(spec, "samples_path", what);
      columns[i] = matrix_from_csv(read_text(p)).col(0);
    } else {
      mean(i) = get_field<double>(spec, "mean", what);
      sd(i) = get_field<double>(spec, "std", what);
      require(sd(i) >= 0.0, what + ": negative noise std for " + vars[i]);
      ++moment_vars;
    }
  }
  if (moment_vars == d) {
    out.gaussian = GaussianEnv::independent(mean, sd);
  } else {
    require(moment_vars == 0, what + ": noise must be all moments or all samples");
    Mat samples(columns[0].size(), d);
    for (int i = 0; i < d; ++i) {
      require(columns[i].size() == samples.rows(), what + ": sample columns differ in length");
      samples.col(i) = columns[i];
    }
    out.empirical = EmpiricalEnv(std::move(samples));
  }
  return out;
}

std::string interventions_to_json(const std::vector<Intervention>& list, const LinearScm& scm) {
  ordered_json j = ordered_json::array();
  for (const auto& iv : list) {
    ordered_json targets = ordered_json::object();
    for (std::size_t k = 0; k < iv.targets().size(); ++k) {
      targets[scm.variables().at(iv.targets()[k])] = iv.values()(static_cast<Eigen::Index>(k));
    }
    j.push_back({{"targets", targets}});
  }
  return j.dump(2) + "\n";
}

std::vector<Intervention> interventions_from_json(const std::string& text, const LinearScm& scm) {
  const std::string what = "intervention file";
  const ordered_json j = ordered_json::parse(text, nullptr, false);
  require(!j.is_discarded() && j.is_array(), what + ": expected a JSON array");
  std::vector<Intervention> out;
  for (const auto& entry : j) {
    require(entry.is_object() && entry.contains("targets") && entry.at("targets").is_object(),
            what + ": each entry needs a 'targets' object");
    std::vector<int> targets;
    std::vector<double> values;
    for (const auto& [name, value] : entry.at("targets").items()) {
      require(value.is_number(), what + ": non-numeric value for " + name);
      targets.push_back(scm.index_of(name));
      values.push_back(value.get<double>());
    }
    out.emplace_back(targets, Eigen::Map<const Vec>(values.data(),
                                                    static_cast<Eigen::Index>(values.size())));
  }
  return out;
}

std::string omega_to_json(const InterventionMap& omega) {
  ordered_json j = ordered_json::array();
  for (std::size_t i = 0; i < omega.size(); ++i) {
    j.push_back({{"low", i}, {"high", omega.image()[i]}});
  }
  return j.dump(2) + "\n";
}

std::vector<int> omega_image_from_json(const std::string& text, std::size_t n_low) {
  const std::string what = "omega file";
  const json j = parse_json(text, what);
  require(j.is_array(), what + ": expected a JSON array");
  std::vector<int> image(n_low, -1);
  for (const auto& e : j) {
    const int lo = get_field<int>(e, "low", what);
    require(lo >= 0 && static_cast<std::size_t>(lo) < n_low, what + ": low index out of range");
    require(image[lo] < 0, what + ": low index listed twice");
    image[lo] = get_field<int>(e, "high", what);
  }
  for (int v : image) require(v >= 0, what + ": every low-level intervention needs an image");
  return image;
}

std::string map_to_json(const AbstractionMap& map, const MapMetadata& meta) {
  ordered_json j;
  j["shape"] = {map.high_dim(), map.low_dim()};
  ordered_json entries = ordered_json::array();
  for (Eigen::Index r = 0; r < map.high_dim(); ++r) {
    for (Eigen::Index c = 0; c < map.low_dim(); ++c) entries.push_back(map.t()(r, c));
  }
  j["entries"] = entries;
  j["metadata"] = {{"method", meta.method},   {"eps_low", meta.eps_low},
                   {"eps_high", meta.eps_high}, {"seed", meta.seed},
                   {"dataset_hash", meta.dataset_hash}, {"fold", meta.fold}};
  return j.dump(2) + "\n";
}

AbstractionMap map_from_json(const std::string& text, MapMetadata* meta) {
  const std::string what = "map file";
  const json j = parse_json(text, what);
  const auto shape = get_field<std::vector<Eigen::Index>>(j, "shape", what);
  require(shape.size() == 2, what + ": shape must have two entries");
  const auto entries = get_field<std::vector<double>>(j, "entries", what);
  require(static_cast<Eigen::Index>(entries.size()) == shape[0] * shape[1],
          what + ": entry count does not match shape");
  Mat t(shape[0], shape[1]);
  for (Eigen::Index r = 0; r < shape[0]; ++r) {
    for (Eigen::Index c = 0; c < shape[1]; ++c) t(r, c) = entries[r * shape[1] + c];
  }
  if (meta) {
    const json& m = get_field<json>(j, "metadata", what);
    meta->method = get_field<std::string>(m, "method", what);
    meta->eps_low = get_field<double>(m, "eps_low", what);
    meta->eps_high = get_field<double>(m, "eps_high", what);
    meta->seed = get_field<std::uint64_t>(m, "seed", what);
    meta->dataset_hash = get_field<std::string>(m, "dataset_hash", what);
    meta->fold = m.value("fold", 0);
  }
  return AbstractionMap(std::move(t));
}

std::string hash_hex(const std::string& bytes) {
  std::ostringstream os;
  os << std::hex << std::setw(16) << std::setfill('0') << hash_string(bytes);
  return os.str();
}

std::vector<fs::path> write_dataset(const fs::path& dir, const DatasetBundle& bundle,
                                    const DatasetSamples& samples, std::uint64_t seed) {
  std::vector<std::pair<std::string, std::string>> files = {
      {"low_scm.json", scm_to_json(bundle.low_scm, bundle.default_env.low)},
      {"high_scm.json", scm_to_json(bundle.high_scm, bundle.default_env.high)},
      {"low_interventions.json", interventions_to_json(bundle.omega.low(), bundle.low_scm)},
      {"high_interventions.json", interventions_to_json(bundle.omega.high(), bundle.high_scm)},
      {"omega.json", omega_to_json(bundle.omega)}};
  for (std::size_t i = 0; i < samples.low.size(); ++i) {
    files.push_back({"samples/" + index_name("low", i),
                     matrix_to_csv(samples.low[i], bundle.low_scm.variables())});
  }
  for (std::size_t i = 0; i < samples.high.size(); ++i) {
    files.push_back({"samples/" + index_name("high", i),
                     matrix_to_csv(samples.high[i], bundle.high_scm.variables())});
  }
  std::string all;
  ordered_json listed = ordered_json::array();
  std::vector<fs::path> written;
  for (const auto& [name, text] : files) {
    write_text(dir / name, text);
    written.push_back(dir / name);
    listed.push_back(name);
    all += text;
  }
  ordered_json manifest;
  manifest["name"] = bundle.name;
  manifest["seed"] = seed;
  manifest["n"] = samples.low.empty() ? 0 : samples.low.front().rows();
  manifest["files"] = listed;
  manifest["hash"] = hash_hex(all);
  write_text(dir / "manifest.json", manifest.dump(2) + "\n");
  written.push_back(dir / "manifest.json");
  return written;
}

DatasetDir read_dataset(const fs::path& dir) {
  const std::string what = "dataset manifest";
  const json manifest = parse_json(read_text(dir / "manifest.json"), what);
  std::string all;
  auto load = [&](const std::string& name) {
    std::string text = read_text(dir / name);
    all += text;
    return text;
  };
  DatasetDir out;
  out.bundle.name = get_field<std::string>(manifest, "name", what);
  const ScmFile low = scm_from_json(load("low_scm.json"), dir);
  const ScmFile high = scm_from_json(load("high_scm.json"), dir);
  require(low.gaussian && high.gaussian, "dataset: model files need moment noise");
  out.bundle.low_scm = low.scm;
  out.bundle.high_scm = high.scm;
  out.bundle.default_env = {*low.gaussian, *high.gaussian};
  auto low_list = interventions_from_json(load("low_interventions.json"), low.scm);
  auto high_list = interventions_from_json(load("high_interventions.json"), high.scm);
  const auto image = omega_image_from_json(load("omega.json"), low_list.size());
  const std::size_t n_low = low_list.size();
  const std::size_t n_high = high_list.size();
  out.bundle.omega = InterventionMap(std::move(low_list), std::move(high_list), image);
  for (std::size_t i = 0; i < n_low; ++i) {
    out.samples.low.push_back(matrix_from_csv(load("samples/" + index_name("low", i))));
  }
  for (std::size_t i = 0; i < n_high; ++i) {
    out.samples.high.push_back(matrix_from_csv(load("samples/" + index_name("high", i))));
  }
  out.hash = hash_hex(all);
  if (out.hash != get_field<std::string>(manifest, "hash", what)) {
    throw MissingArtifact("dataset in " + dir.string() + " does not match its manifest hash");
  }
  return out;
}

}  // namespace robabs::io
