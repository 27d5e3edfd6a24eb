#include "robabs/datasets.hpp"

#include <algorithm>
#include <utility>

#include "robabs/random.hpp"

namespace robabs {

namespace {

struct NamedEdge {
  std::string from;
  std::string to;
  double weight;
};

LinearScm make_scm(const std::vector<std::string>& vars, const std::vector<NamedEdge>& edges,
                   const WeightOverrides& overrides) {
  LinearScm skeleton(vars, Mat::Zero(static_cast<Eigen::Index>(vars.size()),
                                     static_cast<Eigen::Index>(vars.size())));
  std::vector<Edge> out;
  for (const auto& e : edges) {
    const auto it = overrides.find(e.from + "->" + e.to);
    out.push_back({skeleton.index_of(e.from), skeleton.index_of(e.to),
                   it == overrides.end() ? e.weight : it->second});
  }
  return LinearScm(vars, out);
}

// do(names = dose) with a common dose for every target.
Intervention make_do(const LinearScm& scm, const std::vector<std::string>& names, double dose) {
  std::vector<int> targets;
  for (const auto& n : names) targets.push_back(scm.index_of(n));
  return Intervention(targets, Vec::Constant(static_cast<Eigen::Index>(names.size()), dose));
}

void check_overrides(const WeightOverrides& overrides, const LinearScm& low, const LinearScm& high) {
  for (const auto& [key, w] : overrides) {
    bool found = false;
    for (const LinearScm* scm : {&low, &high}) {
      for (const Edge& e : scm->edges()) {
        if (scm->variables()[e.from] + "->" + scm->variables()[e.to] == key) found = true;
      }
    }
    require(found, "weight override '" + key + "' names no edge");
  }
}

}  // namespace

DatasetBundle build_slc(const WeightOverrides& overrides) {
  DatasetBundle b;
  b.name = "slc";
  b.low_scm = make_scm({"S", "T", "C"}, {{"S", "T", 1.2}, {"T", "C", 0.8}}, overrides);
  // The high-level weight is the product along the removed mediator.
  b.high_scm = make_scm({"S'", "C'"}, {{"S'", "C'", 0.96}}, overrides);
  check_overrides(overrides, b.low_scm, b.high_scm);

  const auto& lo = b.low_scm;
  const auto& hi = b.high_scm;
  // The mediator is lumped with the cause: T-interventions map to S'.
  std::vector<Intervention> low = {Intervention::null(), make_do(lo, {"S"}, 0.0),
                                   make_do(lo, {"S"}, 1.0),     make_do(lo, {"T"}, 0.0),
                                   make_do(lo, {"T"}, 1.0),     make_do(lo, {"S", "T"}, 1.0)};
  std::vector<Intervention> high = {Intervention::null(), make_do(hi, {"S'"}, 0.0),
                                    make_do(hi, {"S'"}, 1.0)};
  b.omega = InterventionMap(low, high, {0, 1, 2, 1, 2, 2});
  b.default_env = {GaussianEnv::independent(Vec::Zero(3), Vec{{1.0, 0.7, 0.9}}),
                   GaussianEnv::independent(Vec::Zero(2), Vec{{1.0, 1.06}})};
  return b;
}

DatasetBundle build_lilucas(const WeightOverrides& overrides) {
  DatasetBundle b;
  b.name = "lilucas";
  b.low_scm = make_scm({"SM", "GE", "LC", "AL", "CO", "FA"},
                       {{"SM", "LC", 0.9},
                        {"GE", "LC", 0.7},
                        {"LC", "CO", 1.1},
                        {"LC", "FA", 0.8},
                        {"GE", "FA", 0.6},
                        {"CO", "AL", 0.9}},
                       overrides);
  b.high_scm = make_scm({"EN'", "GE'", "LC'"}, {{"EN'", "LC'", 0.9}, {"GE'", "LC'", 0.7}}, overrides);
  check_overrides(overrides, b.low_scm, b.high_scm);

  const auto& lo = b.low_scm;
  const auto& hi = b.high_scm;
  // Clusters: EN' = {SM}, GE' = {GE}, LC' = {LC, CO, FA, AL}.
  const std::map<std::string, std::string> cluster = {{"SM", "EN'"}, {"GE", "GE'"}, {"LC", "LC'"},
                                                      {"CO", "LC'"},  {"FA", "LC'"}, {"AL", "LC'"}};
  std::vector<Intervention> high = {Intervention::null()};
  for (double dose : {0.0, 1.0}) {
    for (const char* v : {"EN'", "GE'", "LC'"}) high.push_back(make_do(hi, {v}, dose));
  }
  high.push_back(make_do(hi, {"EN'", "GE'"}, 1.0));
  high.push_back(make_do(hi, {"EN'", "LC'"}, 1.0));
  high.push_back(make_do(hi, {"GE'", "LC'"}, 1.0));
  high.push_back(make_do(hi, {"EN'", "GE'", "LC'"}, 1.0));

  std::vector<std::pair<std::vector<std::string>, double>> low_spec = {{{}, 0.0}};
  for (double dose : {0.0, 1.0}) {
    for (const char* v : {"SM", "GE", "LC", "AL", "CO", "FA"}) low_spec.push_back({{v}, dose});
  }
  for (const auto& names : std::vector<std::vector<std::string>>{{"SM", "GE"},
                                                                 {"SM", "LC"},
                                                                 {"GE", "LC"},
                                                                 {"SM", "GE", "LC"},
                                                                 {"LC", "CO"},
                                                                 {"SM", "CO"},
                                                                 {"GE", "FA"}}) {
    low_spec.push_back({names, 1.0});
  }

  std::vector<Intervention> low;
  std::vector<int> image;
  for (const auto& [names, dose] : low_spec) {
    low.push_back(names.empty() ? Intervention::null() : make_do(lo, names, dose));
    std::vector<std::string> mapped;
    for (const auto& n : names) {
      const std::string& c = cluster.at(n);
      if (std::find(mapped.begin(), mapped.end(), c) == mapped.end()) mapped.push_back(c);
    }
    // Order cluster targets like the high-level variable list.
    std::sort(mapped.begin(), mapped.end(), [&](const std::string& a, const std::string& c) {
      return hi.index_of(a) < hi.index_of(c);
    });
    const Intervention target = mapped.empty() ? Intervention::null() : make_do(hi, mapped, dose);
    const auto it = std::find(high.begin(), high.end(), target);
    require(it != high.end(), "build_lilucas: missing high-level intervention");
    image.push_back(static_cast<int>(it - high.begin()));
  }
  b.omega = InterventionMap(low, high, image);
  b.default_env = {
      GaussianEnv::independent(Vec::Zero(6), Vec{{1.0, 0.8, 0.6, 0.7, 0.9, 0.5}}),
      GaussianEnv::independent(Vec::Zero(3), Vec{{1.0, 0.8, 0.6}})};
  return b;
}

DatasetBundle build_dataset(const std::string& name, const WeightOverrides& overrides) {
  if (name == "slc") return build_slc(overrides);
  if (name == "lilucas") return build_lilucas(overrides);
  throw InvalidArgument("unknown dataset '" + name + "' (expected slc or lilucas)");
}

DatasetSamples generate_samples(const DatasetBundle& bundle, int n, std::uint64_t seed) {
  DatasetSamples out;
  const auto& low = bundle.omega.low();
  const auto& high = bundle.omega.high();
  for (std::size_t i = 0; i < low.size(); ++i) {
    out.low.push_back(sample_endogenous(bundle.low_scm, low[i], bundle.default_env.low, n,
                                        derive_seed({seed, hash_string("low"), i})));
  }
  for (std::size_t j = 0; j < high.size(); ++j) {
    out.high.push_back(sample_endogenous(bundle.high_scm, high[j], bundle.default_env.high, n,
                                         derive_seed({seed, hash_string("high"), j})));
  }
  return out;
}

std::size_t null_index(const std::vector<Intervention>& list) {
  for (std::size_t i = 0; i < list.size(); ++i) {
    if (list[i].is_null()) return i;
  }
  throw InvalidArgument("intervention list has no null intervention");
}

}  // namespace robabs
