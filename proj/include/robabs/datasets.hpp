#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "robabs/environments.hpp"
#include "robabs/scm.hpp"

namespace robabs {

/// A benchmark pair of models with their intervention sets, omega and the
/// default exogenous environments used to generate data.
struct DatasetBundle {
  std::string name;
  LinearScm low_scm;
  LinearScm high_scm;
  InterventionMap omega;
  JointGaussianEnv default_env;
};

/// Edge-weight overrides keyed "From->To" (variable names of either level).
using WeightOverrides = std::map<std::string, double>;

/// S -> T -> C abstracted to S' -> C'.
DatasetBundle build_slc(const WeightOverrides& overrides = {});
/// Linearized LUCAS: SM, GE, LC, AL, CO, FA abstracted to EN', GE', LC'.
DatasetBundle build_lilucas(const WeightOverrides& overrides = {});
/// Throws InvalidArgument for names other than "slc" and "lilucas".
DatasetBundle build_dataset(const std::string& name, const WeightOverrides& overrides = {});

/// Endogenous samples, one matrix per distinct intervention of each level, in
/// the order of omega.low() / omega.high().
struct DatasetSamples {
  std::vector<Mat> low;
  std::vector<Mat> high;
};

DatasetSamples generate_samples(const DatasetBundle& bundle, int n, std::uint64_t seed);

/// Position of the null intervention in `list`; throws if absent.
std::size_t null_index(const std::vector<Intervention>& list);

}  // namespace robabs
