#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "robabs/datasets.hpp"
#include "robabs/scm.hpp"
#include "robabs/solvers.hpp"

namespace robabs {

enum class NoiseKind { kGaussian, kStudentT, kExponential };

struct NoiseSpec {
  NoiseKind kind = NoiseKind::kGaussian;
  double df = 5.0;    // student_t only, must exceed 2
  double rate = 1.0;  // exponential only

  /// "gaussian", "student_t" or "exponential".
  std::string name() const;
  static NoiseSpec parse(const std::string& name);
  void validate() const;
};

struct ContaminationSpec {
  double alpha = 0.0;
  double sigma = 0.0;
  NoiseSpec noise;
  std::uint64_t seed = 0;

  void validate() const;
};

/// Huber-style contamination x + alpha * N, rows of N i.i.d. zero-mean with
/// per-coordinate standard deviation sigma.
Mat contaminate(const Mat& x, const ContaminationSpec& spec);

/// q-weighted average over pairs of W2 between Gaussians fitted to the rows of
/// x_low[i] * T^T and of x_high[i].
double abstraction_error_gaussian(const Mat& t, const std::vector<Mat>& x_low,
                                  const std::vector<Mat>& x_high, const Vec& q);

/// q-weighted average over pairs of |x_low[i] T^T - x_high[i]|_F / sqrt(n_i).
double abstraction_error_empirical(const Mat& t, const std::vector<Mat>& x_low,
                                   const std::vector<Mat>& x_high, const Vec& q);

enum class Nonlinearity { kSin, kTanh };

/// Samples of x_j = k * f(sum_p w_pj x_p) + u_j in topological order, with the
/// targets of `iota` pinned. Exogenous draws match sample_endogenous.
Mat f_misspec_sample(const LinearScm& scm, double k, Nonlinearity fnl, const GaussianEnv& env,
                     const Intervention& iota, int n, std::uint64_t seed);

/// Reassigns n_misalign randomly chosen non-null low-level interventions to a
/// different high-level intervention whose target count differs by at most
/// delta from the low-level one (nearest count when none qualifies).
InterventionMap omega_misspec(const InterventionMap& omega, int n_misalign, int delta,
                              std::uint64_t seed);

enum class Setting { kGaussian, kEmpirical };
std::string setting_name(Setting s);
Setting parse_setting(const std::string& name);

enum class MethodKind { kDiroca, kGrad, kBary, kAbsLinPerfect, kAbsLinNoisy };

struct MethodSpec {
  std::string name;  // label used in result files, e.g. "diroca_2_2"
  MethodKind kind = MethodKind::kGrad;
  SolverConfig cfg;
  double abslin_reg = 0.01;
};

/// Per-intervention endogenous data split into train and test rows.
struct FoldData {
  std::vector<Mat> train_low, test_low;
  std::vector<Mat> train_high, test_high;
};

/// Fold `fold` of `k` contiguous blocks is held out.
FoldData split_fold(const DatasetSamples& samples, int k, int fold);

/// Abducts the observational training rows of both levels into the nominal
/// environment of the requested kind.
ProblemInstance make_instance(const DatasetBundle& bundle, const FoldData& data, Setting setting);

FitResult fit_method(const MethodSpec& method, const ProblemInstance& inst, const FoldData& data,
                     const DatasetBundle& bundle);

struct ExperimentResult {
  std::string method;
  double eps_low = 0.0;
  double eps_high = 0.0;
  int fold = 0;
  double alpha = 0.0;
  double sigma = 0.0;
  std::string noise_kind;
  std::uint64_t seed = 0;
  double error = 0.0;
};

struct GridSpec {
  Setting setting = Setting::kGaussian;
  std::vector<double> alphas = {0.0, 1.0};
  std::vector<double> sigmas = {5.0};
  std::vector<NoiseSpec> noises = {NoiseSpec{}};
  int folds = 5;
  int samples_per_cell = 1;
  std::uint64_t root_seed = 0;
  /// Contaminate the high-level test data as well as the low-level one.
  bool contaminate_high = false;

  void validate() const;
};

/// Seed of one grid cell; independent of evaluation order.
std::uint64_t cell_seed(std::uint64_t root, const std::string& method, int fold,
                        std::size_t alpha_idx, std::size_t sigma_idx, const std::string& noise,
                        std::size_t sample_idx);

/// Scores a fitted map on one fold's test data for every contamination cell.
std::vector<ExperimentResult> evaluate_map(const AbstractionMap& map, const MethodSpec& method,
                                           const FoldData& data, const InterventionMap& omega,
                                           const GridSpec& grid, int fold);

struct FMisspecSpec {
  Nonlinearity fnl = Nonlinearity::kSin;
  std::vector<double> strengths = {1.0};
};

/// Scores a map on fresh nonlinear test data (one draw per sample index, shared
/// by all methods). The strength is reported in the sigma column, noise_kind is
/// "fmisspec_<fnl>".
std::vector<ExperimentResult> evaluate_f_misspec(const AbstractionMap& map,
                                                 const MethodSpec& method,
                                                 const DatasetBundle& bundle, int n_test,
                                                 const FMisspecSpec& spec, const GridSpec& grid,
                                                 int fold);

struct OmegaMisspecSpec {
  std::vector<int> n_misalign = {1};
  int delta = 0;
};

/// Scores a map on clean test data paired through corrupted omega maps (one
/// corruption per sample index). n_misalign is reported in the sigma column,
/// noise_kind is "omega_misspec".
std::vector<ExperimentResult> evaluate_omega_misspec(const AbstractionMap& map,
                                                     const MethodSpec& method,
                                                     const FoldData& data,
                                                     const InterventionMap& omega,
                                                     const OmegaMisspecSpec& spec,
                                                     const GridSpec& grid, int fold);

/// Full k-fold protocol: fit every method on every fold and score it.
std::vector<ExperimentResult> run_grid(const DatasetBundle& bundle, const DatasetSamples& samples,
                                       const std::vector<MethodSpec>& methods,
                                       const GridSpec& grid, int jobs = 1);

inline constexpr const char* kResultsHeader =
    "method,eps_low,eps_high,fold,alpha,sigma,noise_kind,seed,error";

std::string results_to_csv(const std::vector<ExperimentResult>& results);
std::vector<ExperimentResult> results_from_csv(const std::string& text);

struct CellSummary {
  std::string method;
  double eps_low = 0.0;
  double eps_high = 0.0;
  double alpha = 0.0;
  double sigma = 0.0;
  std::string noise_kind;
  int count = 0;
  double mean = 0.0;
  double std = 0.0;  // sample standard deviation, 0 for a single record
};

/// Groups records by everything except fold and seed, in first-seen order.
std::vector<CellSummary> summarize(const std::vector<ExperimentResult>& results);

}  // namespace robabs
