#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "robabs/environments.hpp"
#include "robabs/types.hpp"

namespace robabs {

/// Directed edge `from -> to` with a structural weight.
struct Edge {
  int from = 0;
  int to = 0;
  double weight = 0.0;
};

/// Linear additive-noise structural causal model X = B^T X + U.
///
/// Adjacency convention: adjacency()(j, i) is the weight of the edge j -> i, so
/// column i holds the incoming edges of variable i. The graph must be a DAG;
/// this is checked at construction.
class LinearScm {
 public:
  LinearScm() = default;
  LinearScm(std::vector<std::string> variables, Mat adjacency);
  LinearScm(std::vector<std::string> variables, const std::vector<Edge>& edges);

  const std::vector<std::string>& variables() const { return variables_; }
  const Mat& adjacency() const { return adjacency_; }
  int dim() const { return static_cast<int>(variables_.size()); }

  /// Variable indices in a topological order (parents before children).
  const std::vector<int>& topological_order() const { return order_; }
  std::vector<int> parents(int i) const;
  std::vector<Edge> edges() const;
  /// Throws InvalidArgument for unknown names.
  int index_of(const std::string& name) const;

 private:
  std::vector<std::string> variables_;
  Mat adjacency_;
  std::vector<int> order_;
};

/// Hard intervention do(X_targets = values). Empty targets is the null
/// (observational) intervention.
class Intervention {
 public:
  Intervention() = default;
  Intervention(std::vector<int> targets, Vec values);

  static Intervention null() { return {}; }

  const std::vector<int>& targets() const { return targets_; }
  const Vec& values() const { return values_; }
  bool is_null() const { return targets_.empty(); }
  int size() const { return static_cast<int>(targets_.size()); }

  /// Throws unless every target is a valid index for a model of dimension `dim`.
  void check_dim(int dim) const;
  /// Diagonal mask with zeros at the targets.
  Vec free_mask(int dim) const;
  /// Vector that is zero except for the assigned values at the targets.
  Vec pinned_values(int dim) const;
  /// Human-readable label such as "do(S=1,T=0)".
  std::string describe(const LinearScm& scm) const;

  bool operator==(const Intervention& other) const;

 private:
  std::vector<int> targets_;
  Vec values_;
};

/// The omega map between intervention sets: omega(low[i]) = high[image[i]].
class InterventionMap {
 public:
  InterventionMap() = default;
  /// Surjectivity onto `high` is enforced unless `require_surjective` is false
  /// (misspecified maps may leave high-level interventions uncovered).
  InterventionMap(std::vector<Intervention> low, std::vector<Intervention> high,
                  std::vector<int> image, bool require_surjective = true);

  const std::vector<Intervention>& low() const { return low_; }
  const std::vector<Intervention>& high() const { return high_; }
  const std::vector<int>& image() const { return image_; }
  std::size_t size() const { return low_.size(); }

  const Intervention& high_of(std::size_t low_index) const { return high_[image_[low_index]]; }

  /// Same intervention sets, different assignment. Validated like the constructor.
  InterventionMap with_image(std::vector<int> image, bool require_surjective = true) const;

 private:
  std::vector<Intervention> low_;
  std::vector<Intervention> high_;
  std::vector<int> image_;
};

/// Reduced-form mixing matrix M = (I - B^T)^{-1}, so that x = M u.
/// Computed by a unit-triangular solve in topological order.
Mat mixing_matrix(const LinearScm& scm);

/// Copy of `scm` with all incoming edges of the targets removed.
LinearScm mutilate(const LinearScm& scm, const Intervention& iota);

/// Exogenous environment after pinning the intervened coordinates: Gaussian
/// means are set to the values with zero (co)variance, sample columns are
/// overwritten.
GaussianEnv apply_intervention_exo(const Intervention& iota, const GaussianEnv& env);
EmpiricalEnv apply_intervention_exo(const Intervention& iota, const EmpiricalEnv& env);

/// mixing_matrix(mutilate(scm, iota)).
Mat reduced_transform(const LinearScm& scm, const Intervention& iota);

/// n endogenous draws (rows) under `iota`. Gaussian environments are sampled
/// through a PSD root of the covariance; empirical ones reuse their rows
/// verbatim when n equals the stored count and bootstrap otherwise.
Mat sample_endogenous(const LinearScm& scm, const Intervention& iota, const GaussianEnv& env,
                      int n, std::uint64_t seed);
Mat sample_endogenous(const LinearScm& scm, const Intervention& iota, const EmpiricalEnv& env,
                      int n, std::uint64_t seed);

/// Inverts the observational reduced form row-wise: u = (I - B^T) x.
Mat abduct(const LinearScm& scm, const Mat& endo);

/// Least-squares structural weights for a given DAG and the implied exogenous
/// samples (residuals, which keep the noise mean).
struct EstimatedScm {
  LinearScm scm;
  Mat residuals;
};

EstimatedScm estimate_coefficients(const Mat& endo_obs, const std::vector<std::string>& variables,
                                   const std::vector<std::pair<int, int>>& dag);

}  // namespace robabs
