#include "robabs/scm.hpp"

#include <algorithm>
#include <numeric>
#include <set>
#include <sstream>

#include "robabs/random.hpp"

namespace robabs {

namespace {

// Kahn's algorithm on the adjacency; throws if a cycle remains.
std::vector<int> topological_sort(const Mat& adjacency) {
  const int d = static_cast<int>(adjacency.rows());
  std::vector<int> indegree(d, 0);
  for (int i = 0; i < d; ++i) {
    for (int j = 0; j < d; ++j) {
      if (adjacency(j, i) != 0.0) ++indegree[i];
    }
  }
  std::vector<int> order;
  order.reserve(d);
  std::vector<int> ready;
  for (int i = d - 1; i >= 0; --i) {
    if (indegree[i] == 0) ready.push_back(i);
  }
  while (!ready.empty()) {
    const int v = ready.back();
    ready.pop_back();
    order.push_back(v);
    for (int c = d - 1; c >= 0; --c) {
      if (adjacency(v, c) != 0.0 && --indegree[c] == 0) ready.push_back(c);
    }
  }
  if (static_cast<int>(order.size()) != d) {
    throw InvalidArgument("LinearScm: graph contains a cycle");
  }
  return order;
}

}  // namespace

LinearScm::LinearScm(std::vector<std::string> variables, Mat adjacency)
    : variables_(std::move(variables)), adjacency_(std::move(adjacency)) {
  const auto d = static_cast<Eigen::Index>(variables_.size());
  require(adjacency_.rows() == d && adjacency_.cols() == d,
          "LinearScm: adjacency shape does not match variable count");
  require(adjacency_.allFinite(), "LinearScm: non-finite edge weight");
  std::set<std::string> seen(variables_.begin(), variables_.end());
  require(seen.size() == variables_.size(), "LinearScm: duplicate variable names");
  order_ = topological_sort(adjacency_);
}

LinearScm::LinearScm(std::vector<std::string> variables, const std::vector<Edge>& edges)
    : LinearScm(variables, [&] {
        const auto d = static_cast<int>(variables.size());
        Mat b = Mat::Zero(d, d);
        for (const Edge& e : edges) {
          require(e.from >= 0 && e.from < d && e.to >= 0 && e.to < d,
                  "LinearScm: edge endpoint out of range");
          require(e.from != e.to, "LinearScm: self loop");
          b(e.from, e.to) = e.weight;
        }
        return b;
      }()) {}

std::vector<int> LinearScm::parents(int i) const {
  std::vector<int> out;
  for (int j = 0; j < dim(); ++j) {
    if (adjacency_(j, i) != 0.0) out.push_back(j);
  }
  return out;
}

std::vector<Edge> LinearScm::edges() const {
  std::vector<Edge> out;
  for (int j = 0; j < dim(); ++j) {
    for (int i = 0; i < dim(); ++i) {
      if (adjacency_(j, i) != 0.0) out.push_back({j, i, adjacency_(j, i)});
    }
  }
  return out;
}

int LinearScm::index_of(const std::string& name) const {
  const auto it = std::find(variables_.begin(), variables_.end(), name);
  require(it != variables_.end(), "LinearScm: unknown variable '" + name + "'");
  return static_cast<int>(it - variables_.begin());
}

Intervention::Intervention(std::vector<int> targets, Vec values)
    : targets_(std::move(targets)), values_(std::move(values)) {
  require(static_cast<Eigen::Index>(targets_.size()) == values_.size(),
          "Intervention: targets and values differ in length");
  std::set<int> seen(targets_.begin(), targets_.end());
  require(seen.size() == targets_.size(), "Intervention: duplicate target");
  require(std::all_of(targets_.begin(), targets_.end(), [](int t) { return t >= 0; }),
          "Intervention: negative target index");
}

void Intervention::check_dim(int dim) const {
  for (int t : targets_) {
    require(t < dim, "Intervention: target index out of range");
  }
}

Vec Intervention::free_mask(int dim) const {
  check_dim(dim);
  Vec mask = Vec::Ones(dim);
  for (int t : targets_) mask(t) = 0.0;
  return mask;
}

Vec Intervention::pinned_values(int dim) const {
  check_dim(dim);
  Vec v = Vec::Zero(dim);
  for (std::size_t k = 0; k < targets_.size(); ++k) v(targets_[k]) = values_(k);
  return v;
}

std::string Intervention::describe(const LinearScm& scm) const {
  if (is_null()) return "null";
  std::ostringstream os;
  os << "do(";
  for (std::size_t k = 0; k < targets_.size(); ++k) {
    if (k) os << ',';
    os << scm.variables().at(targets_[k]) << '=' << values_(k);
  }
  os << ')';
  return os.str();
}

bool Intervention::operator==(const Intervention& other) const {
  return targets_ == other.targets_ && values_ == other.values_;
}

InterventionMap::InterventionMap(std::vector<Intervention> low, std::vector<Intervention> high,
                                 std::vector<int> image, bool require_surjective)
    : low_(std::move(low)), high_(std::move(high)), image_(std::move(image)) {
  require(image_.size() == low_.size(), "InterventionMap: one image per low-level intervention");
  std::vector<bool> hit(high_.size(), false);
  for (int j : image_) {
    require(j >= 0 && j < static_cast<int>(high_.size()), "InterventionMap: image out of range");
    hit[j] = true;
  }
  require(!require_surjective || std::all_of(hit.begin(), hit.end(), [](bool b) { return b; }),
          "InterventionMap: map is not surjective onto the high-level set");
}

InterventionMap InterventionMap::with_image(std::vector<int> image,
                                            bool require_surjective) const {
  return InterventionMap(low_, high_, std::move(image), require_surjective);
}

Mat mixing_matrix(const LinearScm& scm) {
  const int d = scm.dim();
  const auto& order = scm.topological_order();
  // In topological order (I - B^T) is unit lower-triangular.
  Mat permuted(d, d);
  for (int r = 0; r < d; ++r) {
    for (int c = 0; c < d; ++c) {
      permuted(r, c) = (r == c ? 1.0 : 0.0) - scm.adjacency()(order[c], order[r]);
    }
  }
  const Mat inv_permuted =
      permuted.triangularView<Eigen::UnitLower>().solve(Mat::Identity(d, d));
  Mat m(d, d);
  for (int r = 0; r < d; ++r) {
    for (int c = 0; c < d; ++c) m(order[r], order[c]) = inv_permuted(r, c);
  }
  if (!m.allFinite()) throw InvalidArgument("mixing_matrix: singular reduced form");
  return m;
}

LinearScm mutilate(const LinearScm& scm, const Intervention& iota) {
  iota.check_dim(scm.dim());
  Mat b = scm.adjacency();
  for (int t : iota.targets()) b.col(t).setZero();
  return LinearScm(scm.variables(), std::move(b));
}

GaussianEnv apply_intervention_exo(const Intervention& iota, const GaussianEnv& env) {
  require(env.dim() >= 0, "apply_intervention_exo: empty environment");
  iota.check_dim(static_cast<int>(env.dim()));
  if (iota.is_null()) return env;
  Vec mean = env.mean();
  Mat cov = env.cov();
  for (std::size_t k = 0; k < iota.targets().size(); ++k) {
    const int t = iota.targets()[k];
    mean(t) = iota.values()(k);
    cov.row(t).setZero();
    cov.col(t).setZero();
  }
  return GaussianEnv(std::move(mean), std::move(cov));
}

EmpiricalEnv apply_intervention_exo(const Intervention& iota, const EmpiricalEnv& env) {
  iota.check_dim(static_cast<int>(env.dim()));
  if (iota.is_null()) return env;
  Mat samples = env.samples();
  for (std::size_t k = 0; k < iota.targets().size(); ++k) {
    samples.col(iota.targets()[k]).setConstant(iota.values()(k));
  }
  return EmpiricalEnv(std::move(samples));
}

Mat reduced_transform(const LinearScm& scm, const Intervention& iota) {
  return mixing_matrix(mutilate(scm, iota));
}

Mat sample_endogenous(const LinearScm& scm, const Intervention& iota, const GaussianEnv& env,
                      int n, std::uint64_t seed) {
  require(n >= 1, "sample_endogenous: n must be positive");
  require(env.dim() == scm.dim(), "sample_endogenous: environment dimension mismatch");
  const GaussianEnv adjusted = apply_intervention_exo(iota, env);
  const Mat root = geometry::psd_sqrt<double>(adjusted.cov());
  Rng rng(seed);
  Mat u = standard_normal(n, scm.dim(), rng) * root;
  u.rowwise() += adjusted.mean().transpose();
  // Pinned coordinates must be exact, not mean + 0 * noise round-off.
  for (std::size_t k = 0; k < iota.targets().size(); ++k) {
    u.col(iota.targets()[k]).setConstant(iota.values()(k));
  }
  return u * reduced_transform(scm, iota).transpose();
}

Mat sample_endogenous(const LinearScm& scm, const Intervention& iota, const EmpiricalEnv& env,
                      int n, std::uint64_t seed) {
  require(n >= 1, "sample_endogenous: n must be positive");
  require(env.dim() == scm.dim(), "sample_endogenous: environment dimension mismatch");
  const EmpiricalEnv adjusted = apply_intervention_exo(iota, env);
  Mat u;
  if (n == adjusted.count()) {
    u = adjusted.samples();
  } else {
    Rng rng(seed);
    std::uniform_int_distribution<Eigen::Index> pick(0, adjusted.count() - 1);
    u.resize(n, scm.dim());
    for (int i = 0; i < n; ++i) u.row(i) = adjusted.samples().row(pick(rng));
  }
  Mat x = u * reduced_transform(scm, iota).transpose();
  for (std::size_t k = 0; k < iota.targets().size(); ++k) {
    x.col(iota.targets()[k]).setConstant(iota.values()(k));
  }
  return x;
}

Mat abduct(const LinearScm& scm, const Mat& endo) {
  require(endo.cols() == scm.dim(), "abduct: column count does not match the model");
  return endo - endo * scm.adjacency();
}

EstimatedScm estimate_coefficients(const Mat& endo_obs, const std::vector<std::string>& variables,
                                   const std::vector<std::pair<int, int>>& dag) {
  const auto d = static_cast<int>(variables.size());
  require(endo_obs.cols() == d, "estimate_coefficients: column count mismatch");
  require(endo_obs.rows() > d, "estimate_coefficients: need more rows than variables");

  std::vector<Edge> skeleton;
  for (const auto& [from, to] : dag) skeleton.push_back({from, to, 1.0});
  const LinearScm structure(variables, skeleton);  // validates acyclicity

  Mat b = Mat::Zero(d, d);
  const Eigen::Index n = endo_obs.rows();
  for (int i = 0; i < d; ++i) {
    const std::vector<int> pa = structure.parents(i);
    if (pa.empty()) continue;
    // Intercept column absorbs the noise mean so the slopes are unbiased.
    Mat design(n, static_cast<Eigen::Index>(pa.size()) + 1);
    design.col(0).setOnes();
    for (std::size_t k = 0; k < pa.size(); ++k) design.col(k + 1) = endo_obs.col(pa[k]);
    Eigen::ColPivHouseholderQR<Mat> qr(design);
    if (qr.rank() < design.cols()) {
      throw InvalidArgument("estimate_coefficients: rank-deficient regressors for '" +
                            variables[i] + "'");
    }
    const Vec coef = qr.solve(endo_obs.col(i));
    for (std::size_t k = 0; k < pa.size(); ++k) b(pa[k], i) = coef(k + 1);
  }
  EstimatedScm out{LinearScm(variables, b), Mat()};
  out.residuals = abduct(out.scm, endo_obs);
  return out;
}

}  // namespace robabs
