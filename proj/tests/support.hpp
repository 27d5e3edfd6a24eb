#pragma once

#include <cmath>
#include <functional>

#include "robabs/random.hpp"
#include "robabs/solvers.hpp"
#include "robabs/types.hpp"

namespace robabs::test {

/// Random SPD matrix A A^T + floor I.
inline Mat random_spd(int d, Rng& rng, double floor = 0.1) {
  const Mat a = standard_normal(d, d, rng);
  return a * a.transpose() + floor * Mat::Identity(d, d);
}

inline Vec random_vec(int d, Rng& rng, double scale = 1.0) {
  return scale * standard_normal(d, 1, rng).col(0);
}

/// Central finite-difference gradient of f at x (entrywise).
inline Mat fd_gradient(const std::function<double(const Mat&)>& f, const Mat& x,
                       double h = 1e-6) {
  Mat g(x.rows(), x.cols());
  for (Eigen::Index i = 0; i < x.rows(); ++i) {
    for (Eigen::Index j = 0; j < x.cols(); ++j) {
      Mat p = x;
      Mat m = x;
      p(i, j) += h;
      m(i, j) -= h;
      g(i, j) = (f(p) - f(m)) / (2 * h);
    }
  }
  return g;
}

/// |a - b|_F / max(|b|_F, floor).
inline double rel_err(const Mat& a, const Mat& b, double floor = 1e-8) {
  return (a - b).norm() / std::max(b.norm(), floor);
}

/// Random DAG on d variables (edges i -> j for i < j with probability 1/2).
inline LinearScm random_scm(int d, Rng& rng, const std::string& prefix) {
  std::uniform_real_distribution<double> w(-1.0, 1.0);
  std::bernoulli_distribution coin(0.5);
  std::vector<std::string> names;
  std::vector<Edge> edges;
  for (int i = 0; i < d; ++i) names.push_back(prefix + std::to_string(i));
  for (int i = 0; i < d; ++i) {
    for (int j = i + 1; j < d; ++j) {
      if (coin(rng)) edges.push_back({i, j, w(rng)});
    }
  }
  return LinearScm(names, edges);
}

/// Null plus every single-variable intervention, values drawn from N(0, 1).
inline std::vector<Intervention> single_interventions(int d, Rng& rng) {
  std::vector<Intervention> out = {Intervention::null()};
  for (int i = 0; i < d; ++i) out.push_back(Intervention({i}, random_vec(1, rng)));
  return out;
}

/// Random model pair with l low and h high variables. Null maps to null,
/// the first h low singles map onto the h high singles, the rest at random.
inline ProblemInstance random_instance(int l, int h, Rng& rng, bool gaussian, int n = 30) {
  const LinearScm low = random_scm(l, rng, "x");
  const LinearScm high = random_scm(h, rng, "y");
  const auto low_iv = single_interventions(l, rng);
  const auto high_iv = single_interventions(h, rng);
  std::vector<int> image = {0};
  std::uniform_int_distribution<int> pick(0, h);
  for (int i = 0; i < l; ++i) image.push_back(i < h ? i + 1 : pick(rng));
  InterventionMap omega(low_iv, high_iv, image);
  AnyJointEnv env;
  if (gaussian) {
    env = JointGaussianEnv{GaussianEnv(random_vec(l, rng), random_spd(l, rng)),
                           GaussianEnv(random_vec(h, rng), random_spd(h, rng))};
  } else {
    env = JointEmpiricalEnv{EmpiricalEnv(standard_normal(n, l, rng)),
                            EmpiricalEnv(standard_normal(n, h, rng))};
  }
  ProblemInstance inst = ProblemInstance::uniform(low, high, omega, env);
  std::uniform_real_distribution<double> wq(0.5, 2.5);
  Vec q(static_cast<Eigen::Index>(omega.size()));
  for (auto& v : q) v = wq(rng);
  inst.q = q / q.sum();
  return inst;
}

/// A model pair with a known exact abstraction T* = [diag(d) 0]. The high
/// model is the rescaled marginal of the first h low variables, which are
/// ancestrally closed because random_scm only has edges i -> j with i < j.
/// Low singles on i < h map to the matching rescaled high single, the others
/// to the null intervention.
struct ExactPair {
  ProblemInstance inst;
  Mat t_star;
};

inline ExactPair exact_instance(int l, int h, Rng& rng, bool gaussian, int n = 200) {
  const LinearScm low = random_scm(l, rng, "x");
  std::uniform_real_distribution<double> scale(0.5, 2.0);
  Vec d(h);
  for (int i = 0; i < h; ++i) d(i) = scale(rng);
  Mat b = Mat::Zero(h, h);
  for (int i = 0; i < h; ++i) {
    for (int j = 0; j < h; ++j) b(i, j) = d(j) * low.adjacency()(i, j) / d(i);
  }
  std::vector<std::string> names;
  for (int i = 0; i < h; ++i) names.push_back("y" + std::to_string(i));
  const LinearScm high(names, b);

  std::vector<Intervention> li = {Intervention::null()};
  std::vector<Intervention> hi = {Intervention::null()};
  std::vector<int> image = {0};
  for (int i = 0; i < l; ++i) {
    const Vec v = random_vec(1, rng);
    li.push_back(Intervention({i}, v));
    if (i < h) {
      hi.push_back(Intervention({i}, d(i) * v));
      image.push_back(static_cast<int>(hi.size()) - 1);
    } else {
      image.push_back(0);
    }
  }
  InterventionMap omega(li, hi, image);

  const Vec mean = random_vec(l, rng);
  const Mat cov = Mat(random_spd(l, rng).diagonal().asDiagonal());
  AnyJointEnv env;
  if (gaussian) {
    const Vec hm = d.cwiseProduct(mean.head(h));
    const Mat hc = d.asDiagonal() * cov.topLeftCorner(h, h) * d.asDiagonal();
    env = JointGaussianEnv{GaussianEnv(mean, cov), GaussianEnv(hm, hc)};
  } else {
    Mat u = standard_normal(n, l, rng) * cov.cwiseSqrt();
    u.rowwise() += mean.transpose();
    const Mat uh = u.leftCols(h) * d.asDiagonal();
    env = JointEmpiricalEnv{EmpiricalEnv(u), EmpiricalEnv(uh)};
  }
  ExactPair out{ProblemInstance::uniform(low, high, omega, env), Mat::Zero(h, l)};
  out.t_star.leftCols(h) = d.asDiagonal();
  return out;
}

}  // namespace robabs::test
