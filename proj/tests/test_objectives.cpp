#include <doctest.h>

#include "robabs/geometry.hpp"
#include "robabs/solvers.hpp"
#include "support.hpp"

using namespace robabs;
using namespace robabs::test;

namespace {

constexpr double kGradTol = 1e-4;

std::pair<int, int> dims(Rng& rng) {
  const int l = std::uniform_int_distribution<int>(2, 5)(rng);
  const int h = std::uniform_int_distribution<int>(1, l)(rng);
  return {l, h};
}

}  // namespace

TEST_SUITE("objectives") {

TEST_CASE("Gaussian objective agrees with a direct per-intervention computation") {
  Rng rng(31);
  for (int k = 0; k < 10; ++k) {
    const auto [l, h] = dims(rng);
    const ProblemInstance inst = random_instance(l, h, rng, true);
    const JointGaussianEnv& env = inst.gaussian_env();
    const Mat t = standard_normal(h, l, rng);
    double expect = 0.0;
    for (std::size_t i = 0; i < inst.omega.size(); ++i) {
      // Push the exogenous law through the mutilated model, then through T.
      const GaussianEnv ul = apply_intervention_exo(inst.omega.low()[i], env.low);
      const GaussianEnv uh = apply_intervention_exo(inst.omega.high_of(i), env.high);
      const Mat ml = t * mixing_matrix(mutilate(inst.low_scm, inst.omega.low()[i]));
      const Mat mh = mixing_matrix(mutilate(inst.high_scm, inst.omega.high_of(i)));
      expect += inst.q(i) * geometry::gelbrich_distance_sq<double>(
                                ml * ul.mean(), Mat(ml * ul.cov() * ml.transpose()),
                                mh * uh.mean(), Mat(mh * uh.cov() * mh.transpose()));
    }
    CHECK(gaussian_objective(AbstractionMap(t), env, inst) ==
          doctest::Approx(expect).epsilon(1e-10));
  }
}

TEST_CASE("surrogate lower-bounds the Gaussian objective") {
  Rng rng(37);
  for (int k = 0; k < 50; ++k) {
    const auto [l, h] = dims(rng);
    const ProblemInstance inst = random_instance(l, h, rng, true);
    const AbstractionMap t(standard_normal(h, l, rng));
    CHECK(gaussian_surrogate(t, inst.gaussian_env(), inst) <=
          gaussian_objective(t, inst.gaussian_env(), inst) + 1e-9);
  }
}

TEST_CASE("Gaussian objective gradients match finite differences") {
  Rng rng(41);
  for (int k = 0; k < 50; ++k) {
    const auto [l, h] = dims(rng);
    const ProblemInstance inst = random_instance(l, h, rng, true);
    const JointGaussianEnv& env = inst.gaussian_env();
    const auto terms = pushforward_terms(inst);
    const Mat t = standard_normal(h, l, rng);
    const GaussianGradients g = gaussian_objective_gradients(t, env, terms);

    const Mat fd_t = fd_gradient(
        [&](const Mat& x) { return gaussian_objective(AbstractionMap(x), env, inst); }, t);
    CHECK(rel_err(g.t, fd_t) < kGradTol);

    const Mat fd_ml = fd_gradient(
        [&](const Mat& m) {
          const JointGaussianEnv e{GaussianEnv(m.col(0), env.low.cov()), env.high};
          return gaussian_objective(AbstractionMap(t), e, inst);
        },
        env.low.mean());
    CHECK(rel_err(g.mean_low, fd_ml) < kGradTol);

    const Mat fd_mh = fd_gradient(
        [&](const Mat& m) {
          const JointGaussianEnv e{env.low, GaussianEnv(m.col(0), env.high.cov())};
          return gaussian_objective(AbstractionMap(t), e, inst);
        },
        env.high.mean());
    CHECK(rel_err(g.mean_high, fd_mh) < kGradTol);
  }
}

TEST_CASE("surrogate gradients match finite differences in every argument") {
  Rng rng(43);
  for (int k = 0; k < 50; ++k) {
    const auto [l, h] = dims(rng);
    const ProblemInstance inst = random_instance(l, h, rng, true);
    const auto terms = pushforward_terms(inst);
    const Mat t = standard_normal(h, l, rng);
    const Vec ml = random_vec(l, rng);
    const Vec mh = random_vec(h, rng);
    const Mat sl = geometry::psd_sqrt<double>(random_spd(l, rng));
    const Mat sh = geometry::psd_sqrt<double>(random_spd(h, rng));
    const GaussianGradients g = gaussian_surrogate_gradients(t, ml, sl, mh, sh, terms);
    auto f = [&](const Mat& a, const Vec& b, const Mat& c, const Vec& d, const Mat& e) {
      return gaussian_surrogate_at_roots(a, b, c, d, e, terms);
    };
    CHECK(rel_err(g.t, fd_gradient([&](const Mat& x) { return f(x, ml, sl, mh, sh); }, t)) <
          kGradTol);
    CHECK(rel_err(g.mean_low,
                  fd_gradient([&](const Mat& x) { return f(t, x.col(0), sl, mh, sh); }, ml)) <
          kGradTol);
    CHECK(rel_err(g.mean_high,
                  fd_gradient([&](const Mat& x) { return f(t, ml, sl, x.col(0), sh); }, mh)) <
          kGradTol);
    CHECK(rel_err(g.root_low, fd_gradient([&](const Mat& x) { return f(t, ml, x, mh, sh); }, sl)) <
          kGradTol);
    CHECK(rel_err(g.root_high,
                  fd_gradient([&](const Mat& x) { return f(t, ml, sl, mh, x); }, sh)) < kGradTol);
  }
}

TEST_CASE("empirical objective agrees with a per-row loop") {
  Rng rng(47);
  const ProblemInstance inst = random_instance(4, 2, rng, false, 12);
  const JointEmpiricalEnv& env = inst.empirical_env();
  const Mat t = standard_normal(2, 4, rng);
  double expect = 0.0;
  for (std::size_t i = 0; i < inst.omega.size(); ++i) {
    const Mat ml = mixing_matrix(mutilate(inst.low_scm, inst.omega.low()[i]));
    const Mat mh = mixing_matrix(mutilate(inst.high_scm, inst.omega.high_of(i)));
    double sum = 0.0;
    for (Eigen::Index r = 0; r < env.low.count(); ++r) {
      Vec u = env.low.samples().row(r).transpose();
      Vec v = env.high.samples().row(r).transpose();
      const auto& lt = inst.omega.low()[i];
      const auto& ht = inst.omega.high_of(i);
      for (int j = 0; j < lt.size(); ++j) u(lt.targets()[j]) = lt.values()(j);
      for (int j = 0; j < ht.size(); ++j) v(ht.targets()[j]) = ht.values()(j);
      sum += (t * ml * u - mh * v).squaredNorm();
    }
    expect += inst.q(i) * sum / env.low.count();
  }
  CHECK(empirical_objective(AbstractionMap(t), env, inst) == doctest::Approx(expect).epsilon(1e-12));
}

TEST_CASE("empirical objective gradients match finite differences") {
  Rng rng(53);
  for (int k = 0; k < 50; ++k) {
    const auto [l, h] = dims(rng);
    const ProblemInstance inst = random_instance(l, h, rng, false, 20);
    const JointEmpiricalEnv& env = inst.empirical_env();
    const auto terms = pushforward_terms(inst);
    const Mat t = standard_normal(h, l, rng);
    const Mat ul = env.low.samples();
    const Mat uh = env.high.samples();
    const EmpiricalGradients g = empirical_objective_gradients(t, ul, uh, terms);
    auto f = [&](const Mat& tt, const Mat& a, const Mat& b) {
      return empirical_objective(AbstractionMap(tt), {EmpiricalEnv(a), EmpiricalEnv(b)}, inst);
    };
    CHECK(rel_err(g.t, fd_gradient([&](const Mat& x) { return f(x, ul, uh); }, t)) < kGradTol);
    CHECK(rel_err(g.theta_low, fd_gradient([&](const Mat& x) { return f(t, x, uh); }, ul)) <
          kGradTol);
    CHECK(rel_err(g.theta_high, fd_gradient([&](const Mat& x) { return f(t, ul, x); }, uh)) <
          kGradTol);
  }
}

TEST_CASE("objectives vanish on an exact abstraction") {
  // Low: X0 -> X1 -> X2 with the high model being (X0, X2) collapsed; T picks
  // coordinates, so any environment whose high level equals the pushed low one
  // gives zero.
  const LinearScm low({"a", "b", "c"}, std::vector<Edge>{{0, 1, 1.0}, {1, 2, 1.0}});
  const LinearScm high({"A", "C"}, std::vector<Edge>{{0, 1, 1.0}});
  const std::vector<Intervention> li = {Intervention::null(), Intervention({0}, Vec::Ones(1))};
  const std::vector<Intervention> hi = {Intervention::null(), Intervention({0}, Vec::Ones(1))};
  const InterventionMap omega(li, hi, {0, 1});
  Mat t = Mat::Zero(2, 3);
  t(0, 0) = 1.0;
  t(1, 2) = 1.0;
  // X2 = u0 + u1 + u2 at the low level, C = A + v1 at the high level: v1 ~ u1 + u2.
  const GaussianEnv el = GaussianEnv::independent(Vec::Zero(3), Vec::Ones(3));
  const GaussianEnv eh = GaussianEnv::independent(Vec::Zero(2), (Vec(2) << 1.0, std::sqrt(2.0)).finished());
  const ProblemInstance inst =
      ProblemInstance::uniform(low, high, omega, JointGaussianEnv{el, eh});
  CHECK(gaussian_objective(AbstractionMap(t), inst.gaussian_env(), inst) < 1e-12);
}

}  // TEST_SUITE
