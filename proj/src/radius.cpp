#include "robabs/radius.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "robabs/types.hpp"

namespace robabs {

namespace {

void check_positive(double v, const char* field) {
  if (!(v > 0.0) || !std::isfinite(v)) {
    throw InvalidArgument(std::string("ConcentrationConfig.") + field + " must be positive");
  }
}

void check_eta(double v, const char* field) {
  if (!(v > 0.0 && v <= 1.0)) {
    throw InvalidArgument(std::string("ConcentrationConfig.") + field + " must lie in (0, 1]");
  }
}

double log_ratio(double c, double eta, const char* field) {
  const double r = std::log(c / eta);
  if (!(r > 0.0)) {
    throw InvalidArgument(std::string("ConcentrationConfig.") + field +
                          ": c / eta must exceed 1 for a finite radius");
  }
  return r;
}

double empirical_eps(double n, double eta, double c1, double c2, double alpha, int dim,
                     const char* field) {
  const double base = log_ratio(c1, eta, field) / (c2 * n);
  return std::pow(base, empirical_rate_exponent(n, eta, c1, c2, alpha, dim));
}

}  // namespace

ConcentrationConfig& ConcentrationConfig::with_uniform_delta(double delta) {
  if (!(delta > 0.0 && delta <= 1.0)) throw InvalidArgument("delta must lie in (0, 1]");
  eta_low = eta_high = 1.0 - std::sqrt(1.0 - delta);
  return *this;
}

void ConcentrationConfig::validate() const {
  check_positive(n_low, "n_low");
  check_positive(n_high, "n_high");
  check_eta(eta_low, "eta_low");
  check_eta(eta_high, "eta_high");
  check_positive(c_low, "c_low");
  check_positive(c_high, "c_high");
  check_positive(c1_low, "c1_low");
  check_positive(c1_high, "c1_high");
  check_positive(c2_low, "c2_low");
  check_positive(c2_high, "c2_high");
  check_positive(alpha_low, "alpha_low");
  check_positive(alpha_high, "alpha_high");
  if (dim_low < 1) throw InvalidArgument("ConcentrationConfig.dim_low must be >= 1");
  if (dim_high < 1) throw InvalidArgument("ConcentrationConfig.dim_high must be >= 1");
}

double empirical_rate_exponent(double n, double eta, double c1, double c2, double alpha, int dim) {
  const double threshold = std::log(c1 / eta) / c2;
  if (n >= threshold) return std::min(1.0 / dim, 0.5);
  return 1.0 / alpha;
}

Radii gaussian_radii(const ConcentrationConfig& cfg) {
  cfg.validate();
  Radii r;
  r.eps_low = log_ratio(cfg.c_low, cfg.eta_low, "c_low") / std::sqrt(cfg.n_low);
  r.eps_high = log_ratio(cfg.c_high, cfg.eta_high, "c_high") / std::sqrt(cfg.n_high);
  r.eps_joint = std::hypot(r.eps_low, r.eps_high);
  return r;
}

Radii empirical_radii(const ConcentrationConfig& cfg) {
  cfg.validate();
  Radii r;
  r.eps_low = empirical_eps(cfg.n_low, cfg.eta_low, cfg.c1_low, cfg.c2_low, cfg.alpha_low,
                            cfg.dim_low, "c1_low");
  r.eps_high = empirical_eps(cfg.n_high, cfg.eta_high, cfg.c1_high, cfg.c2_high, cfg.alpha_high,
                             cfg.dim_high, "c1_high");
  r.eps_joint = std::hypot(r.eps_low, r.eps_high);
  return r;
}

}  // namespace robabs
