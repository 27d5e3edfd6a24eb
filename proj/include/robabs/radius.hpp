#pragma once

namespace robabs {

/// Constants of the concentration bounds for a low/high model pair.
///
/// The bound constants are not identifiable from data alone; the defaults are
/// c = c1 = e, c2 = 1, alpha = 2 and the confidence budget is split uniformly.
struct ConcentrationConfig {
  double n_low = 0;
  double n_high = 0;
  double eta_low = 0.05;
  double eta_high = 0.05;
  double c_low = 2.718281828459045;
  double c_high = 2.718281828459045;
  double c1_low = 2.718281828459045;
  double c1_high = 2.718281828459045;
  double c2_low = 1.0;
  double c2_high = 1.0;
  double alpha_low = 2.0;
  double alpha_high = 2.0;
  int dim_low = 1;
  int dim_high = 1;

  /// Global failure probability 1 - (1 - eta_low)(1 - eta_high).
  double delta() const { return 1.0 - (1.0 - eta_low) * (1.0 - eta_high); }

  /// Sets both etas to 1 - sqrt(1 - delta).
  ConcentrationConfig& with_uniform_delta(double delta);

  /// Throws InvalidArgument naming the first offending field.
  void validate() const;
};

struct Radii {
  double eps_low = 0;
  double eps_high = 0;
  double eps_joint = 0;
};

/// eps_d = log(c_d / eta_d) / sqrt(N_d); joint = sqrt(eps_low^2 + eps_high^2).
Radii gaussian_radii(const ConcentrationConfig& cfg);

/// Piecewise rate (log(c1/eta) / (c2 N))^p with p = min(1/dim, 1/2) above the
/// sample threshold log(c1/eta)/c2 and p = 1/alpha below it.
Radii empirical_radii(const ConcentrationConfig& cfg);

/// Exponent used by empirical_radii for one level.
double empirical_rate_exponent(double n, double eta, double c1, double c2, double alpha, int dim);

}  // namespace robabs
