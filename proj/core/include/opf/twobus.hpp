#pragma once

#include "opf/caseio.hpp"

#include <functional>
#include <string>
#include <vector>

namespace opf {

/// Two buses joined by a line of admittance g - jb, both voltage magnitudes
/// pinned to 1 p.u.; bus 1 is the reference with a $1/p.u. linear cost, bus 2
/// carries load l. theta is the angle from bus 1 to bus 2.
struct TwoBusParams {
  double g = 1.0;
  double b = 5.0;
  double l = 3.0;
  double rho = 100.0;  // quadratic penalty weight
  double mu = 0.0;     // balance multiplier
};

/// Generation cost as a function of the angle: g - g cos(theta) + b sin(theta).
double objective(double theta, const TwoBusParams& p);

/// Load-bus balance: l + g - g cos(theta) - b sin(theta); zero at feasibility.
double balance_residual(double theta, const TwoBusParams& p);

/// objective + (rho/2) * balance^2.
double penalized(double theta, const TwoBusParams& p);

/// objective + mu * balance.
double partial_lagrangian(double theta, const TwoBusParams& p);

/// The multiplier that makes the partial Lagrangian stationary at a feasible
/// root: mu = -f'(theta)/c'(theta). Throws std::domain_error if theta_root is
/// not feasible to 1e-8 or the root is tangent (c' ~ 0).
double dual_at_root(double theta_root, const TwoBusParams& p);

struct LandscapeSamples {
  std::vector<double> theta;
  std::vector<double> value;
  std::vector<int> minima;  // indices of interior local minima
};

/// Sample f on (lo, hi] at the given resolution and mark interior local
/// minima by a strict sign change of the first difference.
LandscapeSamples sample_landscape(const std::function<double(double)>& f,
                                  double lo, double hi, double resolution);

/// CSV with columns theta, L_rho, L_mu for theta in (-pi, pi].
std::string landscape_csv(const TwoBusParams& p, double resolution);

/// The same system expressed as case data, for solving through the general
/// pipeline: bus 1 reference with a free generator, bus 2 with the load and
/// a zero-active-power generator that leaves reactive balance unconstrained;
/// both voltage bounds pinned to [1, 1].
CaseData two_bus_case(const TwoBusParams& p);

}  // namespace opf
