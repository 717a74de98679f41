#include "opf/twobus.hpp"

#include <cmath>
#include <cstdio>
#include <numbers>
#include <sstream>
#include <stdexcept>

namespace opf {

double objective(double theta, const TwoBusParams& p) {
  return p.g - p.g * std::cos(theta) + p.b * std::sin(theta);
}

double balance_residual(double theta, const TwoBusParams& p) {
  return p.l + p.g - p.g * std::cos(theta) - p.b * std::sin(theta);
}

double penalized(double theta, const TwoBusParams& p) {
  const double c = balance_residual(theta, p);
  return objective(theta, p) + 0.5 * p.rho * c * c;
}

double partial_lagrangian(double theta, const TwoBusParams& p) {
  return objective(theta, p) + p.mu * balance_residual(theta, p);
}

double dual_at_root(double theta_root, const TwoBusParams& p) {
  if (std::abs(balance_residual(theta_root, p)) > 1e-8) {
    throw std::domain_error("dual_at_root: point is not a feasible root");
  }
  const double fp = p.g * std::sin(theta_root) + p.b * std::cos(theta_root);
  const double cp = p.g * std::sin(theta_root) - p.b * std::cos(theta_root);
  if (std::abs(cp) < 1e-10) {
    throw std::domain_error("dual_at_root: tangent (degenerate) root, c' vanishes");
  }
  return -fp / cp;
}

LandscapeSamples sample_landscape(const std::function<double(double)>& f,
                                  double lo, double hi, double resolution) {
  if (!(resolution > 0)) throw std::invalid_argument("resolution must be positive");
  LandscapeSamples out;
  const int n = static_cast<int>(std::ceil((hi - lo) / resolution));
  out.theta.reserve(n);
  out.value.reserve(n);
  for (int k = 1; k <= n; ++k) {
    double t = lo + k * (hi - lo) / n;
    out.theta.push_back(t);
    out.value.push_back(f(t));
  }
  for (size_t i = 1; i + 1 < out.value.size(); ++i) {
    if (out.value[i] < out.value[i - 1] && out.value[i] < out.value[i + 1]) {
      out.minima.push_back(static_cast<int>(i));
    }
  }
  return out;
}

std::string landscape_csv(const TwoBusParams& p, double resolution) {
  const double pi = std::numbers::pi;
  LandscapeSamples rho = sample_landscape(
      [&](double t) { return penalized(t, p); }, -pi, pi, resolution);
  std::ostringstream out;
  out << "theta,L_rho,L_mu\n";
  char buf[128];
  for (size_t i = 0; i < rho.theta.size(); ++i) {
    const double t = rho.theta[i];
    std::snprintf(buf, sizeof(buf), "%.17g,%.17g,%.17g\n", t, rho.value[i],
                  partial_lagrangian(t, p));
    out << buf;
  }
  return out.str();
}

CaseData two_bus_case(const TwoBusParams& p) {
  CaseData data;
  data.name = "twobus";
  data.base_mva = 1.0;

  Bus bus1;
  bus1.id = 1;
  bus1.is_reference = true;
  bus1.v_min = bus1.v_max = 1.0;
  Bus bus2;
  bus2.id = 2;
  bus2.p_load = p.l;
  bus2.v_min = bus2.v_max = 1.0;
  data.buses = {bus1, bus2};

  Generator gen1;
  gen1.bus = 1;
  gen1.p_min = 0.0;
  gen1.p_max = 10.0 * std::max(1.0, p.l);
  gen1.q_min = -10.0 * std::max(1.0, p.b);
  gen1.q_max = 10.0 * std::max(1.0, p.b);
  // Bus 2 has no active injection; its generator exists so reactive balance
  // never constrains the angle.
  Generator gen2;
  gen2.bus = 2;
  gen2.p_min = gen2.p_max = 0.0;
  gen2.q_min = gen1.q_min;
  gen2.q_max = gen1.q_max;
  data.generators = {gen1, gen2};

  Branch br;
  br.from = 1;
  br.to = 2;
  const double y2 = p.g * p.g + p.b * p.b;
  br.r = p.g / y2;
  br.x = p.b / y2;
  br.series_g = p.g;
  br.series_b = p.b;
  data.branches = {br};

  CostFunction cost1;
  cost1.generator = 0;
  cost1.linear = 1.0;
  cost1.linear_src = 1.0;
  CostFunction cost2;
  cost2.generator = 1;
  data.costs = {cost1, cost2};
  return data;
}

}  // namespace opf
