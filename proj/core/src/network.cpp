#include "opf/network.hpp"

#include <cmath>

namespace opf {

namespace {

// Every flow quantity has the shape
//   F(t, vi, vj) = A vi^2 + B vj^2 + a vi vj K(phi),   phi = t - shift,
// with a = 1/tap and K a trig kernel satisfying K'' = -K. The four
// quantities differ only in (A, B, K, K').
FlowQuantity make_quantity(double A, double B, double a, double vi, double vj,
                           double K, double Kp) {
  FlowQuantity q;
  const double w = a * vi * vj;
  q.value = A * vi * vi + B * vj * vj + w * K;
  q.grad << w * Kp, 2 * A * vi + a * vj * K, 2 * B * vj + a * vi * K;
  q.hess(0, 0) = -w * K;
  q.hess(0, 1) = q.hess(1, 0) = a * vj * Kp;
  q.hess(0, 2) = q.hess(2, 0) = a * vi * Kp;
  q.hess(1, 1) = 2 * A;
  q.hess(2, 2) = 2 * B;
  q.hess(1, 2) = q.hess(2, 1) = a * K;
  return q;
}

}  // namespace

BranchFlow branch_flow(double v_i, double v_j, double theta_ij, const Branch& br) {
  const double g = br.series_g, b = br.series_b;
  const double bhat = b - 0.5 * br.charging_b;
  const double a = 1.0 / br.tap_ratio;
  const double phi = theta_ij - br.phase_shift;
  const double c = std::cos(phi), s = std::sin(phi);
  const double vi = a * v_i;
  BranchFlow f;
  f.p_from = vi * vi * g - vi * v_j * (g * c - b * s);
  f.q_from = vi * vi * bhat - vi * v_j * (b * c + g * s);
  f.p_to = v_j * v_j * g - v_j * vi * (g * c + b * s);
  f.q_to = v_j * v_j * bhat - v_j * vi * (b * c - g * s);
  return f;
}

BranchFlowDerivatives branch_flow_derivatives(double v_i, double v_j,
                                              double theta_ij, const Branch& br) {
  const double g = br.series_g, b = br.series_b;
  const double bhat = b - 0.5 * br.charging_b;
  const double a = 1.0 / br.tap_ratio;
  const double phi = theta_ij - br.phase_shift;
  const double c = std::cos(phi), s = std::sin(phi);
  BranchFlowDerivatives d;
  d.p_from = make_quantity(a * a * g, 0.0, a, v_i, v_j,
                           -(g * c - b * s), g * s + b * c);
  d.q_from = make_quantity(a * a * bhat, 0.0, a, v_i, v_j,
                           -(b * c + g * s), b * s - g * c);
  d.p_to = make_quantity(0.0, g, a, v_i, v_j,
                         -(g * c + b * s), g * s - b * c);
  d.q_to = make_quantity(0.0, bhat, a, v_i, v_j,
                         -(b * c - g * s), b * s + g * c);
  return d;
}

void injection_residuals(const NetworkState& state, const Vector& p_gen,
                         const Vector& q_gen, const CaseData& data,
                         Vector& r_p, Vector& r_q) {
  const int n = static_cast<int>(data.buses.size());
  r_p.resize(n);
  r_q.resize(n);
  for (int i = 0; i < n; ++i) {
    const Bus& bus = data.buses[i];
    const double vi = state.v[i];
    r_p[i] = bus.p_load + bus.shunt_g * vi * vi - p_gen[i];
    r_q[i] = bus.q_load - bus.shunt_b * vi * vi - q_gen[i];
  }
  for (const Branch& br : data.branches) {
    const int i = data.bus_index(br.from);
    const int j = data.bus_index(br.to);
    BranchFlow f = branch_flow(state.v[i], state.v[j],
                               state.theta[i] - state.theta[j], br);
    r_p[i] += f.p_from;
    r_q[i] += f.q_from;
    r_p[j] += f.p_to;
    r_q[j] += f.q_to;
  }
}

InjectionJacobian injection_jacobian(const NetworkState& state, const CaseData& data) {
  const int n = static_cast<int>(data.buses.size());
  InjectionJacobian jac;
  jac.dp_dtheta = Matrix::Zero(n, n);
  jac.dp_dv = Matrix::Zero(n, n);
  jac.dq_dtheta = Matrix::Zero(n, n);
  jac.dq_dv = Matrix::Zero(n, n);
  for (int i = 0; i < n; ++i) {
    const Bus& bus = data.buses[i];
    jac.dp_dv(i, i) += 2.0 * bus.shunt_g * state.v[i];
    jac.dq_dv(i, i) -= 2.0 * bus.shunt_b * state.v[i];
  }
  for (const Branch& br : data.branches) {
    const int i = data.bus_index(br.from);
    const int j = data.bus_index(br.to);
    BranchFlowDerivatives d = branch_flow_derivatives(
        state.v[i], state.v[j], state.theta[i] - state.theta[j], br);
    auto scatter = [&](const FlowQuantity& q, Matrix& dtheta, Matrix& dv, int row) {
      dtheta(row, i) += q.grad[0];
      dtheta(row, j) -= q.grad[0];
      dv(row, i) += q.grad[1];
      dv(row, j) += q.grad[2];
    };
    scatter(d.p_from, jac.dp_dtheta, jac.dp_dv, i);
    scatter(d.q_from, jac.dq_dtheta, jac.dq_dv, i);
    scatter(d.p_to, jac.dp_dtheta, jac.dp_dv, j);
    scatter(d.q_to, jac.dq_dtheta, jac.dq_dv, j);
  }
  return jac;
}

Matrix weighted_injection_hessian(const NetworkState& state, const CaseData& data,
                                  const Vector& w_p, const Vector& w_q) {
  const int n = static_cast<int>(data.buses.size());
  Matrix H = Matrix::Zero(2 * n, 2 * n);
  for (int i = 0; i < n; ++i) {
    const Bus& bus = data.buses[i];
    H(n + i, n + i) += w_p[i] * 2.0 * bus.shunt_g - w_q[i] * 2.0 * bus.shunt_b;
  }
  for (const Branch& br : data.branches) {
    const int i = data.bus_index(br.from);
    const int j = data.bus_index(br.to);
    BranchFlowDerivatives d = branch_flow_derivatives(
        state.v[i], state.v[j], state.theta[i] - state.theta[j], br);
    // Local coordinates (t, vi, vj) -> global slots (theta_i, theta_j, v_i, v_j)
    // with d/dtheta_i = +d/dt, d/dtheta_j = -d/dt.
    const int slot[4] = {i, j, n + i, n + j};
    const double sign[4] = {1.0, -1.0, 1.0, 1.0};
    const int local[4] = {0, 0, 1, 2};
    auto add = [&](const FlowQuantity& q, double w) {
      if (w == 0.0) return;
      for (int a = 0; a < 4; ++a) {
        for (int b = 0; b < 4; ++b) {
          H(slot[a], slot[b]) += w * sign[a] * sign[b] * q.hess(local[a], local[b]);
        }
      }
    };
    add(d.p_from, w_p[i]);
    add(d.q_from, w_q[i]);
    add(d.p_to, w_p[j]);
    add(d.q_to, w_q[j]);
  }
  return H;
}

CaseData apply_paper_model(CaseData data) {
  for (Branch& br : data.branches) {
    br.tap_ratio = 1.0;
    br.phase_shift = 0.0;
    br.phase_shift_deg = 0.0;
  }
  for (Bus& bus : data.buses) {
    bus.shunt_g = 0.0;
    bus.shunt_b = 0.0;
  }
  return data;
}

}  // namespace opf
