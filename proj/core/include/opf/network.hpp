#pragma once

#include "opf/caseio.hpp"

#include <Eigen/Core>

namespace opf {

struct NetworkState {
  Vector theta;  // radians per bus
  Vector v;      // p.u. per bus
};

struct BranchFlow {
  double p_from = 0.0, q_from = 0.0;
  double p_to = 0.0, q_to = 0.0;
};

/// One flow quantity with analytic derivatives in the local coordinates
/// u = (theta_ij, v_i, v_j), where theta_ij = theta_i - theta_j. Derivatives
/// with respect to theta_i / theta_j follow by the chain rule with signs
/// +1 / -1 on the first coordinate.
struct FlowQuantity {
  double value = 0.0;
  Eigen::Vector3d grad = Eigen::Vector3d::Zero();
  Eigen::Matrix3d hess = Eigen::Matrix3d::Zero();
};

struct BranchFlowDerivatives {
  FlowQuantity p_from, q_from, p_to, q_to;
};

/// Power flowing into the branch at each end. With tap_ratio = 1 and
/// phase_shift = 0 this is the textbook polar flow pair in the g - jb
/// convention, charging split half per side:
///   P_f = Vi^2 g - Vi Vj (g cos t - b sin t)
///   Q_f = Vi^2 (b - bC/2) - Vi Vj (b cos t + g sin t)
/// An off-nominal tap divides the from-side voltage by tap_ratio; a phase
/// shift is subtracted from theta_ij.
BranchFlow branch_flow(double v_i, double v_j, double theta_ij, const Branch& br);

/// branch_flow plus first and second derivatives.
BranchFlowDerivatives branch_flow_derivatives(double v_i, double v_j,
                                              double theta_ij, const Branch& br);

/// Per-bus balance residuals in the "demand plus flows minus generation"
/// sign convention:
///   r_p[i] = P_load[i] + sum_j P_f[ij] + shunt_g[i] v_i^2 - p_gen[i]
///   r_q[i] = Q_load[i] + sum_j Q_f[ij] - shunt_b[i] v_i^2 - q_gen[i]
/// p_gen / q_gen are per-bus totals (generators already aggregated).
void injection_residuals(const NetworkState& state, const Vector& p_gen,
                         const Vector& q_gen, const CaseData& data,
                         Vector& r_p, Vector& r_q);

/// Dense Jacobians of the balance residuals with respect to the full
/// per-bus (theta, v) coordinates. Entries outside branch endpoints are 0.
struct InjectionJacobian {
  Matrix dp_dtheta, dp_dv, dq_dtheta, dq_dv;  // n x n each
};
InjectionJacobian injection_jacobian(const NetworkState& state, const CaseData& data);

/// sum_i (w_p[i] * hess r_p[i] + w_q[i] * hess r_q[i]) over the stacked
/// coordinates z = (theta_1..theta_n, v_1..v_n); returns a 2n x 2n matrix.
Matrix weighted_injection_hessian(const NetworkState& state, const CaseData& data,
                                  const Vector& w_p, const Vector& w_q);

/// Copy of the case with tap ratios forced to 1, phase shifts and bus
/// shunts to 0 (the model exactly as stated, without the transformer and
/// shunt extensions). Line charging is kept.
CaseData apply_paper_model(CaseData data);

}  // namespace opf
