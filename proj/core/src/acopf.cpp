#include "opf/acopf.hpp"

#include <cmath>
#include <limits>
#include <stdexcept>

namespace opf {

namespace {
constexpr double kInf = std::numeric_limits<double>::infinity();
}

Evaluation evaluate(const NlpProblem& problem, const Vector& x,
                    const Vector& mu_eq, const Vector& lam_ineq) {
  if (x.size() != problem.num_vars()) {
    throw std::invalid_argument("evaluate: point has dimension " +
                                std::to_string(x.size()) + ", expected " +
                                std::to_string(problem.num_vars()));
  }
  if (mu_eq.size() != problem.num_eq() || lam_ineq.size() != problem.num_ineq()) {
    throw std::invalid_argument("evaluate: multiplier dimensions do not match problem");
  }
  Evaluation ev;
  ev.objective = problem.objective(x);
  problem.objective_gradient(x, ev.gradient);
  problem.eq_constraints(x, ev.c);
  problem.eq_jacobian(x, ev.jac_eq);
  problem.ineq_constraints(x, ev.h);
  problem.ineq_jacobian(x, ev.jac_ineq);
  problem.lagrangian_hessian(x, 1.0, mu_eq, lam_ineq, ev.lagrangian_hessian);
  return ev;
}

void AcopfProblem::init(const CaseData& data, const AcopfOptions& opts,
                        bool with_equalities, DualPrices duals) {
  case_ = opts.paper_model ? apply_paper_model(data) : data;
  with_equalities_ = with_equalities;
  duals_ = std::move(duals);

  const int n = static_cast<int>(case_.buses.size());
  const int ng = static_cast<int>(case_.generators.size());
  layout_.n_bus = n;
  layout_.n_gen = ng;
  layout_.ref = case_.reference_index();
  if (layout_.ref < 0) throw std::invalid_argument("case has no reference bus");

  from_idx_.clear();
  to_idx_.clear();
  for (size_t k = 0; k < case_.branches.size(); ++k) {
    from_idx_.push_back(case_.bus_index(case_.branches[k].from));
    to_idx_.push_back(case_.bus_index(case_.branches[k].to));
    if (case_.branches[k].s_max > 0) rated_.push_back(static_cast<int>(k));
  }
  gens_at_.assign(n, {});
  for (int g = 0; g < ng; ++g) {
    gens_at_[case_.bus_index(case_.generators[g].bus)].push_back(g);
  }

  const int nv = layout_.num_vars();
  Vector lower = Vector::Constant(nv, -kInf);
  Vector upper = Vector::Constant(nv, kInf);
  for (int i = 0; i < n; ++i) {
    lower[layout_.v_var(i)] = case_.buses[i].v_min;
    upper[layout_.v_var(i)] = case_.buses[i].v_max;
  }
  for (int g = 0; g < ng; ++g) {
    lower[layout_.pg_var(g)] = case_.generators[g].p_min;
    upper[layout_.pg_var(g)] = case_.generators[g].p_max;
    lower[layout_.qg_var(g)] = case_.generators[g].q_min;
    upper[layout_.qg_var(g)] = case_.generators[g].q_max;
  }

  labels_.clear();
  if (with_equalities_) {
    for (int i = 0; i < n; ++i) {
      labels_.push_back({i, case_.buses[i].id, BalanceKind::Active});
    }
    for (int i = 0; i < n; ++i) {
      labels_.push_back({i, case_.buses[i].id, BalanceKind::Reactive});
    }
  }
  set_sizes(std::move(lower), std::move(upper),
            with_equalities_ ? 2 * n : 0, 2 * static_cast<int>(rated_.size()));
}

NetworkState AcopfProblem::state_from_point(const Vector& x) const {
  NetworkState st;
  st.theta = Vector::Zero(layout_.n_bus);
  st.v = Vector::Zero(layout_.n_bus);
  for (int i = 0; i < layout_.n_bus; ++i) {
    int tv = layout_.theta_var(i);
    st.theta[i] = tv < 0 ? 0.0 : x[tv];
    st.v[i] = x[layout_.v_var(i)];
  }
  return st;
}

void AcopfProblem::balance_residuals(const Vector& x, Vector& r) const {
  const int n = layout_.n_bus;
  NetworkState st = state_from_point(x);
  Vector p_gen = Vector::Zero(n), q_gen = Vector::Zero(n);
  for (int g = 0; g < layout_.n_gen; ++g) {
    int b = case_.bus_index(case_.generators[g].bus);
    p_gen[b] += x[layout_.pg_var(g)];
    q_gen[b] += x[layout_.qg_var(g)];
  }
  Vector r_p, r_q;
  injection_residuals(st, p_gen, q_gen, case_, r_p, r_q);
  r.resize(2 * n);
  r.head(n) = r_p;
  r.tail(n) = r_q;
}

void AcopfProblem::balance_jacobian(const Vector& x, Matrix& jac) const {
  const int n = layout_.n_bus;
  NetworkState st = state_from_point(x);
  InjectionJacobian ij = injection_jacobian(st, case_);
  jac = Matrix::Zero(2 * n, num_vars());
  for (int row = 0; row < n; ++row) {
    for (int col = 0; col < n; ++col) {
      int tv = layout_.theta_var(col);
      if (tv >= 0) {
        jac(row, tv) = ij.dp_dtheta(row, col);
        jac(n + row, tv) = ij.dq_dtheta(row, col);
      }
      int vv = layout_.v_var(col);
      jac(row, vv) = ij.dp_dv(row, col);
      jac(n + row, vv) = ij.dq_dv(row, col);
    }
  }
  for (int g = 0; g < layout_.n_gen; ++g) {
    int b = case_.bus_index(case_.generators[g].bus);
    jac(b, layout_.pg_var(g)) = -1.0;
    jac(n + b, layout_.qg_var(g)) = -1.0;
  }
}

Matrix AcopfProblem::balance_weighted_hessian(const Vector& x, const Vector& w) const {
  const int n = layout_.n_bus;
  NetworkState st = state_from_point(x);
  Matrix Hz = weighted_injection_hessian(st, case_, w.head(n), w.tail(n));
  Matrix H = Matrix::Zero(num_vars(), num_vars());
  // Map stacked (theta_1..n, v_1..n) coordinates into the variable layout;
  // the reference angle row/column is dropped (it is not a variable).
  std::vector<int> slot(2 * n);
  for (int i = 0; i < n; ++i) {
    slot[i] = layout_.theta_var(i);
    slot[n + i] = layout_.v_var(i);
  }
  for (int a = 0; a < 2 * n; ++a) {
    if (slot[a] < 0) continue;
    for (int b = 0; b < 2 * n; ++b) {
      if (slot[b] < 0) continue;
      H(slot[a], slot[b]) += Hz(a, b);
    }
  }
  return H;
}

double AcopfProblem::cost_value(const Vector& x) const {
  double total = 0.0;
  for (const CostFunction& c : case_.costs) {
    const double p = x[layout_.pg_var(c.generator)];
    total += c.constant + c.linear * p + c.quadratic * p * p;
  }
  return total;
}

void AcopfProblem::add_cost_gradient(const Vector& x, Vector& grad) const {
  for (const CostFunction& c : case_.costs) {
    const int var = layout_.pg_var(c.generator);
    grad[var] += c.linear + 2.0 * c.quadratic * x[var];
  }
}

double AcopfProblem::objective(const Vector& x) const {
  double f = cost_value(x);
  if (!with_equalities_) {
    Vector r;
    balance_residuals(x, r);
    const int n = layout_.n_bus;
    f += duals_.mu_p.dot(r.head(n)) + duals_.mu_q.dot(r.tail(n));
  }
  return f;
}

void AcopfProblem::objective_gradient(const Vector& x, Vector& grad) const {
  grad = Vector::Zero(num_vars());
  add_cost_gradient(x, grad);
  if (!with_equalities_) {
    Matrix jac;
    balance_jacobian(x, jac);
    const int n = layout_.n_bus;
    grad += jac.topRows(n).transpose() * duals_.mu_p;
    grad += jac.bottomRows(n).transpose() * duals_.mu_q;
  }
}

void AcopfProblem::eq_constraints(const Vector& x, Vector& c) const {
  if (!with_equalities_) {
    c.resize(0);
    return;
  }
  balance_residuals(x, c);
}

void AcopfProblem::eq_jacobian(const Vector& x, Matrix& jac) const {
  if (!with_equalities_) {
    jac.resize(0, num_vars());
    return;
  }
  balance_jacobian(x, jac);
}

void AcopfProblem::ineq_constraints(const Vector& x, Vector& h) const {
  h.resize(num_ineq());
  NetworkState st = state_from_point(x);
  for (size_t k = 0; k < rated_.size(); ++k) {
    const int br_idx = rated_[k];
    const Branch& br = case_.branches[br_idx];
    const int i = from_idx_[br_idx], j = to_idx_[br_idx];
    BranchFlow f = branch_flow(st.v[i], st.v[j], st.theta[i] - st.theta[j], br);
    const double cap = br.s_max * br.s_max;
    h[2 * k] = f.p_from * f.p_from + f.q_from * f.q_from - cap;
    h[2 * k + 1] = f.p_to * f.p_to + f.q_to * f.q_to - cap;
  }
}

void AcopfProblem::ineq_jacobian(const Vector& x, Matrix& jac) const {
  jac = Matrix::Zero(num_ineq(), num_vars());
  NetworkState st = state_from_point(x);
  for (size_t k = 0; k < rated_.size(); ++k) {
    const int br_idx = rated_[k];
    const Branch& br = case_.branches[br_idx];
    const int i = from_idx_[br_idx], j = to_idx_[br_idx];
    BranchFlowDerivatives d = branch_flow_derivatives(
        st.v[i], st.v[j], st.theta[i] - st.theta[j], br);
    const int ti = layout_.theta_var(i), tj = layout_.theta_var(j);
    const int vi = layout_.v_var(i), vj = layout_.v_var(j);
    auto scatter = [&](int row, const FlowQuantity& p, const FlowQuantity& q) {
      Eigen::Vector3d g3 = 2.0 * (p.value * p.grad + q.value * q.grad);
      if (ti >= 0) jac(row, ti) += g3[0];
      if (tj >= 0) jac(row, tj) -= g3[0];
      jac(row, vi) += g3[1];
      jac(row, vj) += g3[2];
    };
    scatter(static_cast<int>(2 * k), d.p_from, d.q_from);
    scatter(static_cast<int>(2 * k + 1), d.p_to, d.q_to);
  }
}

void AcopfProblem::lagrangian_hessian(const Vector& x, double obj_weight,
                                      const Vector& mu_eq, const Vector& lam_ineq,
                                      Matrix& hess) const {
  const int n = layout_.n_bus;
  hess = Matrix::Zero(num_vars(), num_vars());
  for (const CostFunction& c : case_.costs) {
    const int var = layout_.pg_var(c.generator);
    hess(var, var) += obj_weight * 2.0 * c.quadratic;
  }
  // Balance curvature enters through the equality duals in primal form and
  // through the fixed prices (weighted by the objective) in Lagrangian form.
  Vector w;
  if (with_equalities_) {
    if (mu_eq.size() != 2 * n) {
      throw std::invalid_argument("lagrangian_hessian: equality multiplier size mismatch");
    }
    w = mu_eq;
  } else {
    w.resize(2 * n);
    w.head(n) = obj_weight * duals_.mu_p;
    w.tail(n) = obj_weight * duals_.mu_q;
  }
  if (w.size() > 0 && (w.array() != 0.0).any()) {
    hess += balance_weighted_hessian(x, w);
  }

  if (lam_ineq.size() != num_ineq()) {
    throw std::invalid_argument("lagrangian_hessian: inequality multiplier size mismatch");
  }
  NetworkState st = state_from_point(x);
  for (size_t k = 0; k < rated_.size(); ++k) {
    const int br_idx = rated_[k];
    const Branch& br = case_.branches[br_idx];
    const int i = from_idx_[br_idx], j = to_idx_[br_idx];
    const int ti = layout_.theta_var(i), tj = layout_.theta_var(j);
    const int vi = layout_.v_var(i), vj = layout_.v_var(j);
    const int slot[4] = {ti, tj, vi, vj};
    const double sign[4] = {1.0, -1.0, 1.0, 1.0};
    const int local[4] = {0, 0, 1, 2};
    BranchFlowDerivatives d = branch_flow_derivatives(
        st.v[i], st.v[j], st.theta[i] - st.theta[j], br);
    auto add_sq = [&](const FlowQuantity& q, double w_k) {
      // hess of q^2 = 2 (grad q grad q^T + q hess q)
      if (w_k == 0.0) return;
      for (int a = 0; a < 4; ++a) {
        if (slot[a] < 0) continue;
        for (int bcol = 0; bcol < 4; ++bcol) {
          if (slot[bcol] < 0) continue;
          const double term = q.grad[local[a]] * q.grad[local[bcol]] +
                              q.value * q.hess(local[a], local[bcol]);
          hess(slot[a], slot[bcol]) += w_k * 2.0 * sign[a] * sign[bcol] * term;
        }
      }
    };
    add_sq(d.p_from, lam_ineq[2 * k]);
    add_sq(d.q_from, lam_ineq[2 * k]);
    add_sq(d.p_to, lam_ineq[2 * k + 1]);
    add_sq(d.q_to, lam_ineq[2 * k + 1]);
  }
}

Vector AcopfProblem::make_start_vector(const StartPoint& start) const {
  const int n = layout_.n_bus;
  if (start.theta.size() != n || start.v.size() != n) {
    throw std::invalid_argument("start point dimensions do not match case");
  }
  Vector x = Vector::Zero(num_vars());
  for (int i = 0; i < n; ++i) {
    int tv = layout_.theta_var(i);
    if (tv >= 0) x[tv] = start.theta[i] - start.theta[layout_.ref];
    x[layout_.v_var(i)] = start.v[i];
  }
  auto clamp = [&](double value, int var) {
    return std::min(std::max(value, lower_bounds()[var]), upper_bounds()[var]);
  };
  if (start.p_gen && start.q_gen) {
    if (start.p_gen->size() != layout_.n_gen || start.q_gen->size() != layout_.n_gen) {
      throw std::invalid_argument("start point generator dimensions do not match case");
    }
    for (int g = 0; g < layout_.n_gen; ++g) {
      x[layout_.pg_var(g)] = clamp((*start.p_gen)[g], layout_.pg_var(g));
      x[layout_.qg_var(g)] = clamp((*start.q_gen)[g], layout_.qg_var(g));
    }
    return x;
  }
  // Required net generation per bus from the balance equations at (theta, v),
  // split evenly across co-located units and clamped into bounds.
  NetworkState st;
  st.theta = start.theta;
  st.v = start.v;
  Vector zero = Vector::Zero(n);
  Vector need_p, need_q;
  injection_residuals(st, zero, zero, case_, need_p, need_q);
  for (int i = 0; i < n; ++i) {
    const auto& gens = gens_at_[i];
    if (gens.empty()) continue;
    const double share_p = need_p[i] / static_cast<double>(gens.size());
    const double share_q = need_q[i] / static_cast<double>(gens.size());
    for (int g : gens) {
      x[layout_.pg_var(g)] = clamp(share_p, layout_.pg_var(g));
      x[layout_.qg_var(g)] = clamp(share_q, layout_.qg_var(g));
    }
  }
  return x;
}

StartPoint AcopfProblem::start_from_point(const Vector& x) const {
  NetworkState st = state_from_point(x);
  StartPoint sp;
  sp.theta = st.theta;
  sp.v = st.v;
  return sp;
}

DualPrices AcopfProblem::dual_prices(const Vector& eq_duals) const {
  if (!with_equalities_ || eq_duals.size() != 2 * layout_.n_bus) {
    throw std::invalid_argument("dual_prices: not a primal solve or size mismatch");
  }
  DualPrices dp;
  dp.mu_p = eq_duals.head(layout_.n_bus);
  dp.mu_q = eq_duals.tail(layout_.n_bus);
  return dp;
}

std::shared_ptr<AcopfProblem> assemble_primal(const CaseData& data,
                                              const AcopfOptions& opts) {
  auto problem = std::make_shared<AcopfProblem>();
  problem->init(data, opts, /*with_equalities=*/true, DualPrices{});
  return problem;
}

std::shared_ptr<AcopfProblem> assemble_partial_lagrangian(
    const CaseData& data, const DualPrices& duals, const AcopfOptions& opts) {
  const int n = static_cast<int>(data.buses.size());
  if (duals.mu_p.size() != n || duals.mu_q.size() != n) {
    throw std::invalid_argument("dual price dimensions do not match case");
  }
  if (!duals.mu_p.allFinite() || !duals.mu_q.allFinite()) {
    throw std::invalid_argument("dual prices must be finite");
  }
  auto problem = std::make_shared<AcopfProblem>();
  problem->init(data, opts, /*with_equalities=*/false, duals);
  return problem;
}

}  // namespace opf
