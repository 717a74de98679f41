#pragma once

#include "opf/caseio.hpp"
#include "opf/network.hpp"

#include <memory>
#include <string>
#include <vector>

namespace opf {

/// A smooth constrained program
///   min f(x)  s.t.  c(x) = 0,  h(x) <= 0,  l <= x <= u
/// with dense derivative callbacks. Components with l == u are fixed
/// parameters; infinite bounds mark free directions.
class NlpProblem {
 public:
  virtual ~NlpProblem() = default;

  int num_vars() const { return static_cast<int>(lower_.size()); }
  int num_eq() const { return num_eq_; }
  int num_ineq() const { return num_ineq_; }
  const Vector& lower_bounds() const { return lower_; }
  const Vector& upper_bounds() const { return upper_; }

  virtual double objective(const Vector& x) const = 0;
  virtual void objective_gradient(const Vector& x, Vector& grad) const = 0;
  virtual void eq_constraints(const Vector& x, Vector& c) const = 0;
  virtual void eq_jacobian(const Vector& x, Matrix& jac) const = 0;
  virtual void ineq_constraints(const Vector& x, Vector& h) const = 0;
  virtual void ineq_jacobian(const Vector& x, Matrix& jac) const = 0;
  /// obj_weight * hess f + sum mu_eq[k] hess c_k + sum lam_ineq[k] hess h_k.
  virtual void lagrangian_hessian(const Vector& x, double obj_weight,
                                  const Vector& mu_eq, const Vector& lam_ineq,
                                  Matrix& hess) const = 0;

 protected:
  void set_sizes(Vector lower, Vector upper, int num_eq, int num_ineq) {
    lower_ = std::move(lower);
    upper_ = std::move(upper);
    num_eq_ = num_eq;
    num_ineq_ = num_ineq;
  }

 private:
  Vector lower_, upper_;
  int num_eq_ = 0;
  int num_ineq_ = 0;
};

/// Consistent value/derivative bundle at one point.
struct Evaluation {
  double objective = 0.0;
  Vector gradient;
  Vector c;  // equalities
  Vector h;  // inequalities
  Matrix jac_eq;
  Matrix jac_ineq;
  Matrix lagrangian_hessian;  // with the supplied multipliers, obj weight 1
};

Evaluation evaluate(const NlpProblem& problem, const Vector& x,
                    const Vector& mu_eq, const Vector& lam_ineq);

/// Per-bus prices on the active/reactive balance equalities.
struct DualPrices {
  Vector mu_p;  // one per bus
  Vector mu_q;
};

enum class BalanceKind { Active, Reactive };

struct EqualityLabel {
  int bus_index = 0;  // position in CaseData::buses
  int bus_id = 0;
  BalanceKind kind = BalanceKind::Active;
};

/// Variable ordering for the ACOPF problems: angles for every non-reference
/// bus, then all voltage magnitudes, then generator active and reactive
/// outputs. The reference angle is not a variable (fixed at 0).
struct VariableLayout {
  int n_bus = 0;
  int n_gen = 0;
  int ref = 0;  // reference bus index

  int num_vars() const { return n_bus - 1 + n_bus + 2 * n_gen; }
  int theta_var(int bus_index) const {
    if (bus_index == ref) return -1;
    return bus_index < ref ? bus_index : bus_index - 1;
  }
  int v_var(int bus_index) const { return n_bus - 1 + bus_index; }
  int pg_var(int gen_index) const { return n_bus - 1 + n_bus + gen_index; }
  int qg_var(int gen_index) const { return n_bus - 1 + n_bus + n_gen + gen_index; }
};

struct AcopfOptions {
  bool paper_model = false;  // force tap = 1, shifts = 0, shunts = 0
};

/// ACOPF expressed over the layout above, in primal form (balance
/// equalities present) or partial-Lagrangian form (balance terms folded
/// into the objective with fixed prices; no equalities). Both forms share
/// the variable layout, bounds, and flow-limit inequalities.
class AcopfProblem : public NlpProblem {
 public:
  double objective(const Vector& x) const override;
  void objective_gradient(const Vector& x, Vector& grad) const override;
  void eq_constraints(const Vector& x, Vector& c) const override;
  void eq_jacobian(const Vector& x, Matrix& jac) const override;
  void ineq_constraints(const Vector& x, Vector& h) const override;
  void ineq_jacobian(const Vector& x, Matrix& jac) const override;
  void lagrangian_hessian(const Vector& x, double obj_weight, const Vector& mu_eq,
                          const Vector& lam_ineq, Matrix& hess) const override;

  const VariableLayout& layout() const { return layout_; }
  const CaseData& case_data() const { return case_; }
  const std::vector<EqualityLabel>& equality_labels() const { return labels_; }
  bool is_partial_lagrangian() const { return !with_equalities_; }

  /// (theta, v) over all buses for a point in this layout; reference angle 0.
  NetworkState state_from_point(const Vector& x) const;

  /// Point in this layout from a start. Missing generator values are
  /// re-initialized by evaluating the balance equations at (theta, v) and
  /// clamping into bounds.
  Vector make_start_vector(const StartPoint& start) const;

  /// Start with the (theta, v) part of a solved point, generation
  /// re-initialized as in make_start_vector.
  StartPoint start_from_point(const Vector& x) const;

  /// Equality duals of a primal solve addressed per bus.
  DualPrices dual_prices(const Vector& eq_duals) const;

 private:
  friend std::shared_ptr<AcopfProblem> assemble_primal(const CaseData&,
                                                       const AcopfOptions&);
  friend std::shared_ptr<AcopfProblem> assemble_partial_lagrangian(
      const CaseData&, const DualPrices&, const AcopfOptions&);

  void init(const CaseData& data, const AcopfOptions& opts, bool with_equalities,
            DualPrices duals);

  // Balance residuals/Jacobian over this layout, including generator columns.
  void balance_residuals(const Vector& x, Vector& r) const;
  void balance_jacobian(const Vector& x, Matrix& jac) const;
  Matrix balance_weighted_hessian(const Vector& x, const Vector& w) const;
  double cost_value(const Vector& x) const;
  void add_cost_gradient(const Vector& x, Vector& grad) const;

  CaseData case_;
  VariableLayout layout_;
  std::vector<EqualityLabel> labels_;
  std::vector<int> from_idx_, to_idx_;   // per branch
  std::vector<int> rated_;               // branch indices with s_max > 0
  std::vector<std::vector<int>> gens_at_;  // per bus, generator indices
  DualPrices duals_;  // non-empty in partial-Lagrangian form
  bool with_equalities_ = true;
};

/// The full problem: cost objective, balance equalities, voltage/generation
/// bounds, squared flow-limit inequalities for every rated branch.
std::shared_ptr<AcopfProblem> assemble_primal(const CaseData& data,
                                              const AcopfOptions& opts = {});

/// The partial Lagrangian at fixed prices: balance equalities removed, the
/// objective becomes cost + mu_p . r_p + mu_q . r_q; everything else as in
/// the primal. Throws std::invalid_argument on non-finite duals.
std::shared_ptr<AcopfProblem> assemble_partial_lagrangian(
    const CaseData& data, const DualPrices& duals, const AcopfOptions& opts = {});

}  // namespace opf
