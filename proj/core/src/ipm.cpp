#include "opf/ipm.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <limits>
#include <stdexcept>
#include <vector>

#include <lapacke.h>

namespace opf {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

const char* kStatusNames[] = {"converged", "max-iterations", "infeasible-detected"};

struct Inertia {
  int pos = 0, neg = 0, zero = 0;
};

/// Bunch-Kaufman factorization of a symmetric indefinite matrix, exposing
/// the inertia of the block-diagonal factor.
class SymmetricFactor {
 public:
  // Returns false when the factorization hits an exactly singular pivot.
  bool factor(const Matrix& K) {
    dim_ = static_cast<int>(K.rows());
    a_ = K;
    ipiv_.resize(dim_);
    lapack_int info = LAPACKE_dsytrf(LAPACK_COL_MAJOR, 'L', dim_, a_.data(),
                                     dim_, ipiv_.data());
    if (info < 0) throw std::runtime_error("dsytrf: invalid argument");
    return info == 0;
  }

  Inertia inertia() const {
    Inertia in;
    int k = 0;
    while (k < dim_) {
      if (ipiv_[k] > 0) {
        const double d = a_(k, k);
        if (d > 0) ++in.pos;
        else if (d < 0) ++in.neg;
        else ++in.zero;
        ++k;
      } else {
        const double p = a_(k, k), q = a_(k + 1, k + 1), r = a_(k + 1, k);
        const double det = p * q - r * r;
        if (det < 0) {
          ++in.pos;
          ++in.neg;
        } else if (det > 0) {
          if (p + q > 0) in.pos += 2;
          else in.neg += 2;
        } else {
          ++in.zero;
          if (p + q > 0) ++in.pos;
          else if (p + q < 0) ++in.neg;
          else ++in.zero;
        }
        k += 2;
      }
    }
    return in;
  }

  Vector solve(const Vector& rhs) const {
    Vector sol = rhs;
    lapack_int info = LAPACKE_dsytrs(LAPACK_COL_MAJOR, 'L', dim_, 1,
                                     const_cast<double*>(a_.data()), dim_,
                                     const_cast<lapack_int*>(ipiv_.data()),
                                     sol.data(), dim_);
    if (info != 0) throw std::runtime_error("dsytrs failed");
    return sol;
  }

 private:
  int dim_ = 0;
  Matrix a_;
  std::vector<lapack_int> ipiv_;
};

/// Largest power of two <= gmax/gnorm, capped at 1: scaling by powers of
/// two is exact in binary floating point, so scaled and unscaled residuals
/// agree bit-for-bit after unscaling.
double pow2_scale(double gnorm, double gmax) {
  if (!(gnorm > gmax)) return 1.0;
  return std::exp2(std::floor(std::log2(gmax / gnorm)));
}

/// Gradient-based row scaling of an NLP, computed once at the start point:
/// objective and constraint rows whose gradients exceed gmax at x0 are
/// scaled down. Bounds and the variable space are untouched.
class ScaledNlp : public NlpProblem {
 public:
  ScaledNlp(const NlpProblem& base, const Vector& x0, double gmax) : base_(base) {
    Vector grad;
    Matrix je, ji;
    base.objective_gradient(x0, grad);
    base.eq_jacobian(x0, je);
    base.ineq_jacobian(x0, ji);
    sf_ = pow2_scale(grad.size() ? grad.cwiseAbs().maxCoeff() : 0.0, gmax);
    sc_.resize(base.num_eq());
    for (int k = 0; k < base.num_eq(); ++k) {
      sc_[k] = pow2_scale(je.row(k).cwiseAbs().maxCoeff(), gmax);
    }
    sh_.resize(base.num_ineq());
    for (int k = 0; k < base.num_ineq(); ++k) {
      sh_[k] = pow2_scale(ji.row(k).cwiseAbs().maxCoeff(), gmax);
    }
    set_sizes(base.lower_bounds(), base.upper_bounds(), base.num_eq(),
              base.num_ineq());
  }

  double obj_scale() const { return sf_; }
  const Vector& eq_scale() const { return sc_; }
  const Vector& ineq_scale() const { return sh_; }

  double objective(const Vector& x) const override {
    return sf_ * base_.objective(x);
  }
  void objective_gradient(const Vector& x, Vector& grad) const override {
    base_.objective_gradient(x, grad);
    grad *= sf_;
  }
  void eq_constraints(const Vector& x, Vector& c) const override {
    base_.eq_constraints(x, c);
    c.array() *= sc_.array();
  }
  void eq_jacobian(const Vector& x, Matrix& jac) const override {
    base_.eq_jacobian(x, jac);
    jac.array().colwise() *= sc_.array();
  }
  void ineq_constraints(const Vector& x, Vector& h) const override {
    base_.ineq_constraints(x, h);
    h.array() *= sh_.array();
  }
  void ineq_jacobian(const Vector& x, Matrix& jac) const override {
    base_.ineq_jacobian(x, jac);
    jac.array().colwise() *= sh_.array();
  }
  void lagrangian_hessian(const Vector& x, double obj_weight, const Vector& mu_eq,
                          const Vector& lam_ineq, Matrix& hess) const override {
    base_.lagrangian_hessian(x, obj_weight * sf_,
                             (mu_eq.array() * sc_.array()).matrix(),
                             (lam_ineq.array() * sh_.array()).matrix(), hess);
  }

 private:
  const NlpProblem& base_;
  double sf_ = 1.0;
  Vector sc_, sh_;
};

struct BoundInfo {
  Vector lo, up;
  std::vector<bool> has_lo, has_up, fixed;
};

BoundInfo make_bounds(const NlpProblem& prob, int mi) {
  const int n = prob.num_vars();
  const int N = n + mi;
  BoundInfo b;
  b.lo = Vector::Constant(N, -kInf);
  b.up = Vector::Constant(N, kInf);
  b.lo.head(n) = prob.lower_bounds();
  b.up.head(n) = prob.upper_bounds();
  b.lo.tail(mi).setZero();  // slacks >= 0
  b.has_lo.resize(N);
  b.has_up.resize(N);
  b.fixed.resize(N);
  for (int j = 0; j < N; ++j) {
    b.has_lo[j] = std::isfinite(b.lo[j]);
    b.has_up[j] = std::isfinite(b.up[j]);
    b.fixed[j] = b.has_lo[j] && b.has_up[j] && b.up[j] - b.lo[j] <= 1e-12;
  }
  return b;
}

struct ProblemEval {
  double f = 0.0;
  Vector grad;     // size n
  Vector c, h;     // me, mi
  Matrix je, ji;   // me x n, mi x n
};

void eval_values(const NlpProblem& prob, const Vector& x, ProblemEval& ev) {
  ev.f = prob.objective(x);
  prob.eq_constraints(x, ev.c);
  prob.ineq_constraints(x, ev.h);
}

void eval_derivatives(const NlpProblem& prob, const Vector& x, ProblemEval& ev) {
  prob.objective_gradient(x, ev.grad);
  prob.eq_jacobian(x, ev.je);
  prob.ineq_jacobian(x, ev.ji);
}

double max_dual_norm(const Vector& a, const Vector& b, const Vector& c,
                     const Vector& d) {
  double m = 0.0;
  if (a.size()) m = std::max(m, a.cwiseAbs().maxCoeff());
  if (b.size()) m = std::max(m, b.cwiseAbs().maxCoeff());
  if (c.size()) m = std::max(m, c.cwiseAbs().maxCoeff());
  if (d.size()) m = std::max(m, d.cwiseAbs().maxCoeff());
  return m;
}

/// KKT blocks from precomputed pieces; `stat` is the assembled stationarity
/// vector grad f + J_eq' mu + J_ineq' lambda - z_l + z_u.
double kkt_core(const Vector& x, const Vector& lo, const Vector& up,
                const Vector& stat, const Vector& c, const Vector& h,
                const Vector& eq_duals, const Vector& ineq_duals,
                const Vector& z_lower, const Vector& z_upper) {
  const int n = static_cast<int>(x.size());
  double r_stat = 0.0, r_feas = 0.0, r_comp = 0.0;
  for (int j = 0; j < n; ++j) {
    const bool fin_lo = std::isfinite(lo[j]), fin_up = std::isfinite(up[j]);
    const bool fixed = fin_lo && fin_up && up[j] - lo[j] <= 1e-12;
    if (fin_lo) r_feas = std::max(r_feas, lo[j] - x[j]);
    if (fin_up) r_feas = std::max(r_feas, x[j] - up[j]);
    if (fixed) continue;  // stationarity absorbed by the fixing multiplier
    r_stat = std::max(r_stat, std::abs(stat[j]));
    if (fin_lo) r_comp = std::max(r_comp, std::abs(z_lower[j] * (x[j] - lo[j])));
    if (fin_up) r_comp = std::max(r_comp, std::abs(z_upper[j] * (up[j] - x[j])));
  }
  for (int k = 0; k < c.size(); ++k) r_feas = std::max(r_feas, std::abs(c[k]));
  for (int k = 0; k < h.size(); ++k) {
    r_feas = std::max(r_feas, h[k]);
    r_comp = std::max(r_comp, std::abs(ineq_duals[k] * h[k]));
  }
  const double s_dual =
      1.0 + max_dual_norm(eq_duals, ineq_duals, z_lower, z_upper);
  const double s_primal = 1.0 + (x.size() ? x.cwiseAbs().maxCoeff() : 0.0);
  return std::max({r_stat / s_dual, r_feas / s_primal, r_comp / s_dual});
}

}  // namespace

const char* to_string(SolveStatus status) {
  return kStatusNames[static_cast<int>(status)];
}

double kkt_residual(const NlpProblem& prob, const Vector& x,
                    const Vector& eq_duals, const Vector& ineq_duals,
                    const Vector& z_lower, const Vector& z_upper) {
  const int n = prob.num_vars();
  if (x.size() != n || eq_duals.size() != prob.num_eq() ||
      ineq_duals.size() != prob.num_ineq() || z_lower.size() != n ||
      z_upper.size() != n) {
    throw std::invalid_argument("kkt_residual: dimension mismatch");
  }
  ProblemEval ev;
  eval_values(prob, x, ev);
  eval_derivatives(prob, x, ev);
  Vector stat = ev.grad;
  if (ev.c.size()) stat += ev.je.transpose() * eq_duals;
  if (ev.h.size()) stat += ev.ji.transpose() * ineq_duals;
  stat -= z_lower;
  stat += z_upper;
  return kkt_core(x, prob.lower_bounds(), prob.upper_bounds(), stat, ev.c, ev.h,
                  eq_duals, ineq_duals, z_lower, z_upper);
}

double kkt_residual(const NlpProblem& prob, const NlpSolution& sol) {
  return kkt_residual(prob, sol.x, sol.eq_duals, sol.ineq_duals, sol.z_lower,
                      sol.z_upper);
}

NlpSolution solve(const NlpProblem& base, const Vector& start,
                  const SolverOptions& opts) {
  if (!(opts.tolerance > 0) || opts.max_iterations < 1) {
    throw std::invalid_argument("invalid solver options");
  }
  const int n = base.num_vars();
  if (start.size() != n) {
    throw std::invalid_argument("solve: start has dimension " +
                                std::to_string(start.size()) + ", expected " +
                                std::to_string(n));
  }
  const int me = base.num_eq(), mi = base.num_ineq();
  const int N = n + mi, M = me + mi;
  const BoundInfo bd = make_bounds(base, mi);
  const double kappa = opts.push_margin;

  // --- starting point, pushed strictly inside the bounds ---
  Vector xt(N);
  for (int j = 0; j < n; ++j) {
    double v = start[j];
    if (bd.fixed[j]) {
      v = 0.5 * (bd.lo[j] + bd.up[j]);
    } else if (bd.has_lo[j] && bd.has_up[j]) {
      const double w = bd.up[j] - bd.lo[j];
      const double pl = std::min(kappa * std::max(1.0, std::abs(bd.lo[j])), kappa * w);
      const double pu = std::min(kappa * std::max(1.0, std::abs(bd.up[j])), kappa * w);
      v = std::clamp(v, bd.lo[j] + pl, bd.up[j] - pu);
    } else if (bd.has_lo[j]) {
      v = std::max(v, bd.lo[j] + kappa * std::max(1.0, std::abs(bd.lo[j])));
    } else if (bd.has_up[j]) {
      v = std::min(v, bd.up[j] - kappa * std::max(1.0, std::abs(bd.up[j])));
    }
    xt[j] = v;
  }

  // Row scaling from the gradients at the pushed start. All factors are
  // powers of two, so the scaled KKT quantities unscale exactly and the
  // public (unscaled) residual is identical to a direct evaluation.
  const ScaledNlp prob(base, xt.head(n), 100.0);
  const double sf = prob.obj_scale();

  ProblemEval ev;
  eval_values(prob, xt.head(n), ev);
  for (int k = 0; k < mi; ++k) xt[n + k] = std::max(-ev.h[k], kappa);

  double mu = opts.barrier_init;
  const double mu_floor = opts.tolerance / 10.0;

  Vector y = Vector::Zero(M);
  Vector zl = Vector::Zero(N), zu = Vector::Zero(N);
  for (int j = 0; j < N; ++j) {
    if (bd.fixed[j]) continue;
    if (bd.has_lo[j]) zl[j] = std::clamp(mu / (xt[j] - bd.lo[j]), 1e-8, 1e8);
    if (bd.has_up[j]) zu[j] = std::clamp(mu / (bd.up[j] - xt[j]), 1e-8, 1e8);
  }

  double nu = 1.0;           // merit penalty weight
  double delta_last = 0.0;   // last successful inertia correction
  double delta_c_base = 0.0; // proximal relaxation of the constraint rows
  bool robust = false;       // stall recovery: convexified, relaxed steps
  int tiny_steps = 0;
  int bad_steps = 0;
  int healthy_steps = 0;

  NlpSolution best;
  best.kkt_residual = kInf;

  // Reported multipliers live in the unscaled problem: the inequality dual
  // is the slack bound dual, and every factor is an exact power of two.
  auto unscaled_eq_duals = [&]() -> Vector {
    return (y.head(me).array() * prob.eq_scale().array() / sf).matrix();
  };
  auto unscaled_ineq_duals = [&]() -> Vector {
    return (zl.tail(mi).array() * prob.ineq_scale().array() / sf).matrix();
  };

  auto snapshot = [&](double r_pub, SolveStatus status, int iters) {
    NlpSolution s;
    s.x = xt.head(n);
    s.eq_duals = unscaled_eq_duals();
    s.ineq_duals = unscaled_ineq_duals();
    s.z_lower = zl.head(n) / sf;
    s.z_upper = zu.head(n) / sf;
    s.status = status;
    s.kkt_residual = r_pub;
    s.iterations = iters;
    s.objective = base.objective(s.x);
    return s;
  };

  int iter = 0;
  for (; iter < opts.max_iterations; ++iter) {
    eval_values(prob, xt.head(n), ev);
    eval_derivatives(prob, xt.head(n), ev);

    // Public convergence check on the unscaled problem. The stationarity
    // vector is assembled in scaled space and unscaled exactly.
    Vector stat_scaled = ev.grad;
    if (me) stat_scaled += ev.je.transpose() * y.head(me);
    if (mi) stat_scaled += ev.ji.transpose() * zl.tail(mi);
    stat_scaled -= zl.head(n);
    stat_scaled += zu.head(n);
    const Vector mu_rep = unscaled_eq_duals();
    const Vector lam_rep = unscaled_ineq_duals();
    const double r_pub = kkt_core(
        xt.head(n), bd.lo.head(n), bd.up.head(n), stat_scaled / sf,
        (ev.c.array() / prob.eq_scale().array()).matrix(),
        (ev.h.array() / prob.ineq_scale().array()).matrix(), mu_rep, lam_rep,
        zl.head(n) / sf, zu.head(n) / sf);
    if (r_pub < best.kkt_residual) {
      best = snapshot(r_pub, SolveStatus::MaxIterations, iter);
    }
    if (r_pub <= opts.tolerance) {
      return snapshot(r_pub, SolveStatus::Converged, iter);
    }

    // Slacked constraint residuals and the barrier optimality measure.
    Vector C(M);
    C.head(me) = ev.c;
    for (int k = 0; k < mi; ++k) C[me + k] = ev.h[k] + xt[n + k];

    Vector grad_full = Vector::Zero(N);
    grad_full.head(n) = ev.grad;
    Vector stat = grad_full;
    if (me) stat.head(n) += ev.je.transpose() * y.head(me);
    if (mi) {
      stat.head(n) += ev.ji.transpose() * y.tail(mi);
      stat.tail(mi) += y.tail(mi);
    }
    stat -= zl;
    stat += zu;
    double e_stat = 0.0, e_comp = 0.0;
    for (int j = 0; j < N; ++j) {
      if (bd.fixed[j]) continue;
      e_stat = std::max(e_stat, std::abs(stat[j]));
      if (bd.has_lo[j]) e_comp = std::max(e_comp, std::abs(zl[j] * (xt[j] - bd.lo[j]) - mu));
      if (bd.has_up[j]) e_comp = std::max(e_comp, std::abs(zu[j] * (bd.up[j] - xt[j]) - mu));
    }
    // Barrier-subproblem measure with bounded dual scaling: the average
    // multiplier magnitude only discounts the residual beyond 100.
    double dual_sum = y.cwiseAbs().sum();
    int dual_cnt = M;
    for (int j = 0; j < N; ++j) {
      if (bd.fixed[j]) continue;
      if (bd.has_lo[j]) { dual_sum += zl[j]; ++dual_cnt; }
      if (bd.has_up[j]) { dual_sum += zu[j]; ++dual_cnt; }
    }
    const double s_dual =
        std::max(100.0, dual_cnt ? dual_sum / dual_cnt : 0.0) / 100.0;
    const double e_feas = M ? C.cwiseAbs().maxCoeff() : 0.0;
    const double e_mu = std::max({e_stat / s_dual, e_feas, e_comp / s_dual});
    if (e_mu <= 10.0 * mu && mu > mu_floor) {
      mu = std::max(mu_floor, std::min(0.2 * mu, std::pow(mu, 1.5)));
    }

    // --- Newton system on the perturbed KKT conditions ---
    Matrix W;
    prob.lagrangian_hessian(xt.head(n), 1.0, y.head(me), y.tail(mi), W);

    Matrix K0 = Matrix::Zero(N + M, N + M);
    K0.topLeftCorner(n, n) = W;
    for (int j = 0; j < N; ++j) {
      if (bd.fixed[j]) continue;
      double sigma = 0.0;
      if (bd.has_lo[j]) sigma += zl[j] / (xt[j] - bd.lo[j]);
      if (bd.has_up[j]) sigma += zu[j] / (bd.up[j] - xt[j]);
      K0(j, j) += sigma;
    }
    if (me) {
      K0.block(N, 0, me, n) = ev.je;
      K0.block(0, N, n, me) = ev.je.transpose();
    }
    if (mi) {
      K0.block(N + me, 0, mi, n) = ev.ji;
      K0.block(0, N + me, n, mi) = ev.ji.transpose();
      for (int k = 0; k < mi; ++k) {
        K0(N + me + k, n + k) = 1.0;
        K0(n + k, N + me + k) = 1.0;
      }
    }
    for (int j = 0; j < N; ++j) {
      if (!bd.fixed[j]) continue;
      K0.row(j).setZero();
      K0.col(j).setZero();
      K0(j, j) = 1.0;
    }

    Vector grad_phi = grad_full;
    for (int j = 0; j < N; ++j) {
      if (bd.fixed[j]) continue;
      if (bd.has_lo[j]) grad_phi[j] -= mu / (xt[j] - bd.lo[j]);
      if (bd.has_up[j]) grad_phi[j] += mu / (bd.up[j] - xt[j]);
    }
    Vector rhs(N + M);
    rhs.head(N) = -grad_phi;
    if (me) rhs.head(n) -= ev.je.transpose() * y.head(me);
    if (mi) {
      rhs.head(n) -= ev.ji.transpose() * y.tail(mi);
      rhs.segment(n, mi) -= y.tail(mi);
    }
    for (int j = 0; j < N; ++j) {
      if (bd.fixed[j]) rhs[j] = 0.0;
    }
    rhs.tail(M) = -C;

    // Inertia correction: delta I on the variable block, doubled from the
    // floor until the factorization signals inertia (N, M, 0). In robust
    // mode the variable block itself is made positive definite first, which
    // with delta_c > 0 certifies the full inertia and bounds the step.
    SymmetricFactor factor;
    Matrix K;
    double delta = 0.0;
    double delta_c = robust ? std::max(delta_c_base, 1e-8) : delta_c_base;
    bool ok = false;
    if (robust) {
      SymmetricFactor hfac;
      for (int attempt = 0; attempt < 64; ++attempt) {
        Matrix H = K0.topLeftCorner(N, N);
        for (int j = 0; j < N; ++j) {
          if (!bd.fixed[j]) H(j, j) += delta;
        }
        Inertia in = hfac.factor(H) ? hfac.inertia() : Inertia{};
        if (in.pos == N && in.neg == 0 && in.zero == 0) break;
        delta = delta == 0.0
                    ? (delta_last == 0.0 ? opts.reg_floor
                                         : std::max(opts.reg_floor, delta_last / 4.0))
                    : delta * 2.0;
        if (delta > 1e40) break;
      }
    }
    for (int attempt = 0; attempt < 64; ++attempt) {
      K = K0;
      for (int j = 0; j < N; ++j) {
        if (!bd.fixed[j]) K(j, j) += delta;
      }
      for (int k = 0; k < M; ++k) K(N + k, N + k) -= delta_c;
      const bool fact_ok = factor.factor(K);
      Inertia in = fact_ok ? factor.inertia() : Inertia{};
      if (fact_ok && in.pos == N && in.neg == M && in.zero == 0) {
        ok = true;
        break;
      }
      if (!fact_ok || in.zero > 0) delta_c = std::max(delta_c, 1e-8);
      if (delta == 0.0) {
        delta = delta_last == 0.0 ? opts.reg_floor
                                  : std::max(opts.reg_floor, delta_last / 4.0);
      } else {
        delta *= 2.0;
      }
      if (delta > 1e40) break;
    }
    if (!ok) {
      NlpSolution s = best;
      s.status = SolveStatus::InfeasibleDetected;
      s.iterations = iter;
      return s;
    }
    delta_last = delta;

    Vector d = factor.solve(rhs);
    for (int round = 0; round < 2; ++round) {  // iterative refinement
      Vector resid = rhs - K.selfadjointView<Eigen::Lower>() * d;
      const double rn = resid.cwiseAbs().maxCoeff();
      if (rn <= 1e-12 * (1.0 + rhs.cwiseAbs().maxCoeff())) break;
      d += factor.solve(resid);
    }
    Vector dx = d.head(N);
    Vector dy = d.tail(M);
    Vector dzl = Vector::Zero(N), dzu = Vector::Zero(N);
    for (int j = 0; j < N; ++j) {
      if (bd.fixed[j]) continue;
      if (bd.has_lo[j]) {
        const double dist = xt[j] - bd.lo[j];
        dzl[j] = (mu - zl[j] * dist) / dist - zl[j] * dx[j] / dist;
      }
      if (bd.has_up[j]) {
        const double dist = bd.up[j] - xt[j];
        dzu[j] = (mu - zu[j] * dist) / dist + zu[j] * dx[j] / dist;
      }
    }

    // Fraction-to-boundary step limits.
    const double tau = std::max(opts.ftb_tau, 1.0 - mu);
    double alpha_max = 1.0, alpha_z = 1.0;
    for (int j = 0; j < N; ++j) {
      if (bd.fixed[j]) continue;
      if (bd.has_lo[j]) {
        if (dx[j] < 0) alpha_max = std::min(alpha_max, -tau * (xt[j] - bd.lo[j]) / dx[j]);
        if (dzl[j] < 0) alpha_z = std::min(alpha_z, -tau * zl[j] / dzl[j]);
      }
      if (bd.has_up[j]) {
        if (dx[j] > 0) alpha_max = std::min(alpha_max, tau * (bd.up[j] - xt[j]) / dx[j]);
        if (dzu[j] < 0) alpha_z = std::min(alpha_z, -tau * zu[j] / dzu[j]);
      }
    }
    const double step_norm = dx.size() ? dx.cwiseAbs().maxCoeff() : 0.0;
    double alpha0 = alpha_max;
    if (step_norm > opts.step_cap) alpha0 = std::min(alpha0, opts.step_cap / step_norm);

    if (step_norm <= 1e-14 * (1.0 + xt.cwiseAbs().maxCoeff())) {
      if (mu > mu_floor) {
        mu = std::max(mu_floor, std::min(0.2 * mu, std::pow(mu, 1.5)));
        continue;
      }
      if (++tiny_steps >= 3) break;  // stagnated
    } else {
      tiny_steps = 0;
    }

    // Armijo line search on the exact l1-penalty merit function.
    auto barrier_value = [&](const Vector& p) {
      double val = 0.0;
      for (int j = 0; j < N; ++j) {
        if (bd.fixed[j]) continue;
        if (bd.has_lo[j]) {
          const double dist = p[j] - bd.lo[j];
          if (dist <= 0) return kInf;
          val -= mu * std::log(dist);
        }
        if (bd.has_up[j]) {
          const double dist = bd.up[j] - p[j];
          if (dist <= 0) return kInf;
          val -= mu * std::log(dist);
        }
      }
      return val;
    };
    const double theta_c = M ? C.cwiseAbs().sum() : 0.0;
    double lin_c = 0.0;  // |C + J dx|_1, nonzero under the proximal relaxation
    if (M) {
      Vector jdx(M);
      if (me) jdx.head(me) = ev.je * dx.head(n);
      if (mi) jdx.tail(mi) = ev.ji * dx.head(n) + dx.segment(n, mi);
      lin_c = (C + jdx).cwiseAbs().sum();
    }
    const double pred = theta_c - lin_c;  // modelled infeasibility decrease
    const double dphi = grad_phi.dot(dx);
    if (pred > 1e-14 && dphi > 0) {
      nu = std::min(std::max(nu, dphi / (0.5 * pred)), 1e8);
    }
    double descent = dphi - nu * pred;
    if (descent > -1e-16) descent = -1e-16;
    const double phi0 = ev.f + barrier_value(xt) + nu * theta_c;

    double alpha = alpha0;
    bool accepted = false;
    const bool bad_model = descent >= -1e-12 * (1.0 + std::abs(phi0));
    if (!bad_model) {
      ProblemEval trial_ev;
      Vector xtrial(N);
      for (int ls = 0; ls < 45 && alpha > 1e-14; ++ls) {
        xtrial = xt + alpha * dx;
        const double bar = barrier_value(xtrial);
        if (std::isfinite(bar)) {
          eval_values(prob, xtrial.head(n), trial_ev);
          double theta_trial = 0.0;
          for (int k = 0; k < me; ++k) theta_trial += std::abs(trial_ev.c[k]);
          for (int k = 0; k < mi; ++k) theta_trial += std::abs(trial_ev.h[k] + xtrial[n + k]);
          const double phi_trial = trial_ev.f + bar + nu * theta_trial;
          if (phi_trial <= phi0 + 1e-4 * alpha * descent) {
            accepted = true;
            break;
          }
        }
        alpha *= 0.5;
      }
    }
    if (!accepted) alpha = 0.0;  // rejected step; escalate the relaxation

    static const bool trace = std::getenv("OPF_IPM_TRACE") != nullptr;
    if (trace) {
      std::fprintf(stderr,
                   "it %4d mu %8.1e kkt %9.2e |C| %9.2e f %12.5e alpha %8.1e "
                   "a_max %8.1e delta %8.1e dc %8.1e nu %8.1e dphi %9.2e pred %9.2e "
                   "D %9.2e |dx| %8.1e ls %s\n",
                   iter, mu, r_pub, e_feas, ev.f, alpha, alpha_max, delta,
                   delta_c, nu, dphi, pred, descent, step_norm,
                   accepted ? "ok" : "FAIL");
    }

    if (accepted) {
      xt += alpha * dx;
      y += alpha * dy;
      zl += alpha_z * dzl;
      zu += alpha_z * dzu;
      const double y_cap = robust ? 1e4 : 1e8;
      y = y.cwiseMax(-y_cap).cwiseMin(y_cap);
    }
    // A throttled or rejected step means the Newton model overreached;
    // relax the constraint rows proximally, and unwind once steps recover.
    // Step-quality bookkeeping. A streak of throttled or rejected steps
    // switches to robust mode: multipliers restarted from the barrier
    // center, the variable block convexified, constraint rows relaxed.
    if (alpha < 0.01) {
      ++bad_steps;
      healthy_steps = 0;
      delta_c_base = std::min(std::max(delta_c_base * 10.0, 1e-8), 1e-2);
      if (!robust && bad_steps >= 3) {
        robust = true;
        y.setZero();
        for (int j = 0; j < N; ++j) {
          zl[j] = zu[j] = 0.0;
          if (bd.fixed[j]) continue;
          if (bd.has_lo[j]) zl[j] = mu / (xt[j] - bd.lo[j]);
          if (bd.has_up[j]) zu[j] = mu / (bd.up[j] - xt[j]);
        }
        nu = 1.0;
        delta_last = 0.0;
        bad_steps = 0;
      } else if (robust && bad_steps >= 50) {
        break;  // persistently stuck
      }
    } else {
      bad_steps = 0;
      if (alpha > 0.5) {
        if (robust && ++healthy_steps >= 5) {
          robust = false;
          healthy_steps = 0;
          delta_last = 0.0;
        }
      } else {
        healthy_steps = 0;
      }
      if (alpha > 0.9 && delta_c_base > 0.0) {
        delta_c_base *= 0.5;
        if (delta_c_base < 1e-12) delta_c_base = 0.0;
      }
    }
    // Keep bound duals tracking the barrier (sigma safeguard): z d within a
    // fixed factor of mu, so the implied wall repulsion z/d never decouples
    // from mu/d^2 and steps cannot ram a bound for many iterations.
    constexpr double kSigma = 100.0;
    for (int j = 0; j < N; ++j) {
      if (bd.fixed[j]) continue;
      if (bd.has_lo[j]) {
        const double dist = xt[j] - bd.lo[j];
        zl[j] = std::clamp(zl[j], mu / (kSigma * dist), kSigma * mu / dist);
      }
      if (bd.has_up[j]) {
        const double dist = bd.up[j] - xt[j];
        zu[j] = std::clamp(zu[j], mu / (kSigma * dist), kSigma * mu / dist);
      }
    }
  }

  best.status = SolveStatus::MaxIterations;
  best.iterations = iter;
  return best;
}

}  // namespace opf
