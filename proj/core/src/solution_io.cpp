#include "opf/solution_io.hpp"

#include <cstdio>
#include <sstream>
#include <stdexcept>

namespace opf {

namespace {

std::string fmt(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

}  // namespace

std::string write_solution(const NlpSolution& solution, const AcopfProblem& problem) {
  const VariableLayout& layout = problem.layout();
  if (solution.x.size() != layout.num_vars()) {
    throw std::invalid_argument("write_solution: solution does not match case layout");
  }
  const CaseData& data = problem.case_data();
  std::ostringstream out;
  out << "status " << to_string(solution.status) << "\n";
  out << "objective " << fmt(solution.objective) << "\n";
  out << "kkt_residual " << fmt(solution.kkt_residual) << "\n";
  out << "iterations " << solution.iterations << "\n";

  const bool has_duals =
      !problem.is_partial_lagrangian() && solution.eq_duals.size() == 2 * layout.n_bus;
  DualPrices prices;
  if (has_duals) prices = problem.dual_prices(solution.eq_duals);

  for (int i = 0; i < layout.n_bus; ++i) {
    const int tv = layout.theta_var(i);
    out << "bus " << data.buses[i].id
        << " v " << fmt(solution.x[layout.v_var(i)])
        << " theta " << fmt(tv < 0 ? 0.0 : solution.x[tv]);
    if (has_duals) {
      out << " mu_p " << fmt(prices.mu_p[i]) << " mu_q " << fmt(prices.mu_q[i]);
    }
    out << "\n";
  }
  for (int g = 0; g < layout.n_gen; ++g) {
    out << "gen " << g << " bus " << data.generators[g].bus
        << " p " << fmt(solution.x[layout.pg_var(g)])
        << " q " << fmt(solution.x[layout.qg_var(g)]) << "\n";
  }
  return out.str();
}

}  // namespace opf
