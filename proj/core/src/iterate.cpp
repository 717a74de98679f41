#include "opf/iterate.hpp"

#include <cmath>
#include <cstdio>
#include <sstream>
#include <stdexcept>

namespace opf {

namespace {
const char* kStopNames[] = {"converged-stationary", "max-iterations",
                            "no-improvement", "initial-solve-failed"};
}

const char* to_string(StopReason reason) {
  return kStopNames[static_cast<int>(reason)];
}

bool compare_accept(const NlpSolution& previous, const NlpSolution& candidate,
                    double margin) {
  if (candidate.status != SolveStatus::Converged) return false;
  return candidate.objective < previous.objective - margin;
}

IterationReport run(const CaseData& data, const StartPoint& start, int max_outer,
                    const IterateOptions& options) {
  if (max_outer < 1) throw std::invalid_argument("max_outer must be >= 1");
  auto primal = assemble_primal(data, options.acopf);

  IterationReport report;
  StartPoint current = start;
  NlpSolution incumbent;  // last accepted primal solution

  for (int i = 0; i < max_outer; ++i) {
    IterationRecord rec;
    rec.index = i;

    // (a) primal solve from the current start
    Vector x0 = primal->make_start_vector(current);
    rec.primal = solve(*primal, x0, options.solver);
    if (i == 0) {
      if (rec.primal.status != SolveStatus::Converged) {
        rec.objective_before = rec.primal.objective;
        rec.objective_after = rec.primal.objective;
        report.records.push_back(std::move(rec));
        report.final_solution = report.records.back().primal;
        report.stop = StopReason::InitialSolveFailed;
        report.running_best.push_back(report.final_solution.objective);
        return report;
      }
      incumbent = rec.primal;
      report.running_best.push_back(incumbent.objective);
    }
    // A rejected previous step leaves the start unchanged; determinism makes
    // re-solves reproduce the incumbent, so use the freshest converged solve.
    if (rec.primal.status == SolveStatus::Converged) incumbent = rec.primal;
    rec.objective_before = incumbent.objective;

    // (b) balance duals at the solution
    rec.duals = primal->dual_prices(incumbent.eq_duals);

    // (c) minimize the partial Lagrangian from the same start as (a)
    auto lagr = assemble_partial_lagrangian(data, *rec.duals, options.acopf);
    rec.lagrangian = solve(*lagr, x0, options.solver);

    // (d) primal re-solve warm-started at the Lagrangian minimizer
    StartPoint warm = lagr->start_from_point(rec.lagrangian->x);
    Vector x1 = primal->make_start_vector(warm);
    rec.resolve = solve(*primal, x1, options.solver);

    // (e) accept iff strictly better
    rec.accepted = compare_accept(incumbent, *rec.resolve, options.accept_margin);
    rec.objective_after = rec.accepted ? rec.resolve->objective : incumbent.objective;

    bool stalled = false;
    if (rec.accepted) {
      StartPoint next = primal->start_from_point(rec.resolve->x);
      const double move = std::max(
          (next.theta - current.theta).cwiseAbs().maxCoeff(),
          (next.v - current.v).cwiseAbs().maxCoeff());
      stalled = move <= options.stall_tol;
      current = std::move(next);
      incumbent = *rec.resolve;
    }
    const bool rejected = !rec.accepted;
    report.records.push_back(std::move(rec));
    report.running_best.push_back(incumbent.objective);

    if (rejected) {
      // The start is unchanged; a deterministic solver would reproduce the
      // same candidate, so the loop has stopped changing.
      report.stop = StopReason::NoImprovement;
      break;
    }
    if (stalled) {
      report.stop = StopReason::ConvergedStationary;
      break;
    }
    if (i + 1 == max_outer) report.stop = StopReason::MaxIterations;
  }

  report.final_solution = incumbent;
  return report;
}

namespace {

std::string fmt(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

}  // namespace

std::string write_iteration_report(const IterationReport& report,
                                   const CaseData& data) {
  std::ostringstream out;
  out << "stop_reason " << to_string(report.stop) << "\n";
  out << "iterations " << report.records.size() << "\n";
  out << "final_objective " << fmt(report.final_solution.objective) << "\n";
  out << "final_status " << to_string(report.final_solution.status) << "\n";
  out << "final_kkt_residual " << fmt(report.final_solution.kkt_residual) << "\n";
  for (size_t k = 0; k < report.running_best.size(); ++k) {
    out << "running_best " << k << " " << fmt(report.running_best[k]) << "\n";
  }
  for (const IterationRecord& rec : report.records) {
    out << "iteration " << rec.index
        << " accepted " << (rec.accepted ? 1 : 0)
        << " objective_before " << fmt(rec.objective_before)
        << " objective_after " << fmt(rec.objective_after)
        << " primal_status " << to_string(rec.primal.status)
        << " primal_objective " << fmt(rec.primal.objective);
    if (rec.lagrangian) {
      out << " lagrangian_status " << to_string(rec.lagrangian->status)
          << " lagrangian_objective " << fmt(rec.lagrangian->objective);
    }
    if (rec.resolve) {
      out << " resolve_status " << to_string(rec.resolve->status)
          << " resolve_objective " << fmt(rec.resolve->objective);
    }
    out << "\n";
    if (rec.duals) {
      for (size_t b = 0; b < data.buses.size(); ++b) {
        out << "dual " << rec.index << " bus " << data.buses[b].id
            << " mu_p " << fmt(rec.duals->mu_p[static_cast<int>(b)])
            << " mu_q " << fmt(rec.duals->mu_q[static_cast<int>(b)]) << "\n";
      }
    }
  }
  return out.str();
}

}  // namespace opf
