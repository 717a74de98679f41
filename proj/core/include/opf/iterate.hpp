#pragma once

#include "opf/acopf.hpp"
#include "opf/ipm.hpp"

#include <optional>
#include <string>
#include <vector>

namespace opf {

enum class StopReason {
  ConvergedStationary,  // accepted point stopped changing
  MaxIterations,
  NoImprovement,        // re-solve was rejected
  InitialSolveFailed,
};

const char* to_string(StopReason reason);

struct IterateOptions {
  SolverOptions solver;
  AcopfOptions acopf;
  double accept_margin = 1e-8;  // required objective decrease
  double stall_tol = 1e-6;      // (v, theta) infinity-norm change
};

/// One outer iteration of the escape loop: primal solve, dual extraction,
/// partial-Lagrangian solve from the same start, primal re-solve from the
/// Lagrangian point, accept/reject.
struct IterationRecord {
  int index = 0;
  NlpSolution primal;
  std::optional<DualPrices> duals;
  std::optional<NlpSolution> lagrangian;
  std::optional<NlpSolution> resolve;
  bool accepted = false;
  double objective_before = 0.0;
  double objective_after = 0.0;
};

struct IterationReport {
  std::vector<IterationRecord> records;
  NlpSolution final_solution;
  StopReason stop = StopReason::MaxIterations;
  /// Best objective seen after outer iteration k, k = 0..records.size().
  /// Entry 0 is the direct solve; non-increasing by construction.
  std::vector<double> running_best;
};

/// True iff the candidate converged and improves on the previous objective
/// by more than the margin.
bool compare_accept(const NlpSolution& previous, const NlpSolution& candidate,
                    double margin);

/// The iterative escape loop on one case from one start.
IterationReport run(const CaseData& data, const StartPoint& start, int max_outer,
                    const IterateOptions& options = {});

/// Structured-text serialization with per-iteration objectives and duals.
std::string write_iteration_report(const IterationReport& report,
                                   const CaseData& data);

}  // namespace opf
