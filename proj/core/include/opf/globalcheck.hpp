#pragma once

#include "opf/iterate.hpp"
#include "opf/twobus.hpp"

#include <cstdint>
#include <string>
#include <vector>

namespace opf {

struct MultistartOptions {
  IterateOptions iterate;
  double theta_lo = -3.14159265358979323846;
  double theta_hi = 3.14159265358979323846;
  double global_rel_tol = 1e-4;  // "global" = within this of the ensemble best
  double cluster_tol = 1e-3;     // (v, theta) infinity-norm distinctness
  int jobs = 1;
};

/// One point a clustering operates on.
struct SolutionPoint {
  Vector v;
  Vector theta;
  double objective = 0.0;
};

struct SolutionCluster {
  Vector v;      // representative = lowest-objective member
  Vector theta;
  double objective = 0.0;
  int members = 0;
};

struct RunSummary {
  int start_index = 0;
  bool converged = false;  // initial primal solve converged
  IterationReport report;
};

/// Multi-start statistics. "Global" is certified only against the best
/// objective found across the ensemble (best-known, not proven global).
struct EnsembleReport {
  int n_starts = 0;
  std::uint64_t seed = 0;
  int max_outer = 0;
  std::vector<RunSummary> runs;
  std::vector<SolutionCluster> clusters;  // over converged runs' final points
  double best_objective = 0.0;
  /// Fraction of converged runs whose running-best objective is within
  /// global_rel_tol (relative) of best_objective after k = 0..max_outer
  /// outer iterations. Non-decreasing in k.
  std::vector<double> fraction_global_after;
  int non_converged = 0;
};

/// Deterministic start sampling. Stream layout: a fresh mt19937_64 is
/// seeded with seed_seq{seed_lo32, seed_hi32, index}; uniform doubles are
/// (next64 >> 11) * 2^-53; draws are theta for each non-reference bus in
/// bus order over [theta_lo, theta_hi), then v for every bus in bus order
/// over [v_min, v_max).
StartPoint sample_start(const CaseData& data, std::uint64_t seed, int index,
                        double theta_lo, double theta_hi);

std::vector<SolutionCluster> cluster_solutions(
    const std::vector<SolutionPoint>& solutions, double tol);

/// Run iterate::run from n_starts sampled points and aggregate. Runs whose
/// initial solve does not converge are counted in non_converged and excluded
/// from the fraction denominators. Results are merged by start index, so the
/// report does not depend on the number of worker threads.
EnsembleReport multistart(const CaseData& data, int n_starts, std::uint64_t seed,
                          int max_outer, const MultistartOptions& options = {});

/// One row per start per recorded outer iteration:
/// start,iteration,objective,accepted,distance_to_best
/// where objective is the running incumbent after that iteration and the
/// distance is the (v, theta) infinity-norm to the best cluster point.
std::string write_ensemble_csv(const EnsembleReport& report, const CaseData& data);

/// Key-value summary: cluster table, fractions, counts.
std::string write_ensemble_report(const EnsembleReport& report);

struct TwoBusRoot {
  double theta = 0.0;
  double objective = 0.0;
  double residual = 0.0;  // back-substituted balance residual
};

struct TwoBusCertificate {
  bool feasible = false;
  std::vector<TwoBusRoot> roots;  // ascending theta
  int global_index = -1;          // lowest-objective root
};

/// Exhaustive scan of the two-bus balance equation over theta in (-pi, pi]:
/// sign changes refined by bisection to 1e-12, tangent roots recovered from
/// stationary points of the residual. The 1-D realization of exhaustive
/// search within variable bounds.
TwoBusCertificate grid_certify_twobus(double g, double b, double l,
                                      double resolution);

}  // namespace opf
