#include "opf/globalcheck.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdio>
#include <limits>
#include <numbers>
#include <random>
#include <sstream>
#include <stdexcept>
#include <thread>

namespace opf {

StartPoint sample_start(const CaseData& data, std::uint64_t seed, int index,
                        double theta_lo, double theta_hi) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed & 0xffffffffu),
                    static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(index)};
  std::mt19937_64 eng(seq);
  auto uniform = [&]() {
    return static_cast<double>(eng() >> 11) * 0x1.0p-53;
  };
  const int n = static_cast<int>(data.buses.size());
  const int ref = data.reference_index();
  StartPoint sp;
  sp.theta = Vector::Zero(n);
  sp.v = Vector::Ones(n);
  for (int i = 0; i < n; ++i) {
    if (i == ref) continue;
    sp.theta[i] = theta_lo + uniform() * (theta_hi - theta_lo);
  }
  for (int i = 0; i < n; ++i) {
    sp.v[i] = data.buses[i].v_min +
              uniform() * (data.buses[i].v_max - data.buses[i].v_min);
  }
  return sp;
}

std::vector<SolutionCluster> cluster_solutions(
    const std::vector<SolutionPoint>& solutions, double tol) {
  std::vector<SolutionCluster> clusters;
  for (const SolutionPoint& sol : solutions) {
    SolutionCluster* home = nullptr;
    for (SolutionCluster& cl : clusters) {
      const double dist = std::max(
          (sol.v - cl.v).cwiseAbs().maxCoeff(),
          (sol.theta - cl.theta).cwiseAbs().maxCoeff());
      if (dist <= tol) {
        home = &cl;
        break;
      }
    }
    if (!home) {
      clusters.push_back({sol.v, sol.theta, sol.objective, 1});
    } else {
      ++home->members;
      if (sol.objective < home->objective) {
        home->v = sol.v;
        home->theta = sol.theta;
        home->objective = sol.objective;
      }
    }
  }
  return clusters;
}

EnsembleReport multistart(const CaseData& data, int n_starts, std::uint64_t seed,
                          int max_outer, const MultistartOptions& options) {
  if (n_starts < 1) throw std::invalid_argument("n_starts must be >= 1");
  EnsembleReport report;
  report.n_starts = n_starts;
  report.seed = seed;
  report.max_outer = max_outer;
  report.runs.resize(n_starts);

  const int jobs = std::max(1, std::min(options.jobs, n_starts));
  std::atomic<int> next{0};
  auto worker = [&]() {
    for (;;) {
      const int idx = next.fetch_add(1);
      if (idx >= n_starts) return;
      StartPoint sp = sample_start(data, seed, idx, options.theta_lo,
                                   options.theta_hi);
      RunSummary& summary = report.runs[idx];
      summary.start_index = idx;
      summary.report = run(data, sp, max_outer, options.iterate);
      summary.converged =
          summary.report.stop != StopReason::InitialSolveFailed &&
          !summary.report.records.empty() &&
          summary.report.records.front().primal.status == SolveStatus::Converged;
    }
  };
  if (jobs == 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    pool.reserve(jobs);
    for (int t = 0; t < jobs; ++t) pool.emplace_back(worker);
    for (auto& th : pool) th.join();
  }

  std::vector<SolutionPoint> finals;
  auto problem = assemble_primal(data, options.iterate.acopf);
  for (const RunSummary& summary : report.runs) {
    if (!summary.converged) {
      ++report.non_converged;
      continue;
    }
    NetworkState st = problem->state_from_point(summary.report.final_solution.x);
    finals.push_back({st.v, st.theta, summary.report.final_solution.objective});
  }
  report.clusters = cluster_solutions(finals, options.cluster_tol);

  report.best_objective = std::numeric_limits<double>::infinity();
  for (const SolutionCluster& cl : report.clusters) {
    report.best_objective = std::min(report.best_objective, cl.objective);
  }

  report.fraction_global_after.assign(max_outer + 1, 0.0);
  const int denom = n_starts - report.non_converged;
  if (denom > 0 && std::isfinite(report.best_objective)) {
    const double cut = report.best_objective +
                       options.global_rel_tol * std::abs(report.best_objective);
    for (int k = 0; k <= max_outer; ++k) {
      int count = 0;
      for (const RunSummary& summary : report.runs) {
        if (!summary.converged) continue;
        const auto& rb = summary.report.running_best;
        const double obj = rb[std::min<size_t>(k, rb.size() - 1)];
        if (obj <= cut) ++count;
      }
      report.fraction_global_after[k] =
          static_cast<double>(count) / static_cast<double>(denom);
    }
  }
  return report;
}

namespace {

std::string fmt(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

}  // namespace

std::string write_ensemble_csv(const EnsembleReport& report, const CaseData& data) {
  std::ostringstream out;
  out << "start,iteration,objective,accepted,distance_to_best\n";
  VariableLayout layout;
  layout.n_bus = static_cast<int>(data.buses.size());
  layout.n_gen = static_cast<int>(data.generators.size());
  layout.ref = data.reference_index();
  auto decode = [&](const Vector& x, Vector& v, Vector& theta) {
    v.resize(layout.n_bus);
    theta.resize(layout.n_bus);
    for (int i = 0; i < layout.n_bus; ++i) {
      const int tv = layout.theta_var(i);
      theta[i] = tv < 0 ? 0.0 : x[tv];
      v[i] = x[layout.v_var(i)];
    }
  };
  const SolutionCluster* best = nullptr;
  for (const SolutionCluster& cl : report.clusters) {
    if (!best || cl.objective < best->objective) best = &cl;
  }
  Vector v, theta;
  for (const RunSummary& summary : report.runs) {
    const NlpSolution* incumbent =
        summary.report.records.empty() ? nullptr : &summary.report.records.front().primal;
    int k = 0;
    for (const IterationRecord& rec : summary.report.records) {
      if (rec.accepted && rec.resolve) incumbent = &*rec.resolve;
      double dist = std::numeric_limits<double>::quiet_NaN();
      if (best && incumbent && summary.converged) {
        decode(incumbent->x, v, theta);
        dist = std::max((v - best->v).cwiseAbs().maxCoeff(),
                        (theta - best->theta).cwiseAbs().maxCoeff());
      }
      const double obj = incumbent ? incumbent->objective
                                   : std::numeric_limits<double>::quiet_NaN();
      out << summary.start_index << "," << k << "," << fmt(obj) << ","
          << (rec.accepted ? 1 : 0) << "," << fmt(dist) << "\n";
      ++k;
    }
  }
  return out.str();
}

std::string write_ensemble_report(const EnsembleReport& report) {
  std::ostringstream out;
  out << "n_starts " << report.n_starts << "\n";
  out << "seed " << report.seed << "\n";
  out << "max_outer " << report.max_outer << "\n";
  out << "non_converged " << report.non_converged << "\n";
  out << "best_objective " << fmt(report.best_objective) << "\n";
  for (size_t k = 0; k < report.fraction_global_after.size(); ++k) {
    out << "fraction_global_after " << k << " "
        << fmt(report.fraction_global_after[k]) << "\n";
  }
  out << "clusters " << report.clusters.size() << "\n";
  for (size_t c = 0; c < report.clusters.size(); ++c) {
    const SolutionCluster& cl = report.clusters[c];
    out << "cluster " << c << " objective " << fmt(cl.objective)
        << " members " << cl.members << "\n";
  }
  return out.str();
}

TwoBusCertificate grid_certify_twobus(double g, double b, double l,
                                      double resolution) {
  if (!(resolution > 0)) throw std::invalid_argument("resolution must be positive");
  TwoBusParams params;
  params.g = g;
  params.b = b;
  params.l = l;
  TwoBusCertificate cert;

  const double pi = std::numbers::pi;
  auto c = [&](double t) { return balance_residual(t, params); };

  // The balance residual has a root iff l <= sqrt(g^2+b^2) - g.
  const double reach = std::sqrt(g * g + b * b) - g;
  if (l > reach + 1e-12) {
    cert.feasible = false;
    return cert;
  }

  auto bisect = [&](double lo, double hi) {
    double flo = c(lo);
    for (int it = 0; it < 200; ++it) {
      const double mid = 0.5 * (lo + hi);
      const double fm = c(mid);
      if (hi - lo < 1e-13) break;
      if ((flo <= 0 && fm <= 0) || (flo >= 0 && fm >= 0)) {
        lo = mid;
        flo = fm;
      } else {
        hi = mid;
      }
    }
    return 0.5 * (lo + hi);
  };

  std::vector<double> roots;
  const int steps = static_cast<int>(std::ceil(2 * pi / resolution));
  double prev_t = -pi;
  double prev_c = c(prev_t);
  for (int k = 1; k <= steps; ++k) {
    const double t = -pi + 2 * pi * k / steps;
    const double ct = c(t);
    if (prev_c == 0.0) {
      roots.push_back(prev_t);
    } else if ((prev_c < 0 && ct > 0) || (prev_c > 0 && ct < 0)) {
      roots.push_back(bisect(prev_t, t));
    }
    prev_t = t;
    prev_c = ct;
  }
  if (prev_c == 0.0) roots.push_back(prev_t);

  // Tangent roots: stationary points of c where c itself vanishes. c'(t) =
  // g sin t - b cos t has exactly two zeros per period; check both.
  const double t_stat = std::atan2(b, g);  // c' = 0
  for (double ts : {t_stat, t_stat > 0 ? t_stat - pi : t_stat + pi}) {
    if (std::abs(c(ts)) <= 1e-9) roots.push_back(ts);
  }

  std::sort(roots.begin(), roots.end());
  roots.erase(std::unique(roots.begin(), roots.end(),
                          [&](double a, double bt) { return std::abs(a - bt) < 10 * resolution; }),
              roots.end());

  cert.feasible = !roots.empty();
  for (double t : roots) {
    cert.roots.push_back({t, objective(t, params), c(t)});
  }
  for (size_t i = 0; i < cert.roots.size(); ++i) {
    if (cert.global_index < 0 ||
        cert.roots[i].objective < cert.roots[cert.global_index].objective) {
      cert.global_index = static_cast<int>(i);
    }
  }
  return cert;
}

}  // namespace opf
