// Command-line front end: every subcommand is a thin composition of the
// library operations; no numeric logic lives here.

#include <cstdio>
#include <fstream>
#include <iostream>
#include <numbers>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "opf/caseio.hpp"
#include "opf/globalcheck.hpp"
#include "opf/ipm.hpp"
#include "opf/iterate.hpp"
#include "opf/solution_io.hpp"
#include "opf/twobus.hpp"

namespace {

// Exit codes, also listed in the help footer.
constexpr int kOkExit = 0;
constexpr int kUsageExit = 1;
constexpr int kIoExit = 2;
constexpr int kDataExit = 3;
constexpr int kSolverExit = 4;
constexpr int kUnsupportedExit = 5;

constexpr const char* kFooter =
    "Exit codes: 0 success, 1 usage error, 2 unreadable file, 3 malformed data,\n"
    "4 solver did not converge, 5 unsupported input feature.\n"
    "--config reads a flat key-value file (one 'name value' per line) whose\n"
    "names mirror the long flags of the subcommand; explicit flags win.";

struct CommonArgs {
  std::string case_path;
  std::string start = "flat";
  std::string out;
  std::string config;
  bool paper_model = false;
  opf::SolverOptions solver;
};

void add_common(CLI::App* cmd, CommonArgs& args, bool needs_case = true) {
  auto* case_opt = cmd->add_option("--case", args.case_path, "Case file (MATPOWER subset)");
  if (needs_case) case_opt->required();
  cmd->add_option("--start", args.start, "Start file or 'flat'")->capture_default_str();
  cmd->add_option("--out", args.out, "Output path (default stdout)");
  cmd->add_option("--config", args.config, "Key-value config file; flags win");
  cmd->add_flag("--paper-model", args.paper_model,
                "Force tap ratios to 1 and shunts to 0");
  cmd->add_option("--tol", args.solver.tolerance, "Solver KKT tolerance")
      ->capture_default_str();
  cmd->add_option("--max-iterations", args.solver.max_iterations,
                  "Solver iteration budget")->capture_default_str();
  cmd->add_option("--barrier-init", args.solver.barrier_init,
                  "Initial barrier weight")->capture_default_str();
  cmd->add_option("--ftb-tau", args.solver.ftb_tau,
                  "Fraction-to-boundary parameter")->capture_default_str();
  cmd->add_option("--reg-floor", args.solver.reg_floor,
                  "Inertia-correction floor")->capture_default_str();
  cmd->add_option("--push-margin", args.solver.push_margin,
                  "Interior push applied to starts")->capture_default_str();
  cmd->add_option("--step-cap", args.solver.step_cap,
                  "Primal step infinity-norm cap")->capture_default_str();
}

void write_output(const std::string& out_path, const std::string& text) {
  if (out_path.empty()) {
    std::cout << text;
    return;
  }
  std::ofstream out(out_path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot open file: " + out_path);
  out << text;
}

opf::StartPoint resolve_start(const std::string& start, const opf::CaseData& data) {
  if (start == "flat") return opf::flat_start(data);
  return opf::load_start_points(opf::read_text_file(start), data).front();
}

// Inject config-file entries as tokens right after the subcommand so that
// explicitly passed flags (appearing later, with TakeLast policy) win.
std::vector<std::string> apply_config(const std::vector<std::string>& argv) {
  std::string config_path;
  size_t sub_pos = std::string::npos;
  for (size_t i = 1; i < argv.size(); ++i) {
    const std::string& a = argv[i];
    if (sub_pos == std::string::npos && !a.empty() && a[0] != '-') {
      sub_pos = i;
      continue;
    }
    if (a == "--config" && i + 1 < argv.size()) config_path = argv[i + 1];
    else if (a.rfind("--config=", 0) == 0) config_path = a.substr(9);
  }
  if (config_path.empty() || sub_pos == std::string::npos) return argv;

  std::vector<std::string> injected;
  std::istringstream in(opf::read_text_file(config_path));
  std::string line;
  while (std::getline(in, line)) {
    auto hash = line.find('#');
    if (hash != std::string::npos) line = line.substr(0, hash);
    std::istringstream toks(line);
    std::string key, value;
    if (!(toks >> key)) continue;
    auto eq = key.find('=');
    if (eq != std::string::npos) {
      value = key.substr(eq + 1);
      key = key.substr(0, eq);
    } else {
      toks >> value;
    }
    if (key == "config") continue;
    if (value.empty() || value == "true" || value == "1") {
      injected.push_back("--" + key);
      if (!value.empty() && value != "true" && value != "1") injected.push_back(value);
    } else if (value == "false" || value == "0") {
      // boolean off is the default for all our flags; skip
    } else {
      injected.push_back("--" + key + "=" + value);
    }
  }
  std::vector<std::string> result(argv.begin(), argv.begin() + sub_pos + 1);
  result.insert(result.end(), injected.begin(), injected.end());
  result.insert(result.end(), argv.begin() + sub_pos + 1, argv.end());
  return result;
}

std::string fmt(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"AC optimal power flow with iterative partial-Lagrangian restarts"};
  app.require_subcommand(1);
  app.footer(kFooter);
  app.option_defaults()->multi_option_policy(CLI::MultiOptionPolicy::TakeLast);

  CommonArgs solve_args;
  auto* solve_cmd = app.add_subcommand("solve", "One primal solve; prints the solution");
  add_common(solve_cmd, solve_args);

  CommonArgs iter_args;
  int max_outer = 10;
  double accept_margin = 1e-8, stall_tol = 1e-6;
  auto* iter_cmd = app.add_subcommand("iterate", "Iterative partial-Lagrangian escape loop");
  add_common(iter_cmd, iter_args);
  iter_cmd->add_option("--max-outer", max_outer, "Outer iteration budget")
      ->capture_default_str();
  iter_cmd->add_option("--accept-margin", accept_margin, "Required objective decrease")
      ->capture_default_str();
  iter_cmd->add_option("--stall-tol", stall_tol, "Stop when accepted points move less")
      ->capture_default_str();
  std::string solution_out;
  iter_cmd->add_option("--solution-out", solution_out, "Also write the final solution document");

  CommonArgs ms_args;
  int ms_max_outer = 3, n_starts = 100, jobs = 1;
  std::uint64_t seed = 1;
  double theta_lo = -std::numbers::pi, theta_hi = std::numbers::pi;
  double cluster_tol = 1e-3, global_rel_tol = 1e-4;
  double ms_accept_margin = 1e-8, ms_stall_tol = 1e-6;
  std::string csv_out;
  auto* ms_cmd = app.add_subcommand("multistart", "Random-start ensemble with per-iteration statistics");
  add_common(ms_cmd, ms_args);
  ms_cmd->add_option("--n-starts", n_starts, "Number of random starts")->capture_default_str();
  ms_cmd->add_option("--seed", seed, "Ensemble RNG seed")->capture_default_str();
  ms_cmd->add_option("--max-outer", ms_max_outer, "Outer iteration budget per start")
      ->capture_default_str();
  ms_cmd->add_option("--jobs", jobs, "Worker threads")->capture_default_str();
  ms_cmd->add_option("--theta-lo", theta_lo, "Random start angle lower bound (rad)")
      ->capture_default_str();
  ms_cmd->add_option("--theta-hi", theta_hi, "Random start angle upper bound (rad)")
      ->capture_default_str();
  ms_cmd->add_option("--cluster-tol", cluster_tol, "Solution distinctness tolerance")
      ->capture_default_str();
  ms_cmd->add_option("--global-rel-tol", global_rel_tol,
                     "Relative window counted as globally optimal")->capture_default_str();
  ms_cmd->add_option("--accept-margin", ms_accept_margin, "Required objective decrease")
      ->capture_default_str();
  ms_cmd->add_option("--stall-tol", ms_stall_tol, "Stop when accepted points move less")
      ->capture_default_str();
  ms_cmd->add_option("--csv", csv_out, "Also write the per-start CSV here");

  double tb_g = 1.0, tb_b = 5.0, tb_l = 3.0, tb_rho = 100.0, tb_mu = 0.0;
  double tb_resolution = 1e-4;
  std::string mu_at = "worse-root";
  std::string land_out, land_config;
  auto* land_cmd = app.add_subcommand("landscape", "Two-bus penalized / Lagrangian landscape CSV");
  land_cmd->add_option("--g", tb_g, "Line conductance g")->capture_default_str();
  land_cmd->add_option("--b", tb_b, "Line susceptance b")->capture_default_str();
  land_cmd->add_option("--l", tb_l, "Load at bus 2")->capture_default_str();
  land_cmd->add_option("--rho", tb_rho, "Penalty weight")->capture_default_str();
  land_cmd->add_option("--mu-at", mu_at, "worse-root | better-root | value")
      ->capture_default_str();
  land_cmd->add_option("--mu", tb_mu, "Multiplier when --mu-at value");
  land_cmd->add_option("--resolution", tb_resolution, "Grid resolution (rad)")
      ->capture_default_str();
  land_cmd->add_option("--out", land_out, "Output path (default stdout)");
  land_cmd->add_option("--config", land_config, "Key-value config file; flags win");

  double ct_g = 1.0, ct_b = 5.0, ct_l = 3.0, ct_resolution = 1e-6;
  std::string ct_out, ct_config;
  auto* cert_cmd = app.add_subcommand("certify-twobus", "Exhaustive 1-D root search for the two-bus case");
  cert_cmd->add_option("--g", ct_g, "Line conductance g")->capture_default_str();
  cert_cmd->add_option("--b", ct_b, "Line susceptance b")->capture_default_str();
  cert_cmd->add_option("--l", ct_l, "Load at bus 2")->capture_default_str();
  cert_cmd->add_option("--resolution", ct_resolution, "Scan resolution (rad)")
      ->capture_default_str();
  cert_cmd->add_option("--out", ct_out, "Output path (default stdout)");
  cert_cmd->add_option("--config", ct_config, "Key-value config file; flags win");

  std::vector<std::string> args(argv, argv + argc);
  try {
    args = apply_config(args);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kIoExit;
  }
  std::vector<const char*> cargs;
  cargs.reserve(args.size());
  for (const auto& a : args) cargs.push_back(a.c_str());

  try {
    app.parse(static_cast<int>(cargs.size()), cargs.data());
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kUsageExit;
  }

  try {
    if (solve_cmd->parsed()) {
      opf::CaseData data = opf::read_case_file(solve_args.case_path);
      opf::AcopfOptions ao{solve_args.paper_model};
      auto problem = opf::assemble_primal(data, ao);
      opf::StartPoint start = resolve_start(solve_args.start, data);
      opf::NlpSolution sol =
          opf::solve(*problem, problem->make_start_vector(start), solve_args.solver);
      write_output(solve_args.out, opf::write_solution(sol, *problem));
      if (sol.status != opf::SolveStatus::Converged) {
        std::cerr << "solver stopped with status " << opf::to_string(sol.status)
                  << " (kkt residual " << fmt(sol.kkt_residual) << ")\n";
        return kSolverExit;
      }
      return kOkExit;
    }

    if (iter_cmd->parsed()) {
      opf::CaseData data = opf::read_case_file(iter_args.case_path);
      opf::IterateOptions opts;
      opts.solver = iter_args.solver;
      opts.acopf.paper_model = iter_args.paper_model;
      opts.accept_margin = accept_margin;
      opts.stall_tol = stall_tol;
      opf::StartPoint start = resolve_start(iter_args.start, data);
      opf::IterationReport report = opf::run(data, start, max_outer, opts);
      write_output(iter_args.out, opf::write_iteration_report(report, data));
      if (!solution_out.empty()) {
        auto problem = opf::assemble_primal(data, opts.acopf);
        write_output(solution_out, opf::write_solution(report.final_solution, *problem));
      }
      if (report.stop == opf::StopReason::InitialSolveFailed) {
        std::cerr << "initial solve did not converge\n";
        return kSolverExit;
      }
      return kOkExit;
    }

    if (ms_cmd->parsed()) {
      opf::CaseData data = opf::read_case_file(ms_args.case_path);
      opf::MultistartOptions opts;
      opts.iterate.solver = ms_args.solver;
      opts.iterate.acopf.paper_model = ms_args.paper_model;
      opts.iterate.accept_margin = ms_accept_margin;
      opts.iterate.stall_tol = ms_stall_tol;
      opts.theta_lo = theta_lo;
      opts.theta_hi = theta_hi;
      opts.cluster_tol = cluster_tol;
      opts.global_rel_tol = global_rel_tol;
      opts.jobs = jobs;
      opf::EnsembleReport report =
          opf::multistart(data, n_starts, seed, ms_max_outer, opts);
      write_output(ms_args.out, opf::write_ensemble_report(report));
      if (!csv_out.empty()) {
        write_output(csv_out, opf::write_ensemble_csv(report, data));
      }
      return kOkExit;
    }

    if (land_cmd->parsed()) {
      opf::TwoBusParams params;
      params.g = tb_g;
      params.b = tb_b;
      params.l = tb_l;
      params.rho = tb_rho;
      if (mu_at == "value") {
        params.mu = tb_mu;
      } else if (mu_at == "worse-root" || mu_at == "better-root") {
        opf::TwoBusCertificate cert =
            opf::grid_certify_twobus(tb_g, tb_b, tb_l, tb_resolution);
        if (!cert.feasible) throw opf::ParseError("two-bus load is infeasible");
        const bool want_worse = mu_at == "worse-root";
        const opf::TwoBusRoot* pick = &cert.roots.front();
        for (const auto& root : cert.roots) {
          if (want_worse ? root.objective > pick->objective
                         : root.objective < pick->objective) {
            pick = &root;
          }
        }
        params.mu = opf::dual_at_root(pick->theta, params);
      } else {
        std::cerr << "error: --mu-at must be worse-root, better-root, or value\n";
        return kUsageExit;
      }
      write_output(land_out, opf::landscape_csv(params, tb_resolution));
      return kOkExit;
    }

    if (cert_cmd->parsed()) {
      opf::TwoBusCertificate cert =
          opf::grid_certify_twobus(ct_g, ct_b, ct_l, ct_resolution);
      std::ostringstream out;
      out << "feasible " << (cert.feasible ? 1 : 0) << "\n";
      for (size_t i = 0; i < cert.roots.size(); ++i) {
        out << "root " << i << " theta " << fmt(cert.roots[i].theta)
            << " objective " << fmt(cert.roots[i].objective)
            << " residual " << fmt(cert.roots[i].residual) << "\n";
      }
      if (cert.global_index >= 0) {
        out << "global_root " << cert.global_index << " theta "
            << fmt(cert.roots[cert.global_index].theta) << " objective "
            << fmt(cert.roots[cert.global_index].objective) << "\n";
      }
      write_output(ct_out, out.str());
      return kOkExit;
    }
  } catch (const opf::UnsupportedFeatureError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kUnsupportedExit;
  } catch (const opf::ParseError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kDataExit;
  } catch (const std::exception& e) {
    const std::string what = e.what();
    std::cerr << "error: " << what << "\n";
    return what.rfind("cannot open file", 0) == 0 ? kIoExit : kDataExit;
  }
  return kUsageExit;
}
