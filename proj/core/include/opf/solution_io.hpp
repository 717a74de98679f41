#pragma once

#include "opf/acopf.hpp"
#include "opf/ipm.hpp"

#include <string>

namespace opf {

/// Key-value solution document: status, objective, KKT residual, iteration
/// count, per-bus V / theta / balance duals, per-generator P / Q. The
/// per-bus lines parse back through load_start_points.
std::string write_solution(const NlpSolution& solution, const AcopfProblem& problem);

}  // namespace opf
