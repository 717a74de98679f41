#pragma once

#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Core>

namespace opf {

using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;

/// Malformed or inconsistent input data. The message names the offending
/// line and field where that is known.
class ParseError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Input uses a feature outside the supported MATPOWER subset
/// (piecewise-linear costs, cubic polynomials, ...).
class UnsupportedFeatureError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct Bus {
  int id = 0;
  bool is_reference = false;
  double p_load = 0.0;  // p.u.
  double q_load = 0.0;  // p.u.
  double v_min = 0.9;   // p.u.
  double v_max = 1.1;   // p.u.
  double shunt_g = 0.0;  // p.u. conductance to ground
  double shunt_b = 0.0;  // p.u. susceptance to ground
};

struct Generator {
  int bus = 0;  // bus id, not index
  double p_min = 0.0, p_max = 0.0;  // p.u.
  double q_min = 0.0, q_max = 0.0;  // p.u.
};

struct Branch {
  int from = 0, to = 0;  // bus ids
  // Source impedance, kept verbatim so serialization round-trips exactly.
  double r = 0.0, x = 0.0;
  // Series admittance in the g - jb convention: g = r/(r^2+x^2), b = x/(r^2+x^2).
  double series_g = 0.0, series_b = 0.0;
  double charging_b = 0.0;      // total line charging susceptance, p.u.
  double tap_ratio = 1.0;
  double phase_shift = 0.0;     // radians
  double phase_shift_deg = 0.0; // source value, kept for serialization
  double s_max = 0.0;           // p.u. apparent-power rating; 0 = unlimited
};

struct CostFunction {
  int generator = 0;  // index into CaseData::generators
  // Polynomial in p.u. active power output.
  double constant = 0.0;
  double linear = 0.0;
  double quadratic = 0.0;
  // Source coefficients in (base MW) units, kept for serialization.
  double constant_src = 0.0, linear_src = 0.0, quadratic_src = 0.0;
};

struct CaseData {
  std::string name = "case";
  double base_mva = 100.0;
  std::vector<Bus> buses;
  std::vector<Generator> generators;
  std::vector<Branch> branches;
  std::vector<CostFunction> costs;

  /// Position of a bus id in `buses`, or -1.
  int bus_index(int bus_id) const;
  /// Position of the reference bus in `buses`.
  int reference_index() const;
};

/// A solver starting point over the full bus set (reference included).
struct StartPoint {
  Vector theta;  // radians, one per bus, reference entry 0
  Vector v;      // p.u., one per bus
  std::optional<Vector> p_gen;  // p.u., one per generator
  std::optional<Vector> q_gen;
};

/// Parse a MATPOWER-style case. Supported tables: baseMVA, bus, gen,
/// branch, gencost (polynomial, degree <= 2). All quantities are converted
/// to per-unit on baseMVA; branch impedance r,x is converted to series
/// admittance g,b. Throws ParseError / UnsupportedFeatureError.
CaseData parse_case(const std::string& text);

CaseData read_case_file(const std::string& path);

/// Serialize a parsed case to MATPOWER-style text. Output is normalized to
/// baseMVA = 1 so that every per-unit quantity is stored verbatim; parsing
/// the result reproduces the CaseData bit-identically.
std::string write_case(const CaseData& data);

/// All voltage magnitudes 1 p.u., all angles 0.
StartPoint flat_start(const CaseData& data);

/// Parse start points. Two grammars are accepted (see README):
///  - numeric rows: one record per line, 2n numbers (theta_1..theta_n v_1..v_n);
///  - a solution document ("bus <id> v <V> theta <rad> ..."), one record.
/// Angles are rotated so the reference bus is exactly 0.
std::vector<StartPoint> load_start_points(const std::string& text,
                                          const CaseData& data);

std::string read_text_file(const std::string& path);

}  // namespace opf
