#pragma once

#include <complex>
#include <string>
#include <vector>

namespace opfdl {

// Numeric mirror of the MATPOWER case blocks, before any unit conversion.
struct RawCase {
  std::string name;
  double base_mva = 0.0;
  std::vector<std::vector<double>> bus;
  std::vector<std::vector<double>> gen;
  std::vector<std::vector<double>> branch;
  std::vector<std::vector<double>> gencost;
};

struct Bus {
  int ext_id = 0;  // original MATPOWER bus number
  std::complex<double> y_shunt{0.0, 0.0};
  std::complex<double> r_ref{0.0, 0.0};  // nominal demand, p.u.
  std::complex<double> s_min{0.0, 0.0};  // aggregated generation box, p.u.
  std::complex<double> s_max{0.0, 0.0};
  double v_min = 0.0;
  double v_max = 0.0;
  // Cost polynomial in the case's native MW scale: c0 + c1*P + c2*P^2.
  double c0 = 0.0, c1 = 0.0, c2 = 0.0;
  bool has_generator = false;
  bool is_reference = false;
  std::complex<double> v0{1.0, 0.0};  // case voltage, warm starts only
};

struct Branch {
  int from = 0, to = 0;  // internal 0-based indices
  std::complex<double> y{0.0, 0.0};         // series admittance 1/(r+jx)
  std::complex<double> y_c_from{0.0, 0.0};  // shunt charging, from side
  std::complex<double> y_c_to{0.0, 0.0};
  std::complex<double> t{1.0, 0.0};  // complex tap, from side
  double f_max_from = 0.0, f_max_to = 0.0;  // |S| limits, p.u.
  double theta_min = 0.0, theta_max = 0.0;  // angle-difference bounds, rad
};

struct BranchEnd {
  int branch = 0;
  bool from_side = false;
};

struct PowerSystem {
  std::string name;
  double base_mva = 0.0;
  std::vector<Bus> buses;
  std::vector<Branch> branches;
  std::vector<std::vector<BranchEnd>> adjacency;  // per bus
  std::vector<int> gen_buses;
  int ref_bus = -1;

  int n() const { return static_cast<int>(buses.size()); }
  int m() const { return static_cast<int>(branches.size()); }
  int n_ineq() const { return 6 * n() + 4 * m(); }
  int n_eq() const { return 2 * n(); }
};

// Flow limit applied to branches whose MVA rating is absent (rateA == 0).
inline constexpr double kUnlimitedFlow = 100.0;  // p.u.

// Parses the MATPOWER subset: baseMVA plus the bus/gen/branch/gencost
// blocks. Unknown mpc.* blocks are skipped. Throws ParseError.
RawCase parse_case(const std::string& path);
RawCase parse_case_text(const std::string& text, const std::string& origin);

// Converts to per-unit and validates. Throws CaseError.
PowerSystem build_system(const RawCase& raw);

PowerSystem load_system(const std::string& path);

// Relabels buses: bus i of `sys` becomes bus perm[i]. Branch endpoints and
// demands move with their buses; branch order is preserved.
PowerSystem apply_bus_permutation(const PowerSystem& sys,
                                  const std::vector<int>& perm);

}  // namespace opfdl
