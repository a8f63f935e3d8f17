#pragma once

#include <Eigen/Dense>
#include <complex>

#include "opfdl/case_io.hpp"

namespace opfdl {

using VecXd = Eigen::VectorXd;
using VecXcd = Eigen::VectorXcd;

// Per-bus complex demand drawn for one sample.
struct DemandSample {
  VecXcd r;
};

// Candidate solution: per-bus complex generation and voltage phasors.
struct OperatingPoint {
  VecXcd s;
  VecXcd v;
};

struct BranchFlows {
  VecXcd from;  // power entering the branch at the from bus
  VecXcd to;    // power entering the branch at the to bus
};

// Canonical inequality-slack layout, violation-positive (entry > 0 means the
// constraint is violated). Ten contiguous blocks:
//   p_lo, p_hi, q_lo, q_hi, v_lo, v_hi               (N each)
//   flow_from, flow_to, ang_lo, ang_hi               (M each)
struct SlackLayout {
  int n = 0, m = 0;
  explicit SlackLayout(const PowerSystem& sys) : n(sys.n()), m(sys.m()) {}
  SlackLayout(int n_, int m_) : n(n_), m(m_) {}
  int p_lo() const { return 0; }
  int p_hi() const { return n; }
  int q_lo() const { return 2 * n; }
  int q_hi() const { return 3 * n; }
  int v_lo() const { return 4 * n; }
  int v_hi() const { return 5 * n; }
  int flow_from() const { return 6 * n; }
  int flow_to() const { return 6 * n + m; }
  int ang_lo() const { return 6 * n + 2 * m; }
  int ang_hi() const { return 6 * n + 3 * m; }
  int total() const { return 6 * n + 4 * m; }
};

// Block names in layout order, used for CSV columns.
extern const char* const kSlackBlockNames[10];

struct ConstraintSlacks {
  VecXd g;  // length 6N+4M, SlackLayout order
};

BranchFlows branch_flows(const PowerSystem& sys, const VecXcd& v);

// Complex per-bus mismatch s - r - (sum of outgoing flows) + y_shunt^* |v|^2.
VecXcd balance_residual_complex(const PowerSystem& sys, const OperatingPoint& pt,
                                const VecXcd& r, const BranchFlows& flows);

// Interleaved (Re, Im) pairs, length 2N.
VecXd balance_residual(const PowerSystem& sys, const OperatingPoint& pt,
                       const VecXcd& r);

ConstraintSlacks inequality_slacks(const PowerSystem& sys,
                                   const OperatingPoint& pt,
                                   const BranchFlows& flows);

// Quadratic generation cost with Re(s) in the case's native MW scale.
double cost(const PowerSystem& sys, const VecXcd& s);

// (gamma/2) * (||max(0,g)||^2 + ||h||^2)
double penalty(const VecXd& g, const VecXd& h, double gamma);

// Same with separate weights for the inequality and equality halves.
double penalty_split(const VecXd& g, const VecXd& h, double w_g, double w_h);

inline VecXd interleave(const VecXcd& c) {
  VecXd out(2 * c.size());
  for (Eigen::Index i = 0; i < c.size(); ++i) {
    out[2 * i] = c[i].real();
    out[2 * i + 1] = c[i].imag();
  }
  return out;
}

}  // namespace opfdl
