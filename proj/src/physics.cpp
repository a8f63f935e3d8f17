#include "opfdl/physics.hpp"

#include <cmath>

namespace opfdl {

const char* const kSlackBlockNames[10] = {
    "p_lo", "p_hi", "q_lo", "q_hi", "v_lo",
    "v_hi", "flow_from", "flow_to", "ang_lo", "ang_hi"};

BranchFlows branch_flows(const PowerSystem& sys, const VecXcd& v) {
  const int m = sys.m();
  BranchFlows f;
  f.from.resize(m);
  f.to.resize(m);
  for (int b = 0; b < m; ++b) {
    const Branch& br = sys.branches[b];
    const std::complex<double> vi = v[br.from];
    const std::complex<double> vj = v[br.to];
    const double t2 = std::norm(br.t);
    f.from[b] = std::conj(br.y + br.y_c_from) * std::norm(vi) / t2 -
                std::conj(br.y) * vi * std::conj(vj) / br.t;
    f.to[b] = std::conj(br.y + br.y_c_to) * std::norm(vj) -
              std::conj(br.y) * std::conj(vi) * vj / std::conj(br.t);
  }
  return f;
}

VecXcd balance_residual_complex(const PowerSystem& sys,
                                const OperatingPoint& pt, const VecXcd& r,
                                const BranchFlows& flows) {
  const int n = sys.n();
  VecXcd h(n);
  for (int i = 0; i < n; ++i) {
    std::complex<double> acc = pt.s[i] - r[i] +
                               std::conj(sys.buses[i].y_shunt) *
                                   std::norm(pt.v[i]);
    for (const BranchEnd& e : sys.adjacency[i])
      acc -= e.from_side ? flows.from[e.branch] : flows.to[e.branch];
    h[i] = acc;
  }
  return h;
}

VecXd balance_residual(const PowerSystem& sys, const OperatingPoint& pt,
                       const VecXcd& r) {
  return interleave(
      balance_residual_complex(sys, pt, r, branch_flows(sys, pt.v)));
}

ConstraintSlacks inequality_slacks(const PowerSystem& sys,
                                   const OperatingPoint& pt,
                                   const BranchFlows& flows) {
  const SlackLayout lay(sys);
  ConstraintSlacks out;
  out.g.resize(lay.total());
  for (int i = 0; i < lay.n; ++i) {
    const Bus& bus = sys.buses[i];
    const double sp = pt.s[i].real(), sq = pt.s[i].imag();
    const double vm = std::abs(pt.v[i]);
    out.g[lay.p_lo() + i] = bus.s_min.real() - sp;
    out.g[lay.p_hi() + i] = sp - bus.s_max.real();
    out.g[lay.q_lo() + i] = bus.s_min.imag() - sq;
    out.g[lay.q_hi() + i] = sq - bus.s_max.imag();
    out.g[lay.v_lo() + i] = bus.v_min - vm;
    out.g[lay.v_hi() + i] = vm - bus.v_max;
  }
  for (int b = 0; b < lay.m; ++b) {
    const Branch& br = sys.branches[b];
    const std::complex<double> prod =
        pt.v[br.from] * std::conj(pt.v[br.to]);
    const double theta = std::atan2(prod.imag(), prod.real());
    out.g[lay.flow_from() + b] = std::abs(flows.from[b]) - br.f_max_from;
    out.g[lay.flow_to() + b] = std::abs(flows.to[b]) - br.f_max_to;
    out.g[lay.ang_lo() + b] = br.theta_min - theta;
    out.g[lay.ang_hi() + b] = theta - br.theta_max;
  }
  return out;
}

double cost(const PowerSystem& sys, const VecXcd& s) {
  double c = 0.0;
  for (int i = 0; i < sys.n(); ++i) {
    const Bus& bus = sys.buses[i];
    const double p = s[i].real() * sys.base_mva;
    c += bus.c0 + bus.c1 * p + bus.c2 * p * p;
  }
  return c;
}

double penalty(const VecXd& g, const VecXd& h, double gamma) {
  return penalty_split(g, h, gamma, gamma);
}

double penalty_split(const VecXd& g, const VecXd& h, double w_g, double w_h) {
  double acc_g = 0.0;
  for (Eigen::Index i = 0; i < g.size(); ++i) {
    const double gi = g[i] > 0.0 ? g[i] : 0.0;
    acc_g += gi * gi;
  }
  return 0.5 * w_g * acc_g + 0.5 * w_h * h.squaredNorm();
}

}  // namespace opfdl
