#include "opfdl/eval.hpp"

#include <Eigen/LU>
#include <algorithm>
#include <cmath>
#include <complex>
#include <fstream>

#include "opfdl/errors.hpp"
#include "opfdl/num_format.hpp"

namespace opfdl {

namespace {

using cd = std::complex<double>;

double residual_inf(const VecXd& f) {
  return f.size() ? f.cwiseAbs().maxCoeff() : 0.0;
}

// Balance residuals of the non-reference buses, interleaved (Re, Im).
VecXd reduced_residual(const PowerSystem& sys, const VecXcd& s,
                       const VecXcd& v, const VecXcd& r,
                       const std::vector<int>& red) {
  BranchFlows fl = branch_flows(sys, v);
  VecXd out(2 * static_cast<Eigen::Index>(red.size()));
  for (std::size_t k = 0; k < red.size(); ++k) {
    const int i = red[k];
    cd acc = s[i] - r[i];
    for (const BranchEnd& be : sys.adjacency[i])
      acc -= be.from_side ? fl.from[be.branch] : fl.to[be.branch];
    acc += std::conj(sys.buses[i].y_shunt) * std::norm(v[i]);
    out[2 * k] = acc.real();
    out[2 * k + 1] = acc.imag();
  }
  return out;
}

}  // namespace

ProjectionResult project_to_powerflow(const PowerSystem& sys, const VecXcd& r,
                                      const OperatingPoint& prediction,
                                      double tol, int max_iter) {
  const int n = sys.n();
  ProjectionResult res;
  res.pt = prediction;

  std::vector<int> red;  // non-reference buses, bus order
  red.reserve(n - 1);
  std::vector<int> col_of(n, -1);
  for (int i = 0; i < n; ++i) {
    if (i == sys.ref_bus) continue;
    col_of[i] = static_cast<int>(red.size());
    red.push_back(i);
  }

  VecXcd v = prediction.v;
  const Eigen::Index dim = 2 * static_cast<Eigen::Index>(red.size());
  Eigen::MatrixXd J(dim, dim);
  VecXd F = reduced_residual(sys, prediction.s, v, r, red);
  double f_inf = residual_inf(F);
  int stalls = 0;

  while (res.iterations < max_iter && f_inf > tol) {
    J.setZero();
    // d(h_i)/d(v_j) entries; each complex derivative fills a 2x2 block.
    auto put = [&](int row_bus, int col_bus, cd d_re, cd d_im) {
      const int rb = col_of[row_bus], cb = col_of[col_bus];
      if (cb < 0) return;  // reference voltage is pinned
      J(2 * rb, 2 * cb) += d_re.real();
      J(2 * rb + 1, 2 * cb) += d_re.imag();
      J(2 * rb, 2 * cb + 1) += d_im.real();
      J(2 * rb + 1, 2 * cb + 1) += d_im.imag();
    };
    for (int k = 0; k < static_cast<int>(red.size()); ++k) {
      const int i = red[k];
      const Bus& bus = sys.buses[i];
      const cd ysh = std::conj(bus.y_shunt);
      put(i, i, ysh * 2.0 * v[i].real(), ysh * 2.0 * v[i].imag());
      for (const BranchEnd& be : sys.adjacency[i]) {
        const Branch& br = sys.branches[be.branch];
        const int j = be.from_side ? br.to : br.from;
        // Both flow directions share the derivative shape
        //   f = K |v_i|^2 - L * (v_i at the owning end paired with conj of
        //   the far end); h_i carries -f.
        cd K, L;
        if (be.from_side) {
          K = std::conj(br.y + br.y_c_from) / std::norm(br.t);
          L = std::conj(br.y) / br.t;
        } else {
          K = std::conj(br.y + br.y_c_to);
          L = std::conj(br.y) / std::conj(br.t);
        }
        const cd ji(0.0, 1.0);
        put(i, i, -(2.0 * K * v[i].real() - L * std::conj(v[j])),
            -(2.0 * K * v[i].imag() - ji * L * std::conj(v[j])));
        put(i, j, L * v[i], -ji * L * v[i]);
      }
    }
    VecXd step = J.partialPivLu().solve(-F);
    if (!step.allFinite()) break;

    // Halve the step while it fails to reduce the residual.
    double scale = 1.0;
    VecXcd v_best = v;
    VecXd f_best = F;
    double best = f_inf;
    bool improved = false;
    for (int trial = 0; trial < 7; ++trial) {
      VecXcd v_try = v;
      for (std::size_t k = 0; k < red.size(); ++k)
        v_try[red[k]] += scale * cd(step[2 * k], step[2 * k + 1]);
      VecXd f_try = reduced_residual(sys, prediction.s, v_try, r, red);
      const double t_inf = residual_inf(f_try);
      if (std::isfinite(t_inf) && t_inf < best) {
        v_best = v_try;
        f_best = f_try;
        best = t_inf;
        improved = true;
        break;
      }
      scale *= 0.5;
    }
    ++res.iterations;
    if (!improved) {
      if (++stalls >= 3) break;
      continue;
    }
    stalls = 0;
    v = v_best;
    F = f_best;
    f_inf = best;
  }

  res.h_inf = f_inf;
  res.converged = f_inf <= tol;
  res.pt.v = v;
  // Close the reference-bus balance exactly.
  BranchFlows fl = branch_flows(sys, v);
  cd flow_sum = 0.0;
  for (const BranchEnd& be : sys.adjacency[sys.ref_bus])
    flow_sum += be.from_side ? fl.from[be.branch] : fl.to[be.branch];
  res.pt.s[sys.ref_bus] =
      r[sys.ref_bus] + flow_sum -
      std::conj(sys.buses[sys.ref_bus].y_shunt) * std::norm(v[sys.ref_bus]);
  return res;
}

VecXd normalized_violations(const PowerSystem& sys, const OperatingPoint& pt,
                            const BranchFlows& flows) {
  const SlackLayout lay(sys);
  VecXd g = inequality_slacks(sys, pt, flows).g;
  auto norm_by = [](double& slack, double range) {
    if (range > 0.0) slack /= range;
  };
  for (int i = 0; i < lay.n; ++i) {
    const Bus& b = sys.buses[i];
    const double pr = b.s_max.real() - b.s_min.real();
    const double qr = b.s_max.imag() - b.s_min.imag();
    const double vr = b.v_max - b.v_min;
    norm_by(g[lay.p_lo() + i], pr);
    norm_by(g[lay.p_hi() + i], pr);
    norm_by(g[lay.q_lo() + i], qr);
    norm_by(g[lay.q_hi() + i], qr);
    norm_by(g[lay.v_lo() + i], vr);
    norm_by(g[lay.v_hi() + i], vr);
  }
  for (int b = 0; b < lay.m; ++b) {
    const Branch& br = sys.branches[b];
    const double ar = br.theta_max - br.theta_min;
    norm_by(g[lay.flow_from() + b], br.f_max_from);
    norm_by(g[lay.flow_to() + b], br.f_max_to);
    norm_by(g[lay.ang_lo() + b], ar);
    norm_by(g[lay.ang_hi() + b], ar);
  }
  return g.cwiseMax(0.0);
}

VecXd normalized_violations(const PowerSystem& sys, const OperatingPoint& pt) {
  return normalized_violations(sys, pt, branch_flows(sys, pt.v));
}

const char* const kReportBlockNames[kReportBlocks] = {
    "re_s", "im_s", "vm", "flow_from", "flow_to", "angle"};

SampleMetrics sample_metrics(const PowerSystem& sys, const VecXcd& r,
                             const OperatingPoint& prediction,
                             double label_cost, double cost_bar,
                             int sample_id) {
  const SlackLayout lay(sys);
  SampleMetrics out;
  out.sample_id = sample_id;

  // Invariant metric at the raw prediction: per-unit slacks, no projection.
  {
    BranchFlows fl = branch_flows(sys, prediction.v);
    VecXd eps_g =
        inequality_slacks(sys, prediction, fl).g.cwiseMax(0.0);
    VecXd eps_h = balance_residual(sys, prediction, r).cwiseAbs();
    const double c_raw = cost(sys, prediction.s);
    out.invariant_metric = c_raw / cost_bar +
                           1e3 * eps_h.sum() / eps_h.size() +
                           1e3 * eps_g.sum() / lay.total();
  }

  ProjectionResult proj = project_to_powerflow(sys, r, prediction);
  out.nr_converged = proj.converged;
  out.nr_iterations = proj.iterations;
  const OperatingPoint& pt = proj.converged ? proj.pt : prediction;

  VecXd eps = normalized_violations(sys, pt);
  out.mean_violation = lay.total() > 0 ? eps.sum() / lay.total() : 0.0;
  out.max_violation = eps.size() ? eps.maxCoeff() : 0.0;
  out.cost_projected = cost(sys, pt.s);
  if (label_cost >= 0.0) {
    out.has_optgap = true;
    out.optgap = out.cost_projected / label_cost - 1.0;
  }

  // Reported blocks merge the lo/hi bound pairs of the canonical layout.
  struct Range {
    int start, len;
  };
  const Range ranges[kReportBlocks] = {
      {lay.p_lo(), 2 * lay.n},      {lay.q_lo(), 2 * lay.n},
      {lay.v_lo(), 2 * lay.n},      {lay.flow_from(), lay.m},
      {lay.flow_to(), lay.m},       {lay.ang_lo(), 2 * lay.m}};
  for (int b = 0; b < kReportBlocks; ++b) {
    double sum = 0.0, mx = 0.0;
    for (int k = 0; k < ranges[b].len; ++k) {
      const double e = eps[ranges[b].start + k];
      sum += e;
      mx = std::max(mx, e);
    }
    out.block_mean[b] = ranges[b].len ? sum / ranges[b].len : 0.0;
    out.block_max[b] = mx;
  }
  return out;
}

double percentile95(std::vector<double> values) {
  if (values.empty()) throw ShapeError("percentile of empty list");
  std::sort(values.begin(), values.end());
  const double rank = 0.95 * static_cast<double>(values.size() - 1);
  const std::size_t lo = static_cast<std::size_t>(rank);
  if (lo + 1 >= values.size()) return values.back();
  const double frac = rank - static_cast<double>(lo);
  return values[lo] + frac * (values[lo + 1] - values[lo]);
}

namespace {

AggregateRow stats_row(const std::string& name, const std::vector<double>& v) {
  AggregateRow row;
  row.metric = name;
  const double n = static_cast<double>(v.size());
  double mean = 0.0;
  for (double x : v) mean += x;
  mean /= n;
  double var = 0.0;
  for (double x : v) var += (x - mean) * (x - mean);
  row.mean = mean;
  row.std_dev = std::sqrt(var / n);
  row.p95 = percentile95(v);
  row.max = *std::max_element(v.begin(), v.end());
  return row;
}

}  // namespace

std::vector<AggregateRow> aggregate(const std::vector<SampleMetrics>& metrics) {
  if (metrics.empty()) throw ShapeError("aggregate of empty metric list");
  std::vector<AggregateRow> rows;
  std::vector<double> optgap;
  for (const auto& m : metrics)
    if (m.has_optgap) optgap.push_back(m.optgap);
  if (!optgap.empty()) rows.push_back(stats_row("optgap", optgap));
  auto collect = [&](const char* name, auto&& get) {
    std::vector<double> v;
    v.reserve(metrics.size());
    for (const auto& m : metrics) v.push_back(get(m));
    rows.push_back(stats_row(name, v));
  };
  collect("mean_violation",
          [](const SampleMetrics& m) { return m.mean_violation; });
  collect("max_violation",
          [](const SampleMetrics& m) { return m.max_violation; });
  collect("invariant_metric",
          [](const SampleMetrics& m) { return m.invariant_metric; });
  return rows;
}

void write_per_sample_csv(const std::string& path,
                          const std::vector<SampleMetrics>& metrics) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw SchemaError("cannot open for writing: " + path);
  out << "sample_id,optgap,mean_violation,max_violation,invariant_metric,"
         "cost_projected,nr_converged,nr_iterations";
  for (int b = 0; b < kReportBlocks; ++b)
    out << ',' << kReportBlockNames[b] << "_mean,"
        << kReportBlockNames[b] << "_max";
  out << '\n';
  for (const auto& m : metrics) {
    out << m.sample_id << ','
        << (m.has_optgap ? fmt_double(m.optgap) : "nan") << ','
        << fmt_double(m.mean_violation) << ',' << fmt_double(m.max_violation)
        << ',' << fmt_double(m.invariant_metric) << ','
        << fmt_double(m.cost_projected) << ',' << (m.nr_converged ? 1 : 0)
        << ',' << m.nr_iterations;
    for (int b = 0; b < kReportBlocks; ++b)
      out << ',' << fmt_double(m.block_mean[b]) << ','
          << fmt_double(m.block_max[b]);
    out << '\n';
  }
  if (!out.good()) throw SchemaError("write failed: " + path);
}

void write_aggregate_csv(const std::string& path, const std::string& case_name,
                         const std::string& method,
                         const std::vector<AggregateRow>& rows) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw SchemaError("cannot open for writing: " + path);
  out << "case,method,metric,mean,std,p95,max\n";
  for (const auto& rw : rows) {
    out << case_name << ',' << method << ',' << rw.metric << ','
        << fmt_double(rw.mean) << ',' << fmt_double(rw.std_dev) << ','
        << fmt_double(rw.p95) << ',' << fmt_double(rw.max) << '\n';
  }
  if (!out.good()) throw SchemaError("write failed: " + path);
}

}  // namespace opfdl
