#include "opfdl/data.hpp"

#include <algorithm>
#include <cmath>
#include <complex>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <limits>
#include <numeric>
#include <vector>

#include <json.hpp>

#include "opfdl/autodiff.hpp"
#include "opfdl/errors.hpp"
#include "opfdl/eval.hpp"
#include "opfdl/parallel.hpp"
#include "opfdl/physics_ad.hpp"
#include "opfdl/rng.hpp"

namespace opfdl {

namespace {

double uniform_component(Rng& rng, double a) {
  if (a == 0.0) return 0.0;  // exact zeros stay zero and consume no draw
  double lo = 0.8 * a;
  double hi = 1.2 * a;
  if (lo > hi) std::swap(lo, hi);
  return rng.uniform(lo, hi);
}

}  // namespace

VecXcd draw_load(const PowerSystem& sys, uint64_t seed, uint64_t candidate) {
  Rng rng(seed, "dataset", candidate);
  const int n = sys.n();
  VecXcd r(n);
  for (int i = 0; i < n; ++i) {
    double re = uniform_component(rng, sys.buses[i].r_ref.real());
    double im = uniform_component(rng, sys.buses[i].r_ref.imag());
    r[i] = {re, im};
  }
  return r;
}

std::vector<VecXcd> generate_loads(const PowerSystem& sys, int n,
                                   uint64_t seed) {
  std::vector<VecXcd> out;
  out.reserve(static_cast<size_t>(n));
  for (int k = 0; k < n; ++k)
    out.push_back(draw_load(sys, seed, static_cast<uint64_t>(k)));
  return out;
}

namespace {

// Augmented-Lagrangian solve state: a tape holding the physics of one
// system, with the demand, multipliers, and penalty weight as leaves so one
// tape serves every outer iteration.
struct SolveTape {
  ad::Tape t;
  ad::Var sg_re, sg_im, v_re, v_im;  // decision leaves
  ad::Var lambda, mu_re, mu_im;      // multiplier leaves
  ad::Var gamma;                     // 1x1 penalty weight
  AdPhysics ph;
  ad::Var obj;
  int n = 0, ng = 0, nx = 0, n_ineq = 0;
};

void write_leaves(SolveTape& st, const Eigen::VectorXd& x);

// x0 must be a feasible-domain point (nonzero voltages): ops are evaluated
// while recording, so the leaves need valid values up front.
SolveTape build_solve_tape(const PowerSystem& sys, const VecXcd& r,
                           double w_cost, const Eigen::VectorXd& x0) {
  SolveTape st;
  ad::Tape& t = st.t;
  st.n = sys.n();
  st.ng = static_cast<int>(sys.gen_buses.size());
  st.nx = 2 * st.ng + 2 * st.n;
  st.n_ineq = sys.n_ineq();

  st.sg_re = t.input(st.ng, 1);
  st.sg_im = t.input(st.ng, 1);
  st.v_re = t.input(st.n, 1);
  st.v_im = t.input(st.n, 1);
  write_leaves(st, x0);

  // Injections live only at generator buses; scatter them into bus order.
  ad::Mat scatter = ad::Mat::Zero(st.n, st.ng);
  for (int k = 0; k < st.ng; ++k) scatter(sys.gen_buses[k], k) = 1.0;
  ad::Var sc = t.constant(scatter);
  AdOperatingPoint pt;
  pt.s_re = t.matmul(sc, st.sg_re);
  pt.s_im = t.matmul(sc, st.sg_im);
  pt.v_re = st.v_re;
  pt.v_im = st.v_im;

  ad::Mat r_re(st.n, 1), r_im(st.n, 1);
  for (int i = 0; i < st.n; ++i) {
    r_re(i, 0) = r[i].real();
    r_im(i, 0) = r[i].imag();
  }
  st.ph = build_physics(t, sys, pt, t.constant(r_re), t.constant(r_im));

  st.lambda = t.input(st.n_ineq, 1);
  st.mu_re = t.input(st.n, 1);
  st.mu_im = t.input(st.n, 1);
  st.gamma = t.input(1, 1);

  ad::Var pen = t.add(
      t.sum(t.square(t.max0(st.ph.g))),
      t.add(t.sum(t.square(st.ph.h_re)), t.sum(t.square(st.ph.h_im))));
  ad::Var multipliers =
      t.add(t.dot(st.lambda, st.ph.g),
            t.add(t.dot(st.mu_re, st.ph.h_re), t.dot(st.mu_im, st.ph.h_im)));
  st.obj = t.add(t.scale(st.ph.cost, w_cost),
                 t.add(t.mul(st.gamma, t.scale(pen, 0.5)), multipliers));
  return st;
}

void write_leaves(SolveTape& st, const Eigen::VectorXd& x) {
  ad::Tape& t = st.t;
  t.leaf_value(st.sg_re).col(0) = x.segment(0, st.ng);
  t.leaf_value(st.sg_im).col(0) = x.segment(st.ng, st.ng);
  t.leaf_value(st.v_re).col(0) = x.segment(2 * st.ng, st.n);
  t.leaf_value(st.v_im).col(0) = x.segment(2 * st.ng + st.n, st.n);
}

Eigen::VectorXd read_gradient(SolveTape& st) {
  Eigen::VectorXd g(st.nx);
  g.segment(0, st.ng) = st.t.adj(st.sg_re).col(0);
  g.segment(st.ng, st.ng) = st.t.adj(st.sg_im).col(0);
  g.segment(2 * st.ng, st.n) = st.t.adj(st.v_re).col(0);
  g.segment(2 * st.ng + st.n, st.n) = st.t.adj(st.v_im).col(0);
  return g;
}

// Max primal infeasibility at the tape's current forward values.
double tape_infeasibility(SolveTape& st) {
  const ad::Mat& g = st.t.val(st.ph.g);
  const ad::Mat& hr = st.t.val(st.ph.h_re);
  const ad::Mat& hi = st.t.val(st.ph.h_im);
  double worst = g.maxCoeff();
  worst = std::max(0.0, worst);
  worst = std::max(worst, hr.cwiseAbs().maxCoeff());
  worst = std::max(worst, hi.cwiseAbs().maxCoeff());
  return worst;
}

// Dense BFGS with Armijo backtracking on the fixed-multiplier objective.
// The subproblems are small (a few hundred variables) but stiff: the penalty
// curvature spans a subspace wider than any practical L-BFGS memory, so the
// full inverse-Hessian update earns its O(n^2) keep. Falls back to steepest
// descent when a direction or line search fails. Leaves the tape
// forward-consistent with the returned x.
int g_inner_iters = 0;
int g_inner_fail = 0;

void inner_minimize(SolveTape& st, Eigen::VectorXd& x, int max_inner,
                    double gtol) {
  g_inner_iters = 0;
  g_inner_fail = 0;
  ad::Tape& t = st.t;
  write_leaves(st, x);
  t.forward();
  double f = t.scalar(st.obj);
  if (!std::isfinite(f)) return;
  t.backward(st.obj);
  Eigen::VectorXd grad = read_gradient(st);

  const int nx = st.nx;
  Eigen::MatrixXd h_inv;  // empty until the first curvature pair
  bool have_h = false;
  int stalled = 0;

  for (int it = 0; it < max_inner; ++it) {
    g_inner_iters = it;
    double ginf = grad.cwiseAbs().maxCoeff();
    if (!(ginf > gtol)) break;

    Eigen::VectorXd d =
        have_h ? Eigen::VectorXd(-(h_inv * grad))
               : Eigen::VectorXd(-grad / std::max(1.0, ginf));
    double slope = grad.dot(d);
    if (!(slope < 0.0)) {
      have_h = false;
      d = -grad / std::max(1.0, ginf);
      slope = grad.dot(d);
    }

    double step = 1.0;
    bool accepted = false;
    Eigen::VectorXd x_new;
    double f_new = f;
    for (int trial = 0; trial < 50; ++trial) {
      x_new = x + step * d;
      write_leaves(st, x_new);
      t.forward();
      f_new = t.scalar(st.obj);
      if (std::isfinite(f_new) && f_new <= f + 1e-4 * step * slope) {
        accepted = true;
        break;
      }
      step *= 0.5;
    }
    if (!accepted) {
      if (have_h) {
        // Retry from the same x with a fresh steepest-descent direction.
        have_h = false;
        write_leaves(st, x);
        t.forward();
        continue;
      }
      write_leaves(st, x);  // restore: tape must describe the accepted point
      t.forward();
      g_inner_fail = 1;
      break;
    }
    t.backward(st.obj);
    Eigen::VectorXd grad_new = read_gradient(st);
    Eigen::VectorXd s = x_new - x;
    Eigen::VectorXd y = grad_new - grad;
    double sy = s.dot(y);
    // Update only on positive curvature (the penalty kinks break C2).
    if (sy > 1e-12 * s.norm() * y.norm()) {
      if (!have_h) {
        h_inv = (sy / y.squaredNorm()) *
                Eigen::MatrixXd::Identity(nx, nx);
        have_h = true;
      }
      Eigen::VectorXd hy = h_inv * y;
      double yhy = y.dot(hy);
      h_inv += ((sy + yhy) / (sy * sy)) * (s * s.transpose());
      Eigen::MatrixXd cross = hy * s.transpose();
      h_inv -= (cross + cross.transpose()) / sy;
    }
    // Kink-riding near an active-set boundary makes progress collapse long
    // before the gradient test fires; stop once f stops moving.
    stalled = (f - f_new <= 1e-12 * std::max(1.0, std::abs(f_new))) ? stalled + 1 : 0;
    x = x_new;
    f = f_new;
    grad = grad_new;
    if (stalled >= 8) break;
    if (std::getenv("OPFDL_TRACE_INNER") && (it % 25 == 0))
      std::fprintf(stderr, "  it=%d f=%.8f ginf=%.3e step=%.2e\n", it, f,
                   grad.cwiseAbs().maxCoeff(), step);
  }
}


}  // namespace

ReferenceSolution reference_solve(const PowerSystem& sys, const VecXcd& r,
                                  const SolveOptions& opt) {
  const int n = sys.n();
  const int ng = static_cast<int>(sys.gen_buses.size());

  // Warm start: case voltages, box-midpoint injections.
  VecXcd warm_s = VecXcd::Zero(n);
  for (int b : sys.gen_buses)
    warm_s[b] = 0.5 * (sys.buses[b].s_min + sys.buses[b].s_max);
  double c_warm = cost(sys, warm_s);
  // Cost scale: rescaling every cost coefficient by 2^k leaves the iterates
  // bit-identical, because the objective's cost term stays fixed.
  double w_cost = 1.0 / std::max(std::abs(c_warm), 1e-6);

  Eigen::VectorXd x(2 * ng + 2 * n);
  for (int k = 0; k < ng; ++k) {
    x[k] = warm_s[sys.gen_buses[k]].real();
    x[ng + k] = warm_s[sys.gen_buses[k]].imag();
  }
  for (int i = 0; i < n; ++i) {
    x[2 * ng + i] = sys.buses[i].v0.real();
    x[2 * ng + n + i] = sys.buses[i].v0.imag();
  }

  SolveTape st = build_solve_tape(sys, r, w_cost, x);
  ad::Tape& t = st.t;

  Eigen::VectorXd lambda = Eigen::VectorXd::Zero(st.n_ineq);
  Eigen::VectorXd mu_re = Eigen::VectorXd::Zero(n);
  Eigen::VectorXd mu_im = Eigen::VectorXd::Zero(n);
  double gamma = opt.gamma0;

  Eigen::VectorXd best_x = x;
  double best_feas = std::numeric_limits<double>::infinity();
  double feas_prev = std::numeric_limits<double>::infinity();

  for (int outer = 0; outer < opt.max_outer; ++outer) {
    t.leaf_value(st.lambda).col(0) = lambda;
    t.leaf_value(st.mu_re).col(0) = mu_re;
    t.leaf_value(st.mu_im).col(0) = mu_im;
    t.leaf_value(st.gamma)(0, 0) = gamma;

    double gtol = std::max(1e-9, 1e-3 / gamma);
    inner_minimize(st, x, opt.max_inner, gtol);

    double feas = tape_infeasibility(st);
    if (std::getenv("OPFDL_TRACE")) {
      t.backward(st.obj);
      std::fprintf(stderr,
                   "outer=%d gamma=%.1e feas=%.3e cost=%.4f ginf=%.3e it=%d fail=%d\n",
                   outer, gamma, feas, t.val(st.ph.cost)(0, 0),
                   read_gradient(st).cwiseAbs().maxCoeff(), g_inner_iters,
                   g_inner_fail);
    }
    if (!std::isfinite(feas)) break;
    if (feas <= best_feas) {
      best_feas = feas;
      best_x = x;
    }
    if (feas <= opt.stop_tol) break;

    const ad::Mat& g_val = t.val(st.ph.g);
    const ad::Mat& hr_val = t.val(st.ph.h_re);
    const ad::Mat& hi_val = t.val(st.ph.h_im);
    lambda = (lambda + gamma * g_val.col(0)).cwiseMax(0.0);
    mu_re += gamma * hr_val.col(0);
    mu_im += gamma * hi_val.col(0);
    if (feas > 0.5 * feas_prev) gamma = std::min(2.0 * gamma, opt.gamma_max);
    feas_prev = feas;
  }

  OperatingPoint pt;
  pt.s = VecXcd::Zero(n);
  for (int k = 0; k < ng; ++k)
    pt.s[sys.gen_buses[k]] = {best_x[k], best_x[ng + k]};
  pt.v = VecXcd(n);
  for (int i = 0; i < n; ++i)
    pt.v[i] = {best_x[2 * ng + i], best_x[2 * ng + n + i]};

  // Rotate the voltage gauge so the reference bus keeps its case angle; the
  // physics are rotation-invariant but the labels should be reproducible.
  std::complex<double> v_ref = pt.v[sys.ref_bus];
  if (std::abs(v_ref) > 0.0) {
    double want = std::arg(sys.buses[sys.ref_bus].v0);
    pt.v *= std::polar(1.0, want - std::arg(v_ref));
  }

  // Polish to a power-flow-exact point: labels must be fixed points of the
  // evaluation projection, so re-projecting one later is the identity.
  ProjectionResult polish = project_to_powerflow(sys, r, pt, 1e-12, 20);
  if (polish.converged) pt = polish.pt;

  BranchFlows flows = branch_flows(sys, pt.v);
  VecXd h = balance_residual(sys, pt, r);
  ConstraintSlacks slacks = inequality_slacks(sys, pt, flows);
  double feas = std::max(0.0, slacks.g.maxCoeff());
  if (h.size() > 0) feas = std::max(feas, h.cwiseAbs().maxCoeff());

  ReferenceSolution sol;
  sol.point = pt;
  sol.cost = cost(sys, pt.s);
  sol.kkt_residual = feas;
  sol.converged = feas <= opt.feas_tol;
  return sol;
}

bool certify_label(const PowerSystem& sys, const VecXcd& r,
                   const ReferenceSolution& sol, double tol) {
  VecXd h = balance_residual(sys, sol.point, r);
  if (!(h.cwiseAbs().maxCoeff() <= tol)) return false;
  VecXd eps = normalized_violations(sys, sol.point);
  return eps.maxCoeff() <= tol;
}

Dataset make_dataset(const PowerSystem& sys, int n, uint64_t seed,
                     bool with_labels, const SolveOptions& opt,
                     int n_threads, int* n_rejected) {
  if (n < 10) throw CaseError("dataset needs at least 10 samples");
  int rejected = 0;

  Dataset ds;
  ds.system_id = sys.name;
  ds.n_buses = sys.n();
  ds.seed = seed;
  ds.labeled = with_labels;
  ds.samples.reserve(static_cast<size_t>(n));

  if (!with_labels) {
    for (int k = 0; k < n; ++k) {
      Sample s;
      s.r = draw_load(sys, seed, static_cast<uint64_t>(k));
      ds.samples.push_back(std::move(s));
    }
  } else {
    struct Candidate {
      VecXcd r;
      ReferenceSolution sol;
      bool ok = false;
    };
    const int cap = 3 * n;
    int next = 0;
    while (ds.size() < n) {
      if (next >= cap)
        throw ResampleCapExceeded(
            "only " + std::to_string(ds.size()) + " of " + std::to_string(n) +
            " samples certified within the " + std::to_string(cap) +
            "-candidate budget");
      int chunk = std::min(n - ds.size(), cap - next);
      std::vector<Candidate> cands(static_cast<size_t>(chunk));
      parallel_for(chunk, n_threads, [&](int i) {
        Candidate& c = cands[static_cast<size_t>(i)];
        c.r = draw_load(sys, seed, static_cast<uint64_t>(next + i));
        c.sol = reference_solve(sys, c.r, opt);
        c.ok = c.sol.converged && certify_label(sys, c.r, c.sol);
      });
      // Serial in-order scan keeps the kept set independent of thread count.
      for (auto& c : cands) {
        if (ds.size() >= n) break;
        if (!c.ok) {
          ++rejected;
          continue;
        }
        Sample s;
        s.r = std::move(c.r);
        s.labeled = true;
        s.label = std::move(c.sol);
        ds.samples.push_back(std::move(s));
      }
      next += chunk;
    }
  }

  std::vector<int> idx(static_cast<size_t>(n));
  std::iota(idx.begin(), idx.end(), 0);
  Rng split_rng(seed, "split");
  shuffle_indices(idx, split_rng);
  const int n_train = (8 * n) / 10;
  const int n_val = n / 10;
  ds.train_idx.assign(idx.begin(), idx.begin() + n_train);
  ds.val_idx.assign(idx.begin() + n_train, idx.begin() + n_train + n_val);
  ds.test_idx.assign(idx.begin() + n_train + n_val, idx.end());
  std::sort(ds.train_idx.begin(), ds.train_idx.end());
  std::sort(ds.val_idx.begin(), ds.val_idx.end());
  std::sort(ds.test_idx.begin(), ds.test_idx.end());
  if (n_rejected) *n_rejected = rejected;
  return ds;
}

namespace {

nlohmann::ordered_json complex_vector_json(const VecXcd& v) {
  nlohmann::ordered_json arr = nlohmann::ordered_json::array();
  for (int i = 0; i < v.size(); ++i)
    arr.push_back({v[i].real(), v[i].imag()});
  return arr;
}

VecXcd complex_vector_from_json(const nlohmann::json& arr, int expect,
                                const std::string& what, int line_no) {
  if (!arr.is_array() || static_cast<int>(arr.size()) != expect)
    throw SchemaError("line " + std::to_string(line_no) + ": " + what +
                      " must be an array of " + std::to_string(expect) +
                      " [re, im] pairs");
  VecXcd v(expect);
  for (int i = 0; i < expect; ++i) {
    const auto& pair = arr[static_cast<size_t>(i)];
    if (!pair.is_array() || pair.size() != 2 || !pair[0].is_number() ||
        !pair[1].is_number())
      throw SchemaError("line " + std::to_string(line_no) + ": " + what +
                        "[" + std::to_string(i) + "] is not an [re, im] pair");
    v[i] = {pair[0].get<double>(), pair[1].get<double>()};
  }
  return v;
}

}  // namespace

void save_dataset(const std::string& path, const Dataset& ds) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot open for writing: " + path);

  nlohmann::ordered_json hdr;
  hdr["schema"] = "opfdl.dataset";
  hdr["version"] = 1;
  hdr["case"] = ds.system_id;
  hdr["n_buses"] = ds.n_buses;
  hdr["seed"] = ds.seed;
  hdr["labeled"] = ds.labeled;
  hdr["split"]["train"] = ds.train_idx;
  hdr["split"]["val"] = ds.val_idx;
  hdr["split"]["test"] = ds.test_idx;
  out << hdr.dump() << "\n";

  for (int i = 0; i < ds.size(); ++i) {
    const Sample& s = ds.samples[static_cast<size_t>(i)];
    nlohmann::ordered_json row;
    row["id"] = i;
    row["r"] = complex_vector_json(s.r);
    if (s.labeled) {
      nlohmann::ordered_json label;
      label["s"] = complex_vector_json(s.label.point.s);
      label["v"] = complex_vector_json(s.label.point.v);
      label["cost"] = s.label.cost;
      label["kkt_residual"] = s.label.kkt_residual;
      label["converged"] = s.label.converged;
      row["label"] = std::move(label);
    }
    out << row.dump() << "\n";
  }
  if (!out) throw std::runtime_error("write failed: " + path);
}

Dataset load_dataset(const std::string& path, const PowerSystem& sys) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open dataset: " + path);

  std::string line;
  if (!std::getline(in, line))
    throw SchemaError("dataset is empty: " + path);

  nlohmann::json hdr;
  try {
    hdr = nlohmann::json::parse(line);
  } catch (const nlohmann::json::exception& e) {
    throw SchemaError("line 1: malformed dataset header: " +
                      std::string(e.what()));
  }
  if (!hdr.is_object() || hdr.value("schema", "") != "opfdl.dataset")
    throw SchemaError("line 1: not an opfdl.dataset file");
  if (hdr.value("version", -1) != 1)
    throw SchemaError("line 1: unsupported dataset version");
  for (const char* key : {"case", "n_buses", "seed", "labeled", "split"})
    if (!hdr.contains(key))
      throw SchemaError("line 1: dataset header is missing '" +
                        std::string(key) + "'");

  Dataset ds;
  ds.system_id = hdr["case"].get<std::string>();
  ds.n_buses = hdr["n_buses"].get<int>();
  ds.seed = hdr["seed"].get<uint64_t>();
  ds.labeled = hdr["labeled"].get<bool>();
  if (ds.system_id != sys.name)
    throw MismatchError("dataset was generated for case '" + ds.system_id +
                        "', not '" + sys.name + "'");
  if (ds.n_buses != sys.n())
    throw MismatchError("dataset has " + std::to_string(ds.n_buses) +
                        " buses, case has " + std::to_string(sys.n()));

  const auto& split = hdr["split"];
  for (const char* key : {"train", "val", "test"})
    if (!split.contains(key) || !split[key].is_array())
      throw SchemaError("line 1: split is missing '" + std::string(key) + "'");
  ds.train_idx = split["train"].get<std::vector<int>>();
  ds.val_idx = split["val"].get<std::vector<int>>();
  ds.test_idx = split["test"].get<std::vector<int>>();

  int line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    nlohmann::json row;
    try {
      row = nlohmann::json::parse(line);
    } catch (const nlohmann::json::exception& e) {
      throw SchemaError("line " + std::to_string(line_no) +
                        ": malformed sample record: " + std::string(e.what()));
    }
    if (!row.is_object() || !row.contains("id") || !row.contains("r"))
      throw SchemaError("line " + std::to_string(line_no) +
                        ": sample record needs 'id' and 'r'");
    if (row["id"].get<int>() != ds.size())
      throw SchemaError("line " + std::to_string(line_no) +
                        ": sample ids must be sequential");
    Sample s;
    s.r = complex_vector_from_json(row["r"], ds.n_buses, "r", line_no);
    if (ds.labeled) {
      if (!row.contains("label"))
        throw SchemaError("line " + std::to_string(line_no) +
                          ": labeled dataset is missing a label");
      const auto& label = row["label"];
      for (const char* key : {"s", "v", "cost", "kkt_residual", "converged"})
        if (!label.contains(key))
          throw SchemaError("line " + std::to_string(line_no) +
                            ": label is missing '" + std::string(key) + "'");
      s.labeled = true;
      s.label.point.s =
          complex_vector_from_json(label["s"], ds.n_buses, "label.s", line_no);
      s.label.point.v =
          complex_vector_from_json(label["v"], ds.n_buses, "label.v", line_no);
      s.label.cost = label["cost"].get<double>();
      s.label.kkt_residual = label["kkt_residual"].get<double>();
      s.label.converged = label["converged"].get<bool>();
    } else if (row.contains("label")) {
      throw SchemaError("line " + std::to_string(line_no) +
                        ": unlabeled dataset carries a label");
    }
    ds.samples.push_back(std::move(s));
  }

  const int total = ds.size();
  std::vector<char> seen(static_cast<size_t>(total), 0);
  auto check_split = [&](const std::vector<int>& part, const char* name) {
    for (int i : part) {
      if (i < 0 || i >= total)
        throw SchemaError("split '" + std::string(name) +
                          "' references sample " + std::to_string(i) +
                          " outside the dataset");
      if (seen[static_cast<size_t>(i)]++)
        throw SchemaError("sample " + std::to_string(i) +
                          " appears in two split parts");
    }
  };
  check_split(ds.train_idx, "train");
  check_split(ds.val_idx, "val");
  check_split(ds.test_idx, "test");
  if (static_cast<int>(ds.train_idx.size() + ds.val_idx.size() +
                       ds.test_idx.size()) != total)
    throw SchemaError("split does not cover all samples");
  return ds;
}

double mean_train_label_cost(const Dataset& ds) {
  if (!ds.labeled || ds.train_idx.empty())
    throw MismatchError("cost normalization needs labeled training samples");
  double sum = 0.0;
  for (int i : ds.train_idx) sum += ds.samples[static_cast<size_t>(i)].label.cost;
  return sum / static_cast<double>(ds.train_idx.size());
}

}  // namespace opfdl
