// Times the three hot loops (batch gradients, reference labeling, projection)
// with the serial path against the threaded one and checks the results stay
// bitwise identical, which is the contract the trainer relies on.

#include <chrono>
#include <cstdio>
#include <cstring>
#include <memory>
#include <string>
#include <vector>

#include "opfdl/case_io.hpp"
#include "opfdl/data.hpp"
#include "opfdl/duals.hpp"
#include "opfdl/eval.hpp"
#include "opfdl/gat.hpp"
#include "opfdl/parallel.hpp"

using namespace opfdl;
using Clock = std::chrono::steady_clock;

namespace {

double ms_since(Clock::time_point t0) {
  return std::chrono::duration<double, std::milli>(Clock::now() - t0).count();
}

bool same_bits(const VecXd& a, const VecXd& b) {
  return a.size() == b.size() &&
         std::memcmp(a.data(), b.data(),
                     sizeof(double) * static_cast<std::size_t>(a.size())) == 0;
}

void row(const char* name, double serial_ms, double par_ms, bool match) {
  std::printf("%-18s %10.1f ms %10.1f ms   x%.2f   %s\n", name, serial_ms,
              par_ms, par_ms > 0 ? serial_ms / par_ms : 0.0,
              match ? "bitwise-equal" : "MISMATCH");
}

}  // namespace

int main(int argc, char** argv) {
  std::string case_path = "cases/pglib_opf_case30_ieee.m";
  int threads = 0, n_samples = 32;
  for (int i = 1; i < argc; ++i) {
    const std::string a = argv[i];
    if (a == "--case" && i + 1 < argc) case_path = argv[++i];
    else if (a == "--threads" && i + 1 < argc) threads = std::atoi(argv[++i]);
    else if (a == "--samples" && i + 1 < argc)
      n_samples = std::atoi(argv[++i]);
    else {
      std::fprintf(stderr,
                   "usage: opfdl_bench [--case F] [--threads T] [--samples N]\n");
      return 2;
    }
  }
  threads = resolve_threads(threads);

  const PowerSystem sys = load_system(case_path);
  Dataset ds = make_dataset(sys, std::max(10, n_samples), 17, false);
  std::vector<int> ids;
  for (int i = 0; i < ds.size(); ++i) ids.push_back(i);

  GatConfig gcfg;
  gcfg.n_layers = 4;
  gcfg.d_node = 16;
  gcfg.d_edge = 16;
  gcfg.d_attn = 32;
  gcfg.mlp_hidden = 16;
  const GatParameters params = init_parameters(gcfg, 5);
  LossWeights w;
  w.w_c = 1e-4;

  auto make_pool = [&](int k) {
    ModelPool pool;
    for (int i = 0; i < k; ++i) {
      pool.push_back(std::make_unique<LossModel>(
          sys, gcfg, TrainMode::penalty_only, w));
      pool.back()->set_parameters(params);
    }
    return pool;
  };
  ModelPool serial_pool = make_pool(1);
  ModelPool par_pool = make_pool(threads);

  std::printf("case %s, %d samples, %d thread(s)\n\n", sys.name.c_str(),
              ds.size(), threads);
  std::printf("%-18s %13s %13s %7s\n", "kernel", "serial", "threaded", "");

  // Batch gradient: one full forward/backward per sample.
  batch_gradient(serial_pool, ds, ids, nullptr, 0.0, 1);  // warm caches
  auto t0 = Clock::now();
  const BatchGrad g1 = batch_gradient(serial_pool, ds, ids, nullptr, 0.0, 1);
  const double grad_serial = ms_since(t0);
  t0 = Clock::now();
  const BatchGrad g2 =
      batch_gradient(par_pool, ds, ids, nullptr, 0.0, threads);
  row("batch_gradient", grad_serial, ms_since(t0),
      same_bits(g1.grad, g2.grad) && g1.loss == g2.loss);

  // Reference labeling: the dataset generator's inner loop.
  const int n_label = std::min(4, ds.size());
  SolveOptions sopt;
  sopt.max_outer = 12;
  auto label_run = [&](int k) {
    VecXd costs(n_label);
    parallel_for(n_label, k, [&](int i) {
      costs[i] = reference_solve(sys, ds.samples[i].r, sopt).cost;
    });
    return costs;
  };
  t0 = Clock::now();
  const VecXd c1 = label_run(1);
  const double label_serial = ms_since(t0);
  t0 = Clock::now();
  const VecXd c2 = label_run(threads);
  row("labeling", label_serial, ms_since(t0), same_bits(c1, c2));

  // Evaluation projection from the untrained predictor's outputs.
  std::vector<OperatingPoint> preds(ds.size());
  for (int i = 0; i < ds.size(); ++i)
    preds[i] = serial_pool[0]->predict(ds.samples[i].r);
  auto project_run = [&](int k) {
    VecXd resid(ds.size());
    parallel_for(ds.size(), k, [&](int i) {
      resid[i] =
          project_to_powerflow(sys, ds.samples[i].r, preds[i]).h_inf;
    });
    return resid;
  };
  t0 = Clock::now();
  const VecXd r1 = project_run(1);
  const double proj_serial = ms_since(t0);
  t0 = Clock::now();
  const VecXd r2 = project_run(threads);
  row("projection", proj_serial, ms_since(t0), same_bits(r1, r2));

  return 0;
}
