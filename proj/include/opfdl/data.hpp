#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "opfdl/case_io.hpp"
#include "opfdl/physics.hpp"

namespace opfdl {

struct ReferenceSolution {
  OperatingPoint point;
  double cost = 0.0;
  // max(||g+||_inf, ||h||_inf) at the returned iterate, per-unit scale.
  double kkt_residual = 0.0;
  bool converged = false;
};

struct SolveOptions {
  double feas_tol = 1e-6;   // converged flag threshold
  double stop_tol = 1e-9;   // outer loop exits early below this
  int max_outer = 40;
  int max_inner = 500;
  double gamma0 = 10.0;
  double gamma_max = 1e8;
};

// Per-instance OPF by the method of multipliers: inner dense-BFGS descent
// with Armijo backtracking, outer multiplier ascent with step gamma, gamma
// doubled whenever infeasibility fails to halve. Returns the most feasible
// accepted iterate.
ReferenceSolution reference_solve(const PowerSystem& sys, const VecXcd& r,
                                  const SolveOptions& opt = {});

struct Sample {
  VecXcd r;
  bool labeled = false;
  ReferenceSolution label;  // meaningful only when labeled
};

struct Dataset {
  std::string system_id;
  int n_buses = 0;
  uint64_t seed = 0;
  bool labeled = false;
  std::vector<Sample> samples;
  std::vector<int> train_idx, val_idx, test_idx;

  int size() const { return static_cast<int>(samples.size()); }
};

// Demand draws: elementwise Uniform(0.8 r_ref, 1.2 r_ref) per Re/Im
// component; exact zeros stay zero. Candidate k draws from the "dataset"
// stream at index k, so resampling never shifts other candidates.
VecXcd draw_load(const PowerSystem& sys, uint64_t seed, uint64_t candidate);
std::vector<VecXcd> generate_loads(const PowerSystem& sys, int n,
                                   uint64_t seed);

// Labels are certified against the plain physics evaluation, independently
// of the solver's own residual bookkeeping.
bool certify_label(const PowerSystem& sys, const VecXcd& r,
                   const ReferenceSolution& sol, double tol = 1e-6);

// n samples, 8:1:1 split by seeded shuffle. With labels, candidates whose
// solve fails certification are resampled; more than 3n candidates throws
// ResampleCapExceeded. n_threads parallelizes the labeling solves only.
// n_rejected, when given, receives the number of discarded candidates.
Dataset make_dataset(const PowerSystem& sys, int n, uint64_t seed,
                     bool with_labels, const SolveOptions& opt = {},
                     int n_threads = 1, int* n_rejected = nullptr);

void save_dataset(const std::string& path, const Dataset& ds);
Dataset load_dataset(const std::string& path, const PowerSystem& sys);

// Mean label cost over the training split (the invariant metric's scale and
// the default w_c source). Throws MismatchError if unlabeled.
double mean_train_label_cost(const Dataset& ds);

}  // namespace opfdl
