#pragma once

#include <cstdint>
#include <iosfwd>
#include <memory>
#include <string>
#include <vector>

#include "opfdl/autodiff.hpp"
#include "opfdl/case_io.hpp"
#include "opfdl/data.hpp"
#include "opfdl/gat.hpp"
#include "opfdl/physics_ad.hpp"

namespace opfdl {

// dual_p/dual_s/dual_h: constrained training with pointwise, shared, or
// hybrid multipliers. mse and mse_penalty are the supervised baselines.
// penalty_only drops the multiplier terms from the dual loss and is exposed
// for library use (trajectory comparisons), not on the command line.
enum class TrainMode { dual_p, dual_s, dual_h, mse, mse_penalty, penalty_only };

TrainMode parse_train_mode(const std::string& name);  // "dual-p", "mse", ...
std::string to_string(TrainMode mode);
bool mode_uses_duals(TrainMode mode);
enum class MultiplierMode { pointwise, shared, hybrid };
MultiplierMode multiplier_mode(TrainMode mode);  // dual modes only

// Dual state for every dataset sample. Pointwise rows hold the multipliers
// themselves; hybrid rows hold deviations around the shared pair, so the
// materialized multipliers are always lambda_bar + row.
struct MultiplierStore {
  MultiplierMode mode = MultiplierMode::shared;
  int n_ineq = 0;    // lambda length: 6N + 4M
  int n_mu = 0;      // mu length: 2N, stored split [mu_re; mu_im]
  int n_samples = 0;

  VecXd pw;                  // n_samples rows of row_len(); empty for shared
  VecXd lambda_bar, mu_bar;  // empty for pointwise

  // AdaMax state of the shared ascent, over [lambda_bar; mu_bar].
  VecXd adamax_m, adamax_u;
  int64_t adamax_t = 0;

  int row_len() const { return n_ineq + n_mu; }
  static MultiplierStore make(MultiplierMode mode, int n_ineq, int n_mu,
                              int n_samples);

  // Materialized [lambda; mu_re; mu_im] for one sample.
  VecXd materialize(int sample) const;
  // Stores materialized multipliers back: the hybrid decomposition
  // row = lam_mu - [lambda_bar; mu_bar] (against the CURRENT shared pair),
  // or the row itself in pointwise mode.
  void absorb(int sample, const VecXd& lam_mu);
};

void save_multipliers(const std::string& path, const MultiplierStore& st);
MultiplierStore load_multipliers(const std::string& path);

struct TrainingConfig {
  TrainMode mode = TrainMode::dual_p;
  GatConfig gat;
  uint64_t seed = 1;
  int epochs = 5000;
  int batch = 32;
  // Supervised aid: weight decays linearly aid_weight -> 0 over aid_epochs.
  int aid_epochs = 500;
  // No dual updates before this epoch.
  int warmup_epochs = 250;
  double aid_weight = 10.0;

  // Primal AdamW.
  double eta_primal = 3.0e-4;
  double omega_primal = 6.9e-15;
  double adam_beta1 = 0.9, adam_beta2 = 0.999, adam_eps = 1e-8;

  // Pointwise duals: plain SGD with decoupled decay,
  // lambda <- [(1 - eta*omega) lambda + eta g]+.
  double eta_pw = 5e3, omega_pw = 0.0;
  // Shared duals: AdaMax on the negated mean slack, then projection.
  double eta_sh = 1e-2, omega_sh = 0.0;
  double adamax_beta1 = 0.9, adamax_beta2 = 0.999, adamax_eps = 1e-8;
  bool shared_plain_sgd = false;  // plain ascent instead of AdaMax

  double w_g = 5.0, w_h = 5.0;
  double w_c = -1.0;      // < 0: use 0.1 / cost_bar
  double grad_clip = 0.0; // L2 clip on the batch gradient; 0 = off
};

// Mean label cost over the training split; for unlabeled datasets, the cost
// of box-midpoint injections. Normalizes the cost term and the invariant
// metric.
double resolve_cost_bar(const PowerSystem& sys, const Dataset& ds);

struct LossWeights {
  double w_g = 5.0, w_h = 5.0, w_c = 1.0;
  bool with_aid = false;
};

// One sample's differentiable loss: GAT forward, physics, and the mode's
// loss head recorded once on a private tape. Re-staging a sample only
// rewrites leaf values. Not thread-safe; use one instance per worker.
class LossModel {
 public:
  LossModel(const PowerSystem& sys, const GatConfig& gat, TrainMode mode,
            const LossWeights& w);

  void set_parameters(const GatParameters& p);
  // lam_mu: materialized [lambda; mu_re; mu_im]; ignored by modes without
  // multiplier terms (may be null, meaning zeros). aid_w likewise.
  double loss(const Sample& s, const VecXd* lam_mu, double aid_w);
  double loss_and_grad(const Sample& s, const VecXd* lam_mu, double aid_w,
                       VecXd& grad);
  // Forward-only [g; h_re; h_im] at the current parameters. Unavailable in
  // mse mode (no physics on the tape).
  VecXd slack_vector(const VecXcd& r);
  OperatingPoint predict(const VecXcd& r);

  int n_ineq() const { return n_ineq_; }
  int n_mu() const { return n_mu_; }
  int n_params() const { return n_params_; }

  // Raw tape access for diagnostics (finite-difference checks).
  ad::Tape& tape() { return t_; }
  ad::Var loss_root() const { return loss_; }
  const std::vector<ad::Var>& parameter_leaves() const { return gat_.params; }

 private:
  void stage(const Sample& s, const VecXd* lam_mu, double aid_w);

  const PowerSystem* sys_;
  TrainMode mode_;
  LossWeights w_;
  bool has_physics_, has_mult_, has_sup_, has_aid_;
  int n_ineq_ = 0, n_mu_ = 0, n_params_ = 0;
  ad::Tape t_;
  GatHandles gat_;
  AdPhysics ph_;  // valid when has_physics_
  ad::Var lambda_, mu_re_, mu_im_;
  ad::Var lbl_s_re_, lbl_s_im_, lbl_v_re_, lbl_v_im_;
  ad::Var aid_w_;
  ad::Var loss_;
};

using ModelPool = std::vector<std::unique_ptr<LossModel>>;

struct BatchGrad {
  double loss = 0.0;  // batch mean
  VecXd grad;         // batch mean, flat parameter layout
};

// Per-sample passes may run on separate workers; the reduction is a serial
// left fold in batch order, so the result is independent of thread count.
// store == nullptr means zero multipliers.
BatchGrad batch_gradient(ModelPool& models, const Dataset& ds,
                         const std::vector<int>& ids,
                         const MultiplierStore* store, double aid_w,
                         int n_threads);

// Forward-only slack vectors for the dual updates, same parallel contract.
std::vector<VecXd> batch_slacks(ModelPool& models, const Dataset& ds,
                                const std::vector<int>& ids, int n_threads);

// lambda block: [(1 - eta*omega) lambda + eta g]+; mu block unprojected.
void dual_step_pointwise(VecXd& lam_mu, const VecXd& slack, int n_ineq,
                         double eta, double omega);

// Shared ascent along the mean slack (AdaMax on the negated slack, or plain
// SGD with cfg.shared_plain_sgd), decoupled decay, then lambda projection.
void dual_step_shared(MultiplierStore& st, const VecXd& mean_slack,
                      const TrainingConfig& cfg);

struct EpochMetrics {
  int epoch = 0;
  double train_loss = 0.0;
  // Validation-split aggregates; optgap is NaN for unlabeled datasets.
  double val_optgap = 0.0;
  double val_viol_mean = 0.0;
  double val_viol_max = 0.0;
  // Mean L1 norms of the materialized per-sample multipliers over the whole
  // dataset (for shared mode this is just the norm of the shared pair).
  double lambda_norm = 0.0;
  double mu_norm = 0.0;
};

struct TrainResult {
  GatParameters params;
  MultiplierStore store;
  std::vector<EpochMetrics> history;
  double w_c = 0.0;      // resolved cost weight
  double cost_bar = 0.0;
};

TrainResult train(const PowerSystem& sys, const Dataset& ds,
                  const TrainingConfig& cfg, int n_threads = 1,
                  std::ostream* log = nullptr);

void write_metrics_csv(const std::string& path,
                       const std::vector<EpochMetrics>& history);

}  // namespace opfdl
