#include "opfdl/duals.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>
#include <limits>
#include <ostream>
#include <stdexcept>

#include "opfdl/errors.hpp"
#include "opfdl/eval.hpp"
#include "opfdl/num_format.hpp"
#include "opfdl/parallel.hpp"
#include "opfdl/rng.hpp"

namespace opfdl {

TrainMode parse_train_mode(const std::string& name) {
  if (name == "dual-p") return TrainMode::dual_p;
  if (name == "dual-s") return TrainMode::dual_s;
  if (name == "dual-h") return TrainMode::dual_h;
  if (name == "mse") return TrainMode::mse;
  if (name == "mse-penalty") return TrainMode::mse_penalty;
  if (name == "penalty-only") return TrainMode::penalty_only;
  throw std::invalid_argument("unknown training mode: " + name);
}

std::string to_string(TrainMode mode) {
  switch (mode) {
    case TrainMode::dual_p: return "dual-p";
    case TrainMode::dual_s: return "dual-s";
    case TrainMode::dual_h: return "dual-h";
    case TrainMode::mse: return "mse";
    case TrainMode::mse_penalty: return "mse-penalty";
    case TrainMode::penalty_only: return "penalty-only";
  }
  return "?";
}

bool mode_uses_duals(TrainMode mode) {
  return mode == TrainMode::dual_p || mode == TrainMode::dual_s ||
         mode == TrainMode::dual_h;
}

MultiplierMode multiplier_mode(TrainMode mode) {
  switch (mode) {
    case TrainMode::dual_p: return MultiplierMode::pointwise;
    case TrainMode::dual_s: return MultiplierMode::shared;
    case TrainMode::dual_h: return MultiplierMode::hybrid;
    default:
      throw std::invalid_argument("multiplier_mode: not a dual training mode");
  }
}

MultiplierStore MultiplierStore::make(MultiplierMode mode, int n_ineq,
                                      int n_mu, int n_samples) {
  MultiplierStore st;
  st.mode = mode;
  st.n_ineq = n_ineq;
  st.n_mu = n_mu;
  st.n_samples = n_samples;
  const int rl = st.row_len();
  if (mode != MultiplierMode::shared)
    st.pw = VecXd::Zero(static_cast<Eigen::Index>(n_samples) * rl);
  if (mode != MultiplierMode::pointwise) {
    st.lambda_bar = VecXd::Zero(n_ineq);
    st.mu_bar = VecXd::Zero(n_mu);
    st.adamax_m = VecXd::Zero(rl);
    st.adamax_u = VecXd::Zero(rl);
  }
  return st;
}

VecXd MultiplierStore::materialize(int sample) const {
  const int rl = row_len();
  VecXd out(rl);
  if (mode == MultiplierMode::shared) {
    out.head(n_ineq) = lambda_bar;
    out.tail(n_mu) = mu_bar;
    return out;
  }
  out = pw.segment(static_cast<Eigen::Index>(sample) * rl, rl);
  if (mode == MultiplierMode::hybrid) {
    out.head(n_ineq) += lambda_bar;
    out.tail(n_mu) += mu_bar;
  }
  return out;
}

void MultiplierStore::absorb(int sample, const VecXd& lam_mu) {
  if (mode == MultiplierMode::shared)
    throw std::logic_error("absorb: shared mode has no per-sample rows");
  const int rl = row_len();
  auto row = pw.segment(static_cast<Eigen::Index>(sample) * rl, rl);
  if (mode == MultiplierMode::pointwise) {
    row = lam_mu;
    return;
  }
  row = lam_mu;
  row.head(n_ineq) -= lambda_bar;
  row.tail(n_mu) -= mu_bar;
}

namespace {

constexpr char kMulMagic[8] = {'O', 'P', 'F', 'D', 'L', 'M', 'U', 'L'};
constexpr uint32_t kMulVersion = 1;

void put(std::ofstream& out, const void* p, std::size_t n) {
  out.write(static_cast<const char*>(p), static_cast<std::streamsize>(n));
}

void get(std::ifstream& in, void* p, std::size_t n, const std::string& path) {
  in.read(static_cast<char*>(p), static_cast<std::streamsize>(n));
  if (!in.good()) throw SchemaError("multiplier file truncated: " + path);
}

}  // namespace

void save_multipliers(const std::string& path, const MultiplierStore& st) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw SchemaError("cannot open for writing: " + path);
  put(out, kMulMagic, sizeof(kMulMagic));
  const uint32_t version = kMulVersion;
  const uint32_t mode = static_cast<uint32_t>(st.mode);
  const int32_t dims[3] = {st.n_ineq, st.n_mu, st.n_samples};
  const int64_t t = st.adamax_t;
  put(out, &version, sizeof(version));
  put(out, &mode, sizeof(mode));
  put(out, dims, sizeof(dims));
  put(out, &t, sizeof(t));
  auto put_vec = [&](const VecXd& v) {
    put(out, v.data(), sizeof(double) * static_cast<std::size_t>(v.size()));
  };
  if (st.mode != MultiplierMode::pointwise) {
    put_vec(st.lambda_bar);
    put_vec(st.mu_bar);
    put_vec(st.adamax_m);
    put_vec(st.adamax_u);
  }
  if (st.mode != MultiplierMode::shared) put_vec(st.pw);
  if (!out.good()) throw SchemaError("write failed: " + path);
}

MultiplierStore load_multipliers(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw SchemaError("cannot open multiplier file: " + path);
  char magic[8];
  get(in, magic, sizeof(magic), path);
  if (std::memcmp(magic, kMulMagic, sizeof(magic)) != 0)
    throw SchemaError("not a multiplier file: " + path);
  uint32_t version = 0, mode = 0;
  int32_t dims[3];
  int64_t t = 0;
  get(in, &version, sizeof(version), path);
  if (version != kMulVersion)
    throw SchemaError("unsupported multiplier file version in " + path);
  get(in, &mode, sizeof(mode), path);
  if (mode > 2) throw SchemaError("bad multiplier mode in " + path);
  get(in, dims, sizeof(dims), path);
  get(in, &t, sizeof(t), path);
  if (dims[0] < 0 || dims[1] < 0 || dims[2] < 0)
    throw SchemaError("negative dimension in " + path);
  MultiplierStore st = MultiplierStore::make(static_cast<MultiplierMode>(mode),
                                             dims[0], dims[1], dims[2]);
  st.adamax_t = t;
  auto get_vec = [&](VecXd& v) {
    get(in, v.data(), sizeof(double) * static_cast<std::size_t>(v.size()),
        path);
  };
  if (st.mode != MultiplierMode::pointwise) {
    get_vec(st.lambda_bar);
    get_vec(st.mu_bar);
    get_vec(st.adamax_m);
    get_vec(st.adamax_u);
  }
  if (st.mode != MultiplierMode::shared) get_vec(st.pw);
  return st;
}

double resolve_cost_bar(const PowerSystem& sys, const Dataset& ds) {
  if (ds.labeled) return mean_train_label_cost(ds);
  // Unlabeled fallback: cost of the generation-box midpoints, the same
  // reference scale the per-instance solver normalizes against.
  VecXcd s = VecXcd::Zero(sys.n());
  for (int b : sys.gen_buses)
    s[b] = 0.5 * (sys.buses[b].s_min + sys.buses[b].s_max);
  return std::max(cost(sys, s), 1e-6);
}

namespace {

ad::Mat col_re(const VecXcd& v) {
  ad::Mat m(v.size(), 1);
  for (Eigen::Index i = 0; i < v.size(); ++i) m(i, 0) = v[i].real();
  return m;
}

ad::Mat col_im(const VecXcd& v) {
  ad::Mat m(v.size(), 1);
  for (Eigen::Index i = 0; i < v.size(); ++i) m(i, 0) = v[i].imag();
  return m;
}

}  // namespace

LossModel::LossModel(const PowerSystem& sys, const GatConfig& gat,
                     TrainMode mode, const LossWeights& w)
    : sys_(&sys), mode_(mode), w_(w) {
  const int n = sys.n();
  n_ineq_ = sys.n_ineq();
  n_mu_ = 2 * n;
  has_physics_ = mode != TrainMode::mse;
  has_mult_ = mode_uses_duals(mode);
  has_aid_ = w.with_aid && has_physics_ && mode != TrainMode::mse_penalty;
  has_sup_ = mode == TrainMode::mse || mode == TrainMode::mse_penalty ||
             has_aid_;

  gat_ = build_gat(t_, gat, sys);
  for (const ParamInfo& info : parameter_layout(gat)) n_params_ += info.size();
  if (has_physics_)
    ph_ = build_physics(t_, sys, gat_.pt, gat_.r_re, gat_.r_im);

  // The supervised term: squared distance to the label over the stacked
  // Re/Im components of (s, v).
  ad::Var sup;
  if (has_sup_) {
    lbl_s_re_ = t_.input(n, 1);
    lbl_s_im_ = t_.input(n, 1);
    lbl_v_re_ = t_.input(n, 1);
    lbl_v_im_ = t_.input(n, 1);
    sup = t_.add(
        t_.add(t_.sum(t_.square(t_.sub(gat_.pt.s_re, lbl_s_re_))),
               t_.sum(t_.square(t_.sub(gat_.pt.s_im, lbl_s_im_)))),
        t_.add(t_.sum(t_.square(t_.sub(gat_.pt.v_re, lbl_v_re_))),
               t_.sum(t_.square(t_.sub(gat_.pt.v_im, lbl_v_im_)))));
  }

  ad::Var core;
  if (mode == TrainMode::mse) {
    core = sup;
  } else {
    const ad::Var pen = t_.add(
        t_.scale(t_.sum(t_.square(t_.max0(ph_.g))), 0.5 * w.w_g),
        t_.scale(t_.add(t_.sum(t_.square(ph_.h_re)),
                        t_.sum(t_.square(ph_.h_im))),
                 0.5 * w.w_h));
    if (mode == TrainMode::mse_penalty) {
      core = t_.add(sup, pen);
    } else {
      core = t_.add(t_.scale(ph_.cost, w.w_c), pen);
      if (has_aid_) {
        aid_w_ = t_.input(1, 1);
        core = t_.add(core, t_.mul(aid_w_, sup));
      }
    }
  }

  if (has_mult_) {
    lambda_ = t_.input(n_ineq_, 1);
    mu_re_ = t_.input(n, 1);
    mu_im_ = t_.input(n, 1);
    const ad::Var mult =
        t_.add(t_.add(t_.dot(lambda_, ph_.g), t_.dot(mu_re_, ph_.h_re)),
               t_.dot(mu_im_, ph_.h_im));
    loss_ = t_.add(core, mult);
  } else {
    loss_ = core;
  }
}

void LossModel::set_parameters(const GatParameters& p) {
  set_params(t_, gat_, p);
}

void LossModel::stage(const Sample& s, const VecXd* lam_mu, double aid_w) {
  set_demand(t_, gat_, s.r);
  if (has_mult_) {
    const int n = sys_->n();
    if (lam_mu) {
      if (lam_mu->size() != n_ineq_ + n_mu_)
        throw ShapeError("multiplier vector has wrong length");
      t_.set_value(lambda_, lam_mu->head(n_ineq_));
      t_.set_value(mu_re_, lam_mu->segment(n_ineq_, n));
      t_.set_value(mu_im_, lam_mu->tail(n));
    } else {
      t_.set_value(lambda_, ad::Mat::Zero(n_ineq_, 1));
      t_.set_value(mu_re_, ad::Mat::Zero(n, 1));
      t_.set_value(mu_im_, ad::Mat::Zero(n, 1));
    }
  }
  if (has_sup_) {
    if (!s.labeled)
      throw MismatchError("supervised loss term needs a labeled sample");
    t_.set_value(lbl_s_re_, col_re(s.label.point.s));
    t_.set_value(lbl_s_im_, col_im(s.label.point.s));
    t_.set_value(lbl_v_re_, col_re(s.label.point.v));
    t_.set_value(lbl_v_im_, col_im(s.label.point.v));
  }
  if (has_aid_) {
    ad::Mat a(1, 1);
    a(0, 0) = aid_w;
    t_.set_value(aid_w_, a);
  }
}

double LossModel::loss(const Sample& s, const VecXd* lam_mu, double aid_w) {
  stage(s, lam_mu, aid_w);
  t_.forward();
  return t_.scalar(loss_);
}

double LossModel::loss_and_grad(const Sample& s, const VecXd* lam_mu,
                                double aid_w, VecXd& grad) {
  stage(s, lam_mu, aid_w);
  t_.forward();
  t_.backward(loss_);
  grad.resize(n_params_);
  Eigen::Index k = 0;
  // Row-major block order, matching GatParameters::to_flat.
  for (const ad::Var& p : gat_.params) {
    const ad::Mat& a = t_.adj(p);
    for (Eigen::Index r = 0; r < a.rows(); ++r)
      for (Eigen::Index c = 0; c < a.cols(); ++c) grad[k++] = a(r, c);
  }
  return t_.scalar(loss_);
}

VecXd LossModel::slack_vector(const VecXcd& r) {
  if (!has_physics_)
    throw std::logic_error("slack_vector: mse tape carries no physics");
  set_demand(t_, gat_, r);
  t_.forward();
  const int n = sys_->n();
  VecXd out(n_ineq_ + 2 * n);
  out.head(n_ineq_) = t_.val(ph_.g).col(0);
  out.segment(n_ineq_, n) = t_.val(ph_.h_re).col(0);
  out.tail(n) = t_.val(ph_.h_im).col(0);
  return out;
}

OperatingPoint LossModel::predict(const VecXcd& r) {
  set_demand(t_, gat_, r);
  t_.forward();
  return point_values(t_, gat_.pt);
}

BatchGrad batch_gradient(ModelPool& models, const Dataset& ds,
                         const std::vector<int>& ids,
                         const MultiplierStore* store, double aid_w,
                         int n_threads) {
  if (ids.empty()) throw std::invalid_argument("batch_gradient: empty batch");
  const int b = static_cast<int>(ids.size());
  std::vector<double> losses(b);
  std::vector<VecXd> grads(b);
  parallel_for_workers(b, n_threads, [&](int w, int k) {
    const Sample& s = ds.samples[static_cast<std::size_t>(ids[k])];
    if (store) {
      const VecXd lam_mu = store->materialize(ids[k]);
      losses[k] = models[w]->loss_and_grad(s, &lam_mu, aid_w, grads[k]);
    } else {
      losses[k] = models[w]->loss_and_grad(s, nullptr, aid_w, grads[k]);
    }
  });
  // Serial fold in batch order keeps the sum independent of thread count.
  BatchGrad out;
  out.grad = grads[0];
  out.loss = losses[0];
  for (int k = 1; k < b; ++k) {
    out.grad += grads[k];
    out.loss += losses[k];
  }
  out.grad /= static_cast<double>(b);
  out.loss /= static_cast<double>(b);
  return out;
}

std::vector<VecXd> batch_slacks(ModelPool& models, const Dataset& ds,
                                const std::vector<int>& ids, int n_threads) {
  std::vector<VecXd> slacks(ids.size());
  parallel_for_workers(static_cast<int>(ids.size()), n_threads,
                       [&](int w, int k) {
                         slacks[k] = models[w]->slack_vector(
                             ds.samples[static_cast<std::size_t>(ids[k])].r);
                       });
  return slacks;
}

void dual_step_pointwise(VecXd& lam_mu, const VecXd& slack, int n_ineq,
                         double eta, double omega) {
  const double keep = 1.0 - eta * omega;
  for (Eigen::Index i = 0; i < lam_mu.size(); ++i) {
    const double x = keep * lam_mu[i] + eta * slack[i];
    lam_mu[i] = i < n_ineq ? std::max(x, 0.0) : x;
  }
}

void dual_step_shared(MultiplierStore& st, const VecXd& mean_slack,
                      const TrainingConfig& cfg) {
  const int rl = st.row_len();
  VecXd bar(rl);
  bar.head(st.n_ineq) = st.lambda_bar;
  bar.tail(st.n_mu) = st.mu_bar;
  const double keep = 1.0 - cfg.eta_sh * cfg.omega_sh;
  if (cfg.shared_plain_sgd) {
    bar = keep * bar + cfg.eta_sh * mean_slack;
  } else {
    // AdaMax ascent: descent rule applied to the negated slack.
    const VecXd g = -mean_slack;
    st.adamax_t += 1;
    st.adamax_m = cfg.adamax_beta1 * st.adamax_m +
                  (1.0 - cfg.adamax_beta1) * g;
    st.adamax_u =
        (cfg.adamax_beta2 * st.adamax_u).cwiseMax(g.cwiseAbs());
    const double step =
        cfg.eta_sh / (1.0 - std::pow(cfg.adamax_beta1,
                                     static_cast<double>(st.adamax_t)));
    bar = keep * bar -
          step * (st.adamax_m.array() / (st.adamax_u.array() + cfg.adamax_eps))
                     .matrix();
  }
  st.lambda_bar = bar.head(st.n_ineq).cwiseMax(0.0);
  st.mu_bar = bar.tail(st.n_mu);
}

namespace {

bool is_dual(TrainMode m) { return mode_uses_duals(m); }

// Locates the parameter block owning a non-finite gradient coordinate.
std::string offending_block(const VecXd& grad,
                            const std::vector<ParamInfo>& layout) {
  Eigen::Index off = 0;
  for (const ParamInfo& info : layout) {
    for (int k = 0; k < info.size(); ++k)
      if (!std::isfinite(grad[off + k])) return info.name;
    off += info.size();
  }
  return "?";
}

struct ValStats {
  double optgap = std::numeric_limits<double>::quiet_NaN();
  double viol_mean = 0.0;
  double viol_max = 0.0;
};

ValStats validation_stats(const PowerSystem& sys, const Dataset& ds,
                          ModelPool& models, double cost_bar, int n_threads) {
  ValStats out;
  const auto& idx = ds.val_idx;
  if (idx.empty()) return out;
  std::vector<SampleMetrics> ms(idx.size());
  parallel_for_workers(static_cast<int>(idx.size()), n_threads,
                       [&](int w, int k) {
                         const Sample& s =
                             ds.samples[static_cast<std::size_t>(idx[k])];
                         const OperatingPoint pred = models[w]->predict(s.r);
                         ms[k] = sample_metrics(
                             sys, s.r, pred,
                             s.labeled ? s.label.cost : -1.0, cost_bar,
                             idx[k]);
                       });
  double gap = 0.0;
  int n_gap = 0;
  for (const auto& m : ms) {
    out.viol_mean += m.mean_violation;
    out.viol_max = std::max(out.viol_max, m.max_violation);
    if (m.has_optgap) {
      gap += m.optgap;
      ++n_gap;
    }
  }
  out.viol_mean /= static_cast<double>(ms.size());
  if (n_gap > 0) out.optgap = gap / n_gap;
  return out;
}

void multiplier_norms(const MultiplierStore& st, double& lambda_norm,
                      double& mu_norm) {
  lambda_norm = mu_norm = 0.0;
  if (st.mode == MultiplierMode::shared || st.n_samples == 0) {
    lambda_norm = st.lambda_bar.size() ? st.lambda_bar.lpNorm<1>() : 0.0;
    mu_norm = st.mu_bar.size() ? st.mu_bar.lpNorm<1>() : 0.0;
    return;
  }
  for (int i = 0; i < st.n_samples; ++i) {
    const VecXd m = st.materialize(i);
    lambda_norm += m.head(st.n_ineq).lpNorm<1>();
    mu_norm += m.tail(st.n_mu).lpNorm<1>();
  }
  lambda_norm /= st.n_samples;
  mu_norm /= st.n_samples;
}

}  // namespace

TrainResult train(const PowerSystem& sys, const Dataset& ds,
                  const TrainingConfig& cfg, int n_threads,
                  std::ostream* log) {
  if (cfg.epochs < 0 || cfg.batch < 1)
    throw std::invalid_argument("training config: epochs >= 0, batch >= 1");
  if (!(cfg.eta_primal > 0.0))
    throw std::invalid_argument("training config: eta_primal must be > 0");
  if (cfg.aid_epochs > cfg.epochs && cfg.epochs > 0)
    throw std::invalid_argument("training config: aid_epochs > epochs");
  if (ds.train_idx.empty())
    throw MismatchError("dataset has an empty training split");

  const bool dual = is_dual(cfg.mode);
  const bool with_aid = cfg.mode != TrainMode::mse &&
                        cfg.mode != TrainMode::mse_penalty &&
                        cfg.aid_epochs > 0;
  const bool needs_labels = cfg.mode == TrainMode::mse ||
                            cfg.mode == TrainMode::mse_penalty || with_aid;
  if (needs_labels && !ds.labeled)
    throw MismatchError("mode " + to_string(cfg.mode) +
                        " needs a labeled dataset");

  const double cost_bar = resolve_cost_bar(sys, ds);
  const double w_c = cfg.w_c >= 0.0 ? cfg.w_c : 0.1 / cost_bar;

  TrainResult res;
  res.cost_bar = cost_bar;
  res.w_c = w_c;
  res.params = init_parameters(cfg.gat, cfg.seed);
  res.store = dual ? MultiplierStore::make(multiplier_mode(cfg.mode),
                                           sys.n_ineq(), 2 * sys.n(),
                                           ds.size())
                   : MultiplierStore{};
  if (cfg.epochs == 0) return res;

  LossWeights w;
  w.w_g = cfg.w_g;
  w.w_h = cfg.w_h;
  w.w_c = w_c;
  w.with_aid = with_aid;
  const int workers = std::max(1, n_threads);
  ModelPool models;
  models.reserve(static_cast<std::size_t>(workers));
  for (int i = 0; i < workers; ++i)
    models.push_back(std::make_unique<LossModel>(sys, cfg.gat, cfg.mode, w));
  const std::vector<ParamInfo> layout = parameter_layout(cfg.gat);

  VecXd theta;
  res.params.to_flat(theta);
  VecXd adam_m = VecXd::Zero(theta.size());
  VecXd adam_v = VecXd::Zero(theta.size());
  int64_t adam_t = 0;
  GatParameters cur = res.params;
  const int n_train = static_cast<int>(ds.train_idx.size());
  // With the dual batch equal to the primal batch, the materialized
  // multipliers of step (I) stay valid through the pointwise update.
  std::vector<int> order;
  std::vector<int> batch_ids;
  std::vector<VecXd> batch_mults;

  auto sync_models = [&](const VecXd& flat) {
    cur.from_flat(flat);
    for (auto& m : models) m->set_parameters(cur);
  };
  sync_models(theta);

  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    order = ds.train_idx;
    Rng shuffle_rng(cfg.seed, "shuffle", static_cast<uint64_t>(epoch));
    shuffle_indices(order, shuffle_rng);
    const double aid_w =
        with_aid && epoch < cfg.aid_epochs
            ? cfg.aid_weight * static_cast<double>(cfg.aid_epochs - epoch) /
                  static_cast<double>(cfg.aid_epochs)
            : 0.0;
    const bool duals_active = dual && epoch >= cfg.warmup_epochs;

    double epoch_loss = 0.0;
    for (int start = 0; start < n_train; start += cfg.batch) {
      const int b = std::min(cfg.batch, n_train - start);
      batch_ids.assign(order.begin() + start, order.begin() + start + b);
      const int batch_no = start / cfg.batch;

      BatchGrad bg = batch_gradient(models, ds, batch_ids,
                                    dual ? &res.store : nullptr, aid_w,
                                    n_threads);
      if (!std::isfinite(bg.loss))
        throw NonFiniteLoss("non-finite loss at epoch " +
                            std::to_string(epoch) + ", batch " +
                            std::to_string(batch_no));
      if (!bg.grad.allFinite())
        throw NonFiniteLoss("non-finite gradient at epoch " +
                            std::to_string(epoch) + ", batch " +
                            std::to_string(batch_no) + " in parameter block " +
                            offending_block(bg.grad, layout));
      epoch_loss += bg.loss * b;

      if (cfg.grad_clip > 0.0) {
        const double nrm = bg.grad.norm();
        if (nrm > cfg.grad_clip) bg.grad *= cfg.grad_clip / nrm;
      }

      // AdamW with decoupled decay.
      adam_t += 1;
      adam_m = cfg.adam_beta1 * adam_m + (1.0 - cfg.adam_beta1) * bg.grad;
      adam_v = cfg.adam_beta2 * adam_v +
               (1.0 - cfg.adam_beta2) * bg.grad.cwiseProduct(bg.grad);
      const double bc1 =
          1.0 - std::pow(cfg.adam_beta1, static_cast<double>(adam_t));
      const double bc2 =
          1.0 - std::pow(cfg.adam_beta2, static_cast<double>(adam_t));
      theta = (1.0 - cfg.eta_primal * cfg.omega_primal) * theta -
              (cfg.eta_primal / bc1) *
                  (adam_m.array() /
                   ((adam_v / bc2).cwiseSqrt().array() + cfg.adam_eps))
                      .matrix();
      sync_models(theta);

      if (duals_active) {
        // Slacks at the post-step parameters; one extra forward per sample.
        const std::vector<VecXd> slacks =
            batch_slacks(models, ds, batch_ids, n_threads);
        const auto mmode = res.store.mode;
        const bool pointwise_on =
            mmode != MultiplierMode::shared && cfg.eta_pw != 0.0;
        if (pointwise_on) {
          batch_mults.resize(batch_ids.size());
          for (std::size_t k = 0; k < batch_ids.size(); ++k) {
            batch_mults[k] = res.store.materialize(batch_ids[k]);
            dual_step_pointwise(batch_mults[k], slacks[k], res.store.n_ineq,
                                cfg.eta_pw, cfg.omega_pw);
          }
        }
        if (mmode != MultiplierMode::pointwise) {
          VecXd mean_slack = slacks[0];
          for (std::size_t k = 1; k < slacks.size(); ++k)
            mean_slack += slacks[k];
          mean_slack /= static_cast<double>(slacks.size());
          dual_step_shared(res.store, mean_slack, cfg);
        }
        // Hybrid deviations are taken against the post-update shared pair.
        if (pointwise_on)
          for (std::size_t k = 0; k < batch_ids.size(); ++k)
            res.store.absorb(batch_ids[k], batch_mults[k]);
      }
    }

    EpochMetrics em;
    em.epoch = epoch;
    em.train_loss = epoch_loss / n_train;
    const ValStats vs =
        validation_stats(sys, ds, models, cost_bar, n_threads);
    em.val_optgap = vs.optgap;
    em.val_viol_mean = vs.viol_mean;
    em.val_viol_max = vs.viol_max;
    if (dual) multiplier_norms(res.store, em.lambda_norm, em.mu_norm);
    res.history.push_back(em);
    if (log)
      (*log) << "epoch " << epoch << " loss " << em.train_loss << " val_gap "
             << em.val_optgap << " val_viol " << em.val_viol_mean << " lam "
             << em.lambda_norm << "\n";
  }

  res.params.from_flat(theta);
  return res;
}

void write_metrics_csv(const std::string& path,
                       const std::vector<EpochMetrics>& history) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw SchemaError("cannot open for writing: " + path);
  out << "epoch,train_loss,val_optgap,val_viol_mean,val_viol_max,"
         "lambda_norm,mu_norm\n";
  for (const auto& m : history) {
    out << m.epoch << ',' << fmt_double(m.train_loss) << ','
        << (std::isfinite(m.val_optgap) ? fmt_double(m.val_optgap) : "nan")
        << ',' << fmt_double(m.val_viol_mean) << ','
        << fmt_double(m.val_viol_max) << ',' << fmt_double(m.lambda_norm)
        << ',' << fmt_double(m.mu_norm) << '\n';
  }
  if (!out.good()) throw SchemaError("write failed: " + path);
}

}  // namespace opfdl
