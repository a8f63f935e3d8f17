#include "opfdl/cli.hpp"

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <ostream>
#include <sstream>
#include <tuple>

#include <CLI11.hpp>

#include "opfdl/case_io.hpp"
#include "opfdl/data.hpp"
#include "opfdl/errors.hpp"
#include "opfdl/eval.hpp"
#include "opfdl/gat.hpp"
#include "opfdl/num_format.hpp"
#include "opfdl/parallel.hpp"

namespace opfdl {

namespace {

namespace fs = std::filesystem;

std::string trim(const std::string& s) {
  const auto a = s.find_first_not_of(" \t\r");
  if (a == std::string::npos) return "";
  const auto b = s.find_last_not_of(" \t\r");
  return s.substr(a, b - a + 1);
}

long long to_int(const std::string& v, const std::string& key) {
  char* end = nullptr;
  const long long x = std::strtoll(v.c_str(), &end, 10);
  if (end == v.c_str() || *end != '\0')
    throw ParseError("config: bad integer for " + key + ": " + v);
  return x;
}

uint64_t to_u64(const std::string& v, const std::string& key) {
  char* end = nullptr;
  const unsigned long long x = std::strtoull(v.c_str(), &end, 10);
  if (end == v.c_str() || *end != '\0')
    throw ParseError("config: bad seed for " + key + ": " + v);
  return x;
}

double to_double(const std::string& v, const std::string& key) {
  bool ok = false;
  const double x = parse_double(v, ok);
  if (!ok) throw ParseError("config: bad number for " + key + ": " + v);
  return x;
}

bool to_bool(const std::string& v, const std::string& key) {
  if (v == "true" || v == "1") return true;
  if (v == "false" || v == "0") return false;
  throw ParseError("config: bad boolean for " + key + ": " + v);
}

void ensure_dir(const std::string& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw SchemaError("cannot create output directory: " + dir);
}

void write_text(const std::string& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw SchemaError("cannot open for writing: " + path);
  out << text;
  if (!out.good()) throw SchemaError("write failed: " + path);
}

const std::vector<int>& split_ids(const Dataset& ds, const std::string& s) {
  if (s == "train") return ds.train_idx;
  if (s == "val") return ds.val_idx;
  if (s == "test") return ds.test_idx;
  throw std::invalid_argument("unknown split: " + s +
                              " (expected train, val, or test)");
}

}  // namespace

void set_config_key(RunConfig& rc, const std::string& section,
                    const std::string& key, const std::string& value) {
  const std::string qual = section + "." + key;
  TrainingConfig& t = rc.train;
  GatConfig& g = t.gat;
  if (section == "run") {
    if (key == "case") rc.case_path = value;
    else if (key == "dataset") rc.dataset_path = value;
    else if (key == "checkpoint") rc.checkpoint_path = value;
    else if (key == "out_dir") rc.out_dir = value;
    else if (key == "method") rc.method = value;
    else if (key == "split") rc.split = value;
    else if (key == "threads") rc.threads = static_cast<int>(to_int(value, qual));
    else if (key == "labels_as_predictions")
      rc.labels_as_predictions = to_bool(value, qual);
    else throw ParseError("config: unknown key " + qual);
  } else if (section == "dataset") {
    if (key == "n") rc.ds_n = static_cast<int>(to_int(value, qual));
    else if (key == "seed") rc.ds_seed = to_u64(value, qual);
    else if (key == "labels") rc.ds_labels = to_bool(value, qual);
    else throw ParseError("config: unknown key " + qual);
  } else if (section == "gat") {
    if (key == "layers") g.n_layers = static_cast<int>(to_int(value, qual));
    else if (key == "d_node") g.d_node = static_cast<int>(to_int(value, qual));
    else if (key == "d_edge") g.d_edge = static_cast<int>(to_int(value, qual));
    else if (key == "d_attn") g.d_attn = static_cast<int>(to_int(value, qual));
    else if (key == "mlp_hidden")
      g.mlp_hidden = static_cast<int>(to_int(value, qual));
    else if (key == "heads") g.n_heads = static_cast<int>(to_int(value, qual));
    else throw ParseError("config: unknown key " + qual);
  } else if (section == "train") {
    if (key == "seed") t.seed = to_u64(value, qual);
    else if (key == "epochs") t.epochs = static_cast<int>(to_int(value, qual));
    else if (key == "batch") t.batch = static_cast<int>(to_int(value, qual));
    else if (key == "aid_epochs")
      t.aid_epochs = static_cast<int>(to_int(value, qual));
    else if (key == "warmup_epochs")
      t.warmup_epochs = static_cast<int>(to_int(value, qual));
    else if (key == "aid_weight") t.aid_weight = to_double(value, qual);
    else if (key == "eta_primal") t.eta_primal = to_double(value, qual);
    else if (key == "omega_primal") t.omega_primal = to_double(value, qual);
    else if (key == "adam_beta1") t.adam_beta1 = to_double(value, qual);
    else if (key == "adam_beta2") t.adam_beta2 = to_double(value, qual);
    else if (key == "adam_eps") t.adam_eps = to_double(value, qual);
    else if (key == "eta_pw") t.eta_pw = to_double(value, qual);
    else if (key == "omega_pw") t.omega_pw = to_double(value, qual);
    else if (key == "eta_sh") t.eta_sh = to_double(value, qual);
    else if (key == "omega_sh") t.omega_sh = to_double(value, qual);
    else if (key == "adamax_beta1") t.adamax_beta1 = to_double(value, qual);
    else if (key == "adamax_beta2") t.adamax_beta2 = to_double(value, qual);
    else if (key == "adamax_eps") t.adamax_eps = to_double(value, qual);
    else if (key == "w_g") {
      t.w_g = to_double(value, qual);
      rc.w_g_set = true;
    } else if (key == "w_h") {
      t.w_h = to_double(value, qual);
      rc.w_h_set = true;
    } else if (key == "w_c") t.w_c = to_double(value, qual);
    else if (key == "grad_clip") t.grad_clip = to_double(value, qual);
    else if (key == "shared_plain_sgd")
      t.shared_plain_sgd = to_bool(value, qual);
    else throw ParseError("config: unknown key " + qual);
  } else {
    throw ParseError("config: unknown section [" + section + "]");
  }
}

void apply_config_file(RunConfig& rc, const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ParseError("cannot open config file: " + path);
  std::string line, section;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    line = trim(line);
    if (line.empty()) continue;
    if (line.front() == '[') {
      if (line.back() != ']')
        throw ParseError(path + ":" + std::to_string(lineno) +
                         ": malformed section header");
      section = trim(line.substr(1, line.size() - 2));
      continue;
    }
    const auto eq = line.find('=');
    if (eq == std::string::npos || section.empty())
      throw ParseError(path + ":" + std::to_string(lineno) +
                       ": expected key = value inside a section");
    set_config_key(rc, section, trim(line.substr(0, eq)),
                   trim(line.substr(eq + 1)));
  }
}

void apply_override(RunConfig& rc, const std::string& dotted) {
  const auto eq = dotted.find('=');
  const auto dot = dotted.find('.');
  if (eq == std::string::npos || dot == std::string::npos || dot > eq)
    throw ParseError("override must look like section.key=value: " + dotted);
  set_config_key(rc, trim(dotted.substr(0, dot)),
                 trim(dotted.substr(dot + 1, eq - dot - 1)),
                 trim(dotted.substr(eq + 1)));
}

std::string echo_config(const RunConfig& rc) {
  std::ostringstream o;
  const TrainingConfig& t = rc.train;
  const GatConfig& g = t.gat;
  o << "[run]\n";
  o << "case = " << rc.case_path << "\n";
  o << "dataset = " << rc.dataset_path << "\n";
  o << "checkpoint = " << rc.checkpoint_path << "\n";
  o << "out_dir = " << rc.out_dir << "\n";
  o << "method = " << rc.method << "\n";
  o << "split = " << rc.split << "\n";
  o << "threads = " << rc.threads << "\n";
  o << "labels_as_predictions = "
    << (rc.labels_as_predictions ? "true" : "false") << "\n";
  o << "\n[dataset]\n";
  o << "n = " << rc.ds_n << "\n";
  o << "seed = " << rc.ds_seed << "\n";
  o << "labels = " << (rc.ds_labels ? "true" : "false") << "\n";
  o << "\n[gat]\n";
  o << "layers = " << g.n_layers << "\n";
  o << "d_node = " << g.d_node << "\n";
  o << "d_edge = " << g.d_edge << "\n";
  o << "d_attn = " << g.d_attn << "\n";
  o << "mlp_hidden = " << g.mlp_hidden << "\n";
  o << "heads = " << g.n_heads << "\n";
  o << "\n[train]\n";
  o << "seed = " << t.seed << "\n";
  o << "epochs = " << t.epochs << "\n";
  o << "batch = " << t.batch << "\n";
  o << "aid_epochs = " << t.aid_epochs << "\n";
  o << "warmup_epochs = " << t.warmup_epochs << "\n";
  o << "aid_weight = " << fmt_double(t.aid_weight) << "\n";
  o << "eta_primal = " << fmt_double(t.eta_primal) << "\n";
  o << "omega_primal = " << fmt_double(t.omega_primal) << "\n";
  o << "adam_beta1 = " << fmt_double(t.adam_beta1) << "\n";
  o << "adam_beta2 = " << fmt_double(t.adam_beta2) << "\n";
  o << "adam_eps = " << fmt_double(t.adam_eps) << "\n";
  o << "eta_pw = " << fmt_double(t.eta_pw) << "\n";
  o << "omega_pw = " << fmt_double(t.omega_pw) << "\n";
  o << "eta_sh = " << fmt_double(t.eta_sh) << "\n";
  o << "omega_sh = " << fmt_double(t.omega_sh) << "\n";
  o << "adamax_beta1 = " << fmt_double(t.adamax_beta1) << "\n";
  o << "adamax_beta2 = " << fmt_double(t.adamax_beta2) << "\n";
  o << "adamax_eps = " << fmt_double(t.adamax_eps) << "\n";
  o << "w_g = " << fmt_double(t.w_g) << "\n";
  o << "w_h = " << fmt_double(t.w_h) << "\n";
  o << "w_c = " << fmt_double(t.w_c) << "\n";
  o << "grad_clip = " << fmt_double(t.grad_clip) << "\n";
  o << "shared_plain_sgd = " << (t.shared_plain_sgd ? "true" : "false")
    << "\n";
  return o.str();
}

int cmd_inspect(const RunConfig& rc, std::ostream& out) {
  const PowerSystem sys = load_system(rc.case_path);
  double v_lo = std::numeric_limits<double>::infinity(), v_hi = -v_lo;
  double p_lo = v_lo, p_hi = v_hi, q_lo = v_lo, q_hi = v_hi;
  for (const Bus& b : sys.buses) {
    v_lo = std::min(v_lo, b.v_min);
    v_hi = std::max(v_hi, b.v_max);
  }
  for (int gb : sys.gen_buses) {
    const Bus& b = sys.buses[gb];
    p_lo = std::min(p_lo, b.s_min.real());
    p_hi = std::max(p_hi, b.s_max.real());
    q_lo = std::min(q_lo, b.s_min.imag());
    q_hi = std::max(q_hi, b.s_max.imag());
  }
  double f_hi = 0.0, th_lo = 0.0, th_hi = 0.0;
  for (const Branch& br : sys.branches) {
    f_hi = std::max({f_hi, br.f_max_from, br.f_max_to});
    th_lo = std::min(th_lo, br.theta_min);
    th_hi = std::max(th_hi, br.theta_max);
  }
  out << "name " << sys.name << "\n";
  out << "N=" << sys.n() << " M=" << sys.m()
      << " generators=" << sys.gen_buses.size()
      << " ref_bus=" << sys.buses[sys.ref_bus].ext_id
      << " base_mva=" << fmt_double(sys.base_mva) << "\n";
  out << "v_range [" << fmt_double(v_lo) << ", " << fmt_double(v_hi)
      << "] p.u.\n";
  if (!sys.gen_buses.empty()) {
    out << "p_range [" << fmt_double(p_lo) << ", " << fmt_double(p_hi)
        << "] q_range [" << fmt_double(q_lo) << ", " << fmt_double(q_hi)
        << "] p.u.\n";
  }
  out << "flow_limit_max " << fmt_double(f_hi) << " angle_range ["
      << fmt_double(th_lo) << ", " << fmt_double(th_hi) << "] rad\n";
  out << "slack_lengths ineq=" << sys.n_ineq() << " eq=" << sys.n_eq()
      << "\n";
  return 0;
}

int cmd_dataset(const RunConfig& rc, std::ostream& out) {
  const PowerSystem sys = load_system(rc.case_path);
  const int threads = resolve_threads(rc.threads);
  int rejected = 0;
  const Dataset ds = make_dataset(sys, rc.ds_n, rc.ds_seed, rc.ds_labels, {},
                                  threads, &rejected);
  ensure_dir(rc.out_dir);
  const std::string path = rc.out_dir + "/dataset.jsonl";
  save_dataset(path, ds);
  write_text(rc.out_dir + "/config.txt", echo_config(rc));
  out << "wrote " << path << "\n";
  out << "samples " << ds.size() << " split " << ds.train_idx.size() << "/"
      << ds.val_idx.size() << "/" << ds.test_idx.size() << "\n";
  if (rc.ds_labels)
    out << "certified " << ds.size() << " resampled " << rejected << "\n";
  return 0;
}

int cmd_train(const RunConfig& rc, std::ostream& out) {
  const PowerSystem sys = load_system(rc.case_path);
  const Dataset ds = load_dataset(rc.dataset_path, sys);
  RunConfig resolved = rc;
  resolved.threads = resolve_threads(rc.threads);
  TrainingConfig& cfg = resolved.train;
  cfg.mode = parse_train_mode(rc.method);
  // Appendix defaults differ by objective family: 5 for the dual methods,
  // 72 for the supervised penalty.
  if (cfg.mode == TrainMode::mse_penalty) {
    if (!rc.w_g_set) cfg.w_g = 72.0;
    if (!rc.w_h_set) cfg.w_h = 72.0;
  }

  const TrainResult res = train(sys, ds, cfg, resolved.threads, &out);

  ensure_dir(rc.out_dir);
  CheckpointMeta meta;
  meta.case_name = sys.name;
  meta.n_buses = sys.n();
  meta.method = rc.method;
  meta.seed = cfg.seed;
  save_checkpoint(rc.out_dir + "/checkpoint.json", res.params, meta);
  if (mode_uses_duals(cfg.mode))
    save_multipliers(rc.out_dir + "/multipliers.mul", res.store);
  write_metrics_csv(rc.out_dir + "/metrics.csv", res.history);
  cfg.w_c = res.w_c;  // echo the resolved cost weight
  write_text(rc.out_dir + "/config.txt", echo_config(resolved));
  out << "trained " << rc.method << " for " << cfg.epochs << " epochs ("
      << res.params.total_size() << " parameters)\n";
  out << "wrote " << rc.out_dir << "/checkpoint.json\n";
  return 0;
}

int cmd_eval(const RunConfig& rc, std::ostream& out) {
  const PowerSystem sys = load_system(rc.case_path);
  const Dataset ds = load_dataset(rc.dataset_path, sys);
  const std::vector<int>& ids = split_ids(ds, rc.split);
  if (ids.empty()) throw MismatchError("split " + rc.split + " is empty");
  const int threads = resolve_threads(rc.threads);
  const double cost_bar = resolve_cost_bar(sys, ds);

  std::string method;
  std::vector<SampleMetrics> metrics(ids.size());
  if (rc.labels_as_predictions) {
    if (!ds.labeled)
      throw MismatchError("labels-as-predictions needs a labeled dataset");
    method = "labels";
    parallel_for(static_cast<int>(ids.size()), threads, [&](int k) {
      const Sample& s = ds.samples[static_cast<std::size_t>(ids[k])];
      metrics[k] = sample_metrics(sys, s.r, s.label.point, s.label.cost,
                                  cost_bar, ids[k]);
    });
  } else {
    if (rc.checkpoint_path.empty())
      throw std::invalid_argument(
          "eval needs --checkpoint (or --labels-as-predictions)");
    CheckpointMeta meta;
    const GatParameters params = load_checkpoint(rc.checkpoint_path, &meta);
    if (meta.n_buses != sys.n())
      throw MismatchError("checkpoint was trained on " +
                          std::to_string(meta.n_buses) + " buses, case has " +
                          std::to_string(sys.n()));
    if (meta.case_name != sys.name)
      throw MismatchError("checkpoint case " + meta.case_name +
                          " does not match " + sys.name);
    method = meta.method.empty() ? "unknown" : meta.method;
    // An mse-mode model is the lightest tape that can run the forward pass.
    ModelPool models;
    for (int w = 0; w < threads; ++w) {
      models.push_back(std::make_unique<LossModel>(
          sys, params.cfg, TrainMode::mse, LossWeights{}));
      models.back()->set_parameters(params);
    }
    parallel_for_workers(static_cast<int>(ids.size()), threads,
                         [&](int w, int k) {
                           const Sample& s =
                               ds.samples[static_cast<std::size_t>(ids[k])];
                           const OperatingPoint pred = models[w]->predict(s.r);
                           metrics[k] = sample_metrics(
                               sys, s.r, pred,
                               s.labeled ? s.label.cost : -1.0, cost_bar,
                               ids[k]);
                         });
  }

  ensure_dir(rc.out_dir);
  write_per_sample_csv(rc.out_dir + "/per_sample.csv", metrics);
  write_aggregate_csv(rc.out_dir + "/aggregate.csv", ds.system_id, method,
                      aggregate(metrics));
  RunConfig resolved = rc;
  resolved.threads = threads;
  write_text(rc.out_dir + "/config.txt", echo_config(resolved));
  out << "evaluated " << metrics.size() << " samples (" << rc.split
      << " split of " << ds.system_id << ", method " << method << ")\n";
  out << "wrote " << rc.out_dir << "/aggregate.csv\n";
  return 0;
}

int cmd_report(const std::vector<std::string>& inputs, const RunConfig& rc,
               std::ostream& out) {
  static const std::string kHeader = "case,method,metric,mean,std,p95,max";
  if (inputs.empty())
    throw std::invalid_argument("report needs at least one aggregate CSV");
  // Later inputs override earlier ones on a (case, method, metric) key.
  std::map<std::tuple<std::string, std::string, std::string>, std::string>
      rows;
  for (const std::string& path : inputs) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw SchemaError("cannot open report input: " + path);
    std::string line;
    if (!std::getline(in, line) || trim(line) != kHeader)
      throw SchemaError("unexpected header in " + path);
    int lineno = 1;
    while (std::getline(in, line)) {
      ++lineno;
      if (trim(line).empty()) continue;
      std::vector<std::string> f;
      std::stringstream ss(line);
      std::string tok;
      while (std::getline(ss, tok, ',')) f.push_back(tok);
      if (f.size() != 7)
        throw SchemaError(path + ":" + std::to_string(lineno) +
                          ": expected 7 columns");
      rows[{f[0], f[1], f[2]}] = line;
    }
  }
  ensure_dir(rc.out_dir);
  const std::string path = rc.out_dir + "/report.csv";
  std::ofstream o(path, std::ios::binary);
  if (!o) throw SchemaError("cannot open for writing: " + path);
  o << kHeader << "\n";
  for (const auto& [key, line] : rows) o << line << "\n";
  if (!o.good()) throw SchemaError("write failed: " + path);
  out << "wrote " << path << " (" << rows.size() << " rows)\n";
  return 0;
}

int run_cli(int argc, const char* const* argv) {
  CLI::App app{"constrained learning toolkit for AC optimal power flow"};
  app.require_subcommand(1);

  RunConfig rc;
  std::string config_path;
  std::vector<std::string> overrides;
  // Named-flag shadows; applied after the config file so flags win.
  std::string f_case, f_dataset, f_checkpoint, f_out, f_method, f_split;
  int f_threads = 0, f_n = 0, f_epochs = -1, f_batch = 0;
  uint64_t f_seed = 0;
  bool f_labels = false, f_labels_as_pred = false;
  std::vector<std::string> report_inputs;

  auto add_common = [&](CLI::App* c) {
    c->add_option("--config", config_path, "config file (key = value)");
    c->add_option("--set", overrides,
                  "override one config key, e.g. --set train.eta_pw=0");
    c->add_option("--out", f_out, "output directory");
    c->add_option("--threads", f_threads, "worker threads");
  };

  CLI::App* c_inspect = app.add_subcommand("inspect", "print a case summary");
  c_inspect->add_option("case", f_case, "MATPOWER case file")->required();

  CLI::App* c_dataset =
      app.add_subcommand("dataset", "draw demand samples, optionally label");
  add_common(c_dataset);
  c_dataset->add_option("--case", f_case, "MATPOWER case file");
  c_dataset->add_option("--n", f_n, "sample count");
  c_dataset->add_option("--seed", f_seed, "master seed");
  c_dataset->add_flag("--labels", f_labels, "solve for reference labels");

  CLI::App* c_train = app.add_subcommand("train", "train a predictor");
  add_common(c_train);
  c_train->add_option("--case", f_case, "MATPOWER case file");
  c_train->add_option("--dataset", f_dataset, "dataset JSONL");
  c_train->add_option("--method", f_method,
                      "dual-p | dual-s | dual-h | mse | mse-penalty");
  c_train->add_option("--epochs", f_epochs, "training epochs");
  c_train->add_option("--batch", f_batch, "batch size");
  c_train->add_option("--seed", f_seed, "master seed");

  CLI::App* c_eval = app.add_subcommand("eval", "evaluate a checkpoint");
  add_common(c_eval);
  c_eval->add_option("--case", f_case, "MATPOWER case file");
  c_eval->add_option("--dataset", f_dataset, "dataset JSONL");
  c_eval->add_option("--checkpoint", f_checkpoint, "checkpoint JSON");
  c_eval->add_option("--split", f_split, "train | val | test");
  c_eval->add_flag("--labels-as-predictions", f_labels_as_pred,
                   "evaluate the reference labels themselves");

  CLI::App* c_report =
      app.add_subcommand("report", "merge aggregate CSVs into one table");
  c_report->add_option("inputs", report_inputs, "aggregate CSV files")
      ->required();
  c_report->add_option("--out", f_out, "output directory");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    // CLI11 prints help itself; fold every usage problem into exit 2
    // (except a plain --help, which is a success).
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  try {
    if (!config_path.empty()) apply_config_file(rc, config_path);
    for (const std::string& s : overrides) apply_override(rc, s);
    if (c_inspect->count("case") || c_dataset->count("--case") ||
        c_train->count("--case") || c_eval->count("--case"))
      rc.case_path = f_case;
    if (c_train->count("--dataset") || c_eval->count("--dataset"))
      rc.dataset_path = f_dataset;
    if (c_eval->count("--checkpoint")) rc.checkpoint_path = f_checkpoint;
    for (CLI::App* c : {c_dataset, c_train, c_eval, c_report})
      if (c->count("--out")) rc.out_dir = f_out;
    for (CLI::App* c : {c_dataset, c_train, c_eval})
      if (c->count("--threads")) rc.threads = f_threads;
    if (c_train->count("--method")) rc.method = f_method;
    if (c_eval->count("--split")) rc.split = f_split;
    if (c_eval->count("--labels-as-predictions"))
      rc.labels_as_predictions = true;
    if (c_dataset->count("--n")) rc.ds_n = f_n;
    if (c_dataset->count("--labels")) rc.ds_labels = true;
    if (c_dataset->count("--seed")) rc.ds_seed = f_seed;
    if (c_train->count("--seed")) rc.train.seed = f_seed;
    if (c_train->count("--epochs")) rc.train.epochs = f_epochs;
    if (c_train->count("--batch")) rc.train.batch = f_batch;

    if (c_inspect->parsed()) return cmd_inspect(rc, std::cout);
    if (c_dataset->parsed()) return cmd_dataset(rc, std::cout);
    if (c_train->parsed()) return cmd_train(rc, std::cout);
    if (c_eval->parsed()) return cmd_eval(rc, std::cout);
    if (c_report->parsed()) return cmd_report(report_inputs, rc, std::cout);
    return 2;
  } catch (const ParseError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const CaseError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const std::invalid_argument& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const ResampleCapExceeded& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 3;
  } catch (const NonFiniteLoss& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 4;
  } catch (const MismatchError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 5;
  } catch (const SchemaError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 6;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
}

}  // namespace opfdl
