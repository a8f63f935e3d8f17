#pragma once

#include <iosfwd>
#include <string>
#include <vector>

#include "opfdl/duals.hpp"

namespace opfdl {

// Everything the five commands consume, resolved from built-in defaults,
// then an optional config file, then command-line overrides (last wins).
struct RunConfig {
  std::string case_path;
  std::string dataset_path;
  std::string checkpoint_path;
  std::string out_dir = ".";
  std::string method = "dual-p";
  std::string split = "test";
  int threads = 0;  // <= 0: fall back to OPF_DUALLEARN_THREADS, then 1
  bool labels_as_predictions = false;

  int ds_n = 1000;
  uint64_t ds_seed = 1;
  bool ds_labels = false;

  TrainingConfig train;  // train.gat carries the network shape
  // The 5-vs-72 penalty-weight default depends on the method, so explicit
  // settings are tracked.
  bool w_g_set = false, w_h_set = false;
};

// Flat "[section]\nkey = value" text; '#' starts a comment. Unknown sections
// or keys throw ParseError, as do malformed values.
void apply_config_file(RunConfig& rc, const std::string& path);
void set_config_key(RunConfig& rc, const std::string& section,
                    const std::string& key, const std::string& value);
// One dotted override, e.g. "train.eta_pw=0".
void apply_override(RunConfig& rc, const std::string& dotted);
// Canonical dump in the config-file format; parsing it back reproduces the
// same resolved state. Written next to every command's outputs.
std::string echo_config(const RunConfig& rc);

int cmd_inspect(const RunConfig& rc, std::ostream& out);
int cmd_dataset(const RunConfig& rc, std::ostream& out);
int cmd_train(const RunConfig& rc, std::ostream& out);
int cmd_eval(const RunConfig& rc, std::ostream& out);
int cmd_report(const std::vector<std::string>& inputs, const RunConfig& rc,
               std::ostream& out);

// argv entry point. Exit codes: 0 success, 2 parse/usage, 3 resample cap,
// 4 non-finite training, 5 case/checkpoint/label mismatch, 6 bad artifact
// schema, 1 anything else.
int run_cli(int argc, const char* const* argv);

}  // namespace opfdl
