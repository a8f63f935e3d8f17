#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "opfdl/autodiff.hpp"
#include "opfdl/case_io.hpp"
#include "opfdl/physics.hpp"
#include "opfdl/physics_ad.hpp"

namespace opfdl {

// Per-bus input is [Re r, Im r] plus the 11 static bus features
// [Re y_S, Im y_S, Re s_min, Im s_min, Re s_max, Im s_max, v_min, v_max,
//  c0, c1, c2]. Per-branch features are
// [Re t, Im t, Re yc_f, Im yc_f, Re yc_t, Im yc_t, Re y, Im y,
//  f_max_f, f_max_t, th_min, th_max]. All used raw (per-unit scale).
inline constexpr int kNodeFeatureDim = 13;
inline constexpr int kEdgeFeatureDim = 12;

struct GatConfig {
  int n_layers = 20;
  int d_node = 64;
  int d_edge = 64;
  int d_attn = 128;
  int mlp_hidden = 64;
  int n_heads = 1;

  bool operator==(const GatConfig&) const = default;
};

struct ParamInfo {
  std::string name;
  int rows = 0, cols = 0;
  bool is_bias = false;
  int size() const { return rows * cols; }
};

struct GatParameters {
  GatConfig cfg;
  std::vector<ad::Mat> blocks;  // canonical layout order

  int total_size() const;
  void to_flat(VecXd& out) const;
  void from_flat(const VecXd& flat);
};

// Canonical parameter layout for a config; defines init draw order, the
// flat-vector order, and the checkpoint key names.
std::vector<ParamInfo> parameter_layout(const GatConfig& cfg);

// Xavier-uniform weights (+-sqrt(6/(fan_in+fan_out))), zero biases, drawn
// from the "init" stream of the master seed in layout order.
GatParameters init_parameters(const GatConfig& cfg, uint64_t seed);

// Attention edge list: one edge per direction of every branch plus one
// self-loop per bus. Edges are grouped by destination; the self-loop comes
// first within each group.
struct GatGraph {
  std::vector<int> dst, src;
  std::vector<int> feat;  // branch index or -1 for the self-loop
  int n = 0;
  int e() const { return static_cast<int>(dst.size()); }

  static GatGraph build(const PowerSystem& sys);
};

ad::Mat bus_feature_matrix(const PowerSystem& sys);     // N x 11
ad::Mat branch_feature_matrix(const PowerSystem& sys);  // M x 12

struct MlpVars {
  ad::Var w0, b0, w1, b1;
};

// Two affine layers with a ReLU between them (linear output).
ad::Var apply_mlp(ad::Tape& t, const MlpVars& mlp, ad::Var x);

// Attention-path parameters are bare matrices (no bias terms); only the
// MLPs carry biases.
struct HeadVars {
  ad::Var a_ef, a_att, a_nf;
};

struct LayerVars {
  std::vector<HeadVars> heads;
  ad::Var proj;  // only when n_heads > 1
  MlpVars mlp;
};

// Pre-normalization attention coefficients <a_att, relu(A_EF [x_ij;x_i;x_j])>
// for every edge of the graph, as an E x 1 column.
ad::Var attention_logits(ad::Tape& t, const GatGraph& graph,
                         const HeadVars& head, ad::Var edge_feats, ad::Var x);

// One GAT layer: attention aggregation, linear mix, residual MLP update.
ad::Var layer_forward(ad::Tape& t, const GatGraph& graph,
                      const LayerVars& layer, ad::Var edge_feats, ad::Var x);

// Handles into a recorded forward pass.
struct GatHandles {
  GatConfig cfg;
  std::vector<ad::Var> params;  // leaves, layout order
  ad::Var r_re, r_im;           // demand leaves, N x 1
  ad::Var x0;                   // embedded node states
  ad::Var x_final;
  ad::Var out;                  // N x 4
  AdOperatingPoint pt;          // s forced to 0 at load buses
};

// Records the full forward pass for one system on the tape. Leaf values
// start zeroed; call set_params/set_demand then tape.forward().
GatHandles build_gat(ad::Tape& t, const GatConfig& cfg,
                     const PowerSystem& sys);

void set_params(ad::Tape& t, const GatHandles& h, const GatParameters& p);
void set_demand(ad::Tape& t, const GatHandles& h, const VecXcd& r);

// Convenience one-shot forward: returns the predicted operating point.
OperatingPoint gat_forward(const GatConfig& cfg, const GatParameters& p,
                           const PowerSystem& sys, const VecXcd& r);

// Checkpoint I/O (versioned JSON; weight blocks flat row-major by name).
struct CheckpointMeta {
  std::string case_name;
  int n_buses = 0;
  std::string method;
  uint64_t seed = 0;
};

void save_checkpoint(const std::string& path, const GatParameters& params,
                     const CheckpointMeta& meta);
GatParameters load_checkpoint(const std::string& path, CheckpointMeta* meta);

}  // namespace opfdl
