#include "opfdl/gat.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

#include <json.hpp>

#include "opfdl/errors.hpp"
#include "opfdl/num_format.hpp"
#include "opfdl/rng.hpp"

namespace opfdl {

namespace {

std::string layer_prefix(int l) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "layer%02d", l);
  return buf;
}

void push_mlp(std::vector<ParamInfo>& out, const std::string& prefix,
              int d_in, int d_hidden, int d_out) {
  out.push_back({prefix + ".w0", d_hidden, d_in, false});
  out.push_back({prefix + ".b0", 1, d_hidden, true});
  out.push_back({prefix + ".w1", d_out, d_hidden, false});
  out.push_back({prefix + ".b1", 1, d_out, true});
}

}  // namespace

std::vector<ParamInfo> parameter_layout(const GatConfig& cfg) {
  if (cfg.n_layers < 1 || cfg.d_node < 1 || cfg.d_edge < 1 ||
      cfg.d_attn < 1 || cfg.mlp_hidden < 1 || cfg.n_heads < 1) {
    throw CaseError("gat config dimensions must be positive");
  }
  std::vector<ParamInfo> out;
  push_mlp(out, "node_in", kNodeFeatureDim, cfg.mlp_hidden, cfg.d_node);
  push_mlp(out, "edge_in", kEdgeFeatureDim, cfg.mlp_hidden, cfg.d_edge);
  out.push_back({"self_edge", 1, cfg.d_edge, false});
  const int d_cat = cfg.d_edge + 2 * cfg.d_node;
  for (int l = 0; l < cfg.n_layers; ++l) {
    const std::string lp = layer_prefix(l);
    for (int h = 0; h < cfg.n_heads; ++h) {
      const std::string hp = lp + ".head" + std::to_string(h);
      out.push_back({hp + ".a_ef", cfg.d_attn, d_cat, false});
      out.push_back({hp + ".a_att", 1, cfg.d_attn, false});
      out.push_back({hp + ".a_nf", cfg.d_node, cfg.d_node, false});
    }
    if (cfg.n_heads > 1) {
      out.push_back({lp + ".proj", cfg.d_node, cfg.n_heads * cfg.d_node,
                     false});
    }
    push_mlp(out, lp + ".mlp", cfg.d_node, cfg.mlp_hidden, cfg.d_node);
  }
  push_mlp(out, "out_gen", cfg.d_node, cfg.mlp_hidden, 4);
  push_mlp(out, "out_load", cfg.d_node, cfg.mlp_hidden, 4);
  return out;
}

int GatParameters::total_size() const {
  int n = 0;
  for (const auto& b : blocks) n += static_cast<int>(b.size());
  return n;
}

void GatParameters::to_flat(VecXd& out) const {
  out.resize(total_size());
  Eigen::Index k = 0;
  for (const auto& b : blocks) {
    for (Eigen::Index r = 0; r < b.rows(); ++r)
      for (Eigen::Index c = 0; c < b.cols(); ++c) out[k++] = b(r, c);
  }
}

void GatParameters::from_flat(const VecXd& flat) {
  if (flat.size() != total_size())
    throw ShapeError("parameter flat vector has wrong length");
  Eigen::Index k = 0;
  for (auto& b : blocks) {
    for (Eigen::Index r = 0; r < b.rows(); ++r)
      for (Eigen::Index c = 0; c < b.cols(); ++c) b(r, c) = flat[k++];
  }
}

GatParameters init_parameters(const GatConfig& cfg, uint64_t seed) {
  GatParameters p;
  p.cfg = cfg;
  Rng rng(seed, "init");
  for (const ParamInfo& info : parameter_layout(cfg)) {
    ad::Mat m(info.rows, info.cols);
    if (info.is_bias) {
      m.setZero();
    } else {
      const double bound = std::sqrt(6.0 / (info.rows + info.cols));
      for (int r = 0; r < info.rows; ++r)
        for (int c = 0; c < info.cols; ++c)
          m(r, c) = rng.uniform(-bound, bound);
    }
    p.blocks.push_back(std::move(m));
  }
  return p;
}

GatGraph GatGraph::build(const PowerSystem& sys) {
  GatGraph g;
  g.n = sys.n();
  const int e = sys.n() + 2 * sys.m();
  g.dst.reserve(e);
  g.src.reserve(e);
  g.feat.reserve(e);
  for (int i = 0; i < sys.n(); ++i) {
    g.dst.push_back(i);
    g.src.push_back(i);
    g.feat.push_back(-1);
    for (const BranchEnd& be : sys.adjacency[i]) {
      const Branch& br = sys.branches[be.branch];
      g.dst.push_back(i);
      g.src.push_back(be.from_side ? br.to : br.from);
      g.feat.push_back(be.branch);
    }
  }
  return g;
}

ad::Mat bus_feature_matrix(const PowerSystem& sys) {
  ad::Mat f(sys.n(), kNodeFeatureDim - 2);
  for (int i = 0; i < sys.n(); ++i) {
    const Bus& b = sys.buses[i];
    f(i, 0) = b.y_shunt.real();
    f(i, 1) = b.y_shunt.imag();
    f(i, 2) = b.s_min.real();
    f(i, 3) = b.s_min.imag();
    f(i, 4) = b.s_max.real();
    f(i, 5) = b.s_max.imag();
    f(i, 6) = b.v_min;
    f(i, 7) = b.v_max;
    f(i, 8) = b.c0;
    f(i, 9) = b.c1;
    f(i, 10) = b.c2;
  }
  return f;
}

ad::Mat branch_feature_matrix(const PowerSystem& sys) {
  ad::Mat f(sys.m(), kEdgeFeatureDim);
  for (int b = 0; b < sys.m(); ++b) {
    const Branch& br = sys.branches[b];
    f(b, 0) = br.t.real();
    f(b, 1) = br.t.imag();
    f(b, 2) = br.y_c_from.real();
    f(b, 3) = br.y_c_from.imag();
    f(b, 4) = br.y_c_to.real();
    f(b, 5) = br.y_c_to.imag();
    f(b, 6) = br.y.real();
    f(b, 7) = br.y.imag();
    f(b, 8) = br.f_max_from;
    f(b, 9) = br.f_max_to;
    f(b, 10) = br.theta_min;
    f(b, 11) = br.theta_max;
  }
  return f;
}

ad::Var apply_mlp(ad::Tape& t, const MlpVars& mlp, ad::Var x) {
  ad::Var h = t.relu(t.add_row(t.matmul(x, mlp.w0, false, true), mlp.b0));
  return t.add_row(t.matmul(h, mlp.w1, false, true), mlp.b1);
}

ad::Var attention_logits(ad::Tape& t, const GatGraph& graph,
                         const HeadVars& head, ad::Var edge_feats, ad::Var x) {
  ad::Var xd = t.gather_rows(x, graph.dst);
  ad::Var xs = t.gather_rows(x, graph.src);
  ad::Var cat = t.concat_cols(t.concat_cols(edge_feats, xd), xs);
  ad::Var hidden = t.relu(t.matmul(cat, head.a_ef, false, true));
  return t.matmul(hidden, head.a_att, false, true);
}

ad::Var layer_forward(ad::Tape& t, const GatGraph& graph,
                      const LayerVars& layer, ad::Var edge_feats, ad::Var x) {
  ad::Var xs = t.gather_rows(x, graph.src);
  ad::Var z;
  bool first = true;
  std::vector<ad::Var> per_head;
  per_head.reserve(layer.heads.size());
  for (const HeadVars& head : layer.heads) {
    ad::Var logits = attention_logits(t, graph, head, edge_feats, x);
    ad::Var w = t.segment_softmax(logits, graph.dst, graph.n);
    ad::Var agg = t.segment_sum(t.scale_rows(xs, w), graph.dst, graph.n);
    ad::Var zh = t.matmul(agg, head.a_nf, false, true);
    per_head.push_back(zh);
    if (first) {
      z = zh;
      first = false;
    } else {
      z = t.concat_cols(z, zh);
    }
  }
  if (per_head.size() > 1) z = t.matmul(z, layer.proj, false, true);
  return t.add(x, apply_mlp(t, layer.mlp, t.add(x, z)));
}

GatHandles build_gat(ad::Tape& t, const GatConfig& cfg,
                     const PowerSystem& sys) {
  GatHandles h;
  h.cfg = cfg;
  const int n = sys.n();
  const auto layout = parameter_layout(cfg);
  h.params.reserve(layout.size());
  for (const ParamInfo& info : layout)
    h.params.push_back(t.input(info.rows, info.cols));
  std::size_t next = 0;
  auto take = [&]() { return h.params[next++]; };

  h.r_re = t.input(n, 1);
  h.r_im = t.input(n, 1);
  ad::Var xin = t.concat_cols(t.concat_cols(h.r_re, h.r_im),
                              t.constant(bus_feature_matrix(sys)));

  MlpVars node_in{take(), take(), take(), take()};
  h.x0 = apply_mlp(t, node_in, xin);

  MlpVars edge_in{take(), take(), take(), take()};
  ad::Var self_edge = take();
  ad::Var branch_embed =
      apply_mlp(t, edge_in, t.constant(branch_feature_matrix(sys)));
  GatGraph graph = GatGraph::build(sys);
  std::vector<int> table_idx(graph.e());
  for (int e = 0; e < graph.e(); ++e)
    table_idx[e] = graph.feat[e] < 0 ? 0 : 1 + graph.feat[e];
  ad::Var edge_feats =
      t.gather_rows(t.concat_rows(self_edge, branch_embed), table_idx);

  ad::Var x = h.x0;
  for (int l = 0; l < cfg.n_layers; ++l) {
    LayerVars layer;
    for (int hd = 0; hd < cfg.n_heads; ++hd) {
      HeadVars head;
      head.a_ef = take();
      head.a_att = take();
      head.a_nf = take();
      layer.heads.push_back(head);
    }
    if (cfg.n_heads > 1) layer.proj = take();
    layer.mlp = {take(), take(), take(), take()};
    x = layer_forward(t, graph, layer, edge_feats, x);
  }
  h.x_final = x;

  MlpVars gen_head{take(), take(), take(), take()};
  MlpVars load_head{take(), take(), take(), take()};
  ad::Var out_gen = apply_mlp(t, gen_head, x);
  ad::Var out_load = apply_mlp(t, load_head, x);

  // Generator buses emit all four outputs; load buses only voltage, so the
  // injection is exactly zero there. Re v carries a +1 flat-start offset.
  ad::Mat mask_gen = ad::Mat::Zero(n, 4);
  ad::Mat mask_load = ad::Mat::Zero(n, 4);
  ad::Mat offset = ad::Mat::Zero(n, 4);
  for (int i = 0; i < n; ++i) {
    if (sys.buses[i].has_generator) {
      mask_gen.row(i).setOnes();
    } else {
      mask_load(i, 2) = 1.0;
      mask_load(i, 3) = 1.0;
    }
    offset(i, 2) = 1.0;
  }
  h.out = t.add(t.add(t.mul(out_gen, t.constant(mask_gen)),
                      t.mul(out_load, t.constant(mask_load))),
                t.constant(offset));
  h.pt.s_re = t.slice_cols(h.out, 0, 1);
  h.pt.s_im = t.slice_cols(h.out, 1, 1);
  h.pt.v_re = t.slice_cols(h.out, 2, 1);
  h.pt.v_im = t.slice_cols(h.out, 3, 1);
  if (next != h.params.size())
    throw ShapeError("gat parameter layout mismatch");
  return h;
}

void set_params(ad::Tape& t, const GatHandles& h, const GatParameters& p) {
  if (p.blocks.size() != h.params.size())
    throw ShapeError("parameter block count mismatch");
  for (std::size_t i = 0; i < p.blocks.size(); ++i)
    t.set_value(h.params[i], p.blocks[i]);
}

void set_demand(ad::Tape& t, const GatHandles& h, const VecXcd& r) {
  ad::Mat re(r.size(), 1), im(r.size(), 1);
  for (Eigen::Index i = 0; i < r.size(); ++i) {
    re(i, 0) = r[i].real();
    im(i, 0) = r[i].imag();
  }
  t.set_value(h.r_re, re);
  t.set_value(h.r_im, im);
}

OperatingPoint gat_forward(const GatConfig& cfg, const GatParameters& p,
                           const PowerSystem& sys, const VecXcd& r) {
  ad::Tape t;
  GatHandles h = build_gat(t, cfg, sys);
  set_params(t, h, p);
  set_demand(t, h, r);
  t.forward();
  const int n = sys.n();
  OperatingPoint pt;
  pt.s.resize(n);
  pt.v.resize(n);
  for (int i = 0; i < n; ++i) {
    pt.s[i] = {t.val(h.pt.s_re)(i, 0), t.val(h.pt.s_im)(i, 0)};
    pt.v[i] = {t.val(h.pt.v_re)(i, 0), t.val(h.pt.v_im)(i, 0)};
  }
  return pt;
}

void save_checkpoint(const std::string& path, const GatParameters& params,
                     const CheckpointMeta& meta) {
  nlohmann::ordered_json j;
  j["schema"] = "opfdl.gat_checkpoint";
  j["version"] = 1;
  j["case"] = meta.case_name;
  j["n_buses"] = meta.n_buses;
  j["method"] = meta.method;
  j["seed"] = meta.seed;
  j["config"] = {{"n_layers", params.cfg.n_layers},
                 {"d_node", params.cfg.d_node},
                 {"d_edge", params.cfg.d_edge},
                 {"d_attn", params.cfg.d_attn},
                 {"mlp_hidden", params.cfg.mlp_hidden},
                 {"n_heads", params.cfg.n_heads}};
  nlohmann::ordered_json blocks = nlohmann::ordered_json::object();
  const auto layout = parameter_layout(params.cfg);
  for (std::size_t i = 0; i < layout.size(); ++i) {
    const ad::Mat& m = params.blocks[i];
    std::vector<double> flat;
    flat.reserve(m.size());
    for (Eigen::Index r = 0; r < m.rows(); ++r)
      for (Eigen::Index c = 0; c < m.cols(); ++c) flat.push_back(m(r, c));
    blocks[layout[i].name] = flat;
  }
  j["params"] = std::move(blocks);
  std::ofstream out(path, std::ios::binary);
  if (!out) throw SchemaError("cannot open checkpoint for writing: " + path);
  out << j.dump(1) << "\n";
  if (!out.good()) throw SchemaError("checkpoint write failed: " + path);
}

GatParameters load_checkpoint(const std::string& path, CheckpointMeta* meta) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw SchemaError("cannot open checkpoint: " + path);
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw SchemaError("checkpoint is not valid json: " + std::string(e.what()));
  }
  try {
    if (j.at("schema").get<std::string>() != "opfdl.gat_checkpoint")
      throw SchemaError("not a checkpoint file: " + path);
    if (j.at("version").get<int>() != 1)
      throw SchemaError("unsupported checkpoint version in " + path);
    GatConfig cfg;
    const auto& c = j.at("config");
    cfg.n_layers = c.at("n_layers").get<int>();
    cfg.d_node = c.at("d_node").get<int>();
    cfg.d_edge = c.at("d_edge").get<int>();
    cfg.d_attn = c.at("d_attn").get<int>();
    cfg.mlp_hidden = c.at("mlp_hidden").get<int>();
    cfg.n_heads = c.at("n_heads").get<int>();
    GatParameters p;
    p.cfg = cfg;
    const auto& blocks = j.at("params");
    for (const ParamInfo& info : parameter_layout(cfg)) {
      const auto& arr = blocks.at(info.name);
      if (static_cast<int>(arr.size()) != info.size())
        throw SchemaError("checkpoint block " + info.name +
                          " has wrong size");
      ad::Mat m(info.rows, info.cols);
      int k = 0;
      for (int r = 0; r < info.rows; ++r)
        for (int c2 = 0; c2 < info.cols; ++c2)
          m(r, c2) = arr[k++].get<double>();
      p.blocks.push_back(std::move(m));
    }
    if (meta) {
      meta->case_name = j.at("case").get<std::string>();
      meta->n_buses = j.at("n_buses").get<int>();
      meta->method = j.at("method").get<std::string>();
      meta->seed = j.at("seed").get<uint64_t>();
    }
    return p;
  } catch (const nlohmann::json::exception& e) {
    throw SchemaError("malformed checkpoint " + path + ": " + e.what());
  }
}

}  // namespace opfdl
