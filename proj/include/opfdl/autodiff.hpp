#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <vector>

namespace opfdl::ad {

using Mat = Eigen::MatrixXd;

enum class Op : uint8_t {
  Input,
  Constant,
  Add,
  Sub,
  Mul,
  Div,
  Neg,
  Scale,
  MatMul,
  AddRow,
  Relu,
  Exp,
  Log,
  Sqrt,
  Square,
  Hypot,
  Atan2,
  Sum,
  Dot,
  ConcatRows,
  ConcatCols,
  GatherRows,
  ScaleRows,
  SegmentSum,
  SegmentSoftmax,
  SliceCols,
  BroadcastRow,
};

struct Var {
  int id = -1;
  bool valid() const { return id >= 0; }
};

// Reverse-mode tape over dense f64 matrices. Recording evaluates eagerly;
// the recorded program can be re-run with fresh leaf values via forward(),
// which reuses all node storage (no allocation after the first pass). The
// node order is the topological order, so one linear sweep each way.
class Tape {
 public:
  Var input(Eigen::Index rows, Eigen::Index cols);
  Var constant(Mat m);
  Var constant_scalar(double v);

  // Leaf values; set_value keeps the shape fixed.
  void set_value(Var leaf, const Mat& v);
  Mat& leaf_value(Var leaf);

  Var add(Var a, Var b);
  Var sub(Var a, Var b);
  Var mul(Var a, Var b);
  Var div(Var a, Var b);
  Var neg(Var a);
  Var scale(Var a, double c);
  Var matmul(Var a, Var b, bool trans_a = false, bool trans_b = false);
  Var add_row(Var a, Var row);
  Var relu(Var a);
  Var max0(Var a) { return relu(a); }
  Var exp(Var a);
  Var log(Var a);
  Var sqrt(Var a);
  Var square(Var a);
  Var hypot(Var x, Var y);
  Var atan2(Var y, Var x);
  Var sum(Var a);
  Var dot(Var a, Var b);
  Var concat_rows(Var a, Var b);
  Var concat_cols(Var a, Var b);
  Var gather_rows(Var a, std::vector<int> idx);
  Var scale_rows(Var a, Var w);
  Var segment_sum(Var a, std::vector<int> seg, int n_seg);
  Var segment_softmax(Var logits, std::vector<int> seg, int n_seg);
  Var slice_cols(Var a, int start, int count);
  Var broadcast_row(Var row, int n);

  // Re-evaluates every non-leaf node from current leaf values.
  void forward();
  // Seeds d(root)/d(root) = 1 and sweeps the tape in reverse. root must be
  // scalar (1x1).
  void backward(Var root);

  const Mat& val(Var v) const { return val_[v.id]; }
  const Mat& adj(Var v) const { return adj_[v.id]; }
  double scalar(Var v) const { return val_[v.id](0, 0); }
  int size() const { return static_cast<int>(nodes_.size()); }

 private:
  struct Node {
    Op op;
    int a = -1, b = -1;
    int rows = 0, cols = 0;
    double c = 0.0;   // Scale factor
    int i0 = 0, i1 = 0;  // slice start/count, matmul transpose flags, n_seg
    int aux = -1;     // index into aux_ for gather/segment index lists
  };

  Var push(Node nd);
  void eval_node(int i);
  void check_same_shape(Var a, Var b, const char* op) const;

  std::vector<Node> nodes_;
  std::vector<Mat> val_, adj_;
  std::vector<std::vector<int>> aux_;
  std::vector<double> segbuf_;  // scratch for segment ops
};

struct GradCheckReport {
  double max_rel_err = 0.0;
  int checked = 0;
  int excluded = 0;  // coordinates sitting on a kink
  int failed = 0;
  bool ok() const { return failed == 0; }
};

// Central-difference check of d(root)/d(leaf) for every coordinate of every
// listed leaf. Coordinates where the left and right one-sided differences
// disagree (non-differentiable points) are excluded. Leaf values are
// restored afterwards.
GradCheckReport grad_check(Tape& tape, Var root, const std::vector<Var>& wrt,
                           double eps = 1e-6, double tol = 1e-5);

}  // namespace opfdl::ad
