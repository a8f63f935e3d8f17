#include "opfdl/autodiff.hpp"

#include <cmath>
#include <string>

#include "opfdl/errors.hpp"

namespace opfdl::ad {

namespace {
std::string shape_str(const Mat& m) {
  return std::to_string(m.rows()) + "x" + std::to_string(m.cols());
}
}  // namespace

void Tape::check_same_shape(Var a, Var b, const char* op) const {
  const Mat& ma = val_[a.id];
  const Mat& mb = val_[b.id];
  if (ma.rows() != mb.rows() || ma.cols() != mb.cols())
    throw ShapeError(std::string(op) + ": shape mismatch " + shape_str(ma) +
                     " vs " + shape_str(mb));
}

Var Tape::push(Node nd) {
  int id = static_cast<int>(nodes_.size());
  nodes_.push_back(nd);
  val_.emplace_back();
  adj_.emplace_back();
  val_[id].setZero(nd.rows, nd.cols);
  eval_node(id);
  return Var{id};
}

Var Tape::input(Eigen::Index rows, Eigen::Index cols) {
  Node nd;
  nd.op = Op::Input;
  nd.rows = static_cast<int>(rows);
  nd.cols = static_cast<int>(cols);
  return push(nd);
}

Var Tape::constant(Mat m) {
  Node nd;
  nd.op = Op::Constant;
  nd.rows = static_cast<int>(m.rows());
  nd.cols = static_cast<int>(m.cols());
  int id = static_cast<int>(nodes_.size());
  nodes_.push_back(nd);
  val_.push_back(std::move(m));
  adj_.emplace_back();
  return Var{id};
}

Var Tape::constant_scalar(double v) {
  Mat m(1, 1);
  m(0, 0) = v;
  return constant(std::move(m));
}

void Tape::set_value(Var leaf, const Mat& v) {
  if (nodes_[leaf.id].op != Op::Input)
    throw ShapeError("set_value: node is not an input leaf");
  if (v.rows() != val_[leaf.id].rows() || v.cols() != val_[leaf.id].cols())
    throw ShapeError("set_value: shape mismatch " + shape_str(v) + " vs " +
                     shape_str(val_[leaf.id]));
  val_[leaf.id] = v;
}

Mat& Tape::leaf_value(Var leaf) {
  if (nodes_[leaf.id].op != Op::Input)
    throw ShapeError("leaf_value: node is not an input leaf");
  return val_[leaf.id];
}

#define OPFDL_BINARY(NAME, OP)                          \
  Var Tape::NAME(Var a, Var b) {                        \
    check_same_shape(a, b, #NAME);                      \
    Node nd;                                            \
    nd.op = Op::OP;                                     \
    nd.a = a.id;                                        \
    nd.b = b.id;                                        \
    nd.rows = static_cast<int>(val_[a.id].rows());      \
    nd.cols = static_cast<int>(val_[a.id].cols());      \
    return push(nd);                                    \
  }

OPFDL_BINARY(add, Add)
OPFDL_BINARY(sub, Sub)
OPFDL_BINARY(mul, Mul)
OPFDL_BINARY(div, Div)
OPFDL_BINARY(hypot, Hypot)
OPFDL_BINARY(atan2, Atan2)
#undef OPFDL_BINARY

#define OPFDL_UNARY(NAME, OP)                           \
  Var Tape::NAME(Var a) {                               \
    Node nd;                                            \
    nd.op = Op::OP;                                     \
    nd.a = a.id;                                        \
    nd.rows = static_cast<int>(val_[a.id].rows());      \
    nd.cols = static_cast<int>(val_[a.id].cols());      \
    return push(nd);                                    \
  }

OPFDL_UNARY(neg, Neg)
OPFDL_UNARY(relu, Relu)
OPFDL_UNARY(exp, Exp)
OPFDL_UNARY(log, Log)
OPFDL_UNARY(sqrt, Sqrt)
OPFDL_UNARY(square, Square)
#undef OPFDL_UNARY

Var Tape::scale(Var a, double c) {
  Node nd;
  nd.op = Op::Scale;
  nd.a = a.id;
  nd.c = c;
  nd.rows = static_cast<int>(val_[a.id].rows());
  nd.cols = static_cast<int>(val_[a.id].cols());
  return push(nd);
}

Var Tape::matmul(Var a, Var b, bool trans_a, bool trans_b) {
  const Mat& ma = val_[a.id];
  const Mat& mb = val_[b.id];
  Eigen::Index ar = trans_a ? ma.cols() : ma.rows();
  Eigen::Index ac = trans_a ? ma.rows() : ma.cols();
  Eigen::Index br = trans_b ? mb.cols() : mb.rows();
  Eigen::Index bc = trans_b ? mb.rows() : mb.cols();
  if (ac != br)
    throw ShapeError("matmul: inner dimensions " + shape_str(ma) + " vs " +
                     shape_str(mb));
  Node nd;
  nd.op = Op::MatMul;
  nd.a = a.id;
  nd.b = b.id;
  nd.rows = static_cast<int>(ar);
  nd.cols = static_cast<int>(bc);
  nd.i0 = trans_a ? 1 : 0;
  nd.i1 = trans_b ? 1 : 0;
  return push(nd);
}

Var Tape::add_row(Var a, Var row) {
  const Mat& ma = val_[a.id];
  const Mat& mr = val_[row.id];
  if (mr.rows() != 1 || mr.cols() != ma.cols())
    throw ShapeError("add_row: " + shape_str(ma) + " vs " + shape_str(mr));
  Node nd;
  nd.op = Op::AddRow;
  nd.a = a.id;
  nd.b = row.id;
  nd.rows = static_cast<int>(ma.rows());
  nd.cols = static_cast<int>(ma.cols());
  return push(nd);
}

Var Tape::sum(Var a) {
  Node nd;
  nd.op = Op::Sum;
  nd.a = a.id;
  nd.rows = 1;
  nd.cols = 1;
  return push(nd);
}

Var Tape::dot(Var a, Var b) {
  check_same_shape(a, b, "dot");
  Node nd;
  nd.op = Op::Dot;
  nd.a = a.id;
  nd.b = b.id;
  nd.rows = 1;
  nd.cols = 1;
  return push(nd);
}

Var Tape::concat_rows(Var a, Var b) {
  const Mat& ma = val_[a.id];
  const Mat& mb = val_[b.id];
  if (ma.cols() != mb.cols())
    throw ShapeError("concat_rows: " + shape_str(ma) + " vs " + shape_str(mb));
  Node nd;
  nd.op = Op::ConcatRows;
  nd.a = a.id;
  nd.b = b.id;
  nd.rows = static_cast<int>(ma.rows() + mb.rows());
  nd.cols = static_cast<int>(ma.cols());
  return push(nd);
}

Var Tape::concat_cols(Var a, Var b) {
  const Mat& ma = val_[a.id];
  const Mat& mb = val_[b.id];
  if (ma.rows() != mb.rows())
    throw ShapeError("concat_cols: " + shape_str(ma) + " vs " + shape_str(mb));
  Node nd;
  nd.op = Op::ConcatCols;
  nd.a = a.id;
  nd.b = b.id;
  nd.rows = static_cast<int>(ma.rows());
  nd.cols = static_cast<int>(ma.cols() + mb.cols());
  return push(nd);
}

Var Tape::gather_rows(Var a, std::vector<int> idx) {
  const Mat& ma = val_[a.id];
  for (int i : idx)
    if (i < 0 || i >= ma.rows())
      throw ShapeError("gather_rows: index out of range");
  Node nd;
  nd.op = Op::GatherRows;
  nd.a = a.id;
  nd.rows = static_cast<int>(idx.size());
  nd.cols = static_cast<int>(ma.cols());
  nd.aux = static_cast<int>(aux_.size());
  aux_.push_back(std::move(idx));
  return push(nd);
}

Var Tape::scale_rows(Var a, Var w) {
  const Mat& ma = val_[a.id];
  const Mat& mw = val_[w.id];
  if (mw.cols() != 1 || mw.rows() != ma.rows())
    throw ShapeError("scale_rows: " + shape_str(ma) + " vs " + shape_str(mw));
  Node nd;
  nd.op = Op::ScaleRows;
  nd.a = a.id;
  nd.b = w.id;
  nd.rows = static_cast<int>(ma.rows());
  nd.cols = static_cast<int>(ma.cols());
  return push(nd);
}

Var Tape::segment_sum(Var a, std::vector<int> seg, int n_seg) {
  const Mat& ma = val_[a.id];
  if (static_cast<int>(seg.size()) != ma.rows())
    throw ShapeError("segment_sum: segment list size mismatch");
  for (int s : seg)
    if (s < 0 || s >= n_seg) throw ShapeError("segment_sum: bad segment id");
  Node nd;
  nd.op = Op::SegmentSum;
  nd.a = a.id;
  nd.rows = n_seg;
  nd.cols = static_cast<int>(ma.cols());
  nd.i0 = n_seg;
  nd.aux = static_cast<int>(aux_.size());
  aux_.push_back(std::move(seg));
  return push(nd);
}

Var Tape::segment_softmax(Var logits, std::vector<int> seg, int n_seg) {
  const Mat& ml = val_[logits.id];
  if (ml.cols() != 1)
    throw ShapeError("segment_softmax: logits must be a column vector");
  if (static_cast<int>(seg.size()) != ml.rows())
    throw ShapeError("segment_softmax: segment list size mismatch");
  for (int s : seg)
    if (s < 0 || s >= n_seg)
      throw ShapeError("segment_softmax: bad segment id");
  Node nd;
  nd.op = Op::SegmentSoftmax;
  nd.a = logits.id;
  nd.rows = static_cast<int>(ml.rows());
  nd.cols = 1;
  nd.i0 = n_seg;
  nd.aux = static_cast<int>(aux_.size());
  aux_.push_back(std::move(seg));
  return push(nd);
}

Var Tape::slice_cols(Var a, int start, int count) {
  const Mat& ma = val_[a.id];
  if (start < 0 || count < 0 || start + count > ma.cols())
    throw ShapeError("slice_cols: range out of bounds");
  Node nd;
  nd.op = Op::SliceCols;
  nd.a = a.id;
  nd.rows = static_cast<int>(ma.rows());
  nd.cols = count;
  nd.i0 = start;
  nd.i1 = count;
  return push(nd);
}

Var Tape::broadcast_row(Var row, int n) {
  const Mat& mr = val_[row.id];
  if (mr.rows() != 1) throw ShapeError("broadcast_row: operand must be 1xd");
  Node nd;
  nd.op = Op::BroadcastRow;
  nd.a = row.id;
  nd.rows = n;
  nd.cols = static_cast<int>(mr.cols());
  nd.i0 = n;
  return push(nd);
}

void Tape::eval_node(int i) {
  Node& nd = nodes_[i];
  Mat& out = val_[i];
  switch (nd.op) {
    case Op::Input:
    case Op::Constant:
      break;
    case Op::Add:
      out = val_[nd.a] + val_[nd.b];
      break;
    case Op::Sub:
      out = val_[nd.a] - val_[nd.b];
      break;
    case Op::Mul:
      out = val_[nd.a].cwiseProduct(val_[nd.b]);
      break;
    case Op::Div: {
      const Mat& den = val_[nd.b];
      if ((den.array() == 0.0).any())
        throw DomainError(i, "div: division by zero at node " +
                                 std::to_string(i));
      out = val_[nd.a].cwiseQuotient(den);
      break;
    }
    case Op::Neg:
      out = -val_[nd.a];
      break;
    case Op::Scale:
      out = nd.c * val_[nd.a];
      break;
    case Op::MatMul: {
      const Mat& a = val_[nd.a];
      const Mat& b = val_[nd.b];
      if (nd.i0 == 0 && nd.i1 == 0)
        out.noalias() = a * b;
      else if (nd.i0 == 1 && nd.i1 == 0)
        out.noalias() = a.transpose() * b;
      else if (nd.i0 == 0 && nd.i1 == 1)
        out.noalias() = a * b.transpose();
      else
        out.noalias() = a.transpose() * b.transpose();
      break;
    }
    case Op::AddRow:
      out = val_[nd.a];
      out.rowwise() += val_[nd.b].row(0);
      break;
    case Op::Relu:
      out = val_[nd.a].cwiseMax(0.0);
      break;
    case Op::Exp:
      out = val_[nd.a].array().exp();
      break;
    case Op::Log:
      if ((val_[nd.a].array() <= 0.0).any())
        throw DomainError(i, "log: non-positive operand at node " +
                                 std::to_string(i));
      out = val_[nd.a].array().log();
      break;
    case Op::Sqrt:
      if ((val_[nd.a].array() < 0.0).any())
        throw DomainError(i, "sqrt: negative operand at node " +
                                 std::to_string(i));
      out = val_[nd.a].array().sqrt();
      break;
    case Op::Square:
      out = val_[nd.a].array().square();
      break;
    case Op::Hypot:
      out = (val_[nd.a].array().square() + val_[nd.b].array().square()).sqrt();
      break;
    case Op::Atan2: {
      const Mat& y = val_[nd.a];
      const Mat& x = val_[nd.b];
      if (((y.array() == 0.0) && (x.array() == 0.0)).any())
        throw DomainError(i, "atan2: both operands zero at node " +
                                 std::to_string(i));
      out = y.binaryExpr(x, [](double yy, double xx) {
        return std::atan2(yy, xx);
      });
      break;
    }
    case Op::Sum:
      out(0, 0) = val_[nd.a].sum();
      break;
    case Op::Dot:
      out(0, 0) = val_[nd.a].cwiseProduct(val_[nd.b]).sum();
      break;
    case Op::ConcatRows:
      out.topRows(val_[nd.a].rows()) = val_[nd.a];
      out.bottomRows(val_[nd.b].rows()) = val_[nd.b];
      break;
    case Op::ConcatCols:
      out.leftCols(val_[nd.a].cols()) = val_[nd.a];
      out.rightCols(val_[nd.b].cols()) = val_[nd.b];
      break;
    case Op::GatherRows: {
      const auto& idx = aux_[nd.aux];
      const Mat& a = val_[nd.a];
      for (size_t r = 0; r < idx.size(); ++r)
        out.row(static_cast<Eigen::Index>(r)) = a.row(idx[r]);
      break;
    }
    case Op::ScaleRows:
      out = val_[nd.a].array().colwise() * val_[nd.b].col(0).array();
      break;
    case Op::SegmentSum: {
      const auto& seg = aux_[nd.aux];
      const Mat& a = val_[nd.a];
      out.setZero();
      for (size_t r = 0; r < seg.size(); ++r)
        out.row(seg[r]) += a.row(static_cast<Eigen::Index>(r));
      break;
    }
    case Op::SegmentSoftmax: {
      const auto& seg = aux_[nd.aux];
      const Mat& l = val_[nd.a];
      const int n_seg = nd.i0;
      segbuf_.assign(2 * static_cast<size_t>(n_seg), 0.0);
      double* mx = segbuf_.data();
      double* sm = segbuf_.data() + n_seg;
      for (int s = 0; s < n_seg; ++s)
        mx[s] = -std::numeric_limits<double>::infinity();
      for (size_t r = 0; r < seg.size(); ++r)
        mx[seg[r]] = std::max(mx[seg[r]], l(static_cast<Eigen::Index>(r), 0));
      for (size_t r = 0; r < seg.size(); ++r) {
        double e = std::exp(l(static_cast<Eigen::Index>(r), 0) - mx[seg[r]]);
        out(static_cast<Eigen::Index>(r), 0) = e;
        sm[seg[r]] += e;
      }
      for (size_t r = 0; r < seg.size(); ++r)
        out(static_cast<Eigen::Index>(r), 0) /= sm[seg[r]];
      break;
    }
    case Op::SliceCols:
      out = val_[nd.a].middleCols(nd.i0, nd.i1);
      break;
    case Op::BroadcastRow:
      out = val_[nd.a].row(0).replicate(nd.i0, 1);
      break;
  }
}

void Tape::forward() {
  for (int i = 0; i < static_cast<int>(nodes_.size()); ++i) {
    if (nodes_[i].op == Op::Input || nodes_[i].op == Op::Constant) continue;
    eval_node(i);
  }
}

void Tape::backward(Var root) {
  if (val_[root.id].rows() != 1 || val_[root.id].cols() != 1)
    throw ShapeError("backward: root must be scalar");
  for (size_t i = 0; i < nodes_.size(); ++i) {
    if (adj_[i].rows() != val_[i].rows() || adj_[i].cols() != val_[i].cols())
      adj_[i].setZero(val_[i].rows(), val_[i].cols());
    else
      adj_[i].setZero();
  }
  adj_[root.id](0, 0) = 1.0;

  for (int i = static_cast<int>(nodes_.size()) - 1; i >= 0; --i) {
    const Node& nd = nodes_[i];
    const Mat& g = adj_[i];
    switch (nd.op) {
      case Op::Input:
      case Op::Constant:
        break;
      case Op::Add:
        adj_[nd.a] += g;
        adj_[nd.b] += g;
        break;
      case Op::Sub:
        adj_[nd.a] += g;
        adj_[nd.b] -= g;
        break;
      case Op::Mul:
        adj_[nd.a] += g.cwiseProduct(val_[nd.b]);
        adj_[nd.b] += g.cwiseProduct(val_[nd.a]);
        break;
      case Op::Div: {
        adj_[nd.a] += g.cwiseQuotient(val_[nd.b]);
        adj_[nd.b] -= g.cwiseProduct(val_[i]).cwiseQuotient(val_[nd.b]);
        break;
      }
      case Op::Neg:
        adj_[nd.a] -= g;
        break;
      case Op::Scale:
        adj_[nd.a] += nd.c * g;
        break;
      case Op::MatMul: {
        const Mat& a = val_[nd.a];
        const Mat& b = val_[nd.b];
        if (nd.i0 == 0 && nd.i1 == 0) {
          adj_[nd.a].noalias() += g * b.transpose();
          adj_[nd.b].noalias() += a.transpose() * g;
        } else if (nd.i0 == 1 && nd.i1 == 0) {
          adj_[nd.a].noalias() += b * g.transpose();
          adj_[nd.b].noalias() += a * g;
        } else if (nd.i0 == 0 && nd.i1 == 1) {
          adj_[nd.a].noalias() += g * b;
          adj_[nd.b].noalias() += g.transpose() * a;
        } else {
          adj_[nd.a].noalias() += b.transpose() * g.transpose();
          adj_[nd.b].noalias() += g.transpose() * a.transpose();
        }
        break;
      }
      case Op::AddRow:
        adj_[nd.a] += g;
        adj_[nd.b].row(0) += g.colwise().sum();
        break;
      case Op::Relu:
        adj_[nd.a].array() +=
            g.array() * (val_[nd.a].array() > 0.0).cast<double>();
        break;
      case Op::Exp:
        adj_[nd.a] += g.cwiseProduct(val_[i]);
        break;
      case Op::Log:
        adj_[nd.a] += g.cwiseQuotient(val_[nd.a]);
        break;
      case Op::Sqrt:
        adj_[nd.a].array() += 0.5 * g.array() / val_[i].array();
        break;
      case Op::Square:
        adj_[nd.a] += 2.0 * g.cwiseProduct(val_[nd.a]);
        break;
      case Op::Hypot: {
        // d|v|/dv is defined as 0 at v = 0.
        const Eigen::ArrayXXd r = val_[i].array();
        const Eigen::ArrayXXd safe = (r == 0.0).select(1.0, r);
        adj_[nd.a].array() +=
            (r == 0.0).select(0.0, g.array() * val_[nd.a].array() / safe);
        adj_[nd.b].array() +=
            (r == 0.0).select(0.0, g.array() * val_[nd.b].array() / safe);
        break;
      }
      case Op::Atan2: {
        const Eigen::ArrayXXd y = val_[nd.a].array();
        const Eigen::ArrayXXd x = val_[nd.b].array();
        const Eigen::ArrayXXd d = x.square() + y.square();
        adj_[nd.a].array() += g.array() * x / d;
        adj_[nd.b].array() -= g.array() * y / d;
        break;
      }
      case Op::Sum:
        adj_[nd.a].array() += g(0, 0);
        break;
      case Op::Dot:
        adj_[nd.a] += g(0, 0) * val_[nd.b];
        adj_[nd.b] += g(0, 0) * val_[nd.a];
        break;
      case Op::ConcatRows:
        adj_[nd.a] += g.topRows(val_[nd.a].rows());
        adj_[nd.b] += g.bottomRows(val_[nd.b].rows());
        break;
      case Op::ConcatCols:
        adj_[nd.a] += g.leftCols(val_[nd.a].cols());
        adj_[nd.b] += g.rightCols(val_[nd.b].cols());
        break;
      case Op::GatherRows: {
        const auto& idx = aux_[nd.aux];
        for (size_t r = 0; r < idx.size(); ++r)
          adj_[nd.a].row(idx[r]) += g.row(static_cast<Eigen::Index>(r));
        break;
      }
      case Op::ScaleRows: {
        adj_[nd.a].array() += g.array().colwise() * val_[nd.b].col(0).array();
        adj_[nd.b].col(0).array() +=
            (g.array() * val_[nd.a].array()).rowwise().sum();
        break;
      }
      case Op::SegmentSum: {
        const auto& seg = aux_[nd.aux];
        for (size_t r = 0; r < seg.size(); ++r)
          adj_[nd.a].row(static_cast<Eigen::Index>(r)) += g.row(seg[r]);
        break;
      }
      case Op::SegmentSoftmax: {
        const auto& seg = aux_[nd.aux];
        const Mat& w = val_[i];
        const int n_seg = nd.i0;
        segbuf_.assign(static_cast<size_t>(n_seg), 0.0);
        double* dots = segbuf_.data();
        for (size_t r = 0; r < seg.size(); ++r)
          dots[seg[r]] += g(static_cast<Eigen::Index>(r), 0) *
                          w(static_cast<Eigen::Index>(r), 0);
        for (size_t r = 0; r < seg.size(); ++r) {
          Eigen::Index ri = static_cast<Eigen::Index>(r);
          adj_[nd.a](ri, 0) += w(ri, 0) * (g(ri, 0) - dots[seg[r]]);
        }
        break;
      }
      case Op::SliceCols:
        adj_[nd.a].middleCols(nd.i0, nd.i1) += g;
        break;
      case Op::BroadcastRow:
        adj_[nd.a].row(0) += g.colwise().sum();
        break;
    }
  }
}

GradCheckReport grad_check(Tape& tape, Var root, const std::vector<Var>& wrt,
                           double eps, double tol) {
  GradCheckReport rep;
  tape.forward();
  const double f0 = tape.scalar(root);
  tape.backward(root);

  std::vector<Mat> ad;
  ad.reserve(wrt.size());
  for (Var v : wrt) ad.push_back(tape.adj(v));

  const double abs_floor = 1e-9 * (1.0 + std::abs(f0));
  for (size_t k = 0; k < wrt.size(); ++k) {
    Mat& x = tape.leaf_value(wrt[k]);
    for (Eigen::Index i = 0; i < x.size(); ++i) {
      const double x0 = x(i);
      x(i) = x0 + eps;
      tape.forward();
      const double fp = tape.scalar(root);
      x(i) = x0 - eps;
      tape.forward();
      const double fm = tape.scalar(root);
      x(i) = x0;

      const double dp = (fp - f0) / eps;
      const double dm = (f0 - fm) / eps;
      if (std::abs(dp - dm) > 1e-3 * (1.0 + std::max(std::abs(dp),
                                                     std::abs(dm)))) {
        ++rep.excluded;
        continue;
      }
      const double fd = (fp - fm) / (2.0 * eps);
      const double a = ad[k](i);
      const double err = std::abs(a - fd);
      const double scale = std::max(std::abs(a), std::abs(fd));
      const double rel = err / std::max(scale, abs_floor);
      ++rep.checked;
      if (err > std::max(tol * scale, abs_floor)) ++rep.failed;
      rep.max_rel_err = std::max(rep.max_rel_err, rel);
    }
  }
  tape.forward();
  return rep;
}

}  // namespace opfdl::ad
