#include <doctest.h>

#include <cmath>
#include <vector>

#include "opfdl/autodiff.hpp"
#include "opfdl/errors.hpp"
#include "opfdl/rng.hpp"

using namespace opfdl;
using ad::Mat;
using ad::Tape;
using ad::Var;

namespace {

Mat random_mat(int r, int c, uint64_t seed) {
  Rng rng(seed, "testmat");
  Mat m(r, c);
  for (int i = 0; i < r; ++i)
    for (int j = 0; j < c; ++j) m(i, j) = rng.uniform(-1.5, 1.5);
  return m;
}

Mat random_positive(int r, int c, uint64_t seed) {
  Rng rng(seed, "testmat");
  Mat m(r, c);
  for (int i = 0; i < r; ++i)
    for (int j = 0; j < c; ++j) m(i, j) = rng.uniform(0.2, 2.0);
  return m;
}

}  // namespace

TEST_SUITE("autodiff") {

TEST_CASE("elementwise forward values") {
  Tape t;
  Var a = t.input(2, 2);
  Var b = t.input(2, 2);
  Mat ma(2, 2), mb(2, 2);
  ma << 1.0, -2.0, 0.5, 3.0;
  mb << 2.0, 2.0, -1.0, 0.5;
  t.set_value(a, ma);
  t.set_value(b, mb);

  t.forward();
  CHECK(t.val(t.add(a, b))(0, 1) == 0.0);
  CHECK(t.val(t.sub(a, b))(1, 0) == 1.5);
  CHECK(t.val(t.mul(a, b))(1, 1) == 1.5);
  CHECK(t.val(t.div(a, b))(0, 0) == 0.5);
  CHECK(t.val(t.neg(a))(0, 1) == 2.0);
  CHECK(t.val(t.scale(a, 3.0))(1, 1) == 9.0);
  CHECK(t.val(t.square(a))(0, 1) == 4.0);
}

TEST_CASE("rectifier hand values") {
  Tape t;
  Var a = t.input(1, 2);
  Mat ma(1, 2);
  ma << -2.0, 2.0;
  t.set_value(a, ma);
  Var r = t.relu(a);
  Var root = t.sum(r);
  t.forward();
  CHECK(t.val(r)(0, 0) == 0.0);
  CHECK(t.val(r)(0, 1) == 2.0);
  t.backward(root);
  CHECK(t.adj(a)(0, 0) == 0.0);
  CHECK(t.adj(a)(0, 1) == 1.0);
  Var m = t.max0(a);  // alias for relu
  t.forward();
  CHECK((t.val(m) - t.val(r)).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("matmul values and transpose flags") {
  Tape t;
  Mat ma = random_mat(3, 4, 1);
  Mat mb = random_mat(4, 2, 2);
  Var a = t.input(3, 4);
  Var b = t.input(4, 2);
  t.set_value(a, ma);
  t.set_value(b, mb);
  Var ab = t.matmul(a, b);
  Var abt = t.matmul(b, a, true, true);  // (a b)^T = b^T a^T
  t.forward();
  CHECK((t.val(ab) - ma * mb).cwiseAbs().maxCoeff() < 1e-14);
  CHECK((t.val(abt) - (ma * mb).transpose()).cwiseAbs().maxCoeff() < 1e-14);
}

TEST_CASE("structural op values") {
  Tape t;
  Mat ma = random_mat(3, 2, 3);
  Var a = t.input(3, 2);
  t.set_value(a, ma);

  Var g = t.gather_rows(a, {2, 0, 0});
  Var s = t.slice_cols(a, 1, 1);
  Mat row(1, 2);
  row << 5.0, -1.0;
  Var rv = t.constant(row);
  Var br = t.broadcast_row(rv, 3);
  Var ar = t.add_row(a, rv);
  Var cc = t.concat_cols(a, a);
  Var cr = t.concat_rows(a, a);
  Mat w(3, 1);
  w << 2.0, 0.0, -1.0;
  Var sr = t.scale_rows(a, t.constant(w));
  t.forward();

  CHECK(t.val(g)(0, 0) == ma(2, 0));
  CHECK(t.val(g)(1, 1) == ma(0, 1));
  CHECK(t.val(s)(2, 0) == ma(2, 1));
  CHECK(t.val(br)(2, 1) == -1.0);
  CHECK(t.val(ar)(1, 0) == ma(1, 0) + 5.0);
  CHECK(t.val(cc).cols() == 4);
  CHECK(t.val(cr).rows() == 6);
  CHECK(t.val(sr)(0, 1) == 2.0 * ma(0, 1));
  CHECK(t.val(sr)(1, 0) == 0.0);
}

TEST_CASE("segment ops") {
  Tape t;
  Var x = t.input(5, 2);
  Mat mx = random_mat(5, 2, 4);
  t.set_value(x, mx);
  std::vector<int> seg = {0, 0, 1, 1, 1};
  Var ss = t.segment_sum(x, seg, 2);
  t.forward();
  CHECK(t.val(ss)(0, 0) == doctest::Approx(mx(0, 0) + mx(1, 0)));
  CHECK(t.val(ss)(1, 1) ==
        doctest::Approx(mx(2, 1) + mx(3, 1) + mx(4, 1)));

  SUBCASE("softmax normalizes within each segment") {
    Tape t2;
    Var logits = t2.input(5, 1);
    Mat ml = random_mat(5, 1, 5);
    t2.set_value(logits, ml);
    Var w = t2.segment_softmax(logits, seg, 2);
    t2.forward();
    const Mat& mw = t2.val(w);
    CHECK(mw(0, 0) + mw(1, 0) == doctest::Approx(1.0).epsilon(1e-14));
    CHECK(mw(2, 0) + mw(3, 0) + mw(4, 0) ==
          doctest::Approx(1.0).epsilon(1e-14));
    for (int i = 0; i < 5; ++i) CHECK(mw(i, 0) > 0.0);
  }

  SUBCASE("equal logits spread attention uniformly") {
    Tape t2;
    Var logits = t2.input(5, 1);
    t2.set_value(logits, Mat::Zero(5, 1));
    Var w = t2.segment_softmax(logits, seg, 2);
    t2.forward();
    CHECK(t2.val(w)(0, 0) == doctest::Approx(0.5));
    CHECK(t2.val(w)(1, 0) == doctest::Approx(0.5));
    for (int i = 2; i < 5; ++i)
      CHECK(t2.val(w)(i, 0) == doctest::Approx(1.0 / 3.0).epsilon(1e-14));
  }

  SUBCASE("softmax is shift invariant per segment") {
    Tape t2;
    Var logits = t2.input(5, 1);
    Mat ml = random_mat(5, 1, 6);
    t2.set_value(logits, ml);
    Var w = t2.segment_softmax(logits, seg, 2);
    t2.forward();
    Mat first = t2.val(w);
    Mat shifted = ml;
    for (int i = 0; i < 2; ++i) shifted(i, 0) += 100.0;
    for (int i = 2; i < 5; ++i) shifted(i, 0) -= 50.0;
    t2.set_value(logits, shifted);
    t2.forward();
    CHECK((t2.val(w) - first).cwiseAbs().maxCoeff() < 1e-12);
  }
}

TEST_CASE("gradients of a dense composite pass finite differences") {
  Tape t;
  Var a = t.input(3, 3);
  Var b = t.input(3, 2);
  t.set_value(a, random_mat(3, 3, 7));
  t.set_value(b, random_mat(3, 2, 8));
  Var z = t.matmul(a, b);
  Var q = t.square(t.add(z, t.scale(b, 0.3)));
  Var root = t.sum(t.mul(q, t.exp(t.scale(q, -0.25))));
  t.forward();
  auto rep = ad::grad_check(t, root, {a, b});
  CHECK(rep.failed == 0);
  CHECK(rep.checked == 15);
  CHECK(rep.max_rel_err < 1e-5);
}

TEST_CASE("gradients of scalar-domain ops pass finite differences") {
  Tape t;
  Var x = t.input(4, 1);
  Var y = t.input(4, 1);
  t.set_value(x, random_positive(4, 1, 9));
  t.set_value(y, random_positive(4, 1, 10));
  Var root =
      t.sum(t.add(t.add(t.hypot(x, y), t.atan2(y, x)),
                  t.add(t.log(x), t.add(t.sqrt(y), t.div(x, y)))));
  t.forward();
  auto rep = ad::grad_check(t, root, {x, y});
  CHECK(rep.failed == 0);
  CHECK(rep.excluded == 0);
  CHECK(rep.checked == 8);
}

TEST_CASE("gradients of structural ops pass finite differences") {
  Tape t;
  Var x = t.input(4, 2);
  t.set_value(x, random_mat(4, 2, 11));
  std::vector<int> seg = {0, 1, 1, 0, 0, 1};
  Var g = t.gather_rows(x, {1, 3, 0, 2, 2, 1});
  Var logits = t.slice_cols(g, 0, 1);
  Var w = t.segment_softmax(logits, seg, 2);
  Var agg = t.segment_sum(t.scale_rows(g, w), seg, 2);
  Var root = t.sum(t.square(agg));
  t.forward();
  auto rep = ad::grad_check(t, root, {x});
  CHECK(rep.failed == 0);
  CHECK(rep.checked == 8);
}

TEST_CASE("dot product value and gradient") {
  Tape t;
  Var a = t.input(3, 1);
  Var b = t.input(3, 1);
  Mat ma(3, 1), mb(3, 1);
  ma << 1.0, 2.0, 3.0;
  mb << -1.0, 0.5, 2.0;
  t.set_value(a, ma);
  t.set_value(b, mb);
  Var d = t.dot(a, b);
  t.forward();
  CHECK(t.scalar(d) == doctest::Approx(6.0));
  t.backward(d);
  CHECK((t.adj(a) - mb).cwiseAbs().maxCoeff() == 0.0);
  CHECK((t.adj(b) - ma).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("kinked coordinates are excluded, not failed") {
  Tape t;
  Var x = t.input(3, 1);
  Mat mx(3, 1);
  mx << -1.0, 0.0, 2.0;  // middle coordinate sits exactly on the kink
  t.set_value(x, mx);
  Var root = t.sum(t.relu(x));
  t.forward();
  auto rep = ad::grad_check(t, root, {x});
  CHECK(rep.excluded == 1);
  CHECK(rep.checked == 2);
  CHECK(rep.failed == 0);
}

TEST_CASE("forward reuses the tape with fresh leaf values") {
  Tape t;
  Var x = t.input(2, 1);
  Mat m1(2, 1), m2(2, 1);
  m1 << 1.0, 2.0;
  m2 << 3.0, -1.0;
  t.set_value(x, m1);
  Var root = t.sum(t.square(x));
  t.forward();
  CHECK(t.scalar(root) == doctest::Approx(5.0));
  const int nodes_before = t.size();
  t.set_value(x, m2);
  t.forward();
  CHECK(t.scalar(root) == doctest::Approx(10.0));
  CHECK(t.size() == nodes_before);

  // backward is idempotent: adjoints are reset, not accumulated.
  t.backward(root);
  Mat g1 = t.adj(x);
  t.backward(root);
  CHECK((t.adj(x) - g1).cwiseAbs().maxCoeff() == 0.0);
  CHECK(t.adj(x)(0, 0) == doctest::Approx(6.0));
}

TEST_CASE("domain violations throw") {
  // Recording evaluates eagerly, so a bad operand fails at the op call.
  Mat neg(1, 1), zero(1, 1), pos(1, 1);
  neg << -1.0;
  zero << 0.0;
  pos << 1.0;

  Tape t;
  Var x = t.input(1, 1);
  t.set_value(x, neg);
  CHECK_THROWS_AS(t.log(x), DomainError);

  Tape t2;
  Var y = t2.input(1, 1);
  t2.set_value(y, neg);
  CHECK_THROWS_AS(t2.sqrt(y), DomainError);

  Tape t3;
  Var a3 = t3.input(1, 1);
  Var b3 = t3.input(1, 1);
  t3.set_value(a3, neg);
  t3.set_value(b3, pos);
  t3.div(a3, b3);  // records fine
  t3.set_value(b3, zero);
  CHECK_THROWS_AS(t3.forward(), DomainError);  // re-run hits the zero

  Tape t4;
  Var a4 = t4.input(1, 1);
  Var b4 = t4.input(1, 1);
  t4.set_value(a4, pos);
  t4.set_value(b4, pos);
  t4.atan2(a4, b4);
  t4.set_value(a4, zero);
  t4.set_value(b4, zero);
  CHECK_THROWS_AS(t4.forward(), DomainError);
}

TEST_CASE("shape violations throw") {
  Tape t;
  Var a = t.input(2, 2);
  Var b = t.input(3, 2);
  CHECK_THROWS_AS(t.add(a, b), ShapeError);
  CHECK_THROWS_AS(t.matmul(a, b), ShapeError);
  CHECK_THROWS_AS(t.gather_rows(a, {0, 5}), ShapeError);
  CHECK_THROWS_AS(t.segment_sum(a, {0, 0, 1}, 2), ShapeError);
  CHECK_THROWS_AS(t.backward(a), ShapeError);  // root must be scalar
  Mat wrong(3, 3);
  wrong.setZero();
  CHECK_THROWS_AS(t.set_value(a, wrong), ShapeError);
}

TEST_CASE("hypot matches the bivariate euclidean norm") {
  Tape t;
  Var x = t.input(2, 1);
  Var y = t.input(2, 1);
  Mat mx(2, 1), my(2, 1);
  mx << 3.0, -5.0;
  my << 4.0, 12.0;
  t.set_value(x, mx);
  t.set_value(y, my);
  Var h = t.hypot(x, y);
  t.forward();
  CHECK(t.val(h)(0, 0) == doctest::Approx(5.0));
  CHECK(t.val(h)(1, 0) == doctest::Approx(13.0));
}

TEST_CASE("atan2 covers all four quadrants") {
  Tape t;
  Var y = t.input(4, 1);
  Var x = t.input(4, 1);
  Mat my(4, 1), mx(4, 1);
  my << 1.0, 1.0, -1.0, -1.0;
  mx << 1.0, -1.0, -1.0, 1.0;
  t.set_value(y, my);
  t.set_value(x, mx);
  Var a = t.atan2(y, x);
  t.forward();
  for (int i = 0; i < 4; ++i)
    CHECK(t.val(a)(i, 0) == doctest::Approx(std::atan2(my(i, 0), mx(i, 0))));
}

}  // TEST_SUITE
