#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <set>
#include <string>
#include <vector>

#include "opfdl/data.hpp"
#include "opfdl/errors.hpp"
#include "opfdl/eval.hpp"

#include "helpers.hpp"

using namespace opfdl;

namespace {

// One labeled toy dataset per process; the solves dominate this suite's
// runtime, so every test shares it.
const Dataset& labeled10() {
  static Dataset ds = make_dataset(opfdl::test::sys3(), 10, 3, true);
  return ds;
}

void check_partition(const Dataset& ds) {
  std::set<int> seen;
  auto absorb = [&](const std::vector<int>& part) {
    for (int i : part) {
      CHECK(i >= 0);
      CHECK(i < ds.size());
      CHECK(seen.insert(i).second);  // disjoint
    }
  };
  absorb(ds.train_idx);
  absorb(ds.val_idx);
  absorb(ds.test_idx);
  CHECK(static_cast<int>(seen.size()) == ds.size());
}

}  // namespace

TEST_SUITE("data") {

TEST_CASE("demand draws stay inside the componentwise band") {
  const PowerSystem& sys = opfdl::test::sys30();
  VecXcd r = draw_load(sys, 11, 4);
  REQUIRE(r.size() == sys.n());
  for (int i = 0; i < sys.n(); ++i) {
    const auto ref = sys.buses[i].r_ref;
    auto in_band = [](double x, double nominal) {
      if (nominal == 0.0) return x == 0.0;
      double lo = std::min(0.8 * nominal, 1.2 * nominal);
      double hi = std::max(0.8 * nominal, 1.2 * nominal);
      return x >= lo && x <= hi;
    };
    CHECK(in_band(r[i].real(), ref.real()));
    CHECK(in_band(r[i].imag(), ref.imag()));
  }
  // The reference bus of this case carries no load: draws keep it at zero.
  CHECK(sys.buses[0].r_ref == std::complex<double>(0.0, 0.0));
  CHECK(r[0] == std::complex<double>(0.0, 0.0));
}

TEST_CASE("candidate draws are independent and reproducible") {
  const PowerSystem& sys = opfdl::test::sys30();
  VecXcd a = draw_load(sys, 11, 7);
  VecXcd b = draw_load(sys, 11, 7);
  CHECK((a - b).cwiseAbs().maxCoeff() == 0.0);
  VecXcd c = draw_load(sys, 11, 8);
  CHECK((a - c).cwiseAbs().maxCoeff() > 0.0);
  VecXcd d = draw_load(sys, 12, 7);
  CHECK((a - d).cwiseAbs().maxCoeff() > 0.0);

  std::vector<VecXcd> loads = generate_loads(sys, 5, 11);
  REQUIRE(loads.size() == 5);
  for (int k = 0; k < 5; ++k) {
    VecXcd direct = draw_load(sys, 11, static_cast<uint64_t>(k));
    CHECK((loads[k] - direct).cwiseAbs().maxCoeff() == 0.0);
  }
}

TEST_CASE("reference solve produces a certified label") {
  const PowerSystem& sys = opfdl::test::sys3();
  VecXcd r = draw_load(sys, 5, 0);
  ReferenceSolution sol = reference_solve(sys, r);
  REQUIRE(sol.converged);
  CHECK(sol.kkt_residual <= 1e-6);
  CHECK(certify_label(sys, r, sol));
  CHECK(sol.cost > 0.0);

  // Independent recheck straight from the physics evaluation.
  VecXd h = balance_residual(sys, sol.point, r);
  CHECK(h.cwiseAbs().maxCoeff() <= 1e-6);
  VecXd g = inequality_slacks(sys, sol.point,
                              branch_flows(sys, sol.point.v))
                .g;
  CHECK(g.maxCoeff() <= 1e-6);
  CHECK(std::abs(cost(sys, sol.point.s) - sol.cost) <= 1e-9 * sol.cost);

  // Deterministic: the same instance solves to the same bits.
  ReferenceSolution again = reference_solve(sys, r);
  CHECK(again.cost == sol.cost);
  CHECK((again.point.s - sol.point.s).cwiseAbs().maxCoeff() == 0.0);
  CHECK((again.point.v - sol.point.v).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("labels are power-flow fixed points") {
  const PowerSystem& sys = opfdl::test::sys3();
  int checked = 0;
  for (int id : labeled10().test_idx) {
    const Sample& s = labeled10().samples[id];
    ProjectionResult proj = project_to_powerflow(sys, s.r, s.label.point);
    CHECK(proj.converged);
    CHECK(proj.iterations == 0);
    CHECK((proj.pt.s - s.label.point.s).cwiseAbs().maxCoeff() == 0.0);
    CHECK((proj.pt.v - s.label.point.v).cwiseAbs().maxCoeff() == 0.0);
    ++checked;
  }
  CHECK(checked > 0);
}

TEST_CASE("tampered labels fail certification") {
  const PowerSystem& sys = opfdl::test::sys3();
  VecXcd r = draw_load(sys, 5, 1);
  ReferenceSolution sol = reference_solve(sys, r);
  REQUIRE(sol.converged);

  ReferenceSolution bad = sol;
  bad.point.s[0] += std::complex<double>(0.05, 0.0);  // break the balance
  CHECK_FALSE(certify_label(sys, r, bad));

  bad = sol;
  bad.point.v[0] *= 1.2;  // leave the voltage box
  CHECK_FALSE(certify_label(sys, r, bad));

  bad = sol;
  bad.converged = false;
  CHECK(certify_label(sys, r, bad) ==
        certify_label(sys, r, sol));  // certification ignores the flag
}

TEST_CASE("unlabeled dataset generation and splits") {
  const PowerSystem& sys = opfdl::test::sys3();
  int rejected = -1;
  Dataset ds = make_dataset(sys, 12, 9, false, {}, 1, &rejected);
  CHECK(ds.size() == 12);
  CHECK(rejected == 0);
  CHECK_FALSE(ds.labeled);
  CHECK(ds.system_id == sys.name);
  CHECK(ds.seed == 9);
  CHECK(ds.train_idx.size() == 9);  // floor(8n/10)
  CHECK(ds.val_idx.size() == 1);
  CHECK(ds.test_idx.size() == 2);
  check_partition(ds);
  for (const Sample& s : ds.samples) CHECK_FALSE(s.labeled);
  // Sample k is exactly candidate k: nothing was resampled.
  CHECK((ds.samples[3].r - draw_load(sys, 9, 3)).cwiseAbs().maxCoeff() == 0.0);

  CHECK_THROWS_AS(make_dataset(sys, 9, 1, false), CaseError);
}

TEST_CASE("labeled dataset certifies every sample") {
  const Dataset& ds = labeled10();
  CHECK(ds.size() == 10);
  CHECK(ds.labeled);
  CHECK(ds.train_idx.size() == 8);
  CHECK(ds.val_idx.size() == 1);
  CHECK(ds.test_idx.size() == 1);
  check_partition(ds);
  const PowerSystem& sys = opfdl::test::sys3();
  for (const Sample& s : ds.samples) {
    REQUIRE(s.labeled);
    CHECK(s.label.converged);
    CHECK(certify_label(sys, s.r, s.label));
  }
}

TEST_CASE("hopeless solver budget exhausts the resample cap") {
  const PowerSystem& sys = opfdl::test::sys3();
  SolveOptions opt;
  opt.max_outer = 0;  // the solver can never converge
  CHECK_THROWS_AS(make_dataset(sys, 10, 1, true, opt), ResampleCapExceeded);
}

TEST_CASE("dataset files round-trip exactly") {
  const Dataset& ds = labeled10();
  const PowerSystem& sys = opfdl::test::sys3();
  std::string dir = opfdl::test::tmp_dir("data_io");
  const std::string path = dir + "/ds.jsonl";
  save_dataset(path, ds);
  Dataset back = load_dataset(path, sys);

  CHECK(back.system_id == ds.system_id);
  CHECK(back.n_buses == ds.n_buses);
  CHECK(back.seed == ds.seed);
  CHECK(back.labeled == ds.labeled);
  CHECK(back.train_idx == ds.train_idx);
  CHECK(back.val_idx == ds.val_idx);
  CHECK(back.test_idx == ds.test_idx);
  REQUIRE(back.size() == ds.size());
  for (int i = 0; i < ds.size(); ++i) {
    const Sample& a = ds.samples[i];
    const Sample& b = back.samples[i];
    CHECK((a.r - b.r).cwiseAbs().maxCoeff() == 0.0);
    CHECK((a.label.point.s - b.label.point.s).cwiseAbs().maxCoeff() == 0.0);
    CHECK((a.label.point.v - b.label.point.v).cwiseAbs().maxCoeff() == 0.0);
    CHECK(a.label.cost == b.label.cost);
    CHECK(a.label.kkt_residual == b.label.kkt_residual);
  }

  // Serialization is a fixed point: saving the reload is byte-identical.
  const std::string path2 = dir + "/ds2.jsonl";
  save_dataset(path2, back);
  CHECK(opfdl::test::read_file(path) == opfdl::test::read_file(path2));
}

TEST_CASE("dataset loading rejects the wrong case") {
  std::string dir = opfdl::test::tmp_dir("data_mismatch");
  const std::string path = dir + "/ds.jsonl";
  save_dataset(path, labeled10());
  CHECK_THROWS_AS(load_dataset(path, opfdl::test::sys30()), MismatchError);
  CHECK_THROWS_AS(load_dataset(path, opfdl::test::sys2()), MismatchError);
}

TEST_CASE("damaged dataset files name the offending line") {
  std::string dir = opfdl::test::tmp_dir("data_bad");
  const std::string path = dir + "/ds.jsonl";
  save_dataset(path, labeled10());
  std::string bytes = opfdl::test::read_file(path);

  // Cut the file in the middle of the last record.
  {
    std::ofstream out(dir + "/trunc.jsonl", std::ios::binary);
    out.write(bytes.data(),
              static_cast<std::streamsize>(bytes.size() - 40));
  }
  CHECK_THROWS_WITH_AS(load_dataset(dir + "/trunc.jsonl", opfdl::test::sys3()),
                       doctest::Contains("line"), SchemaError);

  {
    std::ofstream out(dir + "/garbage.jsonl", std::ios::binary);
    out << "not json\n";
  }
  CHECK_THROWS_AS(load_dataset(dir + "/garbage.jsonl", opfdl::test::sys3()),
                  SchemaError);

  {
    std::ofstream out(dir + "/empty.jsonl", std::ios::binary);
  }
  CHECK_THROWS_AS(load_dataset(dir + "/empty.jsonl", opfdl::test::sys3()),
                  SchemaError);

  // Header claims labels but the records carry none.
  {
    Dataset bare = make_dataset(opfdl::test::sys3(), 10, 2, false);
    bare.labeled = true;
    save_dataset(dir + "/lying.jsonl", bare);
  }
  CHECK_THROWS_AS(load_dataset(dir + "/lying.jsonl", opfdl::test::sys3()),
                  SchemaError);
}

TEST_CASE("training label cost averages the train split") {
  const Dataset& ds = labeled10();
  double acc = 0.0;
  for (int i : ds.train_idx) acc += ds.samples[i].label.cost;
  CHECK(mean_train_label_cost(ds) ==
        doctest::Approx(acc / ds.train_idx.size()).epsilon(1e-15));
}

}  // TEST_SUITE
