#include <doctest.h>

#include <cmath>
#include <cstdlib>
#include <sstream>
#include <string>
#include <vector>

#include "helpers.hpp"
#include "opfdl/data.hpp"
#include "opfdl/errors.hpp"
#include "opfdl/eval.hpp"
#include "opfdl/num_format.hpp"
#include "opfdl/physics.hpp"

using namespace opfdl;
using opfdl::test::random_point;
using opfdl::test::read_file;
using opfdl::test::sys2;
using opfdl::test::sys3;
using opfdl::test::tmp_dir;

namespace {

VecXcd nominal_loads(const PowerSystem& sys) {
  VecXcd r(static_cast<int>(sys.buses.size()));
  for (size_t i = 0; i < sys.buses.size(); ++i) r[static_cast<int>(i)] = sys.buses[i].r_ref;
  return r;
}

// One certified label on case3_mixed at its nominal demand, shared by the
// fixed-point and scoring tests below.
const ReferenceSolution& label3() {
  static const ReferenceSolution sol = [] {
    ReferenceSolution s = reference_solve(sys3(), nominal_loads(sys3()));
    REQUIRE(s.converged);
    return s;
  }();
  return sol;
}

std::vector<std::string> split_csv(const std::string& line) {
  std::vector<std::string> out;
  std::stringstream ss(line);
  std::string field;
  while (std::getline(ss, field, ',')) out.push_back(field);
  return out;
}

std::vector<std::string> lines_of(const std::string& text) {
  std::vector<std::string> out;
  std::stringstream ss(text);
  std::string line;
  while (std::getline(ss, line)) out.push_back(line);
  return out;
}

}  // namespace

TEST_SUITE("eval") {

TEST_CASE("percentile95 interpolates between order statistics") {
  std::vector<double> v;
  for (int i = 100; i >= 1; --i) v.push_back(static_cast<double>(i));
  // rank 0.95 * 99 = 94.05 lands between the 95th and 96th smallest values
  CHECK(percentile95(v) == doctest::Approx(95.05).epsilon(1e-14));

  CHECK(percentile95({3.5}) == 3.5);
  CHECK(percentile95({10.0, 20.0}) == doctest::Approx(19.5).epsilon(1e-14));
  CHECK(percentile95({7.0, 7.0, 7.0}) == 7.0);
  CHECK_THROWS_AS(percentile95({}), ShapeError);
}

TEST_CASE("aggregate computes population statistics per metric") {
  std::vector<SampleMetrics> ms(3);
  for (int i = 0; i < 3; ++i) {
    ms[i].mean_violation = static_cast<double>(i + 1);  // 1, 2, 3
    ms[i].max_violation = 10.0 * (i + 1);
    ms[i].invariant_metric = 0.5;
  }

  SUBCASE("unlabeled metrics produce no optgap row") {
    auto rows = aggregate(ms);
    REQUIRE(rows.size() == 3);
    CHECK(rows[0].metric == "mean_violation");
    CHECK(rows[1].metric == "max_violation");
    CHECK(rows[2].metric == "invariant_metric");

    CHECK(rows[0].mean == doctest::Approx(2.0).epsilon(1e-15));
    // population std of {1,2,3} is sqrt(2/3)
    CHECK(rows[0].std_dev ==
          doctest::Approx(std::sqrt(2.0 / 3.0)).epsilon(1e-14));
    // rank 0.95 * 2 = 1.9 -> 2 + 0.9 * (3 - 2)
    CHECK(rows[0].p95 == doctest::Approx(2.9).epsilon(1e-14));
    CHECK(rows[0].max == 3.0);

    CHECK(rows[2].std_dev == 0.0);
    CHECK(rows[2].p95 == 0.5);
  }

  SUBCASE("any labeled sample adds the optgap row first") {
    ms[1].has_optgap = true;
    ms[1].optgap = 0.125;
    auto rows = aggregate(ms);
    REQUIRE(rows.size() == 4);
    CHECK(rows[0].metric == "optgap");
    // only the labeled sample contributes
    CHECK(rows[0].mean == 0.125);
    CHECK(rows[0].std_dev == 0.0);
    CHECK(rows[0].max == 0.125);
  }

  SUBCASE("empty input is rejected") {
    CHECK_THROWS_AS(aggregate({}), ShapeError);
  }
}

TEST_CASE("normalized violations divide by the bound range") {
  const PowerSystem& sys = sys2();
  const SlackLayout lay(sys);

  // Violate generation, both voltage bounds, and the thermal limit at once.
  OperatingPoint pt;
  pt.s = VecXcd(2);
  pt.s[0] = {1.5, 0.8};
  pt.s[1] = {-0.7, -0.4};
  pt.v = VecXcd(2);
  pt.v[0] = {1.2, 0.0};
  pt.v[1] = {0.8, 0.0};

  BranchFlows fl = branch_flows(sys, pt.v);
  VecXd raw = inequality_slacks(sys, pt, fl).g;
  VecXd eps = normalized_violations(sys, pt, fl);
  REQUIRE(eps.size() == lay.total());

  CHECK(eps.minCoeff() >= 0.0);

  // Generator box at bus 0 spans 1.0 in each axis.
  CHECK(eps[lay.p_hi() + 0] == doctest::Approx(0.5).epsilon(1e-15));
  CHECK(eps[lay.q_hi() + 0] == doctest::Approx(0.3).epsilon(1e-15));

  // Bus 1 is load-only: its generation box is [0, 0], zero width, so the
  // violation stays absolute instead of being scaled.
  const Bus& load = sys.buses[1];
  CHECK(load.s_max.real() == load.s_min.real());
  CHECK(load.s_min.real() == 0.0);
  const double p_short = load.s_min.real() - pt.s[1].real();
  CHECK(p_short == doctest::Approx(0.7).epsilon(1e-12));
  CHECK(eps[lay.p_lo() + 1] == doctest::Approx(raw[lay.p_lo() + 1]).epsilon(1e-15));
  CHECK(eps[lay.p_lo() + 1] == doctest::Approx(p_short).epsilon(1e-12));

  // Voltage band is 0.1 wide on both buses.
  CHECK(eps[lay.v_hi() + 0] == doctest::Approx((1.2 - 1.05) / 0.1).epsilon(1e-12));
  CHECK(eps[lay.v_lo() + 1] == doctest::Approx((0.95 - 0.8) / 0.1).epsilon(1e-12));
  CHECK(eps[lay.v_lo() + 0] == 0.0);
  CHECK(eps[lay.v_hi() + 1] == 0.0);

  // Flow slacks scale by the branch rating.
  const Branch& br = sys.branches[0];
  const double over_from = std::abs(fl.from[0]) - br.f_max_from;
  if (over_from > 0.0)
    CHECK(eps[lay.flow_from() + 0] ==
          doctest::Approx(over_from / br.f_max_from).epsilon(1e-12));

  // Equal voltage angles: the angle-difference constraints stay inactive.
  CHECK(eps[lay.ang_lo() + 0] == 0.0);
  CHECK(eps[lay.ang_hi() + 0] == 0.0);

  SUBCASE("an interior point has no violations at all") {
    OperatingPoint mid;
    mid.s = VecXcd(2);
    mid.s[0] = 0.5 * (sys.buses[0].s_min + sys.buses[0].s_max);
    mid.s[1] = sys.buses[1].s_min;
    mid.v = VecXcd(2);
    mid.v[0] = {1.0, 0.0};
    mid.v[1] = {1.0, 0.0};
    VecXd z = normalized_violations(sys, mid);
    CHECK(z.maxCoeff() == 0.0);
  }
}

TEST_CASE("projection treats a solved point as a fixed point") {
  const PowerSystem& sys = sys3();
  const VecXcd r = nominal_loads(sys);
  const ReferenceSolution& sol = label3();

  ProjectionResult proj = project_to_powerflow(sys, r, sol.point);
  CHECK(proj.converged);
  CHECK(proj.iterations == 0);
  CHECK(proj.h_inf <= 1e-8);
  for (int i = 0; i < proj.pt.v.size(); ++i) {
    CHECK(proj.pt.v[i] == sol.point.v[i]);
    CHECK(proj.pt.s[i] == sol.point.s[i]);
  }
}

TEST_CASE("projection recovers from a voltage perturbation") {
  const PowerSystem& sys = sys3();
  const VecXcd r = nominal_loads(sys);
  const ReferenceSolution& sol = label3();
  const int n = static_cast<int>(sys.buses.size());

  OperatingPoint pred = sol.point;
  for (int i = 0; i < n; ++i) pred.v[i] *= (i % 2 == 0) ? 1.01 : 0.99;

  ProjectionResult proj = project_to_powerflow(sys, r, pred);
  CHECK(proj.converged);
  CHECK(proj.iterations >= 1);
  CHECK(proj.iterations <= 10);
  CHECK(proj.h_inf <= 1e-8);

  // The reference voltage is pinned at the prediction, not healed.
  CHECK(proj.pt.v[sys.ref_bus] == pred.v[sys.ref_bus]);

  // Non-reference injections are carried through untouched.
  for (int i = 0; i < n; ++i)
    if (i != sys.ref_bus) CHECK(proj.pt.s[i] == pred.s[i]);

  // The reference injection closes its bus balance. The closure and this
  // recheck sum branch flows in different orders, so allow rounding noise.
  VecXd h = balance_residual(sys, proj.pt, r);
  CHECK(std::abs(h[sys.ref_bus]) <= 1e-11);
  CHECK(std::abs(h[n + sys.ref_bus]) <= 1e-11);
  CHECK(h.cwiseAbs().maxCoeff() <= 1e-8);
}

TEST_CASE("scoring a label yields zero gap and certified feasibility") {
  const PowerSystem& sys = sys3();
  const VecXcd r = nominal_loads(sys);
  const ReferenceSolution& sol = label3();

  SampleMetrics m = sample_metrics(sys, r, sol.point, sol.cost, sol.cost, 7);
  CHECK(m.sample_id == 7);
  CHECK(m.nr_converged);
  CHECK(m.nr_iterations == 0);
  CHECK(m.has_optgap);
  // cost(projection(label)) is bitwise the label cost, so the ratio is 1
  CHECK(m.optgap == 0.0);
  CHECK(m.cost_projected == sol.cost);
  CHECK(m.max_violation <= 1e-6);
  CHECK(m.mean_violation <= 1e-6);

  SUBCASE("negative label cost marks the sample unlabeled") {
    SampleMetrics u = sample_metrics(sys, r, sol.point, -1.0, sol.cost);
    CHECK_FALSE(u.has_optgap);
    CHECK(u.optgap == 0.0);
  }
}

TEST_CASE("invariant metric follows its definition at the raw prediction") {
  const PowerSystem& sys = sys3();
  const SlackLayout lay(sys);
  const VecXcd r = nominal_loads(sys);
  const double cost_bar = 42.0;

  OperatingPoint pred = random_point(sys, 404);
  SampleMetrics m = sample_metrics(sys, r, pred, -1.0, cost_bar);

  BranchFlows fl = branch_flows(sys, pred.v);
  VecXd eps_g = inequality_slacks(sys, pred, fl).g.cwiseMax(0.0);
  VecXd eps_h = balance_residual(sys, pred, r).cwiseAbs();
  const double expected = cost(sys, pred.s) / cost_bar +
                          1e3 * eps_h.sum() / eps_h.size() +
                          1e3 * eps_g.sum() / lay.total();
  CHECK(m.invariant_metric == doctest::Approx(expected).epsilon(1e-12));

  // Halving the cost normalizer moves only the cost term.
  SampleMetrics m2 = sample_metrics(sys, r, pred, -1.0, cost_bar / 2.0);
  const double cost_term = cost(sys, pred.s) / cost_bar;
  CHECK(m2.invariant_metric - m.invariant_metric ==
        doctest::Approx(cost_term).epsilon(1e-9));
}

TEST_CASE("reported blocks partition the violation vector") {
  const PowerSystem& sys = sys3();
  const SlackLayout lay(sys);
  const VecXcd r = nominal_loads(sys);

  OperatingPoint pred = random_point(sys, 77);
  SampleMetrics m = sample_metrics(sys, r, pred, -1.0, 1.0);

  // Scoring happens at the projected point when the projection converges.
  ProjectionResult proj = project_to_powerflow(sys, r, pred);
  const OperatingPoint& scored = proj.converged ? proj.pt : pred;
  VecXd eps = normalized_violations(sys, scored);

  const int lens[kReportBlocks] = {2 * lay.n, 2 * lay.n, 2 * lay.n,
                                   lay.m,     lay.m,     2 * lay.m};
  double total = 0.0, mx = 0.0;
  for (int b = 0; b < kReportBlocks; ++b) {
    total += m.block_mean[b] * lens[b];
    mx = std::max(mx, m.block_max[b]);
  }
  CHECK(total / lay.total() == doctest::Approx(m.mean_violation).epsilon(1e-12));
  CHECK(mx == doctest::Approx(m.max_violation).epsilon(1e-15));
  CHECK(eps.sum() / lay.total() ==
        doctest::Approx(m.mean_violation).epsilon(1e-12));
}

TEST_CASE("per-sample CSV carries every column and nan for missing gaps") {
  const std::string dir = tmp_dir("eval_csv");

  std::vector<SampleMetrics> ms(2);
  ms[0].sample_id = 0;
  ms[0].has_optgap = true;
  ms[0].optgap = 0.125;
  ms[0].mean_violation = 0.015625;
  ms[0].nr_converged = true;
  ms[0].nr_iterations = 3;
  ms[1].sample_id = 1;
  ms[1].has_optgap = false;
  ms[1].max_violation = 2.5;

  const std::string path = dir + "/per_sample.csv";
  write_per_sample_csv(path, ms);
  auto lines = lines_of(read_file(path));
  REQUIRE(lines.size() == 3);

  std::string header =
      "sample_id,optgap,mean_violation,max_violation,invariant_metric,"
      "cost_projected,nr_converged,nr_iterations";
  for (int b = 0; b < kReportBlocks; ++b) {
    header += std::string(",") + kReportBlockNames[b] + "_mean," +
              kReportBlockNames[b] + "_max";
  }
  CHECK(lines[0] == header);

  auto row0 = split_csv(lines[1]);
  auto row1 = split_csv(lines[2]);
  REQUIRE(row0.size() == 8 + 2 * kReportBlocks);
  REQUIRE(row1.size() == row0.size());

  CHECK(row0[0] == "0");
  bool ok = false;
  CHECK(parse_double(row0[1], ok) == 0.125);
  CHECK(ok);
  CHECK(parse_double(row0[2], ok) == 0.015625);
  CHECK(row0[6] == "1");
  CHECK(row0[7] == "3");

  CHECK(row1[1] == "nan");
  CHECK(parse_double(row1[3], ok) == 2.5);
  CHECK(row1[6] == "0");

  SUBCASE("unwritable path is reported") {
    CHECK_THROWS_AS(write_per_sample_csv(dir + "/no_dir/x.csv", ms),
                    SchemaError);
  }
}

TEST_CASE("aggregate CSV names the case and method") {
  const std::string dir = tmp_dir("eval_agg_csv");

  std::vector<SampleMetrics> ms(2);
  ms[0].mean_violation = 0.25;
  ms[1].mean_violation = 0.75;
  auto rows = aggregate(ms);

  const std::string path = dir + "/aggregate.csv";
  write_aggregate_csv(path, "pglib_opf_case30_ieee", "dual_p", rows);
  auto lines = lines_of(read_file(path));
  REQUIRE(lines.size() == 1 + rows.size());
  CHECK(lines[0] == "case,method,metric,mean,std,p95,max");

  auto row = split_csv(lines[1]);
  REQUIRE(row.size() == 7);
  CHECK(row[0] == "pglib_opf_case30_ieee");
  CHECK(row[1] == "dual_p");
  CHECK(row[2] == "mean_violation");
  bool ok = false;
  CHECK(parse_double(row[3], ok) == 0.5);
  CHECK(ok);
}

}  // TEST_SUITE
