#pragma once

#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

#include "opfdl/case_io.hpp"
#include "opfdl/physics.hpp"
#include "opfdl/rng.hpp"

namespace opfdl::test {

inline std::string fixture_path(const std::string& name) {
  return std::string(OPFDL_SOURCE_DIR) + "/tests/fixtures/" + name;
}

inline std::string case_path(const std::string& name) {
  return std::string(OPFDL_SOURCE_DIR) + "/cases/" + name;
}

// Fresh per-test scratch directory under the build tree.
inline std::string tmp_dir(const std::string& slug) {
  std::filesystem::path p =
      std::filesystem::path(OPFDL_BINARY_DIR) / "tests_tmp" / slug;
  std::filesystem::remove_all(p);
  std::filesystem::create_directories(p);
  return p.string();
}

inline std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

// Shared read-only systems; parsed once per process.
inline const PowerSystem& sys3() {
  static PowerSystem s = load_system(fixture_path("case3_mixed.m"));
  return s;
}

inline const PowerSystem& sys2() {
  static PowerSystem s = load_system(fixture_path("case2_link.m"));
  return s;
}

inline const PowerSystem& sys30() {
  static PowerSystem s = load_system(case_path("pglib_opf_case30_ieee.m"));
  return s;
}

// Generic operating point with no exact zeros or bound hits; distinct calls
// with the same seed are identical.
inline OperatingPoint random_point(const PowerSystem& sys, uint64_t seed) {
  Rng rng(seed, "testpt");
  OperatingPoint pt;
  pt.s.resize(sys.n());
  pt.v.resize(sys.n());
  for (int i = 0; i < sys.n(); ++i) {
    pt.s[i] = {rng.uniform(-0.3, 0.9), rng.uniform(-0.4, 0.4)};
    pt.v[i] = {rng.uniform(0.9, 1.1), rng.uniform(-0.15, 0.15)};
  }
  return pt;
}

// Five buses in a chain, one generator at each end. Branch k joins bus k+1
// and bus k+2 (external ids), so graph distance equals id distance.
inline const char* kChain5 = R"(function mpc = chain5
mpc.version = '2';
mpc.baseMVA = 100;
mpc.bus = [
  1 3 0  0  0 0 1 1 0 135 1 1.06 0.94;
  2 1 30 10 0 0 1 1 0 135 1 1.06 0.94;
  3 1 20 5  0 0 1 1 0 135 1 1.06 0.94;
  4 1 25 8  0 0 1 1 0 135 1 1.06 0.94;
  5 2 10 2  0 0 1 1 0 135 1 1.06 0.94;
];
mpc.gen = [
  1 50 0 60 -60 1 100 1 120 0;
  5 20 0 30 -30 1 100 1 60  0;
];
mpc.branch = [
  1 2 0.02 0.06 0.02 90 90 90 0 0 1 -30 30;
  2 3 0.02 0.06 0.02 90 90 90 0 0 1 -30 30;
  3 4 0.02 0.06 0.02 90 90 90 0 0 1 -30 30;
  4 5 0.02 0.06 0.02 90 90 90 0 0 1 -30 30;
];
mpc.gencost = [
  2 0 0 3 0.02 15 5;
  2 0 0 3 0.04 25 3;
];
)";

inline const PowerSystem& sys_chain5() {
  static PowerSystem s = build_system(parse_case_text(kChain5, "chain5"));
  return s;
}

}  // namespace opfdl::test
