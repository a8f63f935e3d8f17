#pragma once

#include "opfdl/autodiff.hpp"
#include "opfdl/case_io.hpp"
#include "opfdl/physics.hpp"

namespace opfdl {

// Taped operating point: per-bus real/imaginary parts as N x 1 columns.
struct AdOperatingPoint {
  ad::Var s_re, s_im, v_re, v_im;
};

// Differentiable physics pipeline recorded on a tape. Produces the same
// quantities as the plain-double physics module (same slack ordering), which
// the tests cross-check.
struct AdPhysics {
  ad::Var f_from_re, f_from_im, f_to_re, f_to_im;  // M x 1
  ad::Var h_re, h_im;                              // N x 1 balance residual
  ad::Var g;                                       // (6N+4M) x 1 slacks
  ad::Var vm;                                      // N x 1 |v|
  ad::Var theta;                                   // M x 1 angle differences
  ad::Var cost;                                    // 1 x 1, native MW scale
};

AdPhysics build_physics(ad::Tape& t, const PowerSystem& sys,
                        const AdOperatingPoint& pt, ad::Var r_re,
                        ad::Var r_im);

// Current forward values of an operating point on the tape.
OperatingPoint point_values(const ad::Tape& t, const AdOperatingPoint& pt);

}  // namespace opfdl
