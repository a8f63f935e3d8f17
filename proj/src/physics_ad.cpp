#include "opfdl/physics_ad.hpp"

namespace opfdl {

using ad::Mat;
using ad::Tape;
using ad::Var;

AdPhysics build_physics(Tape& t, const PowerSystem& sys,
                        const AdOperatingPoint& pt, Var r_re, Var r_im) {
  const int n = sys.n();
  const int m = sys.m();

  // Branch coefficient vectors:
  //   f_from = a*|v_i|^2 - b*(v_i conj v_j),  a = conj(y+yc_f)/|t|^2, b = conj(y)/t
  //   f_to   = c*|v_j|^2 - d*conj(v_i conj v_j), c = conj(y+yc_t),    d = conj(y)/conj(t)
  Mat a_re(m, 1), a_im(m, 1), b_re(m, 1), b_im(m, 1);
  Mat c_re(m, 1), c_im(m, 1), d_re(m, 1), d_im(m, 1);
  Mat fmax_f(m, 1), fmax_t(m, 1), th_min(m, 1), th_max(m, 1);
  std::vector<int> from(m), to(m);
  for (int b = 0; b < m; ++b) {
    const Branch& br = sys.branches[b];
    from[b] = br.from;
    to[b] = br.to;
    const std::complex<double> a =
        std::conj(br.y + br.y_c_from) / std::norm(br.t);
    const std::complex<double> bb = std::conj(br.y) / br.t;
    const std::complex<double> c = std::conj(br.y + br.y_c_to);
    const std::complex<double> d = std::conj(br.y) / std::conj(br.t);
    a_re(b) = a.real();
    a_im(b) = a.imag();
    b_re(b) = bb.real();
    b_im(b) = bb.imag();
    c_re(b) = c.real();
    c_im(b) = c.imag();
    d_re(b) = d.real();
    d_im(b) = d.imag();
    fmax_f(b) = br.f_max_from;
    fmax_t(b) = br.f_max_to;
    th_min(b) = br.theta_min;
    th_max(b) = br.theta_max;
  }

  Var va_re = t.constant(a_re), va_im = t.constant(a_im);
  Var vb_re = t.constant(b_re), vb_im = t.constant(b_im);
  Var vc_re = t.constant(c_re), vc_im = t.constant(c_im);
  Var vd_re = t.constant(d_re), vd_im = t.constant(d_im);

  Var vf_re = t.gather_rows(pt.v_re, from);
  Var vf_im = t.gather_rows(pt.v_im, from);
  Var vt_re = t.gather_rows(pt.v_re, to);
  Var vt_im = t.gather_rows(pt.v_im, to);

  // p = v_i * conj(v_j)
  Var p_re = t.add(t.mul(vf_re, vt_re), t.mul(vf_im, vt_im));
  Var p_im = t.sub(t.mul(vf_im, vt_re), t.mul(vf_re, vt_im));

  Var m2f = t.add(t.square(vf_re), t.square(vf_im));
  Var m2t = t.add(t.square(vt_re), t.square(vt_im));

  AdPhysics out;
  // b*p and conj handling for the to-side, componentwise.
  Var bp_re = t.sub(t.mul(vb_re, p_re), t.mul(vb_im, p_im));
  Var bp_im = t.add(t.mul(vb_re, p_im), t.mul(vb_im, p_re));
  out.f_from_re = t.sub(t.mul(va_re, m2f), bp_re);
  out.f_from_im = t.sub(t.mul(va_im, m2f), bp_im);

  Var dp_re = t.add(t.mul(vd_re, p_re), t.mul(vd_im, p_im));
  Var dp_im = t.sub(t.mul(vd_im, p_re), t.mul(vd_re, p_im));
  out.f_to_re = t.sub(t.mul(vc_re, m2t), dp_re);
  out.f_to_im = t.sub(t.mul(vc_im, m2t), dp_im);

  // Power balance: h = s - r - sum(flows) + conj(y_shunt)|v|^2.
  std::vector<int> seg(2 * m);
  for (int b = 0; b < m; ++b) {
    seg[b] = from[b];
    seg[m + b] = to[b];
  }
  Var flows_re = t.concat_rows(out.f_from_re, out.f_to_re);
  Var flows_im = t.concat_rows(out.f_from_im, out.f_to_im);
  Var flow_sum_re = t.segment_sum(flows_re, seg, n);
  Var flow_sum_im = t.segment_sum(flows_im, seg, n);

  Mat ysh_re(n, 1), ysh_im(n, 1);
  Mat smin_re(n, 1), smin_im(n, 1), smax_re(n, 1), smax_im(n, 1);
  Mat vmin(n, 1), vmax(n, 1), c1(n, 1), c2(n, 1);
  double c0_sum = 0.0;
  for (int i = 0; i < n; ++i) {
    const Bus& bus = sys.buses[i];
    ysh_re(i) = bus.y_shunt.real();
    ysh_im(i) = bus.y_shunt.imag();
    smin_re(i) = bus.s_min.real();
    smin_im(i) = bus.s_min.imag();
    smax_re(i) = bus.s_max.real();
    smax_im(i) = bus.s_max.imag();
    vmin(i) = bus.v_min;
    vmax(i) = bus.v_max;
    c1(i) = bus.c1;
    c2(i) = bus.c2;
    c0_sum += bus.c0;
  }

  Var m2v = t.add(t.square(pt.v_re), t.square(pt.v_im));
  out.h_re = t.add(t.sub(t.sub(pt.s_re, r_re), flow_sum_re),
                   t.mul(t.constant(ysh_re), m2v));
  out.h_im = t.sub(t.sub(t.sub(pt.s_im, r_im), flow_sum_im),
                   t.mul(t.constant(ysh_im), m2v));

  out.vm = t.hypot(pt.v_re, pt.v_im);
  out.theta = t.atan2(p_im, p_re);

  // Canonical slack order: p_lo p_hi q_lo q_hi v_lo v_hi | flow_from
  // flow_to ang_lo ang_hi.
  Var g = t.sub(t.constant(smin_re), pt.s_re);
  g = t.concat_rows(g, t.sub(pt.s_re, t.constant(smax_re)));
  g = t.concat_rows(g, t.sub(t.constant(smin_im), pt.s_im));
  g = t.concat_rows(g, t.sub(pt.s_im, t.constant(smax_im)));
  g = t.concat_rows(g, t.sub(t.constant(vmin), out.vm));
  g = t.concat_rows(g, t.sub(out.vm, t.constant(vmax)));
  Var ff_mag = t.hypot(out.f_from_re, out.f_from_im);
  Var ft_mag = t.hypot(out.f_to_re, out.f_to_im);
  g = t.concat_rows(g, t.sub(ff_mag, t.constant(fmax_f)));
  g = t.concat_rows(g, t.sub(ft_mag, t.constant(fmax_t)));
  g = t.concat_rows(g, t.sub(t.constant(th_min), out.theta));
  g = t.concat_rows(g, t.sub(out.theta, t.constant(th_max)));
  out.g = g;

  Var p_mw = t.scale(pt.s_re, sys.base_mva);
  out.cost = t.add(t.add(t.constant_scalar(c0_sum),
                         t.dot(t.constant(c1), p_mw)),
                   t.dot(t.constant(c2), t.square(p_mw)));
  return out;
}

OperatingPoint point_values(const ad::Tape& t, const AdOperatingPoint& pt) {
  const ad::Mat& s_re = t.val(pt.s_re);
  const ad::Mat& s_im = t.val(pt.s_im);
  const ad::Mat& v_re = t.val(pt.v_re);
  const ad::Mat& v_im = t.val(pt.v_im);
  const int n = static_cast<int>(s_re.rows());
  OperatingPoint out;
  out.s = VecXcd(n);
  out.v = VecXcd(n);
  for (int i = 0; i < n; ++i) {
    out.s[i] = {s_re(i, 0), s_im(i, 0)};
    out.v[i] = {v_re(i, 0), v_im(i, 0)};
  }
  return out;
}

}  // namespace opfdl
