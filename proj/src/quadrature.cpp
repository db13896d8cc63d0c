#include "sievemix/quadrature.hpp"

#include <algorithm>
#include <cmath>

#include "sievemix/errors.hpp"

namespace sievemix {

namespace {

struct SimpsonState {
  const std::function<double(double)>& f;
  double error = 0.0;
};

double simpson(double a, double b, double fa, double fm, double fb) {
  return (b - a) / 6.0 * (fa + 4.0 * fm + fb);
}

double adapt(SimpsonState& st, double a, double b, double fa, double fm, double fb, double whole,
             double tol, int depth) {
  double m = 0.5 * (a + b);
  double lm = 0.5 * (a + m);
  double rm = 0.5 * (m + b);
  double flm = st.f(lm);
  double frm = st.f(rm);
  double left = simpson(a, m, fa, flm, fm);
  double right = simpson(m, b, fm, frm, fb);
  double delta = left + right - whole;
  if (!std::isfinite(delta)) throw NumericalError("integrand is not finite on the window");
  if (depth <= 0 || std::abs(delta) <= 15.0 * tol || !(m > a && m < b)) {
    st.error += std::abs(delta) / 15.0;
    return left + right + delta / 15.0;
  }
  return adapt(st, a, m, fa, flm, fm, left, 0.5 * tol, depth - 1) +
         adapt(st, m, b, fm, frm, fb, right, 0.5 * tol, depth - 1);
}

}  // namespace

IntegralEstimate integrate_panels(const std::function<double(double)>& f,
                                  std::vector<double> breakpoints,
                                  const QuadratureOptions& opts) {
  std::sort(breakpoints.begin(), breakpoints.end());
  breakpoints.erase(std::unique(breakpoints.begin(), breakpoints.end()), breakpoints.end());
  IntegralEstimate out;
  if (breakpoints.size() < 2) return out;

  SimpsonState st{f};
  for (std::size_t i = 0; i + 1 < breakpoints.size(); ++i) {
    double a = breakpoints[i];
    double b = breakpoints[i + 1];
    // Split each panel in four up front so a narrow feature at an interior
    // point cannot hide between the first five samples.
    for (int q = 0; q < 4; ++q) {
      double lo = a + (b - a) * q / 4.0;
      double hi = q == 3 ? b : a + (b - a) * (q + 1) / 4.0;
      double fa = f(lo);
      double fb = f(hi);
      double fm = f(0.5 * (lo + hi));
      double whole = simpson(lo, hi, fa, fm, fb);
      out.value += adapt(st, lo, hi, fa, fm, fb, whole, opts.panel_tolerance, opts.max_depth);
    }
  }
  if (!std::isfinite(out.value)) throw NumericalError("integrand is not finite on the window");
  out.error = st.error;
  return out;
}

}  // namespace sievemix
