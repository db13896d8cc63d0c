#pragma once

#include <functional>
#include <vector>

namespace sievemix {

/// An integral value together with a bound on its error.
struct IntegralEstimate {
  double value = 0.0;
  double error = 0.0;
  /// False when part of the error bar could not be certified analytically.
  bool certified = true;
};

struct QuadratureOptions {
  double panel_tolerance = 1e-8;
  int max_depth = 48;
};

/// Adaptive Simpson on each panel between consecutive sorted breakpoints.
/// The error estimate is the sum of per-panel Richardson corrections.
IntegralEstimate integrate_panels(const std::function<double(double)>& f,
                                  std::vector<double> breakpoints,
                                  const QuadratureOptions& opts = {});

}  // namespace sievemix
