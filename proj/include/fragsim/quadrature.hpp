#pragma once

#include <functional>

namespace fragsim {

struct QuadratureTolerance {
  double absolute = 1e-10;
  double relative = 1e-8;
};

struct QuadratureResult {
  double value;
  double abs_error;
};

/// Adaptive Gauss-Kronrod (21 point) on a bounded interval with a smooth integrand.
QuadratureResult integrate_smooth(const std::function<double(double)>& f, double a, double b,
                                  QuadratureTolerance tol = {});

/// Adaptive quadrature with Wynn extrapolation; tolerates integrable endpoint singularities.
QuadratureResult integrate_singular(const std::function<double(double)>& f, double a, double b,
                                    QuadratureTolerance tol = {});

}  // namespace fragsim
