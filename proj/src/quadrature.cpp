#include "fragsim/quadrature.hpp"

#include <gsl/gsl_errno.h>
#include <gsl/gsl_integration.h>

#include <memory>
#include <stdexcept>
#include <string>

namespace fragsim {

namespace {

constexpr std::size_t kWorkspaceIntervals = 2000;

struct WorkspaceDeleter {
  void operator()(gsl_integration_workspace* w) const { gsl_integration_workspace_free(w); }
};

// One workspace per thread; GSL workspaces are not shareable.
gsl_integration_workspace* workspace() {
  thread_local std::unique_ptr<gsl_integration_workspace, WorkspaceDeleter> ws(
      gsl_integration_workspace_alloc(kWorkspaceIntervals));
  return ws.get();
}

const bool gsl_handler_off = [] {
  gsl_set_error_handler_off();
  return true;
}();

double trampoline(double x, void* params) { return (*static_cast<const std::function<double(double)>*>(params))(x); }

QuadratureResult check(int status, double value, double err, const char* routine) {
  // Roundoff-limited results are still the best available estimate.
  if (status != GSL_SUCCESS && status != GSL_EROUND)
    throw std::runtime_error(std::string(routine) + " failed: " + gsl_strerror(status));
  return {value, err};
}

}  // namespace

QuadratureResult integrate_smooth(const std::function<double(double)>& f, double a, double b,
                                  QuadratureTolerance tol) {
  (void)gsl_handler_off;
  if (a == b) return {0.0, 0.0};
  gsl_function g{&trampoline, const_cast<std::function<double(double)>*>(&f)};
  double value = 0.0, err = 0.0;
  const int status = gsl_integration_qag(&g, a, b, tol.absolute, tol.relative, kWorkspaceIntervals,
                                         GSL_INTEG_GAUSS21, workspace(), &value, &err);
  return check(status, value, err, "qag");
}

QuadratureResult integrate_singular(const std::function<double(double)>& f, double a, double b,
                                    QuadratureTolerance tol) {
  (void)gsl_handler_off;
  if (a == b) return {0.0, 0.0};
  gsl_function g{&trampoline, const_cast<std::function<double(double)>*>(&f)};
  double value = 0.0, err = 0.0;
  const int status =
      gsl_integration_qags(&g, a, b, tol.absolute, tol.relative, kWorkspaceIntervals, workspace(), &value, &err);
  return check(status, value, err, "qags");
}

}  // namespace fragsim
