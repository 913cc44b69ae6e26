#pragma once

#include <functional>

#include "sibp/common.hpp"

namespace sibp {

/// A smooth objective on R^n for nonlinear_cg.
///
/// Only value_gradient() is required. The line hooks let an objective reuse
/// work along a search ray x + t*d (for a layer subproblem, W*F along the ray
/// is affine in t, so each trial step costs O(rows*batch) instead of a
/// matrix product). Implementations that override one hook must keep all
/// three consistent with value_gradient().
class Objective {
 public:
  virtual ~Objective() = default;

  virtual double value_gradient(const Vector& x, Vector& grad) = 0;
  virtual double value(const Vector& x);

  virtual void begin_line(const Vector& x, const Vector& direction);
  virtual double line_value(double t);
  virtual double line_value_gradient(double t, Vector& grad);

 protected:
  Vector line_origin_;
  Vector line_direction_;
};

/// Wraps a callable `double(const Vector& x, Vector& grad)`.
class FunctionObjective final : public Objective {
 public:
  using Fn = std::function<double(const Vector&, Vector&)>;
  explicit FunctionObjective(Fn fn) : fn_(std::move(fn)) {}
  double value_gradient(const Vector& x, Vector& grad) override { return fn_(x, grad); }

 private:
  Fn fn_;
};

struct CgOptions {
  int max_iters = 5;
  double grad_tol = 0.0;
  // Backtracking Armijo line search.
  double initial_step = 1.0;
  double armijo = 1e-4;
  double shrink = 0.5;
  int max_backtracks = 20;
  // Quadratic interpolation of the line from phi(0), phi'(0), phi(t). Makes
  // the search exact on quadratics; trial points are still Armijo-checked.
  bool interpolate = true;
  int refine_steps = 3;
};

struct CgReport {
  Vector x;
  double initial_value = 0.0;
  double value = 0.0;
  double grad_norm = 0.0;
  int iterations = 0;
  int restarts = 0;          // direction reset to steepest descent
  int fallback_steps = 0;    // CG direction failed the line search, gradient step used
  int failed_searches = 0;   // no acceptable step even along -grad
  bool converged = false;    // stopped on the gradient tolerance
};

/// Polak-Ribiere+ nonlinear conjugate gradient with backtracking Armijo
/// line search. Only steps satisfying sufficient decrease are taken, so the
/// returned point never has a larger objective than x0.
CgReport nonlinear_cg(Objective& objective, const Vector& x0, const CgOptions& options = {});

CgReport nonlinear_cg(const FunctionObjective::Fn& fn, const Vector& x0, int iters, double tol = 0.0);

}  // namespace sibp
