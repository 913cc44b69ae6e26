#include "sibp/nlcg.hpp"

#include <cmath>
#include <optional>

namespace sibp {

double Objective::value(const Vector& x) {
  Vector scratch(x.size());
  return value_gradient(x, scratch);
}

void Objective::begin_line(const Vector& x, const Vector& direction) {
  line_origin_ = x;
  line_direction_ = direction;
}

double Objective::line_value(double t) { return value(line_origin_ + t * line_direction_); }

double Objective::line_value_gradient(double t, Vector& grad) {
  return value_gradient(line_origin_ + t * line_direction_, grad);
}

namespace {

struct Step {
  double t;
  double value;
};

// Minimizer of the parabola through phi(0) = f0, phi'(0) = slope, phi(t) = ft.
std::optional<double> parabola_min(double f0, double slope, double t, double ft) {
  const double curvature = (ft - f0 - slope * t) / (t * t);
  if (!(curvature > 0.0) || !std::isfinite(curvature)) return std::nullopt;
  const double tq = -slope / (2.0 * curvature);
  if (!(tq > 0.0) || !std::isfinite(tq)) return std::nullopt;
  return tq;
}

std::optional<Step> armijo_search(Objective& obj, const CgOptions& opt, double f0, double slope) {
  auto sufficient = [&](double t, double ft) {
    return std::isfinite(ft) && ft <= f0 + opt.armijo * t * slope;
  };

  double t = opt.initial_step;
  for (int k = 0; k <= opt.max_backtracks; ++k) {
    const double ft = obj.line_value(t);
    const auto tq = std::isfinite(ft) ? parabola_min(f0, slope, t, ft) : std::nullopt;
    if (sufficient(t, ft)) {
      Step best{t, ft};
      // Re-fit the parabola through the best point so far; each accepted
      // refinement keeps sufficient decrease and lowers the value.
      for (int r = 0; opt.interpolate && r < opt.refine_steps; ++r) {
        const auto tr = parabola_min(f0, slope, best.t, best.value);
        if (!tr || std::abs(*tr - best.t) <= 1e-12 * best.t) break;
        const double fr = obj.line_value(*tr);
        if (!sufficient(*tr, fr) || !(fr < best.value)) break;
        best = Step{*tr, fr};
      }
      return best;
    }
    t = (opt.interpolate && tq && *tq < opt.shrink * t) ? *tq : opt.shrink * t;
  }
  return std::nullopt;
}

}  // namespace

CgReport nonlinear_cg(Objective& obj, const Vector& x0, const CgOptions& opt) {
  CgReport rep;
  rep.x = x0;
  Vector grad(x0.size());
  double f = obj.value_gradient(rep.x, grad);
  rep.initial_value = f;
  rep.value = f;
  rep.grad_norm = grad.norm();
  if (!std::isfinite(f) || !grad.allFinite()) {
    ++rep.failed_searches;
    return rep;
  }

  Vector dir = -grad;
  bool steepest = true;
  Vector next_grad(x0.size());

  for (int it = 0; it < opt.max_iters; ++it) {
    const double gnorm = grad.norm();
    rep.grad_norm = gnorm;
    if (gnorm <= opt.grad_tol || gnorm == 0.0) {
      rep.converged = true;
      break;
    }

    double slope = grad.dot(dir);
    if (!(slope < 0.0)) {
      dir = -grad;
      slope = -gnorm * gnorm;
      steepest = true;
      ++rep.restarts;
    }

    obj.begin_line(rep.x, dir);
    auto step = armijo_search(obj, opt, f, slope);
    if (!step && !steepest) {
      dir = -grad;
      steepest = true;
      ++rep.fallback_steps;
      obj.begin_line(rep.x, dir);
      step = armijo_search(obj, opt, f, -gnorm * gnorm);
    }
    if (!step) {
      ++rep.failed_searches;
      break;
    }

    const double f_next = obj.line_value_gradient(step->t, next_grad);
    rep.x += step->t * dir;
    ++rep.iterations;

    const double beta =
        std::max(0.0, next_grad.dot(next_grad - grad) / (gnorm * gnorm));
    dir = beta * dir - next_grad;
    steepest = beta == 0.0;
    grad.swap(next_grad);
    f = f_next;
    rep.value = f;
    rep.grad_norm = grad.norm();
  }
  if (opt.max_iters > 0 && rep.iterations == opt.max_iters && rep.grad_norm <= opt.grad_tol) {
    rep.converged = true;
  }
  return rep;
}

CgReport nonlinear_cg(const FunctionObjective::Fn& fn, const Vector& x0, int iters, double tol) {
  FunctionObjective obj(fn);
  CgOptions opt;
  opt.max_iters = iters;
  opt.grad_tol = tol;
  return nonlinear_cg(obj, x0, opt);
}

}  // namespace sibp
