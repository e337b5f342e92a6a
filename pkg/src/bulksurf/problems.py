"""Model problems with manufactured exact solutions on the unit disk.

All callables are vectorised over nodes: ``f_bulk(t, x, y, u)`` returns the
bulk source at the points ``(x, y)`` for the state values ``u`` (ignored when
the source does not depend on the state), and likewise for ``f_surf``.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np


def _zero(t, x, y, u=None):
    return np.zeros_like(np.asarray(x, dtype=float))


@dataclass(frozen=True)
class Problem:
    name: str
    f_bulk: Callable
    f_surf: Callable
    df_bulk: Callable = _zero
    df_surf: Callable = _zero
    exact: Optional[Callable] = None
    # alpha * normal derivative of the exact solution on the unit circle
    flux: Optional[Callable] = None
    alpha: float = 1.0
    kappa: float = 1.0
    bulk_nonlinear: bool = False
    surf_nonlinear: bool = False


def linear_problem() -> Problem:
    """Heat equation with a dynamic (heat) boundary condition, u = exp(-t) x y."""

    def exact(t, x, y):
        return np.exp(-t) * x * y

    def f_bulk(t, x, y, u=None):
        # u_t - lap u with lap(xy) = 0
        return -np.exp(-t) * x * y

    def f_surf(t, x, y, p=None):
        # u_t - lap_G u + d_n u on the unit circle: -xy + 4xy + 2xy
        return 5.0 * np.exp(-t) * x * y

    def flux(t, x, y):
        return 2.0 * np.exp(-t) * x * y

    return Problem("linear", f_bulk, f_surf, exact=exact, flux=flux)


def semilinear_problem() -> Problem:
    """Double-well reaction on the boundary, u = (x^2 + y^2)^2 cos(pi t / 2).

    The boundary source is ``g(t) - p^3 + p`` with ``g`` manufactured so that
    the exact solution is reproduced.
    """
    w = 0.5 * np.pi

    def exact(t, x, y):
        return (x * x + y * y) ** 2 * np.cos(w * t)

    def f_bulk(t, x, y, u=None):
        r2 = x * x + y * y
        return -w * np.sin(w * t) * r2 ** 2 - 16.0 * r2 * np.cos(w * t)

    def g_surf(t):
        c = np.cos(w * t)
        return -w * np.sin(w * t) + 4.0 * c + c ** 3 - c

    def f_surf(t, x, y, p):
        p = np.asarray(p, dtype=float)
        return g_surf(t) - p ** 3 + p

    def df_surf(t, x, y, p):
        p = np.asarray(p, dtype=float)
        return 1.0 - 3.0 * p * p

    def flux(t, x, y):
        return 4.0 * (x * x + y * y) ** 1.5 * np.cos(w * t)

    return Problem("semilinear", f_bulk, f_surf, df_surf=df_surf, exact=exact,
                   flux=flux, surf_nonlinear=True)


PROBLEMS = {"linear": linear_problem, "semilinear": semilinear_problem}


def get_problem(name: str) -> Problem:
    try:
        return PROBLEMS[name]()
    except KeyError:
        raise ValueError(f"unknown problem {name!r}; choose from {sorted(PROBLEMS)}") from None


class ProblemValidationError(AssertionError):
    pass


@dataclass
class ValidationReport:
    problem: str
    bulk_residual: float
    surf_residual: float
    jacobian_error: float
    lipschitz_bound: float
    worst_point: tuple
    passed: bool

    def __str__(self):
        status = "PASS" if self.passed else "FAIL"
        return (f"{status} {self.problem}: bulk residual {self.bulk_residual:.2e}, "
                f"surface residual {self.surf_residual:.2e}, jacobian error "
                f"{self.jacobian_error:.2e}, Lipschitz bound {self.lipschitz_bound:.3g}")


def _second_difference(g, step):
    # fourth-order stencil; a plain three-point stencil at 1e-5 loses ~1e-5 to round-off
    return (-g(2 * step) + 16 * g(step) - 30 * g(0.0) + 16 * g(-step) - g(-2 * step)) \
        / (12 * step ** 2)


def pde_residuals(problem: Problem, t, x, y, step=1e-5, step2=1e-3):
    """Finite-difference residuals of both equations at the given points.

    First derivatives use central differences with ``step``, second
    derivatives a five-point stencil with ``step2``. Bulk points may lie
    anywhere in the disk; for the surface residual the points are projected
    onto the unit circle.
    """
    u = problem.exact
    a, k = problem.alpha, problem.kappa
    dt = (u(t + step, x, y) - u(t - step, x, y)) / (2 * step)
    lap = (_second_difference(lambda d: u(t, x + d, y), step2)
           + _second_difference(lambda d: u(t, x, y + d), step2))
    bulk = dt - a * lap - problem.f_bulk(t, x, y, u(t, x, y))

    th = np.arctan2(y, x)
    cx, cy = np.cos(th), np.sin(th)
    ub = u(t, cx, cy)
    dtb = (u(t + step, cx, cy) - u(t - step, cx, cy)) / (2 * step)
    lap_g = _second_difference(lambda d: u(t, np.cos(th + d), np.sin(th + d)), step2)
    dn = (u(t, (1 + step) * cx, (1 + step) * cy)
          - u(t, (1 - step) * cx, (1 - step) * cy)) / (2 * step)
    surf = dtb - k * lap_g + a * dn - problem.f_surf(t, cx, cy, ub)
    return bulk, surf


def validate_problem(problem: Problem, n_samples=100, tol=1e-5, seed=0,
                     raise_on_failure=False) -> ValidationReport:
    """Check manufactured sources and source derivatives by finite differences."""
    if problem.exact is None:
        raise NotImplementedError(f"problem {problem.name!r} has no exact solution")
    rng = np.random.default_rng(seed)
    t = rng.uniform(0.0, 1.0, n_samples)
    r = np.sqrt(rng.uniform(0.0, 1.0, n_samples)) * 0.999
    th = rng.uniform(0.0, 2 * np.pi, n_samples)
    x, y = r * np.cos(th), r * np.sin(th)
    bulk, surf = pde_residuals(problem, t, x, y)

    # derivative consistency at perturbed states
    s = problem.exact(t, x, y) + rng.uniform(-1.0, 1.0, n_samples)
    eps = 1e-6
    jac_err = 0.0
    for f, df in ((problem.f_bulk, problem.df_bulk), (problem.f_surf, problem.df_surf)):
        fd = (f(t, x, y, s + eps) - f(t, x, y, s - eps)) / (2 * eps)
        jac_err = max(jac_err, float(np.max(np.abs(fd - df(t, x, y, s)))))

    # sup of |df| on a ball of radius 2 around the exact values
    shifts = np.linspace(-2.0, 2.0, 41)
    ex = problem.exact(t, x, y)
    lip = 0.0
    for df in (problem.df_bulk, problem.df_surf):
        vals = [np.abs(df(t, x, y, ex + d)) for d in shifts]
        lip = max(lip, float(np.max(vals)))

    ib, isf = int(np.argmax(np.abs(bulk))), int(np.argmax(np.abs(surf)))
    rb, rs = float(abs(bulk[ib])), float(abs(surf[isf]))
    if rb >= rs:
        worst = ("bulk", float(t[ib]), float(x[ib]), float(y[ib]), rb)
    else:
        worst = ("surface", float(t[isf]), float(np.cos(th[isf])), float(np.sin(th[isf])), rs)
    passed = rb < tol and rs < tol and jac_err < 1e-6
    report = ValidationReport(problem.name, rb, rs, jac_err, lip, worst, passed)
    if raise_on_failure and not passed:
        raise ProblemValidationError(f"{report}; worst point {worst}")
    return report
