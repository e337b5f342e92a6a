"""Time integrators for the bulk-surface system.

The splitting schemes advance one step in four stages: the boundary trace
``u2`` and its derivative ``w`` are extrapolated from past values of ``p``,
the interior bulk unknowns ``u1`` are solved for with these as Dirichlet-type
data, the multiplier ``lam`` is recovered from the boundary rows of the bulk
equation, and finally the surface equation is solved for ``p`` with ``lam``
as input. Bulk and surface solves are fully decoupled.

The monolithic reference applies BDF-2 to the coupled saddle-point system.
"""
from __future__ import annotations

import enum
import logging
import math
import time
from collections import deque
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp

from . import stencils
from .assembly import BlockOperators, assemble_operators, boundary_coordinates
from .linalg import factorize

log = logging.getLogger(__name__)


class Variant(enum.Enum):
    SPLIT_A = "split-a"
    SPLIT_B = "split-b"
    SPLIT_C = "split-c"
    AUXILIARY = "aux"
    MONOLITHIC = "mono"
    THIRD_ORDER = "third"

    @property
    def delay(self):
        return {Variant.SPLIT_A: "A", Variant.SPLIT_B: "B", Variant.SPLIT_C: "C",
                Variant.AUXILIARY: "B", Variant.THIRD_ORDER: "3"}.get(self)

    @property
    def bdf(self):
        return stencils.BDF3 if self is Variant.THIRD_ORDER else stencils.BDF2

    @property
    def u_depth(self):
        return len(self.bdf.coeffs) - 1

    @property
    def p_depth(self):
        if self is Variant.MONOLITHIC:
            return 2
        ext, der = stencils.DELAY_STENCILS[self.delay]
        return max(len(ext.coeffs), len(der.coeffs), self.u_depth, 3)

    @property
    def history_depth(self):
        return max(self.u_depth, self.p_depth)


class SchemeError(RuntimeError):
    pass


class ConfigError(ValueError):
    pass


@dataclass(frozen=True)
class SchemeConfig:
    variant: Variant
    tau: float
    T: float = 1.0
    newton_tol: float = 1e-12
    newton_max_iter: int = 25

    def __post_init__(self):
        if isinstance(self.variant, str):
            object.__setattr__(self, "variant", Variant(self.variant))
        if not (self.tau > 0 and math.isfinite(self.tau)):
            raise ConfigError(f"step size must be positive, got {self.tau}")
        if not (self.T > 0 and math.isfinite(self.T)):
            raise ConfigError(f"final time must be positive, got {self.T}")
        ratio = self.T / self.tau
        if abs(ratio - round(ratio)) > 1e-9 * max(1.0, ratio):
            raise ConfigError(f"T/tau = {ratio:.12g} is not an integer")

    @property
    def n_steps(self) -> int:
        return int(round(self.T / self.tau))


@dataclass
class SchemeState:
    """Newest-first histories: ``u[k]`` holds the bulk vector at ``t^{n-k}``."""
    u: deque
    p: deque
    lam: np.ndarray | None
    n: int
    t: float
    newton_iters: int = 0


@dataclass
class Trajectory:
    scheme: str
    times: np.ndarray
    u: np.ndarray            # (n_times, N_u)
    p: np.ndarray            # (n_times, N_p)
    lam: np.ndarray          # (n_times, N_lam); NaN on history rows
    newton_iters: np.ndarray  # per computed step
    wall_time: float
    history_depth: int
    tau: float
    extra: dict = field(default_factory=dict)

    @property
    def n_steps(self):
        return len(self.times) - self.history_depth


def _push(hist, x):
    """New history with ``x`` as newest entry; the input is left untouched."""
    out = deque(hist, maxlen=hist.maxlen)
    out.appendleft(x)
    return out


def _newton(residual, jacobian, x0, tol, max_iter, what):
    x = x0.copy()
    r = residual(x)
    norm = np.linalg.norm(r)
    it = 0
    while norm > tol:
        if it == max_iter:
            raise SchemeError(f"Newton for {what} did not converge in {max_iter} "
                              f"iterations (residual {norm:.3e})")
        dx = factorize(jacobian(x)).solve(r)
        x -= dx
        it += 1
        r = residual(x)
        norm = np.linalg.norm(r)
        # the residual is floored by round-off once the update is negligible
        if np.linalg.norm(dx) <= 1e-15 * max(1.0, np.linalg.norm(x)):
            break
    return x, it


class SplittingStepper:
    """Shared implementation of the delay-constraint splitting schemes.

    Factorizations of the bulk block, the surface matrix and ``Mlam`` are
    computed once at construction and reused for every step.
    """

    def __init__(self, ops: BlockOperators, problem, config: SchemeConfig, mesh):
        v = config.variant
        if v.delay is None:
            raise ConfigError(f"{v.value} is not a splitting scheme")
        self.ops, self.problem, self.config, self.mesh = ops, problem, config, mesh
        self.bdf = v.bdf
        tau = config.tau
        self.a0 = self.bdf.coeffs[0] / (self.bdf.denom * tau)
        o = ops
        self.M11, self.M12, self.M21, self.M22 = o.M11, o.M12, o.M21, o.M22
        self.K11, self.K12, self.K21, self.K22 = o.K11, o.K12, o.K21, o.K22
        self.A11 = (self.a0 * self.M11 + self.K11).tocsc()
        self.Ap = (self.a0 * o.Mp + o.Kp).tocsc()
        self.F_lam = factorize(o.Mlam)
        self.F_11 = factorize(self.A11) if not problem.bulk_nonlinear else None
        self.F_p = factorize(self.Ap) if not problem.surf_nonlinear else None
        self.x = mesh.vertices[:, 0]
        self.y = mesh.vertices[:, 1]
        self.xb, self.yb = boundary_coordinates(mesh)
        self.n1 = o.n1

    def _bdf_history(self, hist):
        """Past-value part of the BDF derivative, ``D x_new = a0 x_new - h``."""
        c, d = self.bdf.coeffs, self.bdf.denom * self.config.tau
        out = -c[1] * hist[0]
        for ci, xi in zip(c[2:], list(hist)[1:]):
            out = out - ci * xi
        return out / d

    def step(self, state: SchemeState) -> SchemeState:
        o, pr, cfg = self.ops, self.problem, self.config
        tau, n1 = cfg.tau, self.n1
        t_new = state.t + tau
        iters = 0

        # (i) delayed constraints
        rhs_u2, rhs_w = stencils.delay_extrapolation(cfg.variant.delay, state.p, tau, o.Bp)
        u2 = self.F_lam.solve(rhs_u2)
        w = self.F_lam.solve(rhs_w)

        # (ii) interior bulk unknowns
        u1_hist = [u[:n1] for u in state.u]
        h1 = self._bdf_history(u1_hist)
        known = self.M11 @ h1 - self.M12 @ w - self.K12 @ u2
        if pr.bulk_nonlinear:
            def full(u1):
                return np.concatenate([u1, u2])

            def res(u1):
                fu = o.Mu @ pr.f_bulk(t_new, self.x, self.y, full(u1))
                return self.A11 @ u1 - fu[:n1] - known

            def jac(u1):
                d = pr.df_bulk(t_new, self.x, self.y, full(u1))
                return (self.A11 - (o.Mu @ sp.diags(d)).tocsr()[:n1, :n1]).tocsc()

            u1, k = _newton(res, jac, u1_hist[0], cfg.newton_tol, cfg.newton_max_iter,
                            f"bulk step {state.n + 1}")
            iters += k
            fu = o.Mu @ pr.f_bulk(t_new, self.x, self.y, full(u1))
        else:
            fu = o.Mu @ pr.f_bulk(t_new, self.x, self.y, None)
            u1 = self.F_11.solve(fu[:n1] + known)

        # (iii) multiplier from the boundary rows
        du1 = self.a0 * u1 - h1
        lam = self.F_lam.solve(self.M21 @ du1 + self.K21 @ u1 + self.M22 @ w
                               + self.K22 @ u2 - fu[n1:])

        # (iv) surface equation
        hp = self._bdf_history(state.p)
        known_p = o.Mp @ hp - o.Bp.T @ lam
        if pr.surf_nonlinear:
            def res_p(p):
                return self.Ap @ p - o.Mp @ pr.f_surf(t_new, self.xb, self.yb, p) - known_p

            def jac_p(p):
                d = pr.df_surf(t_new, self.xb, self.yb, p)
                return (self.Ap - o.Mp @ sp.diags(d)).tocsc()

            p, k = _newton(res_p, jac_p, state.p[0], cfg.newton_tol, cfg.newton_max_iter,
                           f"surface step {state.n + 1}")
            iters += k
        else:
            fp = o.Mp @ pr.f_surf(t_new, self.xb, self.yb, None)
            p = self.F_p.solve(fp + known_p)

        if cfg.variant is Variant.AUXILIARY:
            # trace recovered from the new surface value instead of the extrapolation
            u2 = self.F_lam.solve(o.Bp @ p)

        return SchemeState(_push(state.u, np.concatenate([u1, u2])), _push(state.p, p),
                           lam, state.n + 1, t_new, iters)


class MonolithicStepper:
    """BDF-2 applied to the coupled system with the trace constraint."""

    def __init__(self, ops: BlockOperators, problem, config: SchemeConfig, mesh):
        if config.variant is not Variant.MONOLITHIC:
            raise ConfigError("monolithic stepper requires the 'mono' variant")
        self.ops, self.problem, self.config, self.mesh = ops, problem, config, mesh
        self.bdf = stencils.BDF2
        self.a0 = self.bdf.coeffs[0] / (self.bdf.denom * config.tau)
        o = ops
        self.nu, self.np_, self.nl = o.n_u, o.n_p, o.n_lam
        Bu = o.Bu
        # symmetric indefinite form: constraint row multiplied by -1
        self.S = sp.bmat([
            [self.a0 * o.Mu + o.Ku, None, -Bu.T],
            [None, self.a0 * o.Mp + o.Kp, o.Bp.T],
            [-Bu, o.Bp, None],
        ], format="csc")
        self.nonlinear = problem.bulk_nonlinear or problem.surf_nonlinear
        self.F = None if self.nonlinear else factorize(self.S)
        self.x = mesh.vertices[:, 0]
        self.y = mesh.vertices[:, 1]
        self.xb, self.yb = boundary_coordinates(mesh)

    def _hist(self, hist):
        c, d = self.bdf.coeffs, self.bdf.denom * self.config.tau
        return (-c[1] * hist[0] - c[2] * hist[1]) / d

    def _split(self, z):
        return z[:self.nu], z[self.nu:self.nu + self.np_], z[self.nu + self.np_:]

    def step(self, state: SchemeState) -> SchemeState:
        o, pr, cfg = self.ops, self.problem, self.config
        t_new = state.t + cfg.tau
        hu = o.Mu @ self._hist(state.u)
        hp = o.Mp @ self._hist(state.p)
        zero = np.zeros(self.nl)

        def sources(u, p):
            fu = o.Mu @ pr.f_bulk(t_new, self.x, self.y, u)
            fp = o.Mp @ pr.f_surf(t_new, self.xb, self.yb, p)
            return np.concatenate([fu + hu, fp + hp, zero])

        iters = 0
        if self.nonlinear:
            def res(z):
                u, p, _ = self._split(z)
                return self.S @ z - sources(u, p)

            def jac(z):
                u, p, _ = self._split(z)
                du = pr.df_bulk(t_new, self.x, self.y, u)
                dp = pr.df_surf(t_new, self.xb, self.yb, p)
                D = sp.block_diag([o.Mu @ sp.diags(du), o.Mp @ sp.diags(dp),
                                   sp.csr_matrix((self.nl, self.nl))])
                return (self.S - D).tocsc()

            lam0 = state.lam if state.lam is not None else zero
            z0 = np.concatenate([state.u[0], state.p[0], lam0])
            z, iters = _newton(res, jac, z0, cfg.newton_tol, cfg.newton_max_iter,
                               f"monolithic step {state.n + 1}")
        else:
            z = self.F.solve(sources(None, None))
        u, p, lam = self._split(z)

        return SchemeState(_push(state.u, u), _push(state.p, p), lam, state.n + 1,
                           t_new, iters)


def make_stepper(ops, problem, config, mesh):
    if config.variant is Variant.MONOLITHIC:
        return MonolithicStepper(ops, problem, config, mesh)
    return SplittingStepper(ops, problem, config, mesh)


def _check_variant(config, allowed, name):
    if config.variant not in allowed:
        raise ConfigError(f"{name} does not handle variant {config.variant.value}")


def splitting_step(ops, problem, config, state, mesh, stepper=None):
    _check_variant(config, {Variant.SPLIT_A, Variant.SPLIT_B, Variant.SPLIT_C},
                   "splitting_step")
    return (stepper or SplittingStepper(ops, problem, config, mesh)).step(state)


def auxiliary_step(ops, problem, config, state, mesh, stepper=None):
    _check_variant(config, {Variant.AUXILIARY}, "auxiliary_step")
    return (stepper or SplittingStepper(ops, problem, config, mesh)).step(state)


def third_order_step(ops, problem, config, state, mesh, stepper=None):
    _check_variant(config, {Variant.THIRD_ORDER}, "third_order_step")
    return (stepper or SplittingStepper(ops, problem, config, mesh)).step(state)


def monolithic_step(ops, problem, config, state, mesh, stepper=None):
    _check_variant(config, {Variant.MONOLITHIC}, "monolithic_step")
    return (stepper or MonolithicStepper(ops, problem, config, mesh)).step(state)


def history_data(mesh, problem, config, initial=None):
    """Exact nodal data at ``0, -tau, -2 tau, ...`` (newest first).

    ``initial(t)`` may replace the exact interpolant; it must return the bulk
    and surface nodal vectors at time ``t``.
    """
    from .assembly import interpolate_exact

    get = initial or (lambda t: interpolate_exact(mesh, problem, t))
    return [get(-k * config.tau) for k in range(config.variant.history_depth)]


def initial_state(data, config) -> SchemeState:
    v = config.variant
    u = deque([d[0] for d in data[:v.u_depth]], maxlen=v.u_depth)
    p = deque([d[1] for d in data[:v.p_depth]], maxlen=v.p_depth)
    return SchemeState(u, p, None, 0, 0.0)


def integrate(mesh, problem, config: SchemeConfig, ops=None, initial=None) -> Trajectory:
    """March from ``t = 0`` to ``T`` starting from exact history data.

    The wall time covers factorizations and time stepping, not assembly.
    """
    if ops is None:
        ops = assemble_operators(mesh, problem.alpha, problem.kappa)
    v = config.variant
    depth = v.history_depth
    data = history_data(mesh, problem, config, initial)
    state = initial_state(data, config)
    N = config.n_steps
    n_rows = N + depth
    U = np.empty((n_rows, ops.n_u))
    P = np.empty((n_rows, ops.n_p))
    L = np.full((n_rows, ops.n_lam), np.nan)
    for k, (u, p) in enumerate(reversed(data)):
        U[k], P[k] = u, p
    iters = np.zeros(N, dtype=np.int64)

    start = time.perf_counter()
    stepper = make_stepper(ops, problem, config, mesh)
    for n in range(N):
        try:
            state = stepper.step(state)
        except SchemeError as exc:
            raise SchemeError(f"step {n + 1} of {N} failed: {exc}") from exc
        row = depth + n
        U[row], P[row], L[row] = state.u[0], state.p[0], state.lam
        iters[n] = state.newton_iters
    wall = time.perf_counter() - start

    times = config.tau * np.arange(-(depth - 1), N + 1)
    log.debug("%s: %d steps in %.3fs", v.value, N, wall)
    return Trajectory(v.value, times, U, P, L, iters, wall, depth, config.tau)
