"""Error norms, convergence tables, parameter sweeps and benchmarks."""
from __future__ import annotations

import csv
import math
import statistics
from concurrent.futures import ThreadPoolExecutor
from contextlib import contextmanager
from dataclasses import dataclass, field

import numpy as np

from .assembly import assemble_operators
from .linalg import factorize
from .mesh import generate_disk_mesh, mesh_stats
from .schemes import SchemeConfig, Variant, integrate

# mesh widths of the reference experiments, each about 1/sqrt(2) of the previous
PAPER_H_LEVELS = (0.20741, 0.14394, 0.093568, 0.067169, 0.045276, 0.032228, 0.024661)

CSV_HEADER = ("scheme", "problem", "h", "n_u", "n_p", "tau", "err_linf_l2",
              "err_l2_h1", "wall_time_s", "newton_iters")


def h_levels(k: int):
    """The first ``k`` reference mesh widths (extended by 1/sqrt(2) beyond)."""
    levels = list(PAPER_H_LEVELS[:k])
    while len(levels) < k:
        levels.append(levels[-1] / math.sqrt(2.0))
    return levels


def tau_grid(tau_max=0.2, count=9):
    return [tau_max * 2.0 ** -k for k in range(count)]


@dataclass
class ErrorReport:
    scheme: str
    problem: str
    h: float
    n_u: int
    n_p: int
    tau: float
    err_linf_l2: float
    err_l2_h1: float
    wall_time_s: float
    newton_iters: int
    err_lam: float = float("nan")   # informational only, not written to CSV

    def row(self):
        return [self.scheme, self.problem] + [
            _fmt(getattr(self, k)) for k in CSV_HEADER[2:]]


def _fmt(v):
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    return f"{float(v):.17g}"


def _quad(M, E):
    """Row-wise x^T M x for the rows x of E."""
    return np.einsum("ij,ij->i", E, (M @ E.T).T)


def error_series(traj, mesh, problem, ops):
    """Per-time squared error contributions of a trajectory.

    Returns the time levels ``t^n`` (n >= 0) and the squared L2 and H1 errors
    (bulk plus surface) at each of them.
    """
    if problem.exact is None:
        raise NotImplementedError(f"problem {problem.name!r} has no exact solution")
    d = traj.history_depth
    t = traj.times[d - 1:]
    x, y = mesh.vertices[:, 0], mesh.vertices[:, 1]
    Ue = problem.exact(t[:, None], x[None, :], y[None, :])
    Eu = Ue - traj.u[d - 1:]
    Ep = Ue[:, ops.n1:] - traj.p[d - 1:]
    l2 = _quad(ops.Mu, Eu) + _quad(ops.Mp, Ep)
    h1 = l2 + _quad(ops.Ku, Eu) + _quad(ops.Kp, Ep)
    return t, np.maximum(l2, 0.0), np.maximum(h1, 0.0)


def trajectory_errors(traj, mesh, problem, ops, n_max=None) -> ErrorReport:
    """Discrete L^inf(L^2) and L^2(H^1) errors against the exact interpolant.

    The maximum runs over ``t^0 .. t^N``, the time sum over ``t^1 .. t^N``;
    ``n_max`` truncates both at step ``n_max``.
    """
    t, l2, h1 = error_series(traj, mesh, problem, ops)
    if n_max is not None:
        l2, h1 = l2[:n_max + 1], h1[:n_max + 1]
    linf = math.sqrt(float(np.max(l2)))
    l2h1 = math.sqrt(traj.tau * float(np.sum(h1[1:])))

    err_lam = float("nan")
    if problem.flux is not None:
        d = traj.history_depth
        xb, yb = mesh.vertices[ops.n1:, 0], mesh.vertices[ops.n1:, 1]
        lam_e = problem.flux(t[1:, None], xb[None, :], yb[None, :])
        El = lam_e - traj.lam[d:d + len(t) - 1]
        err_lam = math.sqrt(max(float(np.max(_quad(ops.Mlam, El))), 0.0))

    return ErrorReport(
        scheme=traj.scheme, problem=problem.name, h=mesh_stats(mesh)["h"],
        n_u=ops.n_u, n_p=ops.n_p, tau=traj.tau, err_linf_l2=linf, err_l2_h1=l2h1,
        wall_time_s=traj.wall_time, newton_iters=int(np.sum(traj.newton_iters)),
        err_lam=err_lam)


@dataclass
class EocTable:
    taus: list
    errors: list
    eocs: list                      # None for the first row and undefined pairs
    plateau: float | None = None
    pre_plateau: list = field(default_factory=list)

    def rows(self):
        return list(zip(self.taus, self.errors, self.eocs))

    def __str__(self):
        lines = [f"{'tau':>12} {'error':>12} {'eoc':>6}"]
        for t, e, o in self.rows():
            lines.append(f"{t:12.6g} {e:12.4e} {'' if o is None else f'{o:6.2f}'}")
        if self.plateau is not None:
            lines.append(f"plateau {self.plateau:.4e}")
        return "\n".join(lines)


def eoc(pairs, plateau_eoc=0.5, pre_plateau_factor=2.0) -> EocTable:
    """Experimental orders of convergence of ``(step, error)`` pairs.

    A plateau is reported when the final two orders both fall below
    ``plateau_eoc``. ``pre_plateau`` then collects the orders whose finer
    error is still at least ``pre_plateau_factor`` times the plateau, i.e.
    the part of the table dominated by the temporal error. Without a plateau
    all defined orders count as pre-plateau.
    """
    pairs = list(pairs)
    if len(pairs) < 2:
        raise ValueError("need at least two (tau, error) pairs")
    taus = [float(t) for t, _ in pairs]
    errs = [float(e) for _, e in pairs]
    if any(b >= a for a, b in zip(taus, taus[1:])):
        raise ValueError("step sizes must be strictly decreasing")
    eocs = [None]
    for k in range(1, len(pairs)):
        e0, e1 = errs[k - 1], errs[k]
        if e0 > 0 and e1 > 0:
            eocs.append(math.log(e0 / e1) / math.log(taus[k - 1] / taus[k]))
        else:
            eocs.append(None)
    plateau = None
    tail = eocs[-2:]
    if len(eocs) >= 3 and all(o is not None and o < plateau_eoc for o in tail):
        plateau = errs[-1]
    pre = [o for k, o in enumerate(eocs) if o is not None
           and (plateau is None or errs[k] >= pre_plateau_factor * plateau)]
    return EocTable(taus, errs, eocs, plateau, pre)


def spatial_order(hs, errors):
    """Least-squares slope of log(error) against log(h)."""
    return float(np.polyfit(np.log(hs), np.log(errors), 1)[0])


def _prepare(problem, target_h):
    mesh = generate_disk_mesh(target_h)
    return mesh, assemble_operators(mesh, problem.alpha, problem.kappa)


def run_single(problem, variant, target_h, tau, T=1.0, mesh=None, ops=None):
    if mesh is None:
        mesh, ops = _prepare(problem, target_h)
    elif ops is None:
        ops = assemble_operators(mesh, problem.alpha, problem.kappa)
    cfg = SchemeConfig(Variant(variant), tau, T)
    traj = integrate(mesh, problem, cfg, ops=ops)
    return trajectory_errors(traj, mesh, problem, ops)


def convergence_sweep(problem, variant, h_levels, taus, T=1.0, workers=1):
    """One ErrorReport per (h, tau), ordered by h then tau.

    Operators are assembled once per mesh and shared read-only between cells.
    """
    if not h_levels or not taus:
        raise ValueError("h_levels and taus must be non-empty")
    prepared = [_prepare(problem, h) for h in h_levels]
    cells = [(i, tau) for i in range(len(h_levels)) for tau in taus]

    def run(cell):
        i, tau = cell
        mesh, ops = prepared[i]
        return run_single(problem, variant, None, tau, T, mesh=mesh, ops=ops)

    if workers <= 1:
        return [run(c) for c in cells]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(run, cells))


@contextmanager
def _sink(target):
    """Open ``target`` for writing unless it already is a text stream."""
    if hasattr(target, "write"):
        yield target
    else:
        with open(target, "w", newline="") as fh:
            yield fh


def write_csv(reports, target):
    """Write reports to a path or an open text stream."""
    with _sink(target) as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(CSV_HEADER)
        for r in reports:
            w.writerow(r.row())


def read_csv(path):
    with open(path, newline="") as fh:
        rows = list(csv.DictReader(fh))
    out = []
    for r in rows:
        out.append(ErrorReport(
            scheme=r["scheme"], problem=r["problem"], h=float(r["h"]),
            n_u=int(r["n_u"]), n_p=int(r["n_p"]), tau=float(r["tau"]),
            err_linf_l2=float(r["err_linf_l2"]), err_l2_h1=float(r["err_l2_h1"]),
            wall_time_s=float(r["wall_time_s"]), newton_iters=int(r["newton_iters"])))
    return out


@dataclass
class ConstantEstimate:
    h: float
    c_M: float
    c_K: float


def lemma43_constants(h_levels, n_samples=50, seed=0):
    """Sampled trace constants relating bulk boundary-layer norms to ``|p|_Mp``.

    For random surface vectors ``p`` the trace ``u2 = Mlam^{-1} Bp p`` is
    formed and the ratios ``|u2|^2_{M22} / (h |p|^2_{Mp})`` and
    ``h |u2|^2_{K22} / |p|^2_{Mp}`` are maximised over the samples.
    """
    if len(h_levels) < 3:
        raise ValueError("need at least three mesh levels")
    rng = np.random.default_rng(seed)
    out = []
    for target in h_levels:
        mesh = generate_disk_mesh(target)
        ops = assemble_operators(mesh)
        h = mesh_stats(mesh)["h"]
        F = factorize(ops.Mlam)
        M22, K22 = ops.M22, ops.K22
        P = rng.standard_normal((n_samples, ops.n_p))
        U2 = np.array([F.solve(ops.Bp @ p) for p in P])
        pm = _quad(ops.Mp, P)
        cM = _quad(M22, U2) / (h * pm)
        cK = h * _quad(K22, U2) / pm
        out.append(ConstantEstimate(h, float(cM.max()), float(cK.max())))
    return out


@dataclass
class SpeedupCell:
    h: float
    tau: float
    time_monolithic: float
    time_split: float

    @property
    def ratio(self):
        return self.time_monolithic / self.time_split


def speedup_benchmark(problem, h_levels, taus, repetitions=3, reference="mono",
                      candidate="split-b", T=1.0):
    """Median wall-time ratio ``reference / candidate`` per (h, tau) cell."""
    if repetitions < 1:
        raise ValueError("repetitions must be positive")
    cells = []
    for target in h_levels:
        mesh, ops = _prepare(problem, target)
        h = mesh_stats(mesh)["h"]
        for tau in taus:
            times = {}
            for name in (reference, candidate):
                cfg = SchemeConfig(Variant(name), tau, T)
                times[name] = statistics.median(
                    integrate(mesh, problem, cfg, ops=ops).wall_time
                    for _ in range(repetitions))
            cells.append(SpeedupCell(h, tau, times[reference], times[candidate]))
    return cells


def write_speedup_csv(cells, target):
    with _sink(target) as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["h", "tau", "time_monolithic_s", "time_split_s", "speedup"])
        for c in cells:
            w.writerow([_fmt(c.h), _fmt(c.tau), _fmt(c.time_monolithic),
                        _fmt(c.time_split), _fmt(c.ratio)])


def speedup_table(cells):
    """Text table with h rows and tau columns."""
    hs = sorted({c.h for c in cells}, reverse=True)
    taus = sorted({c.tau for c in cells}, reverse=True)
    lookup = {(c.h, c.tau): c.ratio for c in cells}
    lines = ["h \\ 10 tau".ljust(12) + "".join(f"{10 * t:>9.4g}" for t in taus)]
    for h in hs:
        lines.append(f"{h:<12.5g}" + "".join(
            f"{lookup[(h, t)]:9.2f}" if (h, t) in lookup else " " * 9 for t in taus))
    return "\n".join(lines)
