"""Self-checks: discrete identities, residual orders, trace constants and a
dense reference solve of single time steps on a tiny mesh."""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .analysis import h_levels, lemma43_constants
from .assembly import assemble_operators, interpolate_exact
from .mesh import generate_disk_mesh
from .problems import get_problem, linear_problem, validate_problem
from .schemes import SchemeConfig, Variant, initial_state, make_stepper

TINY_H = 0.7   # 19 vertices


@dataclass
class CheckResult:
    name: str
    passed: bool
    detail: str = ""

    def __str__(self):
        return f"{'PASS' if self.passed else 'FAIL'} {self.name}: {self.detail}"


def _rel(a, b):
    a, b = np.asarray(a, dtype=float), np.asarray(b, dtype=float)
    return abs(a - b) / max(abs(a), abs(b), 1e-300)


def _random_spd(rng, n):
    G = rng.standard_normal((n, n))
    return G @ G.T + n * np.eye(n)


def identity_suite(n_sequences=1000, seed=0, tau=None):
    """Worst relative defects of the three multistep identities.

    Returns a dict with keys 'difference', 'energy' and 'telescoping'. Half
    of the sequences are scalar, half are vectors with a random SPD weight.
    """
    rng = np.random.default_rng(seed)
    worst = {"difference": 0.0, "energy": 0.0, "telescoping": 0.0}
    for k in range(n_sequences):
        dim = 1 if k % 2 == 0 else int(rng.integers(2, 8))
        M = _random_spd(rng, dim)
        x0, x1, x2, x3 = rng.standard_normal((4, dim))
        t = tau if tau is not None else 10.0 ** rng.uniform(-3, 0)

        def nm(v):
            return float(v @ M @ v)

        dbdf = (3 * x3 - 4 * x2 + x1) / (2 * t)
        dalt = (5 * x2 - 8 * x1 + 3 * x0) / (2 * t)
        lhs = 2 * t * (dbdf - dalt)
        rhs = 3 * (x3 - 3 * x2 + 3 * x1 - x0)
        worst["difference"] = max(worst["difference"],
                                  float(np.max(np.abs(lhs - rhs)) / np.max(np.abs(rhs))))

        e3, e2 = x3 - x2, x2 - x1
        lhs = 2 * t * float(e3 @ M @ dbdf)
        rhs = 2.5 * nm(e3) - 0.5 * nm(e2) + 0.5 * nm(e3 - e2)
        scale = 2.5 * nm(e3) + 0.5 * nm(e2) + 0.5 * nm(e3 - e2)
        worst["energy"] = max(worst["energy"], abs(lhs - rhs) / scale)

        lhs = 4 * t * float(x3 @ M @ dbdf)
        terms = [nm(x3), -nm(x2), nm(2 * x3 - x2), -nm(2 * x2 - x1), nm(x3 - 2 * x2 + x1)]
        rhs = sum(terms)
        worst["telescoping"] = max(worst["telescoping"],
                                   abs(lhs - rhs) / sum(abs(v) for v in terms))
    return worst


def residual_orders(t=1.0, taus=None):
    """Log-log slopes of the BDF consistency error and of the second and third
    backward differences of ``sin`` at ``t``."""
    if taus is None:
        taus = [2.0 ** -k for k in range(3, 11)]
    taus = np.asarray(taus)
    r, dr = np.sin, np.cos
    d_err = np.abs((3 * r(t) - 4 * r(t - taus) + r(t - 2 * taus)) / (2 * taus) - dr(t))
    e2 = np.abs(r(t) - 2 * r(t - taus) + r(t - 2 * taus))
    e3 = np.abs(r(t) - 3 * r(t - taus) + 3 * r(t - 2 * taus) - r(t - 3 * taus))
    lt = np.log(taus)
    return {name: float(np.polyfit(lt, np.log(v), 1)[0])
            for name, v in (("bdf", d_err), ("E2", e2), ("E3", e3))}


# ---------------------------------------------------------------------------
# dense reference for one time step

def dense_operators(mesh):
    """Dense P1 matrices built element by element from barycentric gradients."""
    V, T = mesh.vertices, mesh.triangles
    n = len(V)
    Mu, Ku = np.zeros((n, n)), np.zeros((n, n))
    for tri in T:
        P = V[tri]
        J = np.array([P[1] - P[0], P[2] - P[0]]).T
        area = 0.5 * abs(np.linalg.det(J))
        G = np.linalg.solve(J.T, np.array([[-1.0, 1.0, 0.0], [-1.0, 0.0, 1.0]]))
        for a in range(3):
            for b in range(3):
                Mu[tri[a], tri[b]] += area / 12.0 * (2.0 if a == b else 1.0)
                Ku[tri[a], tri[b]] += area * G[:, a] @ G[:, b]
    loop = np.asarray(mesh.boundary_loop)
    nb, n1 = len(loop), mesh.n_interior
    Mp, Kp = np.zeros((nb, nb)), np.zeros((nb, nb))
    for k in range(nb):
        i, j = k, (k + 1) % nb
        L = float(np.hypot(*(V[loop[j]] - V[loop[i]])))
        for a, b, m, s in ((i, i, 2, 1), (j, j, 2, 1), (i, j, 1, -1), (j, i, 1, -1)):
            Mp[a, b] += L * m / 6.0
            Kp[a, b] += s / L
    return Mu, Ku, Mp, Kp, n1


# stencil coefficients written out independently of the stencils module
_BDF = {2: ([3, -4, 1], 2), 3: ([11, -18, 9, -2], 6)}
_EXT = {"split-a": [2, -1], "split-b": [2, -1], "split-c": [2, -1], "aux": [2, -1],
        "third": [3, -3, 1]}
_DER = {"split-a": ([1, -1], 1), "split-b": ([5, -8, 3], 2), "aux": ([5, -8, 3], 2),
        "split-c": ([6, -11, 6, -1], 2), "third": ([26, -57, 42, -11], 6)}


def dense_step(mesh, problem, scheme, tau, u_hist, p_hist, t_new):
    """Solve the complete step equations of ``scheme`` as one dense system.

    Histories are newest first. Returns ``(u, p, lam)`` at ``t_new``. Only
    state-independent sources are supported.
    """
    Mu, Ku, Mp, Kp, n1 = dense_operators(mesh)
    nu, nb = Mu.shape[0], Mp.shape[0]
    Ml = Mp  # equal boundary meshes
    x, y = mesh.vertices[:, 0], mesh.vertices[:, 1]
    xb, yb = x[n1:], y[n1:]
    fu = Mu @ problem.f_bulk(t_new, x, y, None)
    fp = Mp @ problem.f_surf(t_new, xb, yb, None)
    order = 3 if scheme == "third" else 2
    c, d = _BDF[order]
    a0 = c[0] / (d * tau)
    hu = -sum(ci * ui for ci, ui in zip(c[1:], u_hist)) / (d * tau)
    hp = -sum(ci * pi for ci, pi in zip(c[1:], p_hist)) / (d * tau)

    if scheme == "mono":
        # unknowns (u, p, lam)
        n = nu + 2 * nb
        A, b = np.zeros((n, n)), np.zeros(n)
        iu, ip, il = slice(0, nu), slice(nu, nu + nb), slice(nu + nb, n)
        A[iu, iu] = a0 * Mu + Ku
        A[n1:nu, il] = -Ml
        b[iu] = fu + Mu @ hu
        A[ip, ip] = a0 * Mp + Kp
        A[ip, il] = Ml.T
        b[ip] = fp + Mp @ hp
        A[il, n1:nu] = Ml
        A[il, ip] = -Ml
        z = np.linalg.solve(A, b)
        return z[iu], z[ip], z[il]

    # unknowns (u1, u2, w, lam, p, u2_hat)
    ext = sum(ci * pi for ci, pi in zip(_EXT[scheme], p_hist))
    cw, dw = _DER[scheme]
    der = sum(ci * pi for ci, pi in zip(cw, p_hist)) / (dw * tau)
    sizes = [n1, nb, nb, nb, nb, nb]
    offs = np.concatenate([[0], np.cumsum(sizes)])
    blk = [slice(offs[k], offs[k + 1]) for k in range(6)]
    U1, U2, W, LAM, P, U2H = blk
    n = offs[-1]
    A, b = np.zeros((n, n)), np.zeros(n)
    i1, i2 = slice(0, n1), slice(n1, nu)
    # interior bulk rows
    A[U1, U1] = a0 * Mu[i1, i1] + Ku[i1, i1]
    A[U1, W] = Mu[i1, i2]
    A[U1, U2] = Ku[i1, i2]
    b[U1] = fu[i1] + Mu[i1, i1] @ hu[:n1]
    # boundary bulk rows define the multiplier
    A[LAM, U1] = a0 * Mu[i2, i1] + Ku[i2, i1]
    A[LAM, W] = Mu[i2, i2]
    A[LAM, U2] = Ku[i2, i2]
    A[LAM, LAM] = -Ml
    b[LAM] = fu[i2] + Mu[i2, i1] @ hu[:n1]
    # delayed constraints
    A[U2, U2] = Ml
    b[U2] = Mp @ ext
    A[W, W] = Ml
    b[W] = Mp @ der
    # surface equation
    A[P, P] = a0 * Mp + Kp
    A[P, LAM] = Mp.T
    b[P] = fp + Mp @ hp
    # trace recovered from the new surface value
    A[U2H, U2H] = Ml
    A[U2H, P] = -Mp
    z = np.linalg.solve(A, b)
    u2 = z[U2H] if scheme == "aux" else z[U2]
    return np.concatenate([z[U1], u2]), z[P], z[LAM]


def oracle_step_errors(scheme, tau=0.1, target_h=TINY_H, seed=0):
    """Relative differences between one library step and the dense reference.

    The history is the exact solution of the linear problem plus a random
    perturbation, so that no stencil is trivially exact.
    """
    problem = linear_problem()
    mesh = generate_disk_mesh(target_h)
    ops = assemble_operators(mesh)
    cfg = SchemeConfig(Variant(scheme), tau, T=tau)
    rng = np.random.default_rng(seed)
    data = []
    for k in range(cfg.variant.history_depth):
        u, _ = interpolate_exact(mesh, problem, -k * tau)
        u = u + 0.1 * rng.standard_normal(u.shape)
        data.append((u, u[mesh.n_interior:].copy()))
    state = initial_state(data, cfg)
    new = make_stepper(ops, problem, cfg, mesh).step(state)
    ref = dense_step(mesh, problem, scheme, tau, list(state.u), list(state.p), tau)

    def rel(a, b):
        return float(np.linalg.norm(a - b) / np.linalg.norm(b))

    return {"u": rel(new.u[0], ref[0]), "p": rel(new.p[0], ref[1]),
            "lam": rel(new.lam, ref[2]), "n_vertices": mesh.n_vertices}


# ---------------------------------------------------------------------------

def verify(quick=False):
    """Run every self-check and return a list of CheckResult."""
    out = []
    w = identity_suite()
    for name, v in w.items():
        out.append(CheckResult(f"identity {name}", v < 1e-12, f"max relative defect {v:.2e}"))

    s = residual_orders()
    for name, want in (("bdf", 2), ("E2", 2), ("E3", 3)):
        out.append(CheckResult(f"residual order {name}", abs(s[name] - want) <= 0.1,
                               f"slope {s[name]:.3f}, expected {want}"))

    levels = h_levels(4 if quick else 6)[-(3 if quick else 5):]
    consts = lemma43_constants(levels)
    for attr in ("c_M", "c_K"):
        vals = [getattr(c, attr) for c in consts]
        ratio = max(vals) / min(vals)
        out.append(CheckResult(f"trace constant {attr}", ratio < 2.0,
                               f"max/min {ratio:.3f} over {len(vals)} meshes"))

    for scheme in ("split-a", "split-b", "split-c", "aux", "mono", "third"):
        e = oracle_step_errors(scheme)
        worst = max(e["u"], e["p"], e["lam"])
        out.append(CheckResult(f"dense oracle {scheme}", worst < 1e-9,
                               f"max relative difference {worst:.2e}"))

    for name in ("linear", "semilinear"):
        rep = validate_problem(get_problem(name))
        out.append(CheckResult(f"manufactured {name}", rep.passed,
                               f"residuals {rep.bulk_residual:.1e}/{rep.surf_residual:.1e}"))
    return out
