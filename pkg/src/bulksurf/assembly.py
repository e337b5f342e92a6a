"""P1 bulk and surface finite-element operators on a disk mesh."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp

from .mesh import Mesh, signed_areas


@dataclass(frozen=True, eq=False)
class BlockOperators:
    """Assembled matrices of the semi-discrete bulk-surface system.

    Bulk unknowns are ordered interior first, so ``u = [u1, u2]`` with ``u2``
    the boundary trace, and the bulk trace operator is ``[0, Mlam]``. With
    equal boundary meshes the surface space, the multiplier space and the
    bulk trace space coincide, hence ``Bp == Mlam``.
    """
    Mu: sp.csr_matrix
    Ku: sp.csr_matrix
    Mp: sp.csr_matrix
    Kp: sp.csr_matrix
    Mlam: sp.csr_matrix
    Bp: sp.csr_matrix
    n1: int

    @property
    def n_u(self):
        return self.Mu.shape[0]

    @property
    def n_p(self):
        return self.Mp.shape[0]

    @property
    def n_lam(self):
        return self.Mlam.shape[0]

    def _block(self, A, i, j):
        s = [slice(0, self.n1), slice(self.n1, None)]
        return A[s[i - 1], s[j - 1]].tocsr()

    # block splits of Mu and Ku, computed on demand
    M11 = property(lambda self: self._block(self.Mu, 1, 1))
    M12 = property(lambda self: self._block(self.Mu, 1, 2))
    M21 = property(lambda self: self._block(self.Mu, 2, 1))
    M22 = property(lambda self: self._block(self.Mu, 2, 2))
    K11 = property(lambda self: self._block(self.Ku, 1, 1))
    K12 = property(lambda self: self._block(self.Ku, 1, 2))
    K21 = property(lambda self: self._block(self.Ku, 2, 1))
    K22 = property(lambda self: self._block(self.Ku, 2, 2))

    @property
    def Bu(self):
        """Bulk trace operator ``[0, Mlam]`` (built on request only)."""
        zero = sp.csr_matrix((self.n_lam, self.n1))
        return sp.hstack([zero, self.Mlam]).tocsr()


def _per_element(coef, n):
    c = np.broadcast_to(np.asarray(coef, dtype=float), (n,))
    if np.any(~np.isfinite(c)) or np.any(c <= 0):
        raise ValueError("diffusion coefficients must be positive")
    return c


def p1_triangle_matrices(vertices, triangles, alpha=1.0):
    """Element mass and stiffness matrices, each of shape (NT, 3, 3)."""
    nt = len(triangles)
    a = _per_element(alpha, nt)
    P = vertices[triangles]                      # (NT, 3, 2)
    area = signed_areas(vertices, triangles)
    # gradients of the barycentric coordinates
    e = np.roll(P, -1, axis=1) - np.roll(P, 1, axis=1)   # edge opposite each vertex
    grad = np.stack([-e[:, :, 1], e[:, :, 0]], axis=2) / (2.0 * area[:, None, None])
    K = (a * area)[:, None, None] * np.einsum("eik,ejk->eij", grad, grad)
    M = area[:, None, None] / 12.0 * (np.ones((3, 3)) + np.eye(3))
    return M, K


def p1_segment_matrices(vertices, segments, kappa=1.0):
    """1D element mass and stiffness on straight boundary segments, (NS, 2, 2)."""
    ns = len(segments)
    k = _per_element(kappa, ns)
    L = np.linalg.norm(vertices[segments[:, 1]] - vertices[segments[:, 0]], axis=1)
    M = L[:, None, None] / 6.0 * np.array([[2.0, 1.0], [1.0, 2.0]])
    K = (k / L)[:, None, None] * np.array([[1.0, -1.0], [-1.0, 1.0]])
    return M, K


def _scatter(local, conn, n):
    nloc = conn.shape[1]
    rows = np.repeat(conn, nloc, axis=1).ravel()
    cols = np.tile(conn, (1, nloc)).ravel()
    A = sp.coo_matrix((local.ravel(), (rows, cols)), shape=(n, n)).tocsr()
    A.sum_duplicates()
    A.sort_indices()
    return A


def _symmetrize(A):
    # exact symmetry regardless of floating-point summation order
    return ((A + A.T) * 0.5).tocsr()


def assemble_operators(mesh: Mesh, alpha=1.0, kappa=1.0) -> BlockOperators:
    """Assemble bulk and surface operators.

    ``alpha`` may be a scalar or one value per triangle, ``kappa`` a scalar or
    one value per boundary segment.
    """
    nu = mesh.n_vertices
    Me, Ke = p1_triangle_matrices(mesh.vertices, mesh.triangles, alpha)
    Mu = _symmetrize(_scatter(Me, mesh.triangles, nu))
    Ku = _symmetrize(_scatter(Ke, mesh.triangles, nu))

    # surface dofs numbered by position in the bulk ordering: node n1 + i
    n1 = mesh.n_interior
    seg = mesh.boundary_segments - n1
    Ms, Ks = p1_segment_matrices(mesh.vertices, mesh.boundary_segments, kappa)
    nb = mesh.n_boundary
    Mp = _symmetrize(_scatter(Ms, seg, nb))
    Kp = _symmetrize(_scatter(Ks, seg, nb))
    # the multiplier lives on the same boundary mesh with the same P1 basis
    Mlam = Mp.copy()
    Bp = Mp.copy()
    return BlockOperators(Mu=Mu, Ku=Ku, Mp=Mp, Kp=Kp, Mlam=Mlam, Bp=Bp, n1=n1)


def boundary_coordinates(mesh: Mesh):
    """Coordinates of the surface dofs (trailing bulk vertices)."""
    V = mesh.vertices[mesh.n_interior:]
    return V[:, 0], V[:, 1]


def load_vectors(mesh: Mesh, problem, t, u_nodal=None, p_nodal=None, ops=None):
    """Mass-weighted nodal interpolants of the bulk and surface sources."""
    if ops is None:
        ops = assemble_operators(mesh, problem.alpha, problem.kappa)
    x, y = mesh.vertices[:, 0], mesh.vertices[:, 1]
    xb, yb = boundary_coordinates(mesh)
    fu = problem.f_bulk(t, x, y, u_nodal)
    fp = problem.f_surf(t, xb, yb, p_nodal)
    fu = np.broadcast_to(fu, (mesh.n_vertices,))
    fp = np.broadcast_to(fp, (mesh.n_boundary,))
    return ops.Mu @ fu, ops.Mp @ fp


def interpolate_exact(mesh: Mesh, problem, t):
    """Nodal values of the exact solution in the bulk and on the boundary."""
    if problem.exact is None:
        raise NotImplementedError(f"problem {problem.name!r} has no exact solution")
    x, y = mesh.vertices[:, 0], mesh.vertices[:, 1]
    u = np.broadcast_to(np.asarray(problem.exact(t, x, y), dtype=float),
                        (mesh.n_vertices,)).copy()
    return u, u[mesh.n_interior:].copy()
