"""Triangulations of the unit disk with an interior-first node ordering.

Meshes are built from concentric rings: ring ``j`` (radius ``j/m``) carries
``6j`` equally spaced nodes, neighbouring rings are stitched together by a
shortest-diagonal sweep, and the outermost ring is placed exactly on the unit
circle. Node ``0..n_interior-1`` are interior, the remaining nodes form the
boundary loop in counter-clockwise order starting at angle zero.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np

# rings per unit length; chosen so that node counts follow the usual
# quasi-uniform density for a given maximal edge length
RING_DENSITY = 1.4


class MeshError(ValueError):
    """Raised for invalid mesh parameters or malformed mesh data."""


class MeshParseError(MeshError):
    def __init__(self, message, line=None):
        self.line = line
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)


@dataclass(frozen=True, eq=False)
class Mesh:
    vertices: np.ndarray        # (NV, 2)
    triangles: np.ndarray       # (NT, 3) vertex indices
    boundary_loop: np.ndarray   # (NB,) cyclic, counter-clockwise
    n_interior: int

    def __post_init__(self):
        for arr in (self.vertices, self.triangles, self.boundary_loop):
            arr.setflags(write=False)

    @property
    def n_vertices(self) -> int:
        return len(self.vertices)

    @property
    def n_boundary(self) -> int:
        return len(self.boundary_loop)

    @property
    def boundary_segments(self) -> np.ndarray:
        """(NB, 2) consecutive pairs of the boundary loop."""
        b = self.boundary_loop
        return np.column_stack([b, np.roll(b, -1)])

    def same_as(self, other: "Mesh") -> bool:
        return (self.n_interior == other.n_interior
                and np.array_equal(self.vertices, other.vertices)
                and np.array_equal(self.triangles, other.triangles)
                and np.array_equal(self.boundary_loop, other.boundary_loop))


def signed_areas(vertices, triangles):
    p0 = vertices[triangles[:, 0]]
    d1 = vertices[triangles[:, 1]] - p0
    d2 = vertices[triangles[:, 2]] - p0
    return 0.5 * (d1[:, 0] * d2[:, 1] - d1[:, 1] * d2[:, 0])


def edges(triangles) -> np.ndarray:
    """Unique undirected edges as a sorted (NE, 2) array."""
    e = np.vstack([triangles[:, [0, 1]], triangles[:, [1, 2]], triangles[:, [2, 0]]])
    e.sort(axis=1)
    return np.unique(e, axis=0)


def edge_lengths(mesh: Mesh) -> np.ndarray:
    e = edges(mesh.triangles)
    return np.linalg.norm(mesh.vertices[e[:, 0]] - mesh.vertices[e[:, 1]], axis=1)


def _ring(j, m):
    n = 6 * j
    theta = 2.0 * np.pi * np.arange(n) / n
    if j == m:
        # exactly on the unit circle
        return np.column_stack([np.cos(theta), np.sin(theta)])
    r = j / m
    return np.column_stack([r * np.cos(theta), r * np.sin(theta)])


def _stitch(inner, outer, pts):
    """Triangulate the annular strip between two closed rings.

    ``inner`` and ``outer`` are global index arrays ordered by angle, both
    starting at angle zero. At each step the triangle whose new diagonal is
    shorter is emitted.
    """
    ni, no = len(inner), len(outer)
    tris = []
    a = b = 0
    while a < ni or b < no:
        ia, ib = inner[a % ni], outer[b % no]
        if a == ni:
            take_outer = True
        elif b == no:
            take_outer = False
        else:
            d_outer = np.linalg.norm(pts[ia] - pts[outer[(b + 1) % no]])
            d_inner = np.linalg.norm(pts[inner[(a + 1) % ni]] - pts[ib])
            take_outer = d_outer <= d_inner
        if take_outer:
            tris.append((ia, ib, outer[(b + 1) % no]))
            b += 1
        else:
            tris.append((ia, ib, inner[(a + 1) % ni]))
            a += 1
    return tris


def rings_for(target_h: float) -> int:
    return max(2, math.ceil(RING_DENSITY / target_h))


def generate_disk_mesh(target_h: float) -> Mesh:
    """Quasi-uniform triangulation of the unit disk.

    The measured mesh width (maximal edge length) lies within
    ``[0.5, 1.5] * target_h``. Deterministic in ``target_h``.
    """
    if not (0.0 < target_h < 1.0) or not math.isfinite(target_h):
        raise MeshError(f"target_h must lie in (0, 1), got {target_h!r}")
    m = rings_for(target_h)

    # interior first (ring by ring, by angle), boundary ring last
    rings = [np.zeros((1, 2))] + [_ring(j, m) for j in range(1, m + 1)]
    pts = np.vstack(rings)
    offsets = np.cumsum([0] + [len(r) for r in rings])
    idx = [np.arange(offsets[j], offsets[j + 1]) for j in range(m + 1)]

    tris = []
    centre = idx[0][0]
    ring1 = idx[1]
    for k in range(len(ring1)):
        tris.append((centre, ring1[k], ring1[(k + 1) % len(ring1)]))
    for j in range(1, m):
        tris.extend(_stitch(idx[j], idx[j + 1], pts))

    triangles = np.array(tris, dtype=np.int64)

    mesh = Mesh(pts, triangles, idx[m].copy(), int(offsets[m]))
    validate_mesh(mesh)
    return mesh


def validate_mesh(mesh: Mesh, *, check_circle=True, check_quality=True):
    """Check the structural invariants; raise :class:`MeshError` on failure."""
    V, T, B = mesh.vertices, mesh.triangles, mesh.boundary_loop
    nv = len(V)
    if T.size and (T.min() < 0 or T.max() >= nv):
        raise MeshError("triangle references a vertex out of range")
    if not np.array_equal(np.sort(B), np.arange(mesh.n_interior, nv)):
        raise MeshError("node ordering is not interior-first: boundary loop must "
                        "consist exactly of the trailing vertices")
    if np.any(signed_areas(V, T) <= 0):
        raise MeshError("triangle with non-positive orientation")
    if check_circle:
        r = np.hypot(V[B, 0], V[B, 1])
        if np.max(np.abs(r - 1.0)) > 1e-12:
            raise MeshError("boundary vertex off the unit circle")
    ne = len(edges(T))
    if nv - ne + len(T) != 1:
        raise MeshError("Euler characteristic of a disk violated")
    if check_quality:
        L = edge_lengths(mesh)
        if L.max() / L.min() > 5.0:
            raise MeshError("mesh is not quasi-uniform (edge ratio > 5)")


def mesh_stats(mesh: Mesh) -> dict:
    return {
        "h": float(edge_lengths(mesh).max()),
        "n_vertices": mesh.n_vertices,
        "n_boundary": mesh.n_boundary,
        "polygon_area": float(signed_areas(mesh.vertices, mesh.triangles).sum()),
    }


def serialize_mesh(mesh: Mesh, path) -> None:
    lines = [f"{mesh.n_vertices} {len(mesh.triangles)} {mesh.n_boundary}"]
    lines += [f"{x:.17g} {y:.17g}" for x, y in mesh.vertices]
    lines += [f"{i} {j} {k}" for i, j, k in mesh.triangles]
    lines += [str(b) for b in mesh.boundary_loop]
    Path(path).write_text("\n".join(lines) + "\n")


def read_mesh(path) -> Mesh:
    text = Path(path).read_text().splitlines()
    if not text or not text[0].strip():
        raise MeshParseError("empty mesh file", line=1)

    def fields(lineno, count, conv):
        if lineno > len(text):
            raise MeshParseError("unexpected end of file", line=lineno)
        parts = text[lineno - 1].split()
        if len(parts) != count:
            raise MeshParseError(f"expected {count} fields, got {len(parts)}", line=lineno)
        try:
            return [conv(p) for p in parts]
        except ValueError as exc:
            raise MeshParseError(str(exc), line=lineno) from None

    nv, nt, nb = fields(1, 3, int)
    line = 2
    V = np.empty((nv, 2))
    for i in range(nv):
        V[i] = fields(line, 2, float)
        line += 1
    T = np.empty((nt, 3), dtype=np.int64)
    for i in range(nt):
        T[i] = fields(line, 3, int)
        line += 1
    B = np.empty(nb, dtype=np.int64)
    for i in range(nb):
        B[i] = fields(line, 1, int)[0]
        line += 1
    if any(s.strip() for s in text[line - 1:]):
        raise MeshParseError("trailing data after boundary loop", line=line)

    mesh = Mesh(V, T, B, nv - nb)
    validate_mesh(mesh, check_circle=False, check_quality=False)
    return mesh
