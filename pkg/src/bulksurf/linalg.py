"""Sparse direct solves with factor reuse, and mass-weighted norms.

Factorizations are backed by SuperLU (``scipy.sparse.linalg.splu``); they are
read-only after construction and may be shared between threads.
"""
from __future__ import annotations

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla


class FactorizationError(RuntimeError):
    pass


class Factorization:
    """LU factorization of a square sparse matrix, reusable across solves."""

    def __init__(self, A):
        A = sp.csc_matrix(A)
        if A.shape[0] != A.shape[1]:
            raise FactorizationError(f"matrix must be square, got {A.shape}")
        self.shape = A.shape
        self.matrix = A
        if A.shape[0] == 0:
            self._lu = None
            return
        try:
            self._lu = spla.splu(A, permc_spec="COLAMD")
        except RuntimeError as exc:
            raise FactorizationError(f"singular matrix: {exc}") from None

    def solve(self, b):
        b = np.asarray(b, dtype=float)
        if b.shape[0] != self.shape[0]:
            raise ValueError(f"dimension mismatch: matrix {self.shape}, rhs {b.shape}")
        if self._lu is None:
            return b.copy()
        return self._lu.solve(b)


def factorize(A) -> Factorization:
    return Factorization(A)


def solve(F: Factorization, b):
    return F.solve(b)


def weighted_norm(x, M) -> float:
    """sqrt(x^T M x), with tiny negative round-off clamped to zero."""
    x = np.asarray(x, dtype=float)
    if M.shape[0] != x.shape[0] or M.shape[1] != x.shape[0]:
        raise ValueError(f"dimension mismatch: matrix {M.shape}, vector {x.shape}")
    q = float(x @ (M @ x))
    return float(np.sqrt(max(q, 0.0)))
