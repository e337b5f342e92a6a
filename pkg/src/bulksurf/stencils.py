"""Finite-difference stencils in time.

Histories are passed newest first. For a derivative at ``t^{n+3}`` the BDF
stencils take ``(x^{n+3}, x^{n+2}, x^{n+1})`` whereas the delay stencils take
only past values ``(x^{n+2}, x^{n+1}, ...)``.
"""
from __future__ import annotations

from collections import namedtuple

import numpy as np

# derivative stencils: (coefficients newest first, denominator in units of tau)
Stencil = namedtuple("Stencil", "coeffs denom")

BDF2 = Stencil((3.0, -4.0, 1.0), 2.0)
BDF3 = Stencil((11.0, -18.0, 9.0, -2.0), 6.0)
# derivative one step ahead from past values only
ALT = Stencil((5.0, -8.0, 3.0), 2.0)

DERIVATIVES = {"BDF2": BDF2, "ALT": ALT, "BDF3": BDF3}

# delayed constraints: extrapolation of p and of dp/dt to the new time level
DELAY_STENCILS = {
    "A": (Stencil((2.0, -1.0), 1.0), Stencil((1.0, -1.0), 1.0)),
    "B": (Stencil((2.0, -1.0), 1.0), ALT),
    "C": (Stencil((2.0, -1.0), 1.0), Stencil((6.0, -11.0, 6.0, -1.0), 2.0)),
    "3": (Stencil((3.0, -3.0, 1.0), 1.0), Stencil((26.0, -57.0, 42.0, -11.0), 6.0)),
}


class HistoryError(ValueError):
    pass


def _combine(coeffs, history):
    history = list(history)
    if len(history) < len(coeffs):
        raise HistoryError(f"stencil needs {len(coeffs)} history values, got {len(history)}")
    out = coeffs[0] * np.asarray(history[0], dtype=float)
    for c, x in zip(coeffs[1:], history[1:]):
        out = out + c * np.asarray(x, dtype=float)
    return out


def apply(stencil: Stencil, history, tau=1.0):
    return _combine(stencil.coeffs, history) / (stencil.denom * tau)


def discrete_derivative(kind: str, history, tau: float):
    """``kind`` in {'BDF2', 'ALT', 'BDF3'}."""
    try:
        st = DERIVATIVES[kind]
    except KeyError:
        raise ValueError(f"unknown difference operator {kind!r}") from None
    return apply(st, history, tau)


def delay_extrapolation(variant: str, p_history, tau: float, Bp=None):
    """Right-hand sides of the two delayed constraints.

    Returns ``(Bp @ extrapolated p, Bp @ extrapolated dp/dt)``; ``p_history``
    holds ``p(t - tau), p(t - 2 tau), ...``. ``variant`` is one of
    'A', 'B', 'C' or '3' (third order).
    """
    try:
        ext, der = DELAY_STENCILS[variant]
    except KeyError:
        raise ValueError(f"unknown delay variant {variant!r}") from None
    u2 = apply(ext, p_history)
    w = apply(der, p_history, tau)
    if Bp is not None:
        u2, w = Bp @ u2, Bp @ w
    return u2, w


def backward_difference(history, order=1):
    """``E^k x`` for the newest entry: repeated differences of consecutive values."""
    coeffs = np.array([1.0])
    for _ in range(order):
        coeffs = np.convolve(coeffs, [1.0, -1.0])
    return _combine(tuple(coeffs), history)
