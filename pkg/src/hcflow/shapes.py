"""Initial-body builders for experiments and tests.

All builders return RadialGraphState instances on the default grid layout:
periodic full-circle profiles for n = 1, zonal (axisymmetric) profiles for
n >= 2. Amplitudes are kept small enough that the shapes stay radial graphs;
h-convexity of a given instance should be checked via its curvature field,
not assumed.
"""

from __future__ import annotations

import math
from typing import Sequence, Tuple

import numpy as np
from numpy.polynomial.legendre import Legendre
from scipy.optimize import brentq

from .errors import DomainError
from .hsurface import (
    GridMode,
    RadialGraphState,
    axisym_grid,
    curvature,
    full_circle_grid,
    make_state,
)

__all__ = [
    "sphere",
    "perturbed_circle",
    "perturbed_sphere",
    "offset_circle",
    "horo_contact_body",
]


def sphere(n: int, r0: float, nodes: int = 0) -> RadialGraphState:
    """Geodesic sphere of radius r0 centered at the graph center."""
    nodes = nodes or (256 if n == 1 else 129)
    return make_state(n, nodes, r0)


def perturbed_circle(
    r0: float,
    modes: Sequence[Tuple[int, float, float]] | None = None,
    eps: float = 0.0,
    m: int = 2,
    phase: float = 0.0,
    nodes: int = 256,
) -> RadialGraphState:
    """n=1 profile r = r0 + sum of eps_i cos(m_i theta + phase_i).

    Either pass explicit (m, eps, phase) triples via `modes`, or a single
    mode through eps/m/phase.
    """
    theta = full_circle_grid(nodes)
    if modes is None:
        modes = [(m, eps, phase)]
    r = np.full(nodes, r0)
    for mi, ei, pi in modes:
        r = r + ei * np.cos(mi * theta + pi)
    return RadialGraphState(n=1, mode=GridMode.FULL_CIRCLE, theta=theta, r=r)


def perturbed_sphere(
    n: int, r0: float, eps: float, l: int = 2, nodes: int = 129
) -> RadialGraphState:
    """Zonal profile r = r0 + eps * P_l(cos theta) for n >= 2."""
    theta = axisym_grid(nodes)
    r = r0 + eps * Legendre.basis(l)(np.cos(theta))
    return RadialGraphState(n=n, mode=GridMode.AXISYMMETRIC, theta=theta, r=r)


def offset_circle(r0: float, s0: float, nodes: int = 256) -> RadialGraphState:
    """Geodesic ball of radius r0 centered a distance s0 off the graph center.

    Exactly round (kappa == coth r0), but eccentric as a radial graph:
    useful for recentering and reflection diagnostics. The profile solves
    cosh(r) cosh(s0) - sinh(r) sinh(s0) cos(theta) = cosh(r0).
    """
    if s0 < 0 or s0 >= r0:
        raise DomainError("need 0 <= s0 < r0 so the graph center stays inside")
    theta = full_circle_grid(nodes)
    A = math.cosh(s0)
    B = math.sinh(s0) * np.cos(theta)
    r = np.arctanh(B / A) + np.arccosh(math.cosh(r0) / np.sqrt(A * A - B * B))
    return RadialGraphState(n=1, mode=GridMode.FULL_CIRCLE, theta=theta, r=r)


def horo_contact_body(
    n: int, r0: float = 1.0, mode_index: int = 2, nodes: int = 0
) -> RadialGraphState:
    """Perturbed sphere tuned so the discrete min principal curvature is 1.

    Models tangential horosphere contact: the body is h-convex with equality
    attained at isolated points. The perturbation amplitude is found by root
    bracketing on the discrete curvature field itself, so `min kappa - 1`
    vanishes to root-finder tolerance on the chosen grid.
    """
    nodes = nodes or (256 if n == 1 else 129)

    def body(eps: float) -> RadialGraphState:
        if n == 1:
            return perturbed_circle(r0, eps=eps, m=mode_index, nodes=nodes)
        return perturbed_sphere(n, r0, eps, l=mode_index, nodes=nodes)

    def gap(eps: float) -> float:
        return curvature(body(eps)).min_kappa - 1.0

    if gap(0.0) <= 0.0:
        raise DomainError("base sphere must be strictly h-convex (coth r0 > 1)")
    hi = 0.05
    while gap(hi) > 0.0:
        hi *= 1.5
        if hi > 0.8 * r0:
            raise DomainError("no horosphere contact before losing graph validity")
    eps_star = brentq(gap, 0.0, hi, xtol=1e-15, rtol=8.9e-16)
    return body(eps_star)
