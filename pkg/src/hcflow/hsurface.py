"""Hypersurface representations in H^{n+1} and their curvature.

Two gauges are supported, with conversions between them:

* Radial graph: the surface is the set of points at geodesic distance
  r(theta) from a fixed center along the unit direction theta of a geodesic
  sphere. General profiles for n = 1 (periodic grid on [0, 2pi)); zonal
  (axisymmetric) profiles r(theta), theta in [0, pi], for n >= 2.

* Support function: the body's image in the Klein ball is strictly convex;
  s(z) is its Euclidean support function on the unit sphere of directions,
  stored on the matching grid. The tau matrix nabla^2 s + s g has the
  Euclidean principal curvature radii as eigenvalues, and the hyperbolic
  inverse Weingarten map is assembled from s, nabla s and tau.

Finite differences are uniform-grid centered second order. Axisymmetric
profiles use even-reflection ghost nodes at the poles; the azimuthal
curvature's cot(theta)*r' term is replaced by its limit r'' at the poles.
"""

from __future__ import annotations

import enum
import io
import math
from dataclasses import dataclass, replace
from typing import Optional, TextIO, Union

import numpy as np
from scipy.interpolate import CubicSpline

from .errors import (
    BallEscape,
    NonPositiveRadius,
    NotConvex,
    PoleSingularity,
    SingularTau,
    SnapshotFormatError,
)
from .symfunc import SpeedFunction, eval_dual, psi_and_dpsi

__all__ = [
    "GridMode",
    "RadialGraphState",
    "SupportState",
    "CurvatureField",
    "full_circle_grid",
    "axisym_grid",
    "make_state",
    "curvature",
    "to_klein",
    "from_klein",
    "hyperboloid_points",
    "support_from_graph",
    "graph_from_support",
    "support_geometry",
    "curvature_from_support",
    "write_snapshot",
    "read_snapshot",
    "profile_derivatives",
]


class GridMode(enum.Enum):
    FULL_CIRCLE = "full_circle"
    AXISYMMETRIC = "axisymmetric"


def full_circle_grid(nodes: int) -> np.ndarray:
    """Uniform periodic grid on [0, 2pi), endpoint excluded."""
    return np.arange(nodes) * (2.0 * math.pi / nodes)


def axisym_grid(nodes: int) -> np.ndarray:
    """Uniform grid on [0, pi], poles included."""
    return np.linspace(0.0, math.pi, nodes)


def _grid_spacing(theta: np.ndarray, mode: GridMode) -> float:
    if mode is GridMode.FULL_CIRCLE:
        return 2.0 * math.pi / len(theta)
    return math.pi / (len(theta) - 1)


@dataclass(frozen=True)
class RadialGraphState:
    """Radial graph r(theta) about a fixed hyperboloid-model center.

    The center is the model base point of whatever frame the state was built
    in; it is never moved by the flow. `centerless` marks states whose graph
    center is known not to be a natural (inball-like) center of the body, so
    diagnostics insist on recentering before modal projections.
    """

    n: int
    mode: GridMode
    theta: np.ndarray
    r: np.ndarray
    centerless: bool = False

    def __post_init__(self):
        r = np.asarray(self.r, dtype=float)
        theta = np.asarray(self.theta, dtype=float)
        object.__setattr__(self, "r", r)
        object.__setattr__(self, "theta", theta)
        if self.mode is GridMode.FULL_CIRCLE and self.n != 1:
            raise NonPositiveRadius("full-circle grids are the n=1 representation")
        if self.mode is GridMode.AXISYMMETRIC and self.n < 2:
            raise NonPositiveRadius("axisymmetric grids need n >= 2")
        if theta.shape != r.shape or r.ndim != 1 or len(r) < 8:
            raise NonPositiveRadius("grid and radii must be 1-D arrays, >= 8 nodes")
        if not np.all(np.isfinite(r)) or np.any(r <= 0.0):
            raise NonPositiveRadius("radial values must be finite and positive")

    @property
    def h(self) -> float:
        return _grid_spacing(self.theta, self.mode)


@dataclass(frozen=True)
class SupportState:
    """Support function s(z) of the Klein-ball image on the matching grid."""

    n: int
    mode: GridMode
    theta: np.ndarray
    s: np.ndarray

    def __post_init__(self):
        s = np.asarray(self.s, dtype=float)
        theta = np.asarray(self.theta, dtype=float)
        object.__setattr__(self, "s", s)
        object.__setattr__(self, "theta", theta)
        if self.mode is GridMode.FULL_CIRCLE and self.n != 1:
            raise NotConvex("full-circle support grids are the n=1 representation")
        if self.mode is GridMode.AXISYMMETRIC and self.n < 2:
            raise NotConvex("axisymmetric support grids need n >= 2")
        if theta.shape != s.shape or s.ndim != 1 or len(s) < 8:
            raise NotConvex("grid and support values must be 1-D arrays, >= 8 nodes")
        if not np.all(np.isfinite(s)):
            raise BallEscape("support values must be finite")
        s1, _ = profile_derivatives(s, self.mode, _grid_spacing(theta, self.mode))
        if np.any(s * s + s1 * s1 >= 1.0):
            raise BallEscape("body is not contained in the open unit ball")
        tau = _tau_eigen(self, s1=s1)
        if np.any(tau <= 0.0):
            raise NotConvex("tau matrix is not positive definite")

    @property
    def h(self) -> float:
        return _grid_spacing(self.theta, self.mode)


State = Union[RadialGraphState, SupportState]


def make_state(n: int, nodes: int, r) -> RadialGraphState:
    """Build a radial-graph state on the default grid layout for dimension n."""
    if n == 1:
        theta = full_circle_grid(nodes)
        mode = GridMode.FULL_CIRCLE
    else:
        theta = axisym_grid(nodes)
        mode = GridMode.AXISYMMETRIC
    r = np.broadcast_to(np.asarray(r, dtype=float), theta.shape).copy()
    return RadialGraphState(n=n, mode=mode, theta=theta, r=r)


# ---------------------------------------------------------------------------
# finite differences


def profile_derivatives(y: np.ndarray, mode: GridMode, h: float):
    """Centered first/second derivatives on the profile grid.

    Axisymmetric grids use even-reflection ghosts (y[-1] := y[1] and the
    mirror at the far pole), which encodes the pole regularity y'(0) =
    y'(pi) = 0 to the stencil order.
    """
    if mode is GridMode.FULL_CIRCLE:
        ym = np.roll(y, 1)
        yp = np.roll(y, -1)
    else:
        ext = np.empty(len(y) + 2)
        ext[1:-1] = y
        ext[0] = y[1]
        ext[-1] = y[-2]
        ym = ext[:-2]
        yp = ext[2:]
    d1 = (yp - ym) / (2.0 * h)
    d2 = (yp - 2.0 * y + ym) / (h * h)
    return d1, d2


def _check_pole_regularity(state: RadialGraphState) -> None:
    # One-sided derivative estimates at the poles must vanish to stencil
    # accuracy, otherwise the profile cannot be a regular zonal graph.
    r, h = state.r, state.h
    lo = (-3.0 * r[0] + 4.0 * r[1] - r[2]) / (2.0 * h)
    hi = (3.0 * r[-1] - 4.0 * r[-2] + r[-3]) / (2.0 * h)
    d1, _ = profile_derivatives(r, state.mode, h)
    tol = 0.2 * h * max(1.0, float(np.max(np.abs(d1))))
    if abs(lo) > tol or abs(hi) > tol:
        raise PoleSingularity(
            f"pole derivative estimate ({lo:.3e}, {hi:.3e}) exceeds tolerance {tol:.3e}"
        )


# ---------------------------------------------------------------------------
# curvature of radial graphs


@dataclass(frozen=True)
class CurvatureField:
    """Per-node curvature data.

    kappa[:, 0] is the meridian (theta-theta) principal curvature; the
    remaining n-1 columns are the azimuthal curvature (equal by symmetry).
    area_density is d(mu)/d(sigma) — multiply by the sphere quadrature weights
    to integrate over the hypersurface. v is the graph gradient factor
    (None for support-gauge fields, where it has no analogue).
    """

    kappa: np.ndarray
    area_density: np.ndarray
    v: Optional[np.ndarray] = None
    F: Optional[np.ndarray] = None
    Psi: Optional[np.ndarray] = None
    dPsi_sum: Optional[np.ndarray] = None

    @property
    def min_kappa(self) -> float:
        return float(np.min(self.kappa))


def curvature(state: RadialGraphState, spec: Optional[SpeedFunction] = None) -> CurvatureField:
    """Principal curvatures, gradient factor v and area density of the graph.

    The Weingarten map of a zonal radial graph is diagonal in the
    meridian/azimuthal frame:

        kappa_theta = [coth r (1 + 2 r'^2/sinh^2 r) - r''/sinh^2 r] / v^3
        kappa_az    = [coth r - cot(theta) r'/sinh^2 r] / v

    with v = sqrt(1 + r'^2/sinh^2 r) and the azimuthal cot term replaced by
    its limit r'' at the poles.
    """
    r, h = state.r, state.h
    if state.mode is GridMode.AXISYMMETRIC:
        _check_pole_regularity(state)
    r1, r2 = profile_derivatives(r, state.mode, h)
    sh = np.sinh(r)
    ch = np.cosh(r)
    coth = ch / sh
    inv_sh2 = 1.0 / (sh * sh)
    v2 = 1.0 + r1 * r1 * inv_sh2
    v = np.sqrt(v2)

    k_theta = (coth * (1.0 + 2.0 * r1 * r1 * inv_sh2) - r2 * inv_sh2) / (v2 * v)
    if state.mode is GridMode.FULL_CIRCLE:
        kappa = k_theta[:, None]
    else:
        az = np.empty_like(r)
        az[1:-1] = r1[1:-1] / np.tan(state.theta[1:-1])
        az[0] = r2[0]
        az[-1] = r2[-1]
        k_az = (coth - az * inv_sh2) / v
        kappa = np.concatenate(
            [k_theta[:, None], np.repeat(k_az[:, None], state.n - 1, axis=1)], axis=1
        )

    area_density = v * sh**state.n
    F = Psi = dPsi_sum = None
    if spec is not None:
        Psi, dPsi = psi_and_dpsi(spec, kappa)
        F = Psi ** (1.0 / spec.alpha)
        dPsi_sum = np.sum(dPsi, axis=-1)
    return CurvatureField(
        kappa=kappa, area_density=area_density, v=v, F=F, Psi=Psi, dPsi_sum=dPsi_sum
    )


# ---------------------------------------------------------------------------
# Klein ball projection


def to_klein(state: RadialGraphState):
    """Boundary samples and outward Euclidean normals in the Klein ball.

    Returns (points, normals), both (N, 2), in profile-plane coordinates:
    for n = 1 these are the plane coordinates; for axisymmetric states the
    first column is the symmetry-axis coordinate and the second the meridian
    distance from the axis.
    """
    rho = np.tanh(state.r)
    c, s = np.cos(state.theta), np.sin(state.theta)
    points = np.column_stack([rho * c, rho * s])
    r1, _ = profile_derivatives(state.r, state.mode, state.h)
    drho = (1.0 - rho * rho) * r1
    nx = rho * c + drho * s
    ny = rho * s - drho * c
    norm = np.hypot(nx, ny)
    normals = np.column_stack([nx / norm, ny / norm])
    return points, normals


def from_klein(points: np.ndarray, n: int, mode: GridMode) -> RadialGraphState:
    """Rebuild a radial graph from Klein boundary samples lying on grid rays."""
    points = np.asarray(points, dtype=float)
    rho = np.hypot(points[:, 0], points[:, 1])
    if np.any(rho >= 1.0):
        raise BallEscape("points outside the open unit ball")
    theta = np.arctan2(points[:, 1], points[:, 0])
    if mode is GridMode.FULL_CIRCLE:
        theta = np.mod(theta, 2.0 * math.pi)
    return RadialGraphState(n=n, mode=mode, theta=theta, r=np.arctanh(rho))


def hyperboloid_points(state: RadialGraphState) -> np.ndarray:
    """(N, 3) profile-plane hyperboloid coordinates (cosh r, sinh r cos, sinh r sin)."""
    sh = np.sinh(state.r)
    return np.column_stack(
        [np.cosh(state.r), sh * np.cos(state.theta), sh * np.sin(state.theta)]
    )


# ---------------------------------------------------------------------------
# support gauge


def _tau_eigen(sstate: SupportState, s1: Optional[np.ndarray] = None) -> np.ndarray:
    """Eigenvalues of tau = hess s + s g in the meridian/azimuthal frame, (N, n)."""
    s, h = sstate.s, _grid_spacing(sstate.theta, sstate.mode)
    d1, d2 = profile_derivatives(s, sstate.mode, h)
    if s1 is not None:
        d1 = s1
    tau_theta = d2 + s
    if sstate.mode is GridMode.FULL_CIRCLE:
        return tau_theta[:, None]
    az = np.empty_like(s)
    az[1:-1] = d1[1:-1] / np.tan(sstate.theta[1:-1])
    az[0] = d2[0]
    az[-1] = d2[-1]
    tau_az = az + s
    return np.concatenate(
        [tau_theta[:, None], np.repeat(tau_az[:, None], sstate.n - 1, axis=1)], axis=1
    )


@dataclass(frozen=True)
class SupportGeometry:
    """Derived support-gauge quantities shared by the RHS and the monitors."""

    s1: np.ndarray
    tau: np.ndarray  # (N, n) eigenvalues of the tau matrix
    lam: np.ndarray  # (N, n) eigenvalues of the inverse Weingarten map
    p: np.ndarray  # 1 - s^2
    q: np.ndarray  # 1 - s^2 - |grad s|^2
    area_density: np.ndarray


def support_geometry(sstate: SupportState) -> SupportGeometry:
    """tau, inverse-Weingarten eigenvalues and hyperbolic area density.

    The inverse Weingarten eigenvalues are

        lam_theta = tau_theta * (p/q)^{3/2},   lam_az = tau_az * sqrt(p/q)

    with p = 1 - s^2 and q = 1 - s^2 - |grad s|^2; hyperbolic principal
    curvatures are their reciprocals. The hyperbolic area element relative to
    the sphere measure is det(tau) * q^{-(n+1)/2} * sqrt(p).
    """
    s = sstate.s
    h = sstate.h
    s1, _ = profile_derivatives(s, sstate.mode, h)
    tau = _tau_eigen(sstate, s1=s1)
    if np.any(tau < 1e-12):
        raise SingularTau("tau eigenvalue below 1e-12")
    p = 1.0 - s * s
    q = p - s1 * s1
    if np.any(q <= 0.0):
        raise BallEscape("1 - s^2 - |grad s|^2 must stay positive")
    ratio = p / q
    lam = tau * np.sqrt(ratio)[:, None]
    lam[:, 0] *= ratio
    n = sstate.n
    area_density = np.prod(tau, axis=1) * q ** (-(n + 1) / 2.0) * np.sqrt(p)
    return SupportGeometry(s1=s1, tau=tau, lam=lam, p=p, q=q, area_density=area_density)


def curvature_from_support(
    sstate: SupportState, spec: Optional[SpeedFunction] = None
) -> CurvatureField:
    """Hyperbolic curvature data assembled from the support function.

    The flow speed is evaluated dually: Psi = f_*(lam)^{-alpha} on the
    inverse-Weingarten eigenvalues lam, which equals f(kappa)^alpha.
    """
    geo = support_geometry(sstate)
    kappa = 1.0 / geo.lam
    F = Psi = dPsi_sum = None
    if spec is not None:
        fdual = eval_dual(spec, geo.lam)
        F = 1.0 / fdual
        Psi = fdual ** (-spec.alpha)
        _, dPsi = psi_and_dpsi(spec, kappa)
        dPsi_sum = np.sum(dPsi, axis=-1)
    return CurvatureField(
        kappa=kappa, area_density=geo.area_density, v=None, F=F, Psi=Psi, dPsi_sum=dPsi_sum
    )


# ---------------------------------------------------------------------------
# conversions


def support_from_graph(
    state: RadialGraphState, nodes: Optional[int] = None
) -> SupportState:
    """Support function of the Klein image on the matching support grid.

    s(z) = max over the boundary of <Y, z>; for a strictly convex body the
    maximum over boundary samples is attained where the outward normal equals
    z, so each node Y_j contributes the exact pair (psi_j, <Y_j, z(psi_j)>)
    with psi_j the node's normal angle. Support values in between come from
    C^2 cubic interpolation in the normal angle.

    The envelope tangency makes the sampled values second-order accurate in
    any normal-angle error, and -- crucially -- leaves the interpolation
    error smooth, so downstream derivatives of s keep the stencil order.
    (A dense max scan would produce node-scale wiggle that second
    differences amplify by 1/h^2.)
    """
    field = curvature(state)
    if field.min_kappa <= 0.0:
        raise NotConvex("Klein image is not strictly convex")
    nodes = nodes or len(state.theta)
    pts, normals = to_klein(state)
    svals = np.sum(pts * normals, axis=1)
    psi = np.arctan2(normals[:, 1], normals[:, 0])
    if state.mode is GridMode.FULL_CIRCLE:
        psi = np.unwrap(psi)
        psi -= 2.0 * math.pi * np.floor(psi[0] / (2.0 * math.pi))
        if np.any(np.diff(psi) <= 0.0):
            raise NotConvex("Gauss map is not monotone at this resolution")
        psi_ext = np.append(psi, psi[0] + 2.0 * math.pi)
        s_ext = np.append(svals, svals[0])
        interp = CubicSpline(psi_ext, s_ext, bc_type="periodic")
        phi = full_circle_grid(nodes)
        s = interp(np.mod(phi - psi[0], 2.0 * math.pi) + psi[0])
    else:
        # pole normals lie on the axis exactly (r'(0) = r'(pi) = 0)
        psi[0] = 0.0
        psi[-1] = math.pi
        if np.any(np.diff(psi) <= 0.0):
            raise NotConvex("Gauss map is not monotone at this resolution")
        # mirror across both poles so the interpolant is smooth there
        psi_m = np.concatenate([-psi[3:0:-1], psi, 2.0 * math.pi - psi[-2:-5:-1]])
        s_m = np.concatenate([svals[3:0:-1], svals, svals[-2:-5:-1]])
        interp = CubicSpline(psi_m, s_m)
        phi = axisym_grid(nodes)
        s = interp(phi)
    return SupportState(n=state.n, mode=state.mode, theta=phi, s=s)


def graph_from_support(
    sstate: SupportState, nodes: Optional[int] = None
) -> RadialGraphState:
    """Radial graph of the support body about the model center.

    The boundary point with outward normal z(phi) is Y = s z + s' z_perp;
    its polar angle is monotone in phi for strictly convex bodies, so the
    radial profile follows by cubic interpolation in the angle.
    """
    nodes = nodes or len(sstate.theta)
    geo = support_geometry(sstate)
    s, s1 = sstate.s, geo.s1
    if np.any(s <= 0.0):
        raise NonPositiveRadius("support body does not enclose the model center")
    phi = sstate.theta
    yx = s * np.cos(phi) - s1 * np.sin(phi)
    yy = s * np.sin(phi) + s1 * np.cos(phi)
    rho = np.hypot(yx, yy)
    beta = np.arctan2(yy, yx)
    r = np.arctanh(rho)
    if sstate.mode is GridMode.FULL_CIRCLE:
        beta = np.unwrap(beta)
        beta -= 2.0 * math.pi * np.floor(beta[0] / (2.0 * math.pi))
        order = np.argsort(beta)
        beta, r = beta[order], r[order]
        beta_ext = np.concatenate([beta, [beta[0] + 2.0 * math.pi]])
        r_ext = np.concatenate([r, [r[0]]])
        interp = CubicSpline(beta_ext, r_ext, bc_type="periodic")
        theta = full_circle_grid(nodes)
        rr = interp(np.mod(theta - beta[0], 2.0 * math.pi) + beta[0])
        return RadialGraphState(n=1, mode=GridMode.FULL_CIRCLE, theta=theta, r=rr)
    # zonal: poles map to poles; mirror-extend across both poles for a
    # smooth interpolant near theta = 0, pi
    beta[0] = 0.0
    beta[-1] = math.pi
    beta_m = np.concatenate([-beta[3:0:-1], beta, 2.0 * math.pi - beta[-2:-5:-1]])
    r_m = np.concatenate([r[3:0:-1], r, r[-2:-5:-1]])
    interp = CubicSpline(beta_m, r_m)
    theta = axisym_grid(nodes)
    return RadialGraphState(
        n=sstate.n, mode=GridMode.AXISYMMETRIC, theta=theta, r=interp(theta)
    )


# ---------------------------------------------------------------------------
# snapshots


def write_snapshot(target, state: State, t: float = 0.0) -> None:
    """Columnar text snapshot: header (n, mode, field, nodes, time), then rows."""
    own = isinstance(target, (str, bytes))
    fh: TextIO = open(target, "w") if own else target
    try:
        is_support = isinstance(state, SupportState)
        values = state.s if is_support else state.r
        fh.write("# hcflow state snapshot\n")
        fh.write(f"n {state.n}\n")
        fh.write(f"mode {state.mode.value}\n")
        fh.write(f"field {'s' if is_support else 'r'}\n")
        fh.write(f"nodes {len(state.theta)}\n")
        fh.write(f"time {t:.17g}\n")
        for th, val in zip(state.theta, values):
            fh.write(f"{th:.17g} {val:.17g}\n")
    finally:
        if own:
            fh.close()


def read_snapshot(source):
    """Parse a snapshot written by write_snapshot. Returns (state, time)."""
    own = isinstance(source, (str, bytes))
    fh = open(source) if own else source
    try:
        header = {}
        first = fh.readline()
        if not first.startswith("# hcflow state snapshot"):
            raise SnapshotFormatError("missing snapshot header line")
        for _ in range(5):
            line = fh.readline().split()
            if len(line) != 2:
                raise SnapshotFormatError("malformed header entry")
            header[line[0]] = line[1]
        try:
            n = int(header["n"])
            mode = GridMode(header["mode"])
            fieldname = header["field"]
            nodes = int(header["nodes"])
            t = float(header["time"])
        except (KeyError, ValueError) as exc:
            raise SnapshotFormatError(f"bad header: {exc}") from exc
        if fieldname not in ("r", "s"):
            raise SnapshotFormatError(f"unknown field {fieldname!r}")
        data = np.loadtxt(fh, ndmin=2)
        if data.shape != (nodes, 2):
            raise SnapshotFormatError(
                f"expected {nodes} rows of (theta, value), got shape {data.shape}"
            )
        theta, vals = data[:, 0], data[:, 1]
        if fieldname == "r":
            state: State = RadialGraphState(n=n, mode=mode, theta=theta, r=vals)
        else:
            state = SupportState(n=n, mode=mode, theta=theta, s=vals)
        return state, t
    finally:
        if own:
            fh.close()
