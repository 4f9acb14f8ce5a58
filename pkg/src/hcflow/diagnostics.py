"""Analysis of flow states and completed runs.

Sphere-deviation measurement (after recentering at the inball center),
predicted linearized decay rates and exponential fits, Alexandrov
reflection monotonicity for n = 1, appendix-flow monotonicity checks, and a
bundled per-run report.

Everything here consumes states and plain series data; the flow driver
imports this module, not the other way around.
"""

from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass, field
from typing import Callable, Optional, Sequence

import numpy as np
from numpy.polynomial.legendre import Legendre
from scipy.interpolate import CubicSpline

from .errors import BisectionFail, InsufficientWindow, ModeMismatch, OutOfRange
from .hsurface import (
    GridMode,
    RadialGraphState,
    curvature,
    hyperboloid_points,
)
from .measures import (
    CachedBallInverse,
    ball_W_inverse,
    quermassintegrals,
    radii,
    weights_for,
)

__all__ = [
    "SphereDeviation",
    "deviation_from_center",
    "sphere_deviation",
    "linearized_rate",
    "DecayFit",
    "fit_decay",
    "mode_amplitude",
    "reflection_S_plus",
    "reflection_series",
    "appendix_checks",
    "support_inf",
    "DiagnosticsReport",
    "analyze_run",
]


# ---------------------------------------------------------------------------
# sphere deviation


@dataclass(frozen=True)
class SphereDeviation:
    dev_inf: float
    dev_l2: float
    r_star: float
    center: np.ndarray


def deviation_from_center(
    state: RadialGraphState, center: np.ndarray, r_star: float
) -> tuple:
    """(L_inf, L_2) deviation of boundary distances from r_star, measured
    from the given Klein-coordinate center."""
    X = hyperboloid_points(state)
    lam = 1.0 / math.sqrt(1.0 - float(center @ center))
    inner = lam * (X[:, 0] - X[:, 1] * center[0] - X[:, 2] * center[1])
    d = np.arccosh(np.maximum(inner, 1.0)) - r_star
    dev_inf = float(np.max(np.abs(d)))
    w = weights_for(state)
    dev_l2 = float(math.sqrt(max(w @ (d * d), 0.0) / np.sum(w)))
    return dev_inf, dev_l2


def sphere_deviation(
    state: RadialGraphState,
    k: int = 1,
    center: Optional[np.ndarray] = None,
    inverse: Optional[Callable[[float], float]] = None,
) -> SphereDeviation:
    """Deviation of the body from the geodesic sphere with its own W_k.

    The comparison radius is r* = ball_W_inverse(k, W_k(state)); distances
    are taken from the inball center (removing the neutral translational
    modes), or from `center` if supplied. `inverse` may supply a cached
    W_k inverse for speed.
    """
    W = quermassintegrals(state)
    wk = float(W[k])
    r_star = inverse(wk) if inverse is not None else ball_W_inverse(state.n, k, wk)
    if center is None:
        center = radii(state).center_minus
    dev_inf, dev_l2 = deviation_from_center(state, center, r_star)
    return SphereDeviation(dev_inf=dev_inf, dev_l2=dev_l2, r_star=r_star, center=center)


# ---------------------------------------------------------------------------
# linearized rates


def linearized_rate(n: int, alpha: float, r_inf: float, l: int) -> float:
    """Predicted exponential decay rate of the l-th spherical mode.

    lambda_l = (alpha coth^{alpha-1}(r_inf) / (n sinh^2 r_inf)) * (e_l - n)
    with e_l = l(l+n-1) the sphere-Laplacian eigenvalue (for n=1 the modes
    are cos/sin(m theta), e_m = m^2). The mean mode l=0 is annihilated by
    the nonlocal term and l=1 is the neutral translation family, so both
    rates vanish.
    """
    if l < 0 or r_inf <= 0.0 or alpha <= 0.0:
        raise OutOfRange("need l >= 0, r_inf > 0, alpha > 0")
    if l <= 1:
        return 0.0
    eig = l * l if n == 1 else l * (l + n - 1)
    coth = 1.0 / math.tanh(r_inf)
    return alpha * coth ** (alpha - 1.0) / (n * math.sinh(r_inf) ** 2) * (eig - n)


@dataclass(frozen=True)
class DecayFit:
    rate: float
    r2: float
    samples: int
    log_intercept: float
    reliable: bool


def fit_decay(
    t: Sequence[float],
    dev: Sequence[float],
    window: tuple = (1e-9, 1e-3),
    min_samples: int = 20,
) -> DecayFit:
    """Least-squares slope of log(deviation) against t on the linear regime.

    Only samples with deviation inside `window` qualify (below: noise floor,
    above: nonlinear regime). Raises InsufficientWindow with fewer than
    `min_samples` qualifying points.
    """
    t = np.asarray(t, dtype=float)
    dev = np.asarray(dev, dtype=float)
    mask = (dev > window[0]) & (dev < window[1]) & np.isfinite(dev)
    if int(np.sum(mask)) < min_samples:
        raise InsufficientWindow(
            f"{int(np.sum(mask))} samples in decay window, need {min_samples}"
        )
    x = t[mask]
    y = np.log(dev[mask])
    slope, intercept = np.polyfit(x, y, 1)
    resid = y - (slope * x + intercept)
    ss_tot = float(np.sum((y - np.mean(y)) ** 2))
    r2 = 1.0 - float(np.sum(resid**2)) / ss_tot if ss_tot > 0 else 0.0
    return DecayFit(
        rate=-float(slope),
        r2=r2,
        samples=int(np.sum(mask)),
        log_intercept=float(intercept),
        reliable=r2 >= 0.99,
    )


def mode_amplitude(state: RadialGraphState, l: int) -> float:
    """Amplitude of mode l in the radial profile (Fourier for n=1, Legendre
    coefficient for zonal n=2)."""
    if state.mode is GridMode.FULL_CIRCLE:
        coeff = np.fft.rfft(state.r)[l]
        return 2.0 * abs(coeff) / len(state.r)
    if state.n != 2:
        raise ModeMismatch("zonal mode projection implemented for n = 2 only")
    # c_l = (2l+1)/2 * integral_0^pi r P_l(cos) sin dtheta
    w = weights_for(state) / (2.0 * math.pi)  # reduce S^2 weights to sin(theta) dtheta
    P = Legendre.basis(l)(np.cos(state.theta))
    return abs((2 * l + 1) / 2.0 * float(w @ (state.r * P)))


# ---------------------------------------------------------------------------
# Alexandrov reflection (n = 1)


def _reflection_predicate(
    X: np.ndarray,
    profile: CubicSpline,
    axis: np.ndarray,
    s: float,
    slack: float,
) -> bool:
    # w(s) spans the reflection line's Lorentz-orthogonal complement
    w = np.array([math.sinh(s), math.cosh(s) * axis[0], math.cosh(s) * axis[1]])
    inner = -X[:, 0] * w[0] + X[:, 1] * w[1] + X[:, 2] * w[2]
    fwd = inner > 0.0
    if not np.any(fwd):
        return True
    Xr = X[fwd] - 2.0 * inner[fwd, None] * w[None, :]
    r_p = np.arccosh(np.maximum(Xr[:, 0], 1.0))
    th_p = np.mod(np.arctan2(Xr[:, 2], Xr[:, 1]), 2.0 * math.pi)
    return bool(np.all(r_p <= profile(th_p) + slack))


def reflection_S_plus(
    state: RadialGraphState, axis_angle: float = 0.0, slack: Optional[float] = None
) -> float:
    """Least reflection parameter along the geodesic through the center.

    S^+ = inf{s : reflecting the forward part of the body across the
    geodesic line orthogonal to gamma at gamma(s) lands inside the body}.
    gamma runs from the model center in direction (cos a, sin a); the
    containment test uses the radial profile with an O(h^2 diam) slack.
    """
    if state.mode is not GridMode.FULL_CIRCLE:
        raise ModeMismatch("reflection diagnostics are defined for n = 1 bodies")
    field = curvature(state)
    if field.min_kappa <= 0.0:
        raise BisectionFail("reflection bisection requires a convex body")
    axis = np.array([math.cos(axis_angle), math.sin(axis_angle)])
    X = hyperboloid_points(state)
    theta_ext = np.append(state.theta, 2.0 * math.pi)
    r_ext = np.append(state.r, state.r[0])
    profile = CubicSpline(theta_ext, r_ext, bc_type="periodic")
    diam = 2.0 * float(np.max(state.r))
    if slack is None:
        slack = state.h**2 * diam
    bound = float(np.max(state.r)) + 1e-9

    def pred(s):
        return _reflection_predicate(X, profile, axis, s, slack)

    lo, hi = -bound, bound
    if not pred(hi):
        raise BisectionFail("body not contained behind the far reflection line")
    if pred(lo):
        raise BisectionFail("no bracketing interval within the outer radius")
    for _ in range(60):
        mid = 0.5 * (lo + hi)
        if pred(mid):
            hi = mid
        else:
            lo = mid
    return 0.5 * (lo + hi)


def reflection_series(states, times, axes=(0.0, math.pi / 3, 2 * math.pi / 3)):
    """S^+ along a run for several axes: {axis_angle: [(t, S), ...]}."""
    out = {}
    for a in axes:
        out[a] = [(t, reflection_S_plus(st, a)) for t, st in zip(times, states)]
    return out


# ---------------------------------------------------------------------------
# appendix-flow (volume-constrained) checks


def appendix_checks(
    times: Sequence[float],
    volumes: Sequence[float],
    wk: Sequence[float],
    jensen: Sequence[float],
    dispersion: Sequence[float],
    w_slack: float = 1e-7,
    jensen_floor: float = -1e-9,
) -> dict:
    """Monotonicity record for volume-constrained runs.

    Returns per-check flags: volume drift (relative), W_k nonincreasing
    within w_slack, Jensen gap nonnegative within jensen_floor, and the
    terminal/initial dispersion ratio.
    """
    volumes = np.asarray(volumes, dtype=float)
    wk = np.asarray(wk, dtype=float)
    jensen = np.asarray(jensen, dtype=float)
    dispersion = np.asarray(dispersion, dtype=float)
    if not (len(times) == len(volumes) == len(wk)):
        raise ModeMismatch("series lengths disagree")
    vol_drift = float(np.max(np.abs(volumes - volumes[0])) / abs(volumes[0]))
    increases = np.diff(wk)
    w_monotone = bool(np.all(increases <= w_slack * max(1.0, abs(wk[0]))))
    jensen_min = float(np.min(jensen)) if len(jensen) else math.nan
    disp_ratio = (
        float(dispersion[-1] / dispersion[0]) if len(dispersion) and dispersion[0] > 0 else math.nan
    )
    return {
        "volume_drift_rel": vol_drift,
        "wk_nonincreasing": w_monotone,
        "wk_max_increase": float(np.max(increases)) if len(increases) else 0.0,
        "jensen_min": jensen_min,
        "jensen_ok": bool(jensen_min >= jensen_floor) if len(jensen) else False,
        "dispersion_ratio": disp_ratio,
    }


def support_inf(state: RadialGraphState) -> float:
    """Infimum of the graph-center support function sinh(r) <d_r, nu> =
    sinh(r)/v. Optional monitor; positive iff the body is star-shaped with a
    quantitative margin."""
    f = curvature(state)
    return float(np.min(np.sinh(state.r) / f.v))


# ---------------------------------------------------------------------------
# bundled report


@dataclass
class DiagnosticsReport:
    n: int
    constraint_k: int
    r_inf_fit: float
    r_inf_predicted: float
    mode_fits: list = field(default_factory=list)  # dicts per analyzed mode
    reflection_monotone: Optional[bool] = None
    reflection_max_increase: Optional[float] = None
    appendix: Optional[dict] = None
    flags: dict = field(default_factory=dict)

    def to_json(self) -> str:
        d = asdict(self)
        return json.dumps(d, sort_keys=True, default=float)


def analyze_run(run, modes: Sequence[int] = (2,)) -> DiagnosticsReport:
    """Claim-by-claim verification summary of a completed flow run.

    Expects a FlowRun-like object: .config (with n, constraint, speed),
    .series (rows with t, sphere_dev, volume, W, jensen_gap, ek_dispersion),
    .outputs (list of (t, RadialGraphState)), .state (final).
    """
    cfg = run.config
    n = cfg.n
    k = cfg.constraint.weight_order
    rows = run.series
    t = np.array([row.t for row in rows])
    dev = np.array([row.sphere_dev for row in rows])
    W0 = rows[0].W[k]
    r_pred = ball_W_inverse(n, k, float(W0))
    outputs = getattr(run, "graph_outputs", None) or run.outputs
    final_state = outputs[-1][1]
    rr = radii(final_state)
    r_fit = 0.5 * (rr.rho_minus + rr.rho_plus)

    report = DiagnosticsReport(
        n=n, constraint_k=k, r_inf_fit=r_fit, r_inf_predicted=r_pred
    )
    alpha = cfg.speed.alpha
    for l in modes:
        predicted = linearized_rate(n, alpha, r_pred, l)
        try:
            fit = fit_decay(t, dev)
            entry = {
                "mode": l,
                "fitted_rate": fit.rate,
                "predicted_rate": predicted,
                "rel_deviation": abs(fit.rate - predicted) / predicted
                if predicted > 0
                else math.nan,
                "r2": fit.r2,
                "reliable": fit.reliable,
            }
        except InsufficientWindow as exc:
            entry = {"mode": l, "error": str(exc), "predicted_rate": predicted}
        report.mode_fits.append(entry)

    if n == 1 and len(outputs) >= 3:
        times = [t_ for t_, _ in outputs]
        states = [s_ for _, s_ in outputs]
        h = states[0].h
        diam = 2.0 * float(np.max(states[0].r))
        tol = 2.0 * h * h * diam
        worst = -math.inf
        ok = True
        for a in (0.0, math.pi / 3, 2 * math.pi / 3):
            series = [reflection_S_plus(st, a) for st in states]
            inc = float(np.max(np.diff(series))) if len(series) > 1 else 0.0
            worst = max(worst, inc)
            ok = ok and inc <= tol
        report.reflection_monotone = ok
        report.reflection_max_increase = worst

    if cfg.constraint.kind == "volume":
        report.appendix = appendix_checks(
            t,
            [row.volume for row in rows],
            [row.W[cfg.speed.kind.k] for row in rows]
            if hasattr(cfg.speed.kind, "k")
            else [row.W[1] for row in rows],
            [row.jensen_gap for row in rows],
            [row.ek_dispersion for row in rows],
        )

    report.flags["termination"] = run.termination
    report.flags["h_convex_initial"] = run.h_convex_initial
    return report
