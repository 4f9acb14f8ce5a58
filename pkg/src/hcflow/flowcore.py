"""Constrained curvature-flow time integrator.

The boundary moves with normal speed phi(t) - Psi, Psi = f(kappa)^alpha,
with phi chosen so the continuum motion preserves one global quantity:

    quermass(k):  phi = (int E_k Psi dmu) / (int E_k dmu),   1 <= k <= n
    volume:       phi = (int Psi dmu) / |M|                  (E_0 weight)

Two gauges integrate the same motion: the radial-graph gauge evolves
r(direction) through dr/dt = (phi - Psi) * v, and the support gauge evolves
the hyperbolic support function through ds/dt = sqrt(q p) (phi - Psi) with
p = 1 - s^2, q = p - |grad s|^2 (convex bodies only).

Time stepping is classical RK4 with the parabolic bound
dt = cfl * h^2 / max(diffusion scale); phi is re-evaluated at every stage.
A trial step is rejected and the step halved when the updated state fails
validation or its minimum principal curvature falls below the h-convexity
floor minus ten times the monitor tolerance; halving below 1e-12 raises
StepCollapse.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .diagnostics import deviation_from_center
from .errors import (
    BallEscape,
    ConfigError,
    DegenerateDenominator,
    DomainError,
    NonPositiveRadius,
    NotConvex,
    PoleSingularity,
    SingularTau,
    StepCollapse,
)
from .hsurface import (
    RadialGraphState,
    SupportState,
    curvature,
    graph_from_support,
    support_from_graph,
    support_geometry,
)
from .measures import (
    CachedBallInverse,
    quermass_from_parts,
    radii,
    sinh_power_antiderivative,
    weights_for,
)
from .symfunc import ElemSymRoot, SpeedFunction, ek_normalized, eval_dual, psi_and_dpsi

__all__ = [
    "Constraint",
    "MonitorThresholds",
    "FlowConfig",
    "SeriesRow",
    "FlowRun",
    "TIME_END",
    "CONVERGED",
    "STEP_COLLAPSE",
    "INVARIANT_VIOLATION",
    "phi",
    "rhs",
    "start",
    "step",
    "run_flow",
    "series_columns",
    "series_table",
]

TIME_END = "TimeEnd"
CONVERGED = "Converged"
STEP_COLLAPSE = "StepCollapse"
INVARIANT_VIOLATION = "InvariantViolation"

_DT_FLOOR = 1e-12
_ARRIVAL_EPS = 1e-9


class _Reject(Exception):
    """Internal: trial step failed a soft check, halve and retry."""


# exceptions that mean "this trial state is bad", not "the run is broken"
_REJECTABLE = (
    _Reject,
    NonPositiveRadius,
    NotConvex,
    SingularTau,
    BallEscape,
    PoleSingularity,
    DomainError,
    DegenerateDenominator,
)


# ---------------------------------------------------------------------------
# configuration


@dataclass(frozen=True)
class Constraint:
    """Which global quantity the nonlocal term pins.

    kind "quermass" preserves W_k (weight E_k, 1 <= k <= n); kind "volume"
    preserves the enclosed volume W_0 (weight E_0 = 1).
    """

    kind: str
    k: int = 0

    def __post_init__(self):
        if self.kind not in ("quermass", "volume"):
            raise ConfigError(
                "constraint.kind", f"expected 'quermass' or 'volume', got {self.kind!r}"
            )
        if self.kind == "quermass" and self.k < 1:
            raise ConfigError("constraint.k", f"quermass constraint needs k >= 1, got {self.k}")
        if self.kind == "volume" and self.k != 0:
            raise ConfigError("constraint.k", "volume constraint takes no order (leave k = 0)")

    @property
    def weight_order(self) -> int:
        return self.k if self.kind == "quermass" else 0


@dataclass(frozen=True)
class MonitorThresholds:
    """Tolerances for the run-time monitors.

    h_convex_tol enters the step-rejection floor (reject below
    1 - 10 * h_convex_tol); w_drift_rel bounds the relative drift of the
    preserved quantity before the run stops with InvariantViolation;
    f_bound_factor scales the a-priori speed bound
    max F <= factor * max(max F(0), coth(rho_minus(0)/2)).
    """

    h_convex_tol: float = 1e-6
    w_drift_rel: float = 1e-4
    f_bound_factor: float = 2.0
    enforce_w_drift: bool = True
    enforce_f_bound: bool = True


@dataclass(frozen=True)
class FlowConfig:
    n: int
    speed: SpeedFunction
    constraint: Constraint
    scheme: str = "radial"  # "radial" | "support"
    t_end: float = 1.0
    cfl: float = 0.4
    dt_fixed: Optional[float] = None
    output_interval: Optional[float] = None
    monitor_refresh: int = 25
    thresholds: MonitorThresholds = field(default_factory=MonitorThresholds)
    renormalize: bool = False
    terminal_deviation: float = 1e-10  # 0 disables convergence termination

    def __post_init__(self):
        if not isinstance(self.n, int) or self.n < 1:
            raise ConfigError("n", f"need integer n >= 1, got {self.n!r}")
        if self.speed.n != self.n:
            raise ConfigError("speed.n", f"speed built for n={self.speed.n}, flow has n={self.n}")
        if self.constraint.kind == "quermass" and self.constraint.k > self.n:
            raise ConfigError("constraint.k", f"need k <= n = {self.n}, got {self.constraint.k}")
        if self.scheme not in ("radial", "support"):
            raise ConfigError("scheme", f"expected 'radial' or 'support', got {self.scheme!r}")
        if not (0.0 < self.cfl <= 1.0):
            raise ConfigError("cfl", f"need 0 < cfl <= 1, got {self.cfl!r}")
        if not (self.t_end > 0.0 and math.isfinite(self.t_end)):
            raise ConfigError("t_end", f"need finite t_end > 0, got {self.t_end!r}")
        if self.dt_fixed is not None and not (0.0 < self.dt_fixed):
            raise ConfigError("dt_fixed", f"need dt_fixed > 0, got {self.dt_fixed!r}")
        if self.output_interval is not None and not (self.output_interval > 0.0):
            raise ConfigError("output_interval", "need a positive interval")
        if self.monitor_refresh < 1:
            raise ConfigError("monitor_refresh", "need a positive step count")
        if self.terminal_deviation < 0.0:
            raise ConfigError("terminal_deviation", "need a nonnegative threshold")
        if self.renormalize and self.scheme != "radial":
            raise ConfigError("renormalize", "drift renormalization needs the radial scheme")


# ---------------------------------------------------------------------------
# run record


@dataclass
class SeriesRow:
    """Monitors of one accepted step (dt = 0 for the initial row).

    rho_minus / rho_plus / the deviation center refresh every
    monitor_refresh steps; other entries are exact per step. jensen_gap is
    the normalized Chebyshev gap 1 - (int E_k)(int Psi) / (|M| int E_k Psi)
    and ek_dispersion the mu-weighted variance of E_k, both recorded in
    volume mode with an elementary-symmetric speed, NaN otherwise.
    """

    t: float
    dt: float
    area: float
    volume: float
    W: tuple
    phi: float
    min_kappa: float
    max_F: float
    min_F: float
    rho_minus: float
    rho_plus: float
    sphere_dev: float
    jensen_gap: float = math.nan
    ek_dispersion: float = math.nan


@dataclass
class FlowRun:
    config: FlowConfig
    state: object  # RadialGraphState or SupportState, matching config.scheme
    t: float = 0.0
    steps: int = 0
    series: list = field(default_factory=list)
    outputs: list = field(default_factory=list)  # (t, native-gauge state)
    graph_outputs: list = field(default_factory=list)  # (t, radial-graph state)
    termination: Optional[str] = None
    h_convex_initial: bool = True
    flags: dict = field(default_factory=dict)
    # per-run caches (not part of the public record)
    _w_ref: float = field(default=math.nan, repr=False)
    _f_bound: float = field(default=math.inf, repr=False)
    _inv: object = field(default=None, repr=False)
    _center: object = field(default=None, repr=False)
    _rho: tuple = field(default=(math.nan, math.nan), repr=False)
    _out_idx: int = field(default=0, repr=False)


# ---------------------------------------------------------------------------
# per-state evaluation


@dataclass
class _Eval:
    """Everything the stepper and the monitors need from one state."""

    rhs: np.ndarray
    phi: float
    psi: np.ndarray
    kappa: np.ndarray
    area_density: np.ndarray
    max_F: float
    min_F: float
    diffusion: float
    graph: RadialGraphState


def _phi_from(weights, kappa, density, psi, k):
    dmu = weights * density
    ek = ek_normalized(kappa, k)
    den = float(ek @ dmu)
    if den <= 0.0:
        raise DegenerateDenominator(f"int E_{k} dmu = {den!r} is not positive")
    return float((ek * psi) @ dmu) / den


def _eval_radial(state: RadialGraphState, cfg: FlowConfig) -> _Eval:
    f = curvature(state, cfg.speed)
    ph = _phi_from(weights_for(state), f.kappa, f.area_density, f.Psi, cfg.constraint.weight_order)
    rhs_arr = (ph - f.Psi) * f.v
    D = float(np.max(f.dPsi_sum / np.sinh(state.r) ** 2))
    return _Eval(
        rhs=rhs_arr,
        phi=ph,
        psi=f.Psi,
        kappa=f.kappa,
        area_density=f.area_density,
        max_F=float(np.max(f.F)),
        min_F=float(np.min(f.F)),
        diffusion=D,
        graph=state,
    )


def _eval_support(state: SupportState, cfg: FlowConfig) -> _Eval:
    geo = support_geometry(state)
    kappa = 1.0 / geo.lam
    fdual = eval_dual(cfg.speed, geo.lam)
    psi = fdual ** (-cfg.speed.alpha)
    ph = _phi_from(weights_for(state), kappa, geo.area_density, psi, cfg.constraint.weight_order)
    rhs_arr = np.sqrt(geo.q * geo.p) * (ph - psi)
    # dt bound: the highest-order term of d(rhs)/d(s'') is
    # sqrt(qp) dPsi/dlam (p/q)^{3/2} and dPsi/dlam_i = dPsi/dkappa_i kappa_i^2
    _, dpsi = psi_and_dpsi(cfg.speed, kappa)
    D = float(np.max(geo.p**2 / geo.q * np.sum(dpsi * kappa**2, axis=-1)))
    return _Eval(
        rhs=rhs_arr,
        phi=ph,
        psi=psi,
        kappa=kappa,
        area_density=geo.area_density,
        max_F=float(np.max(1.0 / fdual)),
        min_F=float(np.min(1.0 / fdual)),
        diffusion=D,
        graph=None,  # filled on demand (conversion is not free)
    )


def _evaluate(state, cfg: FlowConfig) -> _Eval:
    if isinstance(state, SupportState):
        return _eval_support(state, cfg)
    return _eval_radial(state, cfg)


def phi(state, config: FlowConfig) -> float:
    """Value of the nonlocal term on this state."""
    return _evaluate(state, config).phi


def rhs(state, config: FlowConfig) -> np.ndarray:
    """Gauge velocity: dr/dt on radial graphs, ds/dt on support states."""
    return _evaluate(state, config).rhs


def _replace_profile(state, values: np.ndarray):
    if isinstance(state, SupportState):
        return SupportState(n=state.n, mode=state.mode, theta=state.theta, s=values)
    return RadialGraphState(n=state.n, mode=state.mode, theta=state.theta, r=values)


def _profile(state) -> np.ndarray:
    return state.s if isinstance(state, SupportState) else state.r


# ---------------------------------------------------------------------------
# monitors


def _as_graph(state) -> RadialGraphState:
    return state if isinstance(state, RadialGraphState) else graph_from_support(state)


def _graph_of(state, ev: _Eval) -> RadialGraphState:
    if ev.graph is None:
        ev.graph = graph_from_support(state)
    return ev.graph


def _record(run: FlowRun, ev: _Eval, dt: float) -> SeriesRow:
    cfg = run.config
    n = cfg.n
    state = run.state
    graph = _graph_of(state, ev)
    w = weights_for(state)
    wg = weights_for(graph)
    volume = float(wg @ sinh_power_antiderivative(graph.r, n))
    W = quermass_from_parts(n, w, ev.kappa, ev.area_density, volume)

    if run._center is None or (run.steps > 0 and run.steps % cfg.monitor_refresh == 0):
        rr = radii(graph, x0=run._center)
        run._center = rr.center_minus
        run._rho = (rr.rho_minus, rr.rho_plus)

    k = cfg.constraint.weight_order
    r_star = run._inv(float(W[k])) if run._inv is not None else math.nan
    dev, _ = deviation_from_center(graph, run._center, r_star)

    jensen = dispersion = math.nan
    if cfg.constraint.kind == "volume" and isinstance(cfg.speed.kind, ElemSymRoot):
        ks = cfg.speed.kind.k
        dmu = w * ev.area_density
        ek = ek_normalized(ev.kappa, ks)
        a = float((ek * ev.psi) @ dmu)
        b = float(ek @ dmu)
        c = float(ev.psi @ dmu)
        m0 = float(np.sum(dmu))
        jensen = 1.0 - (b * c) / (a * m0) if a > 0.0 and m0 > 0.0 else math.nan
        mean = b / m0
        dispersion = float(((ek - mean) ** 2) @ dmu)

    row = SeriesRow(
        t=run.t,
        dt=dt,
        area=float(w @ ev.area_density),
        volume=volume,
        W=tuple(float(x) for x in W),
        phi=ev.phi,
        min_kappa=float(np.min(ev.kappa)),
        max_F=ev.max_F,
        min_F=ev.min_F,
        rho_minus=run._rho[0],
        rho_plus=run._rho[1],
        sphere_dev=dev,
        jensen_gap=jensen,
        ek_dispersion=dispersion,
    )
    run.series.append(row)
    return row


def _check_invariants(run: FlowRun, row: SeriesRow) -> None:
    th = run.config.thresholds
    k = run.config.constraint.weight_order
    if th.enforce_w_drift and math.isfinite(run._w_ref):
        drift = abs(row.W[k] - run._w_ref) / max(abs(run._w_ref), 1e-300)
        if drift > th.w_drift_rel:
            run.termination = INVARIANT_VIOLATION
            run.flags["violation"] = (
                f"preserved W_{k} drifted by {drift:.3e} (limit {th.w_drift_rel:.1e})"
            )
            return
    if th.enforce_f_bound and run.h_convex_initial and row.max_F > run._f_bound:
        run.termination = INVARIANT_VIOLATION
        run.flags["violation"] = (
            f"max F = {row.max_F:.6g} exceeded the a-priori bound {run._f_bound:.6g}"
        )


# ---------------------------------------------------------------------------
# driver


def start(config: FlowConfig, initial_state) -> FlowRun:
    """Prepare a run: coerce the state into the scheme's gauge, cache the
    reference values, and record the t = 0 row and output."""
    state = initial_state
    if config.scheme == "support" and isinstance(state, RadialGraphState):
        state = support_from_graph(state)
    elif config.scheme == "radial" and isinstance(state, SupportState):
        state = graph_from_support(state)
    if state.n != config.n:
        raise ConfigError("n", f"state has n={state.n}, config has n={config.n}")

    run = FlowRun(config=config, state=state)
    ev = _evaluate(state, config)
    floor = 1.0 - config.thresholds.h_convex_tol
    run.h_convex_initial = bool(np.min(ev.kappa) >= floor)
    if not run.h_convex_initial:
        run.flags["h_convex_monitors_disabled"] = True

    graph = _graph_of(state, ev)
    rr = radii(graph)
    run._center = rr.center_minus
    run._rho = (rr.rho_minus, rr.rho_plus)
    k = config.constraint.weight_order
    lo = max(0.05, 0.3 * rr.rho_minus)
    hi = 2.0 * rr.rho_plus + 0.5
    run._inv = CachedBallInverse(config.n, k, r_lo=lo, r_hi=hi)
    run._f_bound = config.thresholds.f_bound_factor * max(
        ev.max_F, 1.0 / math.tanh(max(rr.rho_minus, 1e-12) / 2.0)
    )

    row = _record(run, ev, dt=0.0)
    run._w_ref = row.W[k]
    run.outputs.append((0.0, state))
    run.graph_outputs.append((0.0, graph))
    return run


def _next_stop(run: FlowRun) -> float:
    cfg = run.config
    if cfg.output_interval is None:
        return cfg.t_end
    t_out = (run._out_idx + 1) * cfg.output_interval
    return min(t_out, cfg.t_end)


def step(run: FlowRun) -> SeriesRow:
    """Advance one accepted RK4 step; raises StepCollapse if halving fails."""
    cfg = run.config
    state = run.state
    y = _profile(state)
    e1 = _evaluate(state, cfg)

    dt = cfg.dt_fixed if cfg.dt_fixed is not None else cfg.cfl * state.h**2 / max(
        e1.diffusion, 1e-300
    )
    stop = _next_stop(run)
    dt = min(dt, stop - run.t)

    floor = 1.0 - 10.0 * cfg.thresholds.h_convex_tol
    trial = trial_ev = None
    while dt >= _DT_FLOOR:
        try:
            k1 = e1.rhs
            e2 = _evaluate(_replace_profile(state, y + 0.5 * dt * k1), cfg)
            e3 = _evaluate(_replace_profile(state, y + 0.5 * dt * e2.rhs), cfg)
            e4 = _evaluate(_replace_profile(state, y + dt * e3.rhs), cfg)
            cand = _replace_profile(
                state, y + dt / 6.0 * (k1 + 2.0 * e2.rhs + 2.0 * e3.rhs + e4.rhs)
            )
            cand_ev = _evaluate(cand, cfg)
            if run.h_convex_initial and float(np.min(cand_ev.kappa)) < floor:
                raise _Reject
        except _REJECTABLE:
            dt *= 0.5
            continue
        trial, trial_ev = cand, cand_ev
        break
    if trial is None:
        raise StepCollapse(f"time step collapsed below {_DT_FLOOR} at t = {run.t:.6g}")

    run.state = trial
    t_new = run.t + dt
    if abs(t_new - stop) < _ARRIVAL_EPS:
        t_new = stop
    run.t = t_new
    run.steps += 1
    row = _record(run, trial_ev, dt=dt)
    _check_invariants(run, row)
    return row


def _renormalize(run: FlowRun) -> None:
    """One Newton correction of the preserved quermassintegral by a uniform
    radial offset (radial scheme only, applied at output times)."""
    cfg = run.config
    k = cfg.constraint.weight_order
    n = cfg.n
    state = run.state
    f = curvature(state)
    w = weights_for(state)
    wk = quermass_from_parts(
        n, w, f.kappa, f.area_density, float(w @ sinh_power_antiderivative(state.r, n))
    )[k]
    # d W_k / d(offset) = ((n+1-k)/(n+1)) * int E_k dmu / v
    slope = (n + 1 - k) / (n + 1) * float(
        w @ (ek_normalized(f.kappa, k) * np.sinh(state.r) ** n)
    )
    if slope <= 0.0:
        return
    delta = (run._w_ref - wk) / slope
    run.state = _replace_profile(state, state.r + delta)
    run.flags["renormalize_count"] = run.flags.get("renormalize_count", 0) + 1
    run.flags["renormalize_last_offset"] = delta


def _confirmed_converged(run: FlowRun, row: SeriesRow) -> bool:
    cfg = run.config
    if cfg.terminal_deviation <= 0.0 or row.sphere_dev >= cfg.terminal_deviation:
        return False
    # re-center before trusting a reading this small
    graph = _as_graph(run.state)
    rr = radii(graph, x0=run._center)
    run._center = rr.center_minus
    run._rho = (rr.rho_minus, rr.rho_plus)
    k = cfg.constraint.weight_order
    r_star = run._inv(row.W[k])
    dev, _ = deviation_from_center(graph, run._center, r_star)
    run.series[-1].sphere_dev = dev
    run.series[-1].rho_minus, run.series[-1].rho_plus = run._rho
    return dev < cfg.terminal_deviation


def run_flow(config: FlowConfig, initial_state) -> FlowRun:
    """Integrate from the initial body until t_end, convergence to a sphere,
    an invariant violation, or step collapse (whichever comes first)."""
    run = start(config, initial_state)
    while run.termination is None:
        try:
            row = step(run)
        except StepCollapse as exc:
            run.termination = STEP_COLLAPSE
            run.flags["collapse"] = str(exc)
            break

        at_output = (
            config.output_interval is not None
            and abs(run.t - (run._out_idx + 1) * config.output_interval) < _ARRIVAL_EPS
        )
        if at_output:
            run._out_idx += 1
            if config.renormalize:
                _renormalize(run)
            run.outputs.append((run.t, run.state))
            run.graph_outputs.append((run.t, _as_graph(run.state)))

        if run.termination is not None:  # invariant violation inside step()
            break
        if _confirmed_converged(run, row):
            run.termination = CONVERGED
        elif run.t >= config.t_end - _ARRIVAL_EPS:
            run.termination = TIME_END

    if not run.outputs or run.outputs[-1][0] != run.t:
        run.outputs.append((run.t, run.state))
        run.graph_outputs.append((run.t, _as_graph(run.state)))
    return run


# ---------------------------------------------------------------------------
# series export


def series_columns(n: int) -> list:
    return (
        ["t", "area", "volume"]
        + [f"W_{j}" for j in range(n + 2)]
        + ["phi", "minKappa", "maxF", "rhoMinus", "rhoPlus", "sphereDev"]
    )


def series_table(run: FlowRun) -> np.ndarray:
    """Series rows as a dense float table matching series_columns(n)."""
    rows = []
    for row in run.series:
        rows.append(
            [row.t, row.area, row.volume]
            + list(row.W)
            + [row.phi, row.min_kappa, row.max_F, row.rho_minus, row.rho_plus, row.sphere_dev]
        )
    return np.array(rows, dtype=float)
