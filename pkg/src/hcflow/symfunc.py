"""Admissible curvature speed functions and their calculus.

A speed function f is a smooth symmetric function of the principal curvatures
kappa = (kappa_1, ..., kappa_n) on the open positive cone, homogeneous of
degree one, normalized to f(1,...,1) = 1, strictly increasing in each
argument, inverse concave, and with dual vanishing on the cone boundary. The
flow speed is Psi = f(kappa)^alpha.

Three families are shipped:

* ``ElemSymRoot(k)``   -- E_k^{1/k}, the k-th root of the normalized
  elementary symmetric polynomial (k=1 is the mean curvature, k=n the
  n-th root of Gauss curvature);
* ``PowerMean(r)``     -- ((kappa_1^r + ... + kappa_n^r)/n)^{1/r}, with the
  geometric mean at r = 0;
* ``Product(a, b, sigma)`` -- a^sigma * b^(1-sigma) of two admissible bases.

Everything here is a pure function of immutable inputs. Array arguments take
shape (..., n) and broadcast over leading axes; Hessian-level calculus
(`derivatives`, `check_admissible`) works point-wise.
"""

from __future__ import annotations

import math
import re
from dataclasses import dataclass, field
from typing import Union

import numpy as np

from .errors import ConfigError, DomainError, UnknownSpeed

__all__ = [
    "ElemSymRoot",
    "PowerMean",
    "Product",
    "SpeedFunction",
    "DerivativeBundle",
    "AdmissibilityReport",
    "eval_f",
    "eval_dual",
    "derivatives",
    "psi_and_dpsi",
    "psi_gradient_sum",
    "check_admissible",
    "default_samples",
    "ek_normalized",
    "parse_speed_name",
    "resolve_speed",
    "speed_name",
    "shipped_speed_names",
"DEGENERATE_PAIR_RTOL",
]

# Relative eigenvalue-gap threshold below which the divided difference
# (f_i - f_k)/(kappa_i - kappa_k) switches to its analytic limit.
DEGENERATE_PAIR_RTOL = 1e-8


# ---------------------------------------------------------------------------
# kinds


@dataclass(frozen=True)
class ElemSymRoot:
    k: int


@dataclass(frozen=True)
class PowerMean:
    r: float


@dataclass(frozen=True)
class Product:
    base1: "Kind"
    base2: "Kind"
    sigma: float


Kind = Union[ElemSymRoot, PowerMean, Product]


def _validate_kind(kind: Kind, n: int, path: str = "speed.kind") -> None:
    if isinstance(kind, ElemSymRoot):
        if not isinstance(kind.k, int) or not 1 <= kind.k <= n:
            raise ConfigError(f"{path}.k", f"need integer 1 <= k <= n={n}, got {kind.k!r}")
    elif isinstance(kind, PowerMean):
        if not math.isfinite(kind.r):
            raise ConfigError(f"{path}.r", f"need finite exponent, got {kind.r!r}")
    elif isinstance(kind, Product):
        if not 0.0 < kind.sigma < 1.0:
            raise ConfigError(f"{path}.sigma", f"need sigma in (0,1), got {kind.sigma!r}")
        _validate_kind(kind.base1, n, path + ".base1")
        _validate_kind(kind.base2, n, path + ".base2")
    else:
        raise ConfigError(path, f"unknown speed kind {kind!r}")


@dataclass(frozen=True)
class SpeedFunction:
    """A named curvature function with dimension and power.

    Evaluation domain is the open positive cone; `alpha` is the power applied
    when forming the flow speed Psi = f^alpha.
    """

    kind: Kind
    n: int
    alpha: float = 1.0

    def __post_init__(self):
        if not isinstance(self.n, int) or self.n < 1:
            raise ConfigError("n", f"need integer n >= 1, got {self.n!r}")
        if not (self.alpha > 0 and math.isfinite(self.alpha)):
            raise ConfigError("speed.alpha", f"need alpha > 0, got {self.alpha!r}")
        _validate_kind(self.kind, self.n)


@dataclass(frozen=True)
class DerivativeBundle:
    """Point values of f, its gradient and Hessian, and the divided-difference
    coefficients (f_i - f_k)/(kappa_i - kappa_k) used by the second derivative
    of the matrix function F.

    `off_diag[i, k]` holds the divided difference, with the analytic limit
    hess[i, i] - hess[i, k] substituted when |kappa_i - kappa_k| falls below
    DEGENERATE_PAIR_RTOL * max(kappa). The diagonal is zero by convention.
    """

    value: float
    grad: np.ndarray
    hess: np.ndarray
    off_diag: np.ndarray


# ---------------------------------------------------------------------------
# elementary symmetric polynomials


def _esp_all(kappa: np.ndarray, kmax: int) -> np.ndarray:
    """Elementary symmetric polynomials e_0..e_kmax of the last axis.

    Incremental product recursion (expanding prod_i (1 + kappa_i t)): all
    additions of positive terms for kappa > 0, O(n*kmax), no cancellation.
    Returns shape kappa.shape[:-1] + (kmax+1,).
    """
    n = kappa.shape[-1]
    out = np.zeros(kappa.shape[:-1] + (kmax + 1,), dtype=float)
    out[..., 0] = 1.0
    for i in range(n):
        ki = kappa[..., i]
        top = min(i + 1, kmax)
        for j in range(top, 0, -1):
            out[..., j] += ki * out[..., j - 1]
    return out


def _esp_leave_one_out(kappa: np.ndarray, i: int, kmax: int) -> np.ndarray:
    """e_0..e_kmax of kappa with entry i removed (vectorized over leading axes)."""
    reduced = np.delete(kappa, i, axis=-1)
    return _esp_all(reduced, kmax)


def ek_normalized(kappa: np.ndarray, k: int) -> np.ndarray:
    """Normalized k-th mean curvature E_k = e_k(kappa) / C(n,k); E_0 = 1."""
    kappa = np.asarray(kappa, dtype=float)
    n = kappa.shape[-1]
    if k == 0:
        return np.ones(kappa.shape[:-1], dtype=float)
    if not 0 <= k <= n:
        raise DomainError(f"E_k needs 0 <= k <= n={n}, got k={k}")
    e = _esp_all(kappa, k)
    return e[..., k] / math.comb(n, k)


# ---------------------------------------------------------------------------
# values and gradients (vectorized), hessians (point-wise)


def _kind_value(kind: Kind, kappa: np.ndarray) -> np.ndarray:
    n = kappa.shape[-1]
    if isinstance(kind, ElemSymRoot):
        Ek = ek_normalized(kappa, kind.k)
        return Ek ** (1.0 / kind.k)
    if isinstance(kind, PowerMean):
        r = kind.r
        if r == 0.0:
            return np.exp(np.mean(np.log(kappa), axis=-1))
        return np.mean(kappa**r, axis=-1) ** (1.0 / r)
    if isinstance(kind, Product):
        return _kind_value(kind.base1, kappa) ** kind.sigma * _kind_value(
            kind.base2, kappa
        ) ** (1.0 - kind.sigma)
    raise DomainError(f"unknown kind {kind!r}")


def _kind_grad(kind: Kind, kappa: np.ndarray) -> np.ndarray:
    n = kappa.shape[-1]
    if isinstance(kind, ElemSymRoot):
        k = kind.k
        binom = math.comb(n, k)
        dE = np.empty_like(kappa)
        for i in range(n):
            dE[..., i] = _esp_leave_one_out(kappa, i, k - 1)[..., k - 1] / binom
        Ek = ek_normalized(kappa, k)
        return (1.0 / k) * Ek[..., None] ** (1.0 / k - 1.0) * dE
    if isinstance(kind, PowerMean):
        r = kind.r
        f = _kind_value(kind, kappa)
        if r == 0.0:
            return f[..., None] / (n * kappa)
        return f[..., None] ** (1.0 - r) * kappa ** (r - 1.0) / n
    if isinstance(kind, Product):
        v1 = _kind_value(kind.base1, kappa)
        v2 = _kind_value(kind.base2, kappa)
        g1 = _kind_grad(kind.base1, kappa)
        g2 = _kind_grad(kind.base2, kappa)
        f = v1**kind.sigma * v2 ** (1.0 - kind.sigma)
        return f[..., None] * (
            kind.sigma * g1 / v1[..., None] + (1.0 - kind.sigma) * g2 / v2[..., None]
        )
    raise DomainError(f"unknown kind {kind!r}")


def _kind_hess(kind: Kind, kappa: np.ndarray) -> np.ndarray:
    """Hessian at a single point kappa of shape (n,)."""
    n = kappa.shape[-1]
    if isinstance(kind, ElemSymRoot):
        k = kind.k
        binom = math.comb(n, k)
        Ek = float(ek_normalized(kappa, k))
        dE = np.array(
            [_esp_leave_one_out(kappa, i, k - 1)[k - 1] / binom for i in range(n)]
        )
        ddE = np.zeros((n, n))
        if k >= 2:
            for i in range(n):
                for j in range(i + 1, n):
                    reduced = np.delete(kappa, (i, j))
                    ddE[i, j] = ddE[j, i] = _esp_all(reduced, k - 2)[k - 2] / binom
        p = 1.0 / k
        return (
            p * (p - 1.0) * Ek ** (p - 2.0) * np.outer(dE, dE)
            + p * Ek ** (p - 1.0) * ddE
        )
    if isinstance(kind, PowerMean):
        r = kind.r
        f = float(_kind_value(kind, kappa))
        # The r = 0 (geometric-mean) Hessian is the r -> 0 limit of the same
        # expression, so one formula covers the whole family.
        h = (1.0 - r) * f ** (1.0 - 2.0 * r) * np.outer(
            kappa ** (r - 1.0), kappa ** (r - 1.0)
        ) / n**2
        h[np.diag_indices(n)] += (r - 1.0) * f ** (1.0 - r) * kappa ** (r - 2.0) / n
        return h
    if isinstance(kind, Product):
        v1 = float(_kind_value(kind.base1, kappa))
        v2 = float(_kind_value(kind.base2, kappa))
        g1 = _kind_grad(kind.base1, kappa)
        g2 = _kind_grad(kind.base2, kappa)
        h1 = _kind_hess(kind.base1, kappa)
        h2 = _kind_hess(kind.base2, kappa)
        s = kind.sigma
        f = v1**s * v2 ** (1.0 - s)
        w = s * g1 / v1 + (1.0 - s) * g2 / v2  # grad log f
        m = s * (h1 / v1 - np.outer(g1, g1) / v1**2) + (1.0 - s) * (
            h2 / v2 - np.outer(g2, g2) / v2**2
        )
        return f * (m + np.outer(w, w))
    raise DomainError(f"unknown kind {kind!r}")


# ---------------------------------------------------------------------------
# public operations


def _require_positive(arr: np.ndarray, what: str) -> np.ndarray:
    arr = np.asarray(arr, dtype=float)
    if arr.shape[-1] < 1:
        raise DomainError(f"{what}: empty argument")
    if not np.all(np.isfinite(arr)) or np.any(arr <= 0.0):
        raise DomainError(f"{what}: arguments must be finite and strictly positive")
    return arr


def eval_f(spec: SpeedFunction, kappa) -> np.ndarray:
    """f(kappa). kappa has shape (..., n); broadcasts over leading axes."""
    kappa = _require_positive(kappa, "eval_f")
    if kappa.shape[-1] != spec.n:
        raise DomainError(f"eval_f: expected {spec.n} curvatures, got {kappa.shape[-1]}")
    return _kind_value(spec.kind, kappa)


def eval_dual(spec: SpeedFunction, z) -> np.ndarray:
    """Dual function f_*(z) = 1 / f(1/z_1, ..., 1/z_n)."""
    z = _require_positive(z, "eval_dual")
    if z.shape[-1] != spec.n:
        raise DomainError(f"eval_dual: expected {spec.n} arguments, got {z.shape[-1]}")
    return 1.0 / _kind_value(spec.kind, 1.0 / z)


def grad_f(spec: SpeedFunction, kappa) -> np.ndarray:
    """Gradient of f, shape (..., n). Degree-zero homogeneous."""
    kappa = _require_positive(kappa, "grad_f")
    return _kind_grad(spec.kind, kappa)


def derivatives(spec: SpeedFunction, kappa) -> DerivativeBundle:
    """Value, gradient, Hessian and divided-difference coefficients at one point."""
    kappa = _require_positive(kappa, "derivatives")
    if kappa.ndim != 1 or kappa.shape[0] != spec.n:
        raise DomainError(f"derivatives: expected a single point of {spec.n} curvatures")
    value = float(_kind_value(spec.kind, kappa))
    grad = _kind_grad(spec.kind, kappa)
    hess = _kind_hess(spec.kind, kappa)
    hess = 0.5 * (hess + hess.T)  # enforce exact symmetry of assembly

    n = spec.n
    off = np.zeros((n, n))
    tol = DEGENERATE_PAIR_RTOL * float(np.max(kappa))
    for i in range(n):
        for k in range(n):
            if i == k:
                continue
            gap = kappa[i] - kappa[k]
            if abs(gap) < tol:
                off[i, k] = hess[i, i] - hess[i, k]
            else:
                off[i, k] = (grad[i] - grad[k]) / gap
    return DerivativeBundle(value=value, grad=grad, hess=hess, off_diag=off)


def psi_and_dpsi(spec: SpeedFunction, kappa):
    """Psi = f^alpha and its gradient alpha f^(alpha-1) grad f, vectorized."""
    kappa = _require_positive(kappa, "psi_and_dpsi")
    f = _kind_value(spec.kind, kappa)
    g = _kind_grad(spec.kind, kappa)
    psi = f**spec.alpha
    dpsi = spec.alpha * f[..., None] ** (spec.alpha - 1.0) * g
    return psi, dpsi


def psi_gradient_sum(spec: SpeedFunction, kappa) -> np.ndarray:
    """sum_i dPsi/dkappa_i, the parabolicity/diffusion scale used by step control."""
    _, dpsi = psi_and_dpsi(spec, kappa)
    return np.sum(dpsi, axis=-1)


# ---------------------------------------------------------------------------
# admissibility certification


def default_samples(
    n: int, count: int = 1000, seed: int = 0, include_near_boundary: bool = True
) -> np.ndarray:
    """Randomized cone sample points, log-uniform over ~4 decades, plus a
    handful of near-boundary points (one curvature pushed to 1e-4 of the rest)."""
    rng = np.random.default_rng(seed)
    pts = np.exp(rng.uniform(np.log(1e-2), np.log(1e2), size=(count, n)))
    if include_near_boundary and n > 1:
        extra = []
        for i in range(n):
            base = np.exp(rng.uniform(-0.5, 0.5, size=n))
            base[i] *= 1e-4
            extra.append(base)
        pts = np.vstack([pts, extra])
    return pts


@dataclass
class AdmissibilityReport:
    """check_admissible output. The four condition labels follow the
    inverse-concavity characterization:

    a) matrix (hess + 2 diag(grad/kappa)) positive semidefinite,
    b) pairwise (f_i - f_k)/(kappa_i - kappa_k) + f_i/kappa_k + f_k/kappa_i >= 0,
    c) sum_i f_i kappa_i^2 >= f^2,
    d) dual values vanish along boundary-approach sequences.
    """

    n_samples: int
    tol: float
    a_min: float
    b_min: float
    c_min: float
    a_ok: bool
    b_ok: bool
    c_ok: bool
    d_ok: bool
    monotone_ok: bool
    normalized_ok: bool
    boundary_t: list = field(default_factory=list)
    boundary_values: list = field(default_factory=list)
    boundary_slope: float = float("nan")

    @property
    def passed(self) -> bool:
        return (
            self.a_ok
            and self.b_ok
            and self.c_ok
            and self.d_ok
            and self.monotone_ok
            and self.normalized_ok
        )

    def rows(self):
        """(label, statistic, ok) rows for table rendering."""
        return [
            ("a: concavity matrix min eig", self.a_min, self.a_ok),
            ("b: pairwise quotient bound", self.b_min, self.b_ok),
            ("c: sum f_i kappa_i^2 - f^2", self.c_min, self.c_ok),
            ("d: dual boundary decay slope", self.boundary_slope, self.d_ok),
            ("gradient strictly positive", float("nan"), self.monotone_ok),
            ("f(1,...,1) = 1", float("nan"), self.normalized_ok),
        ]


def check_admissible(
    spec: SpeedFunction, samples=None, tol: float = 1e-9, seed: int = 0
) -> AdmissibilityReport:
    """Numerically certify the standing assumptions on sampled cone points.

    Report-only: never raises for an inadmissible function.
    """
    n = spec.n
    if samples is None:
        samples = default_samples(n, seed=seed)
    samples = np.atleast_2d(np.asarray(samples, dtype=float))

    a_min = math.inf
    b_min = math.inf
    c_min = math.inf
    monotone_ok = True
    for kappa in samples:
        b = derivatives(spec, kappa)
        mat = b.hess + 2.0 * np.diag(b.grad / kappa)
        a_min = min(a_min, float(np.linalg.eigvalsh(mat)[0]))
        if n > 1:
            for i in range(n):
                for k in range(i + 1, n):
                    q = b.off_diag[i, k] + b.grad[i] / kappa[k] + b.grad[k] / kappa[i]
                    b_min = min(b_min, float(q))
        c_min = min(c_min, float(np.dot(b.grad, kappa**2) - b.value**2))
        if np.any(b.grad <= 0.0):
            monotone_ok = False
    if n == 1:
        b_min = 0.0  # vacuous

    # normalization f(1,...,1) = 1
    normalized_ok = abs(float(eval_f(spec, np.ones(n))) - 1.0) <= 1e-12

    # condition (d): dual along boundary-approach sequences. The canonical
    # sequence sends one curvature to zero with the rest pinned at 1; a couple
    # of randomized base points guard against direction-dependent behaviour.
    t_seq = [1e-2, 1e-4, 1e-6]
    rng = np.random.default_rng(seed + 1)
    d_ok = True
    slope_min = math.inf
    rec_t, rec_v = [], []
    bases = [np.ones(n)]
    if n > 1:
        bases += [np.exp(rng.uniform(-0.5, 0.5, size=n)) for _ in range(3)]
    for base in bases:
        for axis in range(n):
            vals = []
            for t in t_seq:
                z = base.copy()
                z[axis] = t * base[axis]
                vals.append(float(eval_dual(spec, z)))
            decreasing = all(vals[i + 1] < vals[i] for i in range(len(vals) - 1))
            # scale-free decay witness: fitted power f_* ~ t^p, p > 0
            p = np.polyfit(np.log(t_seq), np.log(vals), 1)[0]
            slope_min = min(slope_min, float(p))
            if not decreasing or p < 0.05:
                d_ok = False
            if axis == 0 and base is bases[0]:
                rec_t, rec_v = list(t_seq), vals

    return AdmissibilityReport(
        n_samples=len(samples),
        tol=tol,
        a_min=a_min,
        b_min=b_min,
        c_min=c_min,
        a_ok=a_min >= -tol,
        b_ok=b_min >= -tol,
        c_ok=c_min >= -tol,
        d_ok=d_ok,
        monotone_ok=monotone_ok,
        normalized_ok=normalized_ok,
        boundary_t=rec_t,
        boundary_values=rec_v,
        boundary_slope=slope_min,
    )


# ---------------------------------------------------------------------------
# name strings


_NAME_RE = re.compile(r"^\s*([A-Za-z_][A-Za-z_0-9]*)\s*(?:\((.*)\))?\s*$", re.S)


def _split_args(body: str) -> list[str]:
    out, depth, cur = [], 0, []
    for ch in body:
        if ch == "(":
            depth += 1
        elif ch == ")":
            depth -= 1
        if ch == "," and depth == 0:
            out.append("".join(cur))
            cur = []
        else:
            cur.append(ch)
    if cur or out:
        out.append("".join(cur))
    return [a.strip() for a in out]


def parse_speed_name(name: str) -> Kind:
    """Parse "Ek_root(k)" / "power_mean(r)" / "product(a,b,sigma)" strings."""
    m = _NAME_RE.match(name)
    if not m:
        raise UnknownSpeed(name)
    head, body = m.group(1), m.group(2)
    args = _split_args(body) if body is not None else []
    try:
        if head == "Ek_root":
            (karg,) = args
            return ElemSymRoot(int(karg))
        if head == "power_mean":
            (rarg,) = args
            return PowerMean(float(rarg))
        if head == "product":
            a, b, sarg = args
            return Product(parse_speed_name(a), parse_speed_name(b), float(sarg))
    except UnknownSpeed:
        raise
    except (ValueError, TypeError) as exc:
        raise UnknownSpeed(name, f"bad arguments ({exc})") from exc
    raise UnknownSpeed(name)


def speed_name(kind: Kind) -> str:
    """Inverse of parse_speed_name, for reports and manifests."""
    if isinstance(kind, ElemSymRoot):
        return f"Ek_root({kind.k})"
    if isinstance(kind, PowerMean):
        return f"power_mean({kind.r:g})"
    if isinstance(kind, Product):
        return f"product({speed_name(kind.base1)},{speed_name(kind.base2)},{kind.sigma:g})"
    raise UnknownSpeed(repr(kind))


def _enforce_shipped_domain(kind: Kind, path: str = "speed.name") -> None:
    if isinstance(kind, PowerMean) and kind.r < 0.0:
        raise ConfigError(path, f"power_mean exponent must be >= 0, got {kind.r:g}")
    if isinstance(kind, Product):
        _enforce_shipped_domain(kind.base1, path)
        _enforce_shipped_domain(kind.base2, path)


def resolve_speed(
    name: str, n: int, alpha: float, allow_inadmissible: bool = False
) -> SpeedFunction:
    """Build a SpeedFunction from a config name string.

    Production configs reject exponents outside the admissible family
    (power_mean needs r >= 0); `allow_inadmissible` lifts that restriction so
    certification tooling can examine deliberately bad functions.
    """
    kind = parse_speed_name(name)
    if not allow_inadmissible:
        _enforce_shipped_domain(kind)
    return SpeedFunction(kind=kind, n=n, alpha=alpha)


def shipped_speed_names(n: int) -> list[str]:
    """The curated speed list used by the sphere-stationarity matrix."""
    names = [f"Ek_root({k})" for k in range(1, n + 1)]
    names += ["power_mean(0)", "power_mean(2)"]
    names.append("product(power_mean(2),Ek_root(1),0.5)")
    return names
