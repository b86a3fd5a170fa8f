"""Parameter choice and deviation bound for the thresholded mean.

Given a confidence level ``delta``, a tuning constant ``mu`` and a known
bound ``v`` on the directional variance, :func:`derive_params` returns the
shrinkage scale ``lam`` that the thresholded mean should use, together with
the auxiliary constants ``a``, ``b`` and ``beta`` that enter the bound.
:func:`bound_full` evaluates the four-term high-probability bound on
``||m_hat - m||`` from higher-moment information, and
:func:`bound_second_moment_only` evaluates the cruder envelope that needs
only second moments.
"""

import math
from dataclasses import dataclass, field
from typing import Dict, Optional, Sequence

import numpy as np

from ._rng import make_rng
from .estimators import as_sample

__all__ = [
    "g1",
    "g2",
    "ConfidenceSpec",
    "VarianceInfo",
    "MomentProfile",
    "EstimatorParams",
    "BoundReport",
    "derive_params",
    "bound_full",
    "bound_second_moment_only",
    "cauchy_schwarz_mixed_bound",
    "top_eigenvalue",
    "plug_in_variance",
    "DEFAULT_CP_GRID",
    "DEFAULT_CPP_GRID",
]

DEFAULT_CP_GRID = (1.0, 1.5, 2.0, 2.5, 3.0, 4.0, 5.0)
DEFAULT_CPP_GRID = (2.0, 2.5, 3.0, 4.0, 5.0, 6.0)

_SERIES_CUTOFF = 1e-3
_SERIES_TERMS = 12
# 1/(k+1)! and 2/(k+2)!, k = 0..11
_G1_COEF = [1.0 / math.factorial(k + 1) for k in range(_SERIES_TERMS)]
_G2_COEF = [2.0 / math.factorial(k + 2) for k in range(_SERIES_TERMS)]


def _horner(coef, t):
    acc = np.zeros_like(t)
    for c in reversed(coef):
        acc = acc * t + c
    return acc


def _checked(t):
    arr = np.asarray(t, dtype=float)
    if not np.all(np.isfinite(arr)):
        raise ValueError("g1/g2 require finite arguments")
    return arr


def g1(t):
    """``(exp(t) - 1) / t``, equal to 1 at ``t = 0``."""
    t = _checked(t)
    small = np.abs(t) < _SERIES_CUTOFF
    safe = np.where(small, 1.0, t)
    with np.errstate(over="ignore"):
        direct = np.expm1(safe) / safe
    out = np.where(small, _horner(_G1_COEF, t), direct)
    return float(out) if out.ndim == 0 else out


def g2(t):
    """``2 (exp(t) - 1 - t) / t**2``, equal to 1 at ``t = 0``."""
    t = _checked(t)
    small = np.abs(t) < _SERIES_CUTOFF
    safe = np.where(small, 1.0, t)
    with np.errstate(over="ignore"):
        direct = 2.0 * (np.expm1(safe) - safe) / (safe * safe)
    out = np.where(small, _horner(_G2_COEF, t), direct)
    return float(out) if out.ndim == 0 else out


def _positive(name, x):
    x = float(x)
    if not (math.isfinite(x) and x > 0):
        raise ValueError(f"{name} must be positive and finite, got {x}")
    return x


@dataclass(frozen=True)
class ConfidenceSpec:
    """Failure probability ``delta`` and tuning constant ``mu``."""

    delta: float = 0.05
    mu: float = 0.25

    def __post_init__(self):
        d = float(self.delta)
        if not (math.isfinite(d) and 0.0 < d < 1.0):
            raise ValueError(f"delta must lie in (0, 1), got {self.delta}")
        _positive("mu", self.mu)

    @property
    def log_inv_delta(self) -> float:
        return -math.log(self.delta)


@dataclass(frozen=True)
class VarianceInfo:
    """Directional variance bound ``v`` and second-moment scale ``T``.

    ``T`` defaults to ``max(trace_second_moment, v)``; an explicit ``T`` must
    dominate both. ``plug_in`` marks values estimated from data rather than
    known a priori; such values carry no coverage guarantee.
    """

    v: float
    trace_second_moment: float
    T: Optional[float] = None
    plug_in: bool = False
    converged: bool = True

    def __post_init__(self):
        _positive("v", self.v)
        tr = float(self.trace_second_moment)
        if not (math.isfinite(tr) and tr >= 0):
            raise ValueError(f"trace_second_moment must be finite and >= 0, got {tr}")
        if self.T is None:
            object.__setattr__(self, "T", max(tr, float(self.v)))
        else:
            T = float(self.T)
            if not math.isfinite(T) or T < self.v:
                raise ValueError(f"T={T} must be finite and >= v={self.v}")
            if T < tr:
                raise ValueError(f"T={T} must be >= trace_second_moment={tr}")


@dataclass(frozen=True)
class MomentProfile:
    """Moment information feeding the higher-order bound terms.

    norm_moments[p] bounds E||X||^p, mixed_moments[p] bounds
    sup_theta E(||X||^p <theta, X - m>_-), and mean_norm bounds ||m||.
    """

    norm_moments: Dict[float, float]
    mean_norm: float
    mixed_moments: Dict[float, float] = field(default_factory=dict)

    def __post_init__(self):
        nm = {float(k): float(v) for k, v in self.norm_moments.items()}
        mm = {float(k): float(v) for k, v in self.mixed_moments.items()}
        for label, table in (("norm_moments", nm), ("mixed_moments", mm)):
            for p, val in table.items():
                if not (math.isfinite(p) and p >= 1):
                    raise ValueError(f"{label}: exponent {p} must be >= 1")
                if not (math.isfinite(val) and val >= 0):
                    raise ValueError(f"{label}[{p}] must be finite and >= 0, got {val}")
        if 2.0 not in nm:
            raise ValueError("norm_moments must contain p = 2")
        mn = float(self.mean_norm)
        if not (math.isfinite(mn) and mn >= 0):
            raise ValueError(f"mean_norm must be finite and >= 0, got {mn}")
        object.__setattr__(self, "norm_moments", nm)
        object.__setattr__(self, "mixed_moments", mm)
        object.__setattr__(self, "mean_norm", mn)

    @classmethod
    def with_default_mixed(cls, norm_moments, mean_norm, variance: VarianceInfo, mixed_moments=None):
        """Fill in ``mixed_moments[1]`` by Cauchy-Schwarz when it is absent."""
        mixed = dict(mixed_moments or {})
        mixed.setdefault(
            1.0,
            cauchy_schwarz_mixed_bound(variance.trace_second_moment, variance.v, mean_norm),
        )
        return cls(norm_moments=dict(norm_moments), mean_norm=mean_norm, mixed_moments=mixed)


@dataclass(frozen=True)
class EstimatorParams:
    lam: float
    beta: float
    a: float
    b: float
    confidence: ConfidenceSpec
    variance: VarianceInfo
    n: int

    @property
    def mu(self) -> float:
        return self.confidence.mu

    @property
    def delta(self) -> float:
        return self.confidence.delta

    def to_dict(self) -> dict:
        return {
            "lambda": self.lam,
            "beta": self.beta,
            "a": self.a,
            "b": self.b,
            "mu": self.confidence.mu,
            "delta": self.confidence.delta,
            "v": self.variance.v,
            "trace_second_moment": self.variance.trace_second_moment,
            "T": self.variance.T,
            "n": self.n,
            "plug_in": self.variance.plug_in,
        }


@dataclass(frozen=True)
class BoundReport:
    """Terms of the deviation bound.

    For ``variant == "second_moment_only"`` the two higher-order slots hold
    the two parts of the second-moment envelope (exponents 1 and 2).
    """

    first_term: float
    second_term: float
    cp_term: float
    cp_p: float
    cpp_term: float
    cpp_p: float
    total: float
    variant: str
    plug_in: bool = False

    def to_dict(self) -> dict:
        return {
            "variant": self.variant,
            "first_term": self.first_term,
            "second_term": self.second_term,
            "cp_term": self.cp_term,
            "cp_p": self.cp_p,
            "cpp_term": self.cpp_term,
            "cpp_p": self.cpp_p,
            "total": self.total,
            "plug_in": self.plug_in,
        }


def derive_params(confidence: ConfidenceSpec, variance: VarianceInfo, n: int) -> EstimatorParams:
    """Shrinkage scale and bound constants for sample size ``n``.

    a    = g2(2 mu)
    lam  = sqrt(2 log(1/delta) / (a v n)) / mu
    b    = exp(2 mu) g1(mu^2 sqrt(2 a v / (T log(1/delta))))
    beta = sqrt(2 b T log(1/delta) / (a v))
    """
    n = int(n)
    if n < 1:
        raise ValueError(f"n must be >= 1, got {n}")
    mu = confidence.mu
    L = confidence.log_inv_delta
    v, T = variance.v, variance.T
    if T < v:
        raise ValueError(f"T={T} < v={v}")

    a = g2(2.0 * mu)
    lam = math.sqrt(2.0 * L / (a * v * n)) / mu
    b = math.exp(2.0 * mu) * g1(mu * mu * math.sqrt(2.0 * a * v / (T * L)))
    beta = math.sqrt(2.0 * b * T * L / (a * v))

    required = math.exp(2.0 * mu) * g1(2.0 * mu * mu / beta)
    if b < required * (1.0 - 1e-14):
        raise AssertionError(f"b={b} violates b >= exp(2mu) g1(2mu^2/beta)={required}")
    return EstimatorParams(lam=lam, beta=beta, a=a, b=b, confidence=confidence, variance=variance, n=n)


def _leading_terms(params: EstimatorParams):
    L = params.confidence.log_inv_delta
    v, T, n = params.variance.v, params.variance.T, params.n
    first = math.sqrt(2.0 * params.a * v * L / n)
    second = math.sqrt(params.b * T / n)
    return first, second


def _moment_weight(p: float, params: EstimatorParams) -> float:
    # (1/(p+1)) (p/((p+1) mu))^p (2 log(1/delta)/(a v))^(p/2)
    mu = params.confidence.mu
    L = params.confidence.log_inv_delta
    return (1.0 / (p + 1.0)) * (p / ((p + 1.0) * mu)) ** p * (2.0 * L / (params.a * params.variance.v)) ** (p / 2.0)


def _resolve_grid(explicit, default, available, lower, label):
    if explicit is None:
        grid = [float(p) for p in default if float(p) in available]
    else:
        grid = [float(p) for p in explicit]
        for p in grid:
            if p < lower:
                raise ValueError(f"{label} exponent {p} is below the allowed minimum {lower}")
            if p not in available:
                raise KeyError(f"missing {label} entry for exponent p={p}")
    if not grid:
        raise ValueError(f"empty exponent grid for {label}")
    return grid


def bound_full(
    params: EstimatorParams,
    moments: MomentProfile,
    p_grid: Optional[Sequence[float]] = None,
    pp_grid: Optional[Sequence[float]] = None,
) -> BoundReport:
    """Four-term bound, minimising each higher-order term over a finite grid.

    Parameters
    ----------
    params : EstimatorParams
    moments : MomentProfile
    p_grid : sequence of float, optional
        Exponents (>= 1) searched for the mixed-moment term. Every entry
        must have a ``mixed_moments`` value. Defaults to
        ``DEFAULT_CP_GRID`` restricted to the available exponents.
    pp_grid : sequence of float, optional
        Exponents (>= 2) searched for the mean-norm term, each needing a
        ``norm_moments`` value. Defaults to ``DEFAULT_CPP_GRID`` restricted
        to the available exponents.
    """
    first, second = _leading_terms(params)
    n = params.n
    L = params.confidence.log_inv_delta
    a, v = params.a, params.variance.v
    m_norm = moments.mean_norm

    cp_grid = _resolve_grid(p_grid, DEFAULT_CP_GRID, moments.mixed_moments, 1.0, "mixed_moments")
    cpp_grid = _resolve_grid(pp_grid, DEFAULT_CPP_GRID, moments.norm_moments, 2.0, "norm_moments")

    cp_vals = [
        _moment_weight(p, params) * moments.mixed_moments[p] / n ** (p / 2.0) for p in cp_grid
    ]
    drift = m_norm * (1.0 + math.sqrt(a * L / (2.0 * v * n)) * m_norm)
    cpp_vals = [
        _moment_weight(p, params) * moments.norm_moments[p] * drift / n ** (p / 2.0) for p in cpp_grid
    ]
    i = int(np.argmin(cp_vals))
    j = int(np.argmin(cpp_vals))
    cp, cpp = float(cp_vals[i]), float(cpp_vals[j])
    return BoundReport(
        first_term=first,
        second_term=second,
        cp_term=cp,
        cp_p=cp_grid[i],
        cpp_term=cpp,
        cpp_p=cpp_grid[j],
        total=first + second + cp + cpp,
        variant="full",
        plug_in=params.variance.plug_in,
    )


def bound_second_moment_only(params: EstimatorParams, moments: MomentProfile) -> BoundReport:
    """Bound that needs only ``E||X||^2`` and ``||m||``.

    The two higher-order terms are replaced by the envelope

        (1/(2 mu)) sqrt(log(1/delta) (T + ||m||^2) / (2 a n))
        + 8 log(1/delta) / (27 mu^2 a v n) * E||X||^2 ||m|| (1 + sqrt(a log(1/delta) / (2 v n)) ||m||)
    """
    if 2.0 not in moments.norm_moments:
        raise KeyError("missing norm_moments entry for exponent p=2.0")
    first, second = _leading_terms(params)
    mu = params.confidence.mu
    L = params.confidence.log_inv_delta
    a, v, T, n = params.a, params.variance.v, params.variance.T, params.n
    m_norm = moments.mean_norm
    env1 = (1.0 / (2.0 * mu)) * math.sqrt(L * (T + m_norm**2) / (2.0 * a * n))
    env2 = (
        8.0 * L / (27.0 * mu**2 * a * v * n)
        * moments.norm_moments[2.0]
        * m_norm
        * (1.0 + math.sqrt(a * L / (2.0 * v * n)) * m_norm)
    )
    return BoundReport(
        first_term=first,
        second_term=second,
        cp_term=env1,
        cp_p=1.0,
        cpp_term=env2,
        cpp_p=2.0,
        total=first + second + env1 + env2,
        variant="second_moment_only",
        plug_in=params.variance.plug_in,
    )


def cauchy_schwarz_mixed_bound(trace_second_moment: float, v: float, mean_norm: float) -> float:
    """Upper bound ``sqrt((E||X - m||^2 + ||m||^2) v)`` on the p = 1 mixed moment."""
    for name, x in (("trace_second_moment", trace_second_moment), ("v", v), ("mean_norm", mean_norm)):
        if not (math.isfinite(x) and x >= 0):
            raise ValueError(f"{name} must be finite and >= 0, got {x}")
    return math.sqrt((trace_second_moment + mean_norm**2) * v)


def top_eigenvalue(matrix, tol: float = 1e-9, max_iter: int = 10_000):
    """Largest eigenvalue of a symmetric PSD matrix by power iteration.

    Stops when successive Rayleigh quotients differ by at most ``tol``
    relative to the current one. Returns ``(eigenvalue, converged)``.
    """
    A = np.asarray(matrix, dtype=float)
    d = A.shape[0]
    if A.shape != (d, d):
        raise ValueError(f"expected a square matrix, got shape {A.shape}")
    if d == 1:
        return float(A[0, 0]), True
    # fixed start vector so repeated calls agree
    x = make_rng(0x5EED).standard_normal(d)
    x /= np.linalg.norm(x)
    est = float(x @ A @ x)
    for _ in range(max_iter):
        y = A @ x
        ny = np.linalg.norm(y)
        if ny == 0.0:
            return 0.0, True
        x = y / ny
        new = float(x @ A @ x)
        if abs(new - est) <= tol * abs(new):
            return new, True
        est = new
    return est, False


def plug_in_variance(sample, tol: float = 1e-9, max_iter: int = 10_000) -> VarianceInfo:
    """Estimate ``v`` and the covariance trace from data.

    The result is flagged ``plug_in=True``: it is an estimate, not a
    certified upper bound, so bounds built from it are exploratory.
    """
    x = as_sample(sample)
    if x.shape[0] < 2:
        raise ValueError("plug-in variance needs n >= 2")
    cov = np.atleast_2d(np.cov(x, rowvar=False, ddof=1))
    v_hat, ok = top_eigenvalue(cov, tol=tol, max_iter=max_iter)
    trace = float(np.trace(cov))
    # identical rows can leave rounding-level residue instead of an exact zero
    floor = 64 * np.finfo(float).eps * max(1.0, float(np.max(x * x)))
    if not v_hat > floor:
        raise ValueError("sample has zero variance; v must be positive")
    return VarianceInfo(v=v_hat, trace_second_moment=trace, plug_in=True, converged=ok)
