"""Synthetic vector distributions with exactly known moments.

Families
--------
gaussian
    ``mean_shift + scale * Z``, Z standard normal. params: ``scale``
    (scalar or length-d standard deviations, default 1).
student_t
    ``mean_shift + scale * Z * sqrt(df / W)``, W ~ chi2(df). params:
    ``df`` (> 2), ``scale``.
pareto_radial
    ``mean_shift + R * U`` with U uniform on the unit sphere and
    P(R > r) = (x_min / r)**alpha for r >= x_min. params: ``alpha`` (> 2),
    ``x_min`` (default 1).
lognormal_radial
    ``mean_shift + R * U`` with log R ~ N(log_scale, sigma**2). params:
    ``sigma``, ``log_scale`` (default 0).
point_mass_mixture
    ``mean_shift + atoms[K]`` with K drawn from ``weights``. params:
    ``atoms`` (k x d), ``weights`` (default uniform).

Random streams: :func:`sample` builds a Philox generator from the 64-bit
seed and draws, in this order, the family's normal block (row-major n x d),
then any per-row scalar (chi-square, radius, or atom index).

Norm moments E||X||^p come from closed forms where they exist; the other
cases (non-integer p/2 with a nonzero shift or anisotropic scale) are
evaluated by adaptive quadrature and labelled ``"quadrature"``.
"""

import math
from dataclasses import dataclass, field
from typing import Dict

import numpy as np
from scipy import integrate, special

from ._rng import make_rng

__all__ = [
    "FAMILIES",
    "GeneratorSpec",
    "GroundTruth",
    "MomentDoesNotExist",
    "sample",
    "ground_truth",
    "norm_moment",
]

FAMILIES = ("gaussian", "student_t", "pareto_radial", "lognormal_radial", "point_mass_mixture")

_ALLOWED_PARAMS = {
    "gaussian": {"scale"},
    "student_t": {"df", "scale"},
    "pareto_radial": {"alpha", "x_min"},
    "lognormal_radial": {"sigma", "log_scale"},
    "point_mass_mixture": {"atoms", "weights"},
}

_QUAD_OPTS = dict(epsabs=0.0, epsrel=1e-11, limit=200)


class MomentDoesNotExist(ValueError):
    pass


@dataclass(frozen=True)
class GeneratorSpec:
    family: str
    d: int
    params: dict = field(default_factory=dict)
    mean_shift: object = 0.0

    def __post_init__(self):
        if self.family not in FAMILIES:
            raise ValueError(f"unknown family {self.family!r}; expected one of {FAMILIES}")
        d = int(self.d)
        if d < 1:
            raise ValueError(f"d must be >= 1, got {self.d}")
        object.__setattr__(self, "d", d)
        unknown = set(self.params) - _ALLOWED_PARAMS[self.family]
        if unknown:
            raise ValueError(f"unknown parameter(s) for {self.family}: {sorted(unknown)}")
        shift = np.broadcast_to(np.asarray(self.mean_shift, dtype=float), (d,))
        if not np.all(np.isfinite(shift)):
            raise ValueError("mean_shift must be finite")
        object.__setattr__(self, "mean_shift", tuple(float(s) for s in shift))
        self._validate()

    def _validate(self):
        p = self.params
        if self.family in ("gaussian", "student_t"):
            sc = self.scale
            if np.any(sc <= 0) or not np.all(np.isfinite(sc)):
                raise ValueError("scale must be positive and finite")
        if self.family == "student_t":
            if "df" not in p or not float(p["df"]) > 2:
                raise ValueError("student_t needs df > 2 so that the covariance exists")
        elif self.family == "pareto_radial":
            if "alpha" not in p or not float(p["alpha"]) > 2:
                raise ValueError("pareto_radial needs alpha > 2 so that the covariance exists")
            if not float(p.get("x_min", 1.0)) > 0:
                raise ValueError("x_min must be positive")
        elif self.family == "lognormal_radial":
            if "sigma" not in p or not float(p["sigma"]) > 0:
                raise ValueError("lognormal_radial needs sigma > 0")
            if not math.isfinite(float(p.get("log_scale", 0.0))):
                raise ValueError("log_scale must be finite")
        elif self.family == "point_mass_mixture":
            atoms, w = self.atoms_and_weights
            if atoms.shape[1] != self.d:
                raise ValueError(f"atoms must have {self.d} columns, got {atoms.shape[1]}")
            if np.any(w < 0) or not np.isclose(w.sum(), 1.0):
                raise ValueError("weights must be non-negative and sum to 1")

    @property
    def shift(self) -> np.ndarray:
        return np.array(self.mean_shift)

    @property
    def scale(self) -> np.ndarray:
        return np.broadcast_to(np.asarray(self.params.get("scale", 1.0), dtype=float), (self.d,)).copy()

    @property
    def atoms_and_weights(self):
        atoms = np.atleast_2d(np.asarray(self.params["atoms"], dtype=float))
        k = atoms.shape[0]
        w = np.asarray(self.params.get("weights", np.full(k, 1.0 / k)), dtype=float)
        if w.shape != (k,):
            raise ValueError(f"weights must have length {k}")
        return atoms, w

    def tail_index(self) -> float:
        """Supremum of p with E||X||^p finite."""
        if self.family == "student_t":
            return float(self.params["df"])
        if self.family == "pareto_radial":
            return float(self.params["alpha"])
        return math.inf

    def to_dict(self) -> dict:
        params = {}
        for k in sorted(self.params):
            val = self.params[k]
            params[k] = np.asarray(val).tolist() if isinstance(val, (list, tuple, np.ndarray)) else val
        return {"family": self.family, "d": self.d, "params": params, "mean_shift": list(self.mean_shift)}


@dataclass(frozen=True)
class GroundTruth:
    mean: np.ndarray
    v: float
    trace_second_moment: float
    norm_moments: Dict[float, float]
    moment_methods: Dict[float, str]
    mean_norm: float

    @property
    def T(self) -> float:
        return max(self.trace_second_moment, self.v)


def _unit_directions(rng, n, d):
    z = rng.standard_normal((n, d))
    return z / np.linalg.norm(z, axis=1, keepdims=True)


def sample(spec: GeneratorSpec, n: int, seed: int) -> np.ndarray:
    """Draw an (n, d) sample; identical output for identical arguments."""
    n = int(n)
    if n < 1:
        raise ValueError(f"n must be >= 1, got {n}")
    rng = make_rng(int(seed))
    d, fam, p = spec.d, spec.family, spec.params
    if fam == "gaussian":
        x = rng.standard_normal((n, d)) * spec.scale
    elif fam == "student_t":
        z = rng.standard_normal((n, d))
        df = float(p["df"])
        w = rng.chisquare(df, size=n)
        x = z * spec.scale * np.sqrt(df / w)[:, None]
    elif fam == "pareto_radial":
        u = _unit_directions(rng, n, d)
        r = float(p.get("x_min", 1.0)) * (1.0 + rng.pareto(float(p["alpha"]), size=n))
        x = u * r[:, None]
    elif fam == "lognormal_radial":
        u = _unit_directions(rng, n, d)
        r = rng.lognormal(float(p.get("log_scale", 0.0)), float(p["sigma"]), size=n)
        x = u * r[:, None]
    else:
        atoms, w = spec.atoms_and_weights
        idx = rng.choice(atoms.shape[0], size=n, p=w)
        x = atoms[idx].copy()
    return x + spec.shift


# --- radius moments -------------------------------------------------------


def _radius_moment(spec: GeneratorSpec, p: float) -> float:
    if spec.family == "pareto_radial":
        alpha, xm = float(spec.params["alpha"]), float(spec.params.get("x_min", 1.0))
        return alpha * xm**p / (alpha - p)
    sigma, ls = float(spec.params["sigma"]), float(spec.params.get("log_scale", 0.0))
    return math.exp(p * ls + 0.5 * (p * sigma) ** 2)


def _radial_shifted_moment(spec: GeneratorSpec, p: float, m_norm: float) -> float:
    """E (R^2 + M^2 + 2 R M S)^(p/2), S the cosine to a fixed axis."""
    d = spec.d
    half = p / 2.0

    def inner(r):
        base = lambda s: (r * r + m_norm * m_norm + 2.0 * r * m_norm * s) ** half
        if d == 1:
            return 0.5 * (base(1.0) + base(-1.0))
        expo = (d - 3) / 2.0
        norm = special.beta(0.5, (d - 1) / 2.0)
        # weight (1+s)^expo (1-s)^expo handles the endpoint behaviour
        val, _ = integrate.quad(base, -1.0, 1.0, weight="alg", wvar=(expo, expo), **_QUAD_OPTS)
        return val / norm

    if spec.family == "pareto_radial":
        alpha, xm = float(spec.params["alpha"]), float(spec.params.get("x_min", 1.0))
        # R = xm * u^(-1/alpha), u uniform on (0, 1]
        def g(u):
            if u == 0.0:
                return xm**p  # limit of inner(r) (xm / r)^p as r -> inf
            return inner(xm * u ** (-1.0 / alpha)) * u ** (p / alpha)

        val, _ = integrate.quad(g, 0.0, 1.0, weight="alg", wvar=(-p / alpha, 0.0), **_QUAD_OPTS)
        return val
    sigma, ls = float(spec.params["sigma"]), float(spec.params.get("log_scale", 0.0))
    g = lambda z: inner(math.exp(ls + sigma * z)) * math.exp(-0.5 * z * z) / math.sqrt(2 * math.pi)
    val, _ = integrate.quad(g, -40.0, 40.0, points=[0.0], **_QUAD_OPTS)
    return val


# --- gaussian quadratic forms ---------------------------------------------


def _quadform_moment(sig2: np.ndarray, m2: np.ndarray, s: float) -> float:
    """E[Q^s] for Q = sum_j (m_j + sig_j Z_j)^2, 0 < s <= 2.

    Integer s uses cumulants. Otherwise, with k = ceil(s) and r = k - s,
    E[Q^s] = 1/Gamma(r) int_0^inf t^(r-1) E[Q^k exp(-tQ)] dt, and the
    Laplace transform of Q is explicit.
    """
    mean_q = float(np.sum(sig2 + m2))
    if s == 1.0:
        return mean_q
    var_q = float(np.sum(2 * sig2**2 + 4 * sig2 * m2))
    if s == 2.0:
        return var_q + mean_q**2
    if not 0.0 < s < 2.0:
        raise ValueError(f"quadratic-form moment supports 0 < s <= 2, got {s}")
    c = mean_q
    sg, mm = sig2 / c, m2 / c
    k = math.ceil(s)
    r = k - s

    def laplace_k(t):
        den = 1.0 + 2.0 * t * sg
        logL = float(np.sum(-0.5 * np.log(den) - t * mm / den))
        d1 = float(np.sum(-sg / den - mm / den**2))
        if k == 1:
            return -d1 * math.exp(logL)
        d2 = float(np.sum(2 * sg**2 / den**2 + 4 * sg * mm / den**3))
        return (d1 * d1 + d2) * math.exp(logL)

    # t = u^(1/r) removes the t^(r-1) singularity
    f = lambda u: laplace_k(u ** (1.0 / r))
    lo, _ = integrate.quad(f, 0.0, 1.0, **_QUAD_OPTS)
    hi, _ = integrate.quad(f, 1.0, np.inf, **_QUAD_OPTS)
    return c**s * (lo + hi) / (r * math.gamma(r))


def _student_scale_moment(df: float, q: float) -> float:
    """E (df / W)^(q/2), W ~ chi2(df)."""
    return (df / 2.0) ** (q / 2.0) * math.exp(special.gammaln((df - q) / 2.0) - special.gammaln(df / 2.0))


def norm_moment(spec: GeneratorSpec, p: float):
    """Return ``(E||X||^p, method)`` where method is "closed_form" or "quadrature"."""
    p = float(p)
    if not p > 0:
        raise ValueError(f"p must be positive, got {p}")
    if p >= spec.tail_index():
        raise MomentDoesNotExist(
            f"E||X||^{p:g} does not exist for {spec.family} with tail index {spec.tail_index():g}"
        )
    shift = spec.shift
    m2 = shift**2
    m_norm = float(np.linalg.norm(shift))
    fam = spec.family

    if fam == "point_mass_mixture":
        atoms, w = spec.atoms_and_weights
        norms = np.linalg.norm(atoms + shift, axis=1)
        return float(np.sum(w * norms**p)), "closed_form"

    if fam in ("pareto_radial", "lognormal_radial"):
        if m_norm == 0.0:
            return _radius_moment(spec, p), "closed_form"
        if p == 2.0:
            return _radius_moment(spec, 2) + m_norm**2, "closed_form"
        if p == 4.0:
            r2, r4 = _radius_moment(spec, 2), _radius_moment(spec, 4)
            return r4 + m_norm**4 + 2 * m_norm**2 * r2 + 4 * m_norm**2 * r2 / spec.d, "closed_form"
        return _radial_shifted_moment(spec, p, m_norm), "quadrature"

    sig2 = spec.scale**2
    s = p / 2.0
    isotropic_centered = m_norm == 0.0 and np.all(sig2 == sig2[0])
    if fam == "gaussian":
        if isotropic_centered:
            sd = math.sqrt(sig2[0])
            val = sd**p * 2 ** (p / 2) * math.exp(special.gammaln((spec.d + p) / 2) - special.gammaln(spec.d / 2))
            return val, "closed_form"
        if s in (1.0, 2.0):
            return _quadform_moment(sig2, m2, s), "closed_form"
        if s > 2.0:
            raise ValueError("norm moments beyond p = 4 are only available in closed form")
        return _quadform_moment(sig2, m2, s), "quadrature"

    # student_t: gaussian conditional on the scale S^2 = df / W
    df = float(spec.params["df"])
    if m_norm == 0.0:
        if np.all(sig2 == sig2[0]):
            sd = math.sqrt(sig2[0])
            g = sd**p * 2 ** (p / 2) * math.exp(special.gammaln((spec.d + p) / 2) - special.gammaln(spec.d / 2))
            return g * _student_scale_moment(df, p), "closed_form"
        if s in (1.0, 2.0):
            return _quadform_moment(sig2, m2, s) * _student_scale_moment(df, p), "closed_form"
        return _quadform_moment(sig2, m2, s) * _student_scale_moment(df, p), "quadrature"
    if s == 1.0:
        return float(np.sum(sig2)) * df / (df - 2) + float(np.sum(m2)), "closed_form"
    if s == 2.0:
        e2, e4 = _student_scale_moment(df, 2), _student_scale_moment(df, 4)
        A, B = float(np.sum(sig2)), float(np.sum(m2))
        val = A * A * e4 + 2 * A * B * e2 + B * B + 2 * float(np.sum(sig2**2)) * e4 + 4 * float(np.sum(sig2 * m2)) * e2
        return val, "closed_form"
    if s > 2.0:
        raise ValueError("norm moments beyond p = 4 are only available in closed form")
    # integrate over W ~ chi2(df)
    def g(w):
        return _quadform_moment(sig2 * df / w, m2, s) * np.exp(
            (df / 2 - 1) * np.log(w) - w / 2 - (df / 2) * np.log(2) - special.gammaln(df / 2)
        )

    val, _ = integrate.quad(g, 0.0, np.inf, epsabs=0.0, epsrel=1e-9, limit=200)
    return float(val), "quadrature"


def _covariance(spec: GeneratorSpec) -> np.ndarray:
    fam = spec.family
    if fam == "gaussian":
        return np.diag(spec.scale**2)
    if fam == "student_t":
        df = float(spec.params["df"])
        return np.diag(spec.scale**2 * df / (df - 2))
    if fam in ("pareto_radial", "lognormal_radial"):
        return np.eye(spec.d) * _radius_moment(spec, 2) / spec.d
    atoms, w = spec.atoms_and_weights
    centred = atoms - w @ atoms
    return (centred * w[:, None]).T @ centred


def ground_truth(spec: GeneratorSpec, moment_orders=(2.0, 3.0, 4.0)) -> GroundTruth:
    """Exact mean, directional variance, trace and norm moments of ``spec``.

    Norm moments are reported for the requested orders that exist; orders
    at or beyond the tail index are silently left out here (ask
    :func:`norm_moment` directly to get the error).
    """
    mean = spec.shift.copy()
    if spec.family == "point_mass_mixture":
        atoms, w = spec.atoms_and_weights
        mean = mean + w @ atoms
    cov = _covariance(spec)
    v = float(np.max(np.linalg.eigvalsh(cov))) if spec.d > 1 else float(cov[0, 0])
    trace = float(np.trace(cov))
    if not v > 0:
        raise ValueError(f"{spec.family} spec has zero variance; v must be positive")
    moments, methods = {}, {}
    for p in moment_orders:
        p = float(p)
        if p < spec.tail_index():
            moments[p], methods[p] = norm_moment(spec, p)
    return GroundTruth(
        mean=mean,
        v=v,
        trace_second_moment=trace,
        norm_moments=moments,
        moment_methods=methods,
        mean_norm=float(np.linalg.norm(mean)),
    )
