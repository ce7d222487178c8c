"""Potentials, smoothness metadata, and analytic reference densities.

A target density is represented by its potential f (the density is
proportional to exp(-f)) together with the smoothness and functional-
inequality metadata the planners consume: a Hölder exponent ``s`` and
constant ``beta`` with ||grad f(x) - grad f(y)|| <= beta * ||x - y||^s,
and optionally a strong-log-concavity constant, a log-Sobolev constant,
and a Poincaré constant.  Catalog constructors return well-known families
with exact metadata and, where available, analytic 1-D reference
densities used by the statistical verification tools.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Literal

import numpy as np
from scipy import optimize, special, stats

from .errors import DimensionError

Array = np.ndarray


def as_vector(x, dim: int | None = None) -> Array:
    """Validate and return ``x`` as a finite 1-D float64 array.

    Raises DimensionError on wrong shape, wrong length, or non-finite
    entries.  Dimension checks are eager everywhere: a bad vector fails at
    the call site, never deep inside a sampler loop.
    """
    arr = np.asarray(x, dtype=np.float64)
    if arr.ndim == 0:
        arr = arr.reshape(1)
    if arr.ndim != 1:
        raise DimensionError(f"expected a 1-D vector, got shape {arr.shape}")
    if dim is not None and arr.shape[0] != dim:
        raise DimensionError(f"expected dimension {dim}, got {arr.shape[0]}")
    if not np.all(np.isfinite(arr)):
        raise DimensionError("vector has non-finite entries")
    return arr


def as_rows(x, dim: int | None = None) -> Array:
    """Validate a (k, d) stack of row vectors."""
    arr = np.asarray(x, dtype=np.float64)
    if arr.ndim != 2:
        raise DimensionError(f"expected a (k, d) array, got shape {arr.shape}")
    if dim is not None and arr.shape[1] != dim:
        raise DimensionError(f"expected row dimension {dim}, got {arr.shape[1]}")
    if not np.all(np.isfinite(arr)):
        raise DimensionError("row array has non-finite entries")
    return arr


# ---------------------------------------------------------------------------
# reference densities (1-D analytic forms with pdf/cdf/ppf)
# ---------------------------------------------------------------------------

def _ppf_from_cdf(cdf: Callable[[float], float], q: float,
                  lo: float, hi: float) -> float:
    # expand the bracket until it contains q, then invert by brentq
    while cdf(lo) > q:
        lo = lo * 2 if lo < 0 else lo - max(1.0, abs(lo))
    while cdf(hi) < q:
        hi = hi * 2 if hi > 0 else hi + max(1.0, abs(hi))
    return float(optimize.brentq(lambda t: cdf(t) - q, lo, hi, xtol=1e-12))


@dataclass(frozen=True)
class GaussianReference:
    """Diagonal-covariance Gaussian reference, exact in any dimension."""

    mean: Array
    variances: Array

    def __post_init__(self):
        object.__setattr__(self, "mean", as_vector(self.mean))
        object.__setattr__(self, "variances", as_vector(self.variances, self.mean.shape[0]))
        if np.any(self.variances <= 0):
            raise ValueError("variances must be positive")

    @property
    def dim(self) -> int:
        return self.mean.shape[0]

    def marginal(self, i: int = 0) -> "GaussianReference":
        return GaussianReference(self.mean[i:i + 1], self.variances[i:i + 1])

    def _frozen(self):
        if self.dim != 1:
            raise DimensionError("pdf/cdf/ppf are 1-D operations; use marginal(i)")
        return stats.norm(self.mean[0], math.sqrt(self.variances[0]))

    def pdf(self, t):
        return self._frozen().pdf(t)

    def cdf(self, t):
        return self._frozen().cdf(t)

    def ppf(self, q):
        return self._frozen().ppf(q)


@dataclass(frozen=True)
class HuberReference:
    """1-D density proportional to exp(-h_c(t)) for the Huber potential."""

    threshold: float

    def __post_init__(self):
        if not (self.threshold > 0):
            raise ValueError("threshold must be positive")

    @property
    def dim(self) -> int:
        return 1

    @property
    def _z(self) -> float:
        c = self.threshold
        core = math.sqrt(2 * math.pi) * (2 * stats.norm.cdf(c) - 1)
        tails = (2.0 / c) * math.exp(-c * c / 2)
        return core + tails

    def pdf(self, t):
        t = np.asarray(t, dtype=float)
        c = self.threshold
        f = np.where(np.abs(t) <= c, t * t / 2, c * np.abs(t) - c * c / 2)
        return np.exp(-f) / self._z

    def cdf(self, t):
        t = np.asarray(t, dtype=float)
        c, z = self.threshold, self._z
        tail = np.exp(-c * c / 2) / c          # mass of one exponential tail
        lower = tail * np.exp(c * (np.minimum(t, -c) + c))
        mid = math.sqrt(2 * math.pi) * (
            stats.norm.cdf(np.clip(t, -c, c)) - stats.norm.cdf(-c))
        upper = tail * (1 - np.exp(-c * (np.maximum(t, c) - c)))
        return (lower + mid + upper) / z

    def ppf(self, q):
        q = np.asarray(q, dtype=float)
        out = np.array([_ppf_from_cdf(lambda s: float(self.cdf(s)), float(v), -10.0, 10.0)
                        for v in np.atleast_1d(q)])
        return out if q.ndim else float(out[0])


@dataclass(frozen=True)
class PowerReference:
    """1-D density proportional to exp(-|t|^p / p), 1 < p <= 2."""

    p: float

    def __post_init__(self):
        if not (1.0 < self.p <= 2.0):
            raise ValueError("p must lie in (1, 2]")

    @property
    def dim(self) -> int:
        return 1

    @property
    def _half_z(self) -> float:
        p = self.p
        return (p ** (1.0 / p) / p) * special.gamma(1.0 / p)

    def variance(self) -> float:
        p = self.p
        return p ** (2.0 / p) * special.gamma(3.0 / p) / special.gamma(1.0 / p)

    def pdf(self, t):
        t = np.asarray(t, dtype=float)
        return np.exp(-np.abs(t) ** self.p / self.p) / (2 * self._half_z)

    def cdf(self, t):
        t = np.asarray(t, dtype=float)
        g = special.gammainc(1.0 / self.p, np.abs(t) ** self.p / self.p)
        return 0.5 + 0.5 * np.sign(t) * g

    def ppf(self, q):
        q = np.asarray(q, dtype=float)
        out = np.array([_ppf_from_cdf(lambda s: float(self.cdf(s)), float(v), -20.0, 20.0)
                        for v in np.atleast_1d(q)])
        return out if q.ndim else float(out[0])


Reference = GaussianReference | HuberReference | PowerReference


# ---------------------------------------------------------------------------
# potentials
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class Potential:
    """A potential f with gradient access and smoothness metadata.

    Parameters
    ----------
    dim : int
        Ambient dimension; every vector passed in is validated against it.
    value, grad : callables
        f(x) -> float and grad f(x) -> (dim,) array for a single point.
    holder_s, holder_beta : float
        Hölder-gradient parameters, s in [0, 1], beta > 0.
    slc_alpha, lsi_const, pi_const : optional floats
        Strong-log-concavity, log-Sobolev, and Poincaré constants when known.
        These are declared inputs, never estimated.
    value_rows, grad_rows : optional vectorized callables
        (k, dim) -> (k,) / (k, dim).  Used by the batched engines; a loop
        fallback is installed when omitted.
    reference : optional analytic reference density for verification.
    """

    dim: int
    value: Callable[[Array], float]
    grad: Callable[[Array], Array]
    holder_s: float
    holder_beta: float
    slc_alpha: float | None = None
    lsi_const: float | None = None
    pi_const: float | None = None
    value_rows: Callable[[Array], Array] | None = None
    grad_rows: Callable[[Array], Array] | None = None
    reference: Reference | None = None
    name: str = "custom"

    def __post_init__(self):
        if self.dim < 1:
            raise ValueError("dim must be >= 1")
        if not (0.0 <= self.holder_s <= 1.0):
            raise ValueError("holder_s must lie in [0, 1]")
        if not (self.holder_beta > 0):
            raise ValueError("holder_beta must be positive")
        for label in ("slc_alpha", "lsi_const", "pi_const"):
            v = getattr(self, label)
            if v is not None and not (v > 0):
                raise ValueError(f"{label} must be positive when set")
        # declared constants must be mutually consistent
        tol = 1e-9
        if self.slc_alpha is not None and self.lsi_const is not None:
            if self.lsi_const > 1.0 / self.slc_alpha + tol:
                raise ValueError("lsi_const exceeds 1/slc_alpha")
        if self.lsi_const is not None and self.pi_const is not None:
            if self.pi_const > self.lsi_const + tol:
                raise ValueError("pi_const exceeds lsi_const")

    @property
    def m_s(self) -> float:
        """Effective smoothness scale beta^(1/(1+s))."""
        return self.holder_beta ** (1.0 / (1.0 + self.holder_s))

    def value_at(self, x) -> float:
        return float(self.value(as_vector(x, self.dim)))

    def grad_at(self, x) -> Array:
        g = np.asarray(self.grad(as_vector(x, self.dim)), dtype=np.float64)
        return as_vector(g, self.dim)

    def value_at_rows(self, xs: Array) -> Array:
        xs = as_rows(xs, self.dim)
        if self.value_rows is not None:
            return np.asarray(self.value_rows(xs), dtype=np.float64)
        return np.array([self.value(row) for row in xs], dtype=np.float64)

    def grad_at_rows(self, xs: Array) -> Array:
        xs = as_rows(xs, self.dim)
        if self.grad_rows is not None:
            return np.asarray(self.grad_rows(xs), dtype=np.float64)
        return np.stack([np.asarray(self.grad(row), dtype=np.float64) for row in xs])


@dataclass(frozen=True)
class AssumptionCase:
    """Which functional-inequality case a plan targets.

    ``constant`` is the log-Sobolev constant for tag "LSI" or the Poincaré
    constant for tag "PI"; ``w2_bound`` is an upper bound on the Wasserstein-2
    distance from the warm start to the target, required for tag "LC".
    ``warm_start_delta`` is log(1 + chi^2(mu_0 || target)).
    """

    tag: Literal["LSI", "PI", "LC"]
    constant: float | None = None
    warm_start_delta: float = 0.0
    w2_bound: float | None = None

    def __post_init__(self):
        if self.tag not in ("LSI", "PI", "LC"):
            raise ValueError(f"unknown case tag {self.tag!r}")
        if self.tag in ("LSI", "PI"):
            if self.constant is None or not (self.constant > 0):
                raise ValueError(f"{self.tag} case needs a positive constant")
        if self.tag == "LC":
            if self.w2_bound is None or not (self.w2_bound > 0):
                raise ValueError("LC case needs a positive w2_bound")
        if self.warm_start_delta < 0:
            raise ValueError("warm_start_delta must be nonnegative")


# ---------------------------------------------------------------------------
# catalog
# ---------------------------------------------------------------------------

def make_gaussian_potential(mean, precision: float = 1.0) -> Potential:
    """Isotropic Gaussian: f(x) = (precision/2) * ||x - mean||^2."""
    mean = as_vector(mean)
    if not (precision > 0):
        raise ValueError("precision must be positive")
    lam = float(precision)

    def value(x: Array) -> float:
        d = x - mean
        return 0.5 * lam * float(d @ d)

    def grad(x: Array) -> Array:
        return lam * (x - mean)

    return Potential(
        dim=mean.shape[0],
        value=value,
        grad=grad,
        holder_s=1.0,
        holder_beta=lam,
        slc_alpha=lam,
        lsi_const=1.0 / lam,
        pi_const=1.0 / lam,
        value_rows=lambda xs: 0.5 * lam * np.sum((xs - mean) ** 2, axis=1),
        grad_rows=lambda xs: lam * (xs - mean),
        reference=GaussianReference(mean, np.full(mean.shape[0], 1.0 / lam)),
        name="gaussian",
    )


def make_aniso_gaussian_potential(mean, precisions) -> Potential:
    """Axis-aligned Gaussian: f(x) = (1/2) * sum_i lam_i (x_i - m_i)^2."""
    mean = as_vector(mean)
    lam = as_vector(precisions, mean.shape[0])
    if np.any(lam <= 0):
        raise ValueError("precisions must be positive")

    return Potential(
        dim=mean.shape[0],
        value=lambda x: 0.5 * float(np.sum(lam * (x - mean) ** 2)),
        grad=lambda x: lam * (x - mean),
        holder_s=1.0,
        holder_beta=float(lam.max()),
        slc_alpha=float(lam.min()),
        lsi_const=1.0 / float(lam.min()),
        pi_const=1.0 / float(lam.min()),
        value_rows=lambda xs: 0.5 * np.sum(lam * (xs - mean) ** 2, axis=1),
        grad_rows=lambda xs: lam * (xs - mean),
        reference=GaussianReference(mean, 1.0 / lam),
        name="aniso_gaussian",
    )


def make_huber_potential(threshold: float = 0.5, dim: int = 1) -> Potential:
    """Huber potential: quadratic core, linear tails, bounded gradient.

    The gradient is clip(t, -c, c) per coordinate, so the Hölder condition
    holds with s = 0 and beta = 2*c*sqrt(dim).
    """
    c = float(threshold)
    if not (c > 0):
        raise ValueError("threshold must be positive")

    def value(x: Array) -> float:
        a = np.abs(x)
        return float(np.sum(np.where(a <= c, x * x / 2, c * a - c * c / 2)))

    def grad(x: Array) -> Array:
        return np.clip(x, -c, c)

    return Potential(
        dim=dim,
        value=value,
        grad=grad,
        holder_s=0.0,
        holder_beta=2.0 * c * math.sqrt(dim),
        value_rows=lambda xs: np.sum(
            np.where(np.abs(xs) <= c, xs * xs / 2, c * np.abs(xs) - c * c / 2), axis=1),
        grad_rows=lambda xs: np.clip(xs, -c, c),
        reference=HuberReference(c) if dim == 1 else None,
        name="huber",
    )


def make_power_potential(p: float = 1.5, dim: int = 1) -> Potential:
    """Heavy-tailed log-concave family: f(x) = sum_i |x_i|^p / p, 1 < p <= 2.

    For p < 2 the tails are heavier than Gaussian, so the density satisfies a
    Poincaré inequality but no log-Sobolev inequality: the test target for
    the Poincaré-case planner.  The gradient |t|^(p-1) sgn(t) is Hölder with
    s = p - 1 and beta = 2^(1-s) * dim^((1-s)/2).
    """
    p = float(p)
    if not (1.0 < p <= 2.0):
        raise ValueError("p must lie in (1, 2]")
    s = p - 1.0

    def value(x: Array) -> float:
        return float(np.sum(np.abs(x) ** p) / p)

    def grad(x: Array) -> Array:
        return np.abs(x) ** s * np.sign(x)

    return Potential(
        dim=dim,
        value=value,
        grad=grad,
        holder_s=s,
        holder_beta=2.0 ** (1.0 - s) * dim ** ((1.0 - s) / 2.0),
        value_rows=lambda xs: np.sum(np.abs(xs) ** p, axis=1) / p,
        grad_rows=lambda xs: np.abs(xs) ** s * np.sign(xs),
        reference=PowerReference(p) if dim == 1 else None,
        name="power",
    )


CATALOG: dict[str, Callable[..., Potential]] = {
    "gaussian": make_gaussian_potential,
    "aniso_gaussian": make_aniso_gaussian_potential,
    "huber": make_huber_potential,
    "power": make_power_potential,
}


def potential_from_config(name: str, params: dict) -> Potential:
    if name not in CATALOG:
        raise ValueError(f"unknown potential {name!r}; known: {sorted(CATALOG)}")
    return CATALOG[name](**params)


def holder_spot_check(p: Potential, pairs: int = 10_000, *, scale: float = 3.0,
                      rng: np.random.Generator | None = None) -> float:
    """Max of ||grad f(x) - grad f(y)|| / (beta * ||x-y||^s) over random pairs.

    A value <= 1 is consistent with the declared Hölder metadata.
    """
    rng = rng or np.random.default_rng(0)
    xs = scale * rng.standard_normal((pairs, p.dim))
    ys = scale * rng.standard_normal((pairs, p.dim))
    gx = p.grad_at_rows(xs)
    gy = p.grad_at_rows(ys)
    num = np.linalg.norm(gx - gy, axis=1)
    dist = np.linalg.norm(xs - ys, axis=1)
    keep = dist > 1e-12
    ratio = num[keep] / (p.holder_beta * dist[keep] ** p.holder_s)
    return float(ratio.max()) if ratio.size else 0.0
