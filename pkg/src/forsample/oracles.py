"""Stochastic gradient/value oracles, tail bounds, and query accounting.

An oracle wraps a potential with an additive mean-zero noise model and
meters every draw.  Batch draws average n independent samples.  For each
noise family the module provides:

* ``m1`` : the exact first absolute moment E||noise|| of one draw,
* ``eps_tail(noise, n, M)`` : a valid upper bound on the normalized
  truncation tail (1/M) * E[||g - E g|| * 1{||g - E g|| > M}] of the
  n-sample batch mean, nonincreasing in both M and n,
* ``phi(noise, M, delta)`` : the smallest batch size n whose tail bound is
  at most delta / 10.

Randomness is hierarchical: an experiment seed spawns per-chain streams,
and each stream's draw counter advances deterministically, so identical
seeds reproduce identical draw sequences bit for bit.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace

import numpy as np
from scipy import special

from .core import Array, Potential, as_rows, as_vector
from .errors import DimensionError, UnsupportedCombinationError

NOISE_FAMILIES = ("exact", "subgaussian", "subweibull", "polymoment", "twopoint")
_FAMILIES = NOISE_FAMILIES

# largest per-call batch drawn in one numpy allocation; bigger requests chunk
_CHUNK = 4_000_000


def make_rng(seed: int, *path: int) -> np.random.Generator:
    """Deterministic stream for (seed, path...): experiment -> chain -> ..."""
    return np.random.default_rng(np.random.SeedSequence(seed, spawn_key=tuple(path)))


@dataclass(frozen=True)
class NoiseModel:
    """Additive noise family with declared tail behaviour.

    Fields are family-specific: ``sigma_g`` for subgaussian/subweibull,
    (``k``, ``sigma_2k``) for polymoment, (``p``, ``m_shift``) for twopoint.
    ``c_tail`` / ``c_rate`` are the constants in the exponential tail bounds
    (defaults 2 and 1/4).
    """

    family: str
    sigma_g: float = 0.0
    zeta: float = 2.0
    k: int = 1
    sigma_2k: float = 0.0
    p: float = 0.0
    m_shift: float = 0.0
    c_tail: float = 2.0
    c_rate: float = 0.25

    def __post_init__(self):
        if self.family not in _FAMILIES:
            raise ValueError(f"unknown noise family {self.family!r}")
        if self.family in ("subgaussian", "subweibull") and not (self.sigma_g > 0):
            raise ValueError("sigma_g must be positive")
        if self.family == "subweibull" and not (self.zeta > 0):
            raise ValueError("zeta must be positive")
        if self.family == "polymoment":
            if self.k < 1:
                raise ValueError("k must be a positive integer")
            if not (self.sigma_2k > 0):
                raise ValueError("sigma_2k must be positive")
        if self.family == "twopoint":
            if not (0.0 < self.p <= 1.0):
                raise ValueError("p must lie in (0, 1]")
            if not (self.m_shift > 0):
                raise ValueError("m_shift must be positive")
        if not (self.c_tail > 0 and self.c_rate > 0):
            raise ValueError("tail constants must be positive")

    # -- construction helpers ------------------------------------------------

    @staticmethod
    def exact() -> "NoiseModel":
        return NoiseModel("exact")

    @staticmethod
    def subgaussian(sigma_g: float, **kw) -> "NoiseModel":
        return NoiseModel("subgaussian", sigma_g=sigma_g, **kw)

    @staticmethod
    def subweibull(zeta: float, sigma_g: float, **kw) -> "NoiseModel":
        return NoiseModel("subweibull", sigma_g=sigma_g, zeta=zeta, **kw)

    @staticmethod
    def polymoment(k: int, sigma_2k: float, **kw) -> "NoiseModel":
        return NoiseModel("polymoment", k=k, sigma_2k=sigma_2k, **kw)

    @staticmethod
    def twopoint(p: float, m_shift: float) -> "NoiseModel":
        return NoiseModel("twopoint", p=p, m_shift=m_shift)

    # -- analytic moments ----------------------------------------------------

    @property
    def _pareto_index(self) -> float:
        return 2.0 * self.k + 1.0

    @property
    def _pareto_xm(self) -> float:
        # x_m such that E R^{2k} = sigma_2k^{2k} for Pareto index a = 2k + 1
        return self.sigma_2k * self._pareto_index ** (-1.0 / (2.0 * self.k))

    def m1(self, dim: int = 1) -> float:
        """Exact E||noise|| of a single draw in the given dimension."""
        if self.family == "exact":
            return 0.0
        if self.family == "subgaussian":
            # iid N(0, sigma_g^2/dim) coordinates; E||.|| via chi distribution
            chi_mean = math.sqrt(2.0) * math.exp(
                special.gammaln((dim + 1) / 2.0) - special.gammaln(dim / 2.0))
            return self.sigma_g / math.sqrt(dim) * chi_mean
        if self.family == "subweibull":
            # radius sigma_g * (E/2)^(1/zeta), E ~ Exp(1)
            return self.sigma_g * 2.0 ** (-1.0 / self.zeta) * special.gamma(1.0 + 1.0 / self.zeta)
        if self.family == "polymoment":
            a = self._pareto_index
            return self._pareto_xm * a / (a - 1.0)
        # twopoint: |noise| = m_shift*p w.p. (1-p) and m_shift*(1-p) w.p. p
        return 2.0 * self.p * (1.0 - self.p) * self.m_shift

    def second_moment(self, dim: int = 1) -> float:
        """Exact E||noise||^2 of a single draw (used in tests and fallbacks)."""
        if self.family == "exact":
            return 0.0
        if self.family == "subgaussian":
            return self.sigma_g ** 2
        if self.family == "subweibull":
            return self.sigma_g ** 2 * 2.0 ** (-2.0 / self.zeta) * special.gamma(1.0 + 2.0 / self.zeta)
        if self.family == "polymoment":
            a = self._pareto_index
            if a <= 2:
                return math.inf
            return self._pareto_xm ** 2 * a / (a - 2.0)
        return self.p * (1.0 - self.p) * self.m_shift ** 2

    # -- sampling ------------------------------------------------------------

    def _radii(self, size: int, rng: np.random.Generator) -> Array:
        if self.family == "subweibull":
            return self.sigma_g * (rng.exponential(1.0, size) / 2.0) ** (1.0 / self.zeta)
        if self.family == "polymoment":
            # Pareto tail index a = 2k+1: R = x_m * U^(-1/a)
            u = rng.random(size)
            return self._pareto_xm * u ** (-1.0 / self._pareto_index)
        raise AssertionError("radii only defined for norm-radius families")

    def sample(self, dim: int, rng: np.random.Generator) -> Array:
        """One noise vector."""
        return self.sample_batch_rows(1, 1, dim, rng)[0]

    def sample_batch_rows(self, k: int, n: int, dim: int,
                          rng: np.random.Generator) -> Array:
        """(k, dim) array of n-sample batch-mean noise draws.

        Every one of the k rows averages n independent draws; heavy-tailed
        families materialize all k*n draws (chunked), the Gaussian family
        uses the exact stability shortcut N(0, sigma^2/n).
        """
        if self.family == "exact":
            return np.zeros((k, dim))
        if self.family == "subgaussian":
            scale = self.sigma_g / math.sqrt(dim) / math.sqrt(n)
            return scale * rng.standard_normal((k, dim))
        if self.family == "twopoint":
            if dim != 1:
                raise DimensionError("twopoint noise is one-dimensional")
            draws = self.m_shift * (self.p - (rng.random((k, n)) < self.p))
            return draws.mean(axis=1, keepdims=True)
        # norm-radius families: direction uniform on the sphere, radius from
        # the family law; average n draws per row, chunking the k axis
        out = np.empty((k, dim))
        rows_per_chunk = max(1, _CHUNK // max(1, n * dim))
        for lo in range(0, k, rows_per_chunk):
            hi = min(k, lo + rows_per_chunk)
            kk = hi - lo
            dirs = rng.standard_normal((kk, n, dim))
            norms = np.linalg.norm(dirs, axis=2, keepdims=True)
            np.divide(dirs, norms, out=dirs, where=norms > 0)
            radii = self._radii(kk * n, rng).reshape(kk, n, 1)
            out[lo:hi] = (dirs * radii).mean(axis=1)
        return out

    def sample_value_batch(self, k: int, n: int, rng: np.random.Generator) -> Array:
        """(k,) scalar batch-mean noise draws for value oracles."""
        return self.sample_batch_rows(k, n, 1, rng)[:, 0]


# ---------------------------------------------------------------------------
# tail bounds
# ---------------------------------------------------------------------------

def eps_tail(noise: NoiseModel, n: int, m_level: float) -> float:
    """Upper bound on the batch-mean truncation tail at level M = m_level.

    Returns a bound on (1/M) * E[||gbar - E gbar|| * 1{||gbar - E gbar|| > M}]
    for the mean gbar of n draws.  Guaranteed nonincreasing in M and in n for
    every supported combination.  SubWeibull with zeta != 2 has no batch
    formula: n > 1 raises UnsupportedCombinationError.
    """
    if n < 1 or int(n) != n:
        raise ValueError("batch size n must be a positive integer")
    if not (m_level >= 0):
        raise ValueError("truncation level must be nonnegative")
    n = int(n)

    if noise.family == "exact":
        return 0.0
    if m_level == 0:
        return math.inf

    if noise.family == "twopoint":
        # bounded support: |batch noise| <= m_shift always
        return 0.0 if m_level >= noise.m_shift else noise.m1() / m_level

    if noise.family == "polymoment":
        k = noise.k
        return (math.factorial(2 * k) * noise.sigma_2k ** (2 * k)
                / (n ** k * m_level ** (2 * k)))

    # Markov fallback, valid for any M and n: tail <= E||gbar|| / M and the
    # batch first moment is at most sqrt(E||noise||^2 / n)
    markov = math.sqrt(noise.second_moment() / n) / m_level

    if noise.family == "subgaussian":
        expo = noise.c_tail * math.exp(-noise.c_rate * n * (m_level / noise.sigma_g) ** 2)
        return min(markov, expo) if m_level >= noise.sigma_g else markov

    # subweibull
    if noise.zeta == 2.0:
        expo = noise.c_tail * math.exp(-noise.c_rate * n * (m_level / noise.sigma_g) ** 2)
        return min(markov, expo) if m_level >= noise.sigma_g else markov
    if n > 1:
        raise UnsupportedCombinationError(
            "subweibull noise with zeta != 2 has no batch tail bound for n > 1; "
            "increase the truncation level M instead of the batch size")
    expo = noise.c_tail * math.exp(-noise.c_rate * (m_level / noise.sigma_g) ** noise.zeta)
    return min(markov, expo) if m_level >= noise.sigma_g else markov


def phi(noise: NoiseModel, m_level: float, delta: float, cap: int = 10 ** 9) -> int:
    """Smallest batch size n with eps_tail(noise, n, M) <= delta / 10.

    Found by doubling then bisection directly on ``eps_tail`` so minimality
    holds for the implemented bound, not a paraphrase of it.  Raises
    UnsupportedCombinationError when no n <= cap works (including the
    subweibull zeta != 2 family whenever n = 1 is insufficient).
    """
    if not (0 < delta < 1):
        raise ValueError("delta must lie in (0, 1)")
    target = delta / 10.0

    def ok(n: int) -> bool:
        return eps_tail(noise, n, m_level) <= target

    if ok(1):
        return 1
    if noise.family == "subweibull" and noise.zeta != 2.0:
        raise UnsupportedCombinationError(
            f"subweibull(zeta={noise.zeta}) cannot reach eps <= {target:g} at "
            f"M={m_level:g} with n=1, and batching is unsupported for zeta != 2")
    lo, hi = 1, 2
    while hi <= cap and not ok(hi):
        lo, hi = hi, hi * 2
    if hi > cap:
        raise UnsupportedCombinationError(
            f"no batch size up to {cap} reaches eps <= {target:g} at M={m_level:g}")
    while hi - lo > 1:
        mid = (lo + hi) // 2
        if ok(mid):
            hi = mid
        else:
            lo = mid
    return hi


# ---------------------------------------------------------------------------
# ledger and oracles
# ---------------------------------------------------------------------------

@dataclass
class QueryLedger:
    """Counts every oracle interaction; merged across chains at the end."""

    grad_queries: int = 0
    value_queries: int = 0
    w_draws: int = 0
    fors_attempts: int = 0
    prox_iters: int = 0
    rgo_calls: int = 0
    outer_steps: int = 0

    def merge(self, other: "QueryLedger") -> "QueryLedger":
        for label in self.__dataclass_fields__:
            setattr(self, label, getattr(self, label) + getattr(other, label))
        return self

    def as_dict(self) -> dict[str, int]:
        return {label: getattr(self, label) for label in self.__dataclass_fields__}


class GradientOracle:
    """Metered stochastic gradient access: grad f(x) + noise.

    Parameters
    ----------
    potential : Potential
    noise : NoiseModel
    rng : numpy Generator, the oracle's private stream.
    ledger : QueryLedger, optional; a fresh one is created when omitted.
    """

    def __init__(self, potential: Potential, noise: NoiseModel,
                 rng: np.random.Generator, ledger: QueryLedger | None = None):
        if noise.family == "twopoint" and potential.dim != 1:
            raise DimensionError("twopoint noise requires a 1-D potential")
        self.potential = potential
        self.noise = noise
        self.rng = rng
        self.ledger = ledger if ledger is not None else QueryLedger()

    @property
    def m1(self) -> float:
        """Analytic E||g - grad f|| of a single draw."""
        return self.noise.m1(self.potential.dim)

    def draw(self, x) -> Array:
        return self.draw_batch(x, 1)

    def draw_batch(self, x, n: int) -> Array:
        """Mean of n independent draws at x; meters n gradient queries."""
        if n < 1:
            raise ValueError("batch size must be >= 1")
        x = as_vector(x, self.potential.dim)
        self.ledger.grad_queries += n
        noise = self.noise.sample_batch_rows(1, n, self.potential.dim, self.rng)[0]
        return self.potential.grad_at(x) + noise

    def draw_batch_rows(self, xs: Array, n: int) -> Array:
        """Row-wise batch means at a (k, d) stack; meters k*n queries."""
        xs = as_rows(xs, self.potential.dim)
        if n < 1:
            raise ValueError("batch size must be >= 1")
        self.ledger.grad_queries += n * xs.shape[0]
        noise = self.noise.sample_batch_rows(xs.shape[0], n, self.potential.dim, self.rng)
        return self.potential.grad_at_rows(xs) + noise


class ValueOracle:
    """Metered stochastic value access: f(x) + scalar noise."""

    def __init__(self, potential: Potential, noise: NoiseModel,
                 rng: np.random.Generator, ledger: QueryLedger | None = None):
        self.potential = potential
        self.noise = noise
        self.rng = rng
        self.ledger = ledger if ledger is not None else QueryLedger()

    @property
    def m1(self) -> float:
        return self.noise.m1(1)

    def draw(self, x) -> float:
        return self.draw_batch(x, 1)

    def draw_batch(self, x, n: int) -> float:
        if n < 1:
            raise ValueError("batch size must be >= 1")
        x = as_vector(x, self.potential.dim)
        self.ledger.value_queries += n
        noise = self.noise.sample_value_batch(1, n, self.rng)[0]
        return self.potential.value_at(x) + float(noise)

    def draw_batch_rows(self, xs: Array, n: int) -> Array:
        xs = as_rows(xs, self.potential.dim)
        if n < 1:
            raise ValueError("batch size must be >= 1")
        self.ledger.value_queries += n * xs.shape[0]
        noise = self.noise.sample_value_batch(xs.shape[0], n, self.rng)
        return self.potential.value_at_rows(xs) + noise
