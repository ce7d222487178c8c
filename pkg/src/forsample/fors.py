"""Rejection sampling driven by unbiased estimators of a log-density tilt.

Given a proposal q and a source of independent draws W at each point x with
W in [-B, B] and E[W | x] = log(target(x)/q(x)) + const, each loop attempt

    draws x ~ q, J ~ Poisson(2B), W_1..W_J iid from the source at x,
    and accepts x with probability  prod_j (B + W_j) / (2B),

which is an unbiased coin for exp(E[W|x] - B), so accepted points follow the
density proportional to q(x) * exp(E[W|x]) exactly.  The module provides the
exact scalar loop (``fors_sample``), a law-equivalent vectorized collector
for iid batches (``fors_sample_many``), a slot engine used by the chain
runner (``fors_accept_rows``), and the diagnostic helpers the test suite
builds on.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache
from typing import Callable, Protocol

import numpy as np

from .core import Array, as_vector
from .errors import BudgetExhaustedError, EstimatorRangeError
from .oracles import QueryLedger

_POISSON_INVERSION_MAX_LAM = 30.0


@lru_cache(maxsize=64)
def _poisson_cdf_table(lam: float) -> np.ndarray:
    # exact CDF out to where the remaining mass is < 1e-16
    if not (0 < lam <= _POISSON_INVERSION_MAX_LAM):
        raise ValueError(f"inversion table supports 0 < lam <= {_POISSON_INVERSION_MAX_LAM}")
    kmax = int(lam + 12.0 * math.sqrt(lam) + 30)
    pmf = np.empty(kmax + 1)
    pmf[0] = math.exp(-lam)
    for k in range(1, kmax + 1):
        pmf[k] = pmf[k - 1] * lam / k
    return np.cumsum(pmf)


def poisson_inversion(lam: float, rng: np.random.Generator,
                      size: int | None = None):
    """Exact Poisson(lam) draws by CDF inversion of one uniform each."""
    cdf = _poisson_cdf_table(float(lam))
    u = rng.random(size if size is not None else 1)
    j = np.searchsorted(cdf, u, side="left")
    j = np.minimum(j, len(cdf) - 1)
    return j if size is not None else int(j[0])


@dataclass(frozen=True)
class FORSConfig:
    """Loop parameters: estimator range B and hard budget caps."""

    b: float = 1.0
    max_attempts: int = 10 ** 6
    max_w_per_call: int = 10 ** 6

    def __post_init__(self):
        if not (self.b > 0):
            raise ValueError("B must be positive")
        if 2 * self.b > _POISSON_INVERSION_MAX_LAM:
            raise ValueError("B too large for the exact inversion sampler (2B <= 30)")
        if self.max_attempts < 1 or self.max_w_per_call < 1:
            raise ValueError("budget caps must be positive")


class EstimatorSource:
    """Wraps a per-point W sampler and meters its draws.

    ``draw_w(x, rng) -> float`` must return values in [-B, B]; the loop
    validates the range on every draw and raises EstimatorRangeError on a
    violation rather than clipping silently.
    """

    def __init__(self, draw_w: Callable[[Array, np.random.Generator], float],
                 ledger: QueryLedger | None = None):
        self._draw_w = draw_w
        self.ledger = ledger if ledger is not None else QueryLedger()

    def draw(self, x: Array, rng: np.random.Generator) -> float:
        self.ledger.w_draws += 1
        return float(self._draw_w(x, rng))


class RowEstimatorSource(Protocol):
    """Vectorized counterpart: one W per row of a point stack."""

    def draw_w_rows(self, slots: np.ndarray, xs: np.ndarray,
                    rng: np.random.Generator) -> np.ndarray: ...


@dataclass(frozen=True)
class FORSResult:
    point: Array
    attempts: int
    w_draws: int


def fors_sample(proposal: Callable[[np.random.Generator], Array],
                source: EstimatorSource, cfg: FORSConfig,
                rng: np.random.Generator,
                ledger: QueryLedger | None = None) -> FORSResult:
    """Draw one exact sample from the tilted proposal.

    Parameters
    ----------
    proposal : callable(rng) -> vector from q.
    source : EstimatorSource for W draws at a given point.
    cfg : FORSConfig with B and budget caps.
    rng : stream for proposals, Poisson counts, and acceptance coins
        (the source may share it or hold its own).
    ledger : optional QueryLedger metering attempts and W draws.

    Raises BudgetExhaustedError when the attempt or per-call W-draw cap is
    hit, carrying the partial accounting.

    W draws are metered by the source's ledger and attempts by the ``ledger``
    argument; pass the same QueryLedger to both for unified accounting.
    """
    b = cfg.b
    ledger = ledger if ledger is not None else QueryLedger()
    w_draws_this_call = 0
    for attempt in range(1, cfg.max_attempts + 1):
        ledger.fors_attempts += 1
        x = as_vector(proposal(rng))
        j = poisson_inversion(2 * b, rng)
        u = rng.random()
        # running product of (B + W)/(2B) factors; each factor is in [0, 1]
        # so the product only decreases and the attempt can be rejected the
        # moment it falls below the acceptance uniform.
        product = 1.0
        accepted = True
        for _ in range(j):
            if w_draws_this_call >= cfg.max_w_per_call:
                raise BudgetExhaustedError(
                    "W-draw budget exhausted",
                    attempts=attempt, w_draws=w_draws_this_call)
            w = source.draw(x, rng)
            w_draws_this_call += 1
            if not (-b <= w <= b) or not math.isfinite(w):
                raise EstimatorRangeError(f"estimator draw {w} outside [-{b}, {b}]")
            product *= (b + w) / (2 * b)
            if product < u:
                accepted = False
                break
        if accepted and u < product:
            return FORSResult(point=x, attempts=attempt, w_draws=w_draws_this_call)
    raise BudgetExhaustedError(
        "attempt budget exhausted",
        attempts=cfg.max_attempts, w_draws=w_draws_this_call)


def segment_prod(factors: np.ndarray, counts: np.ndarray) -> np.ndarray:
    """Product of consecutive segments of ``factors`` with given lengths.

    Zero-length segments yield 1.  Equivalent to a per-segment python loop;
    implemented with multiply.reduceat over the nonempty segments.
    """
    counts = np.asarray(counts, dtype=np.int64)
    if counts.sum() != factors.size:
        raise ValueError("segment lengths do not match the factor array")
    out = np.ones(counts.size)
    nz = counts > 0
    if factors.size:
        starts = np.concatenate(([0], np.cumsum(counts)[:-1]))
        out[nz] = np.multiply.reduceat(factors, starts[nz])
    return out


def fors_accept_rows(propose_rows: Callable[[np.ndarray, np.random.Generator], np.ndarray],
                     source: RowEstimatorSource, cfg: FORSConfig, n_slots: int,
                     rng: np.random.Generator,
                     ledger: QueryLedger | None = None) -> np.ndarray:
    """Run one FORS acceptance per slot, vectorized across slots.

    Each slot owns its own (possibly distinct) target; ``propose_rows`` and
    the source receive the slot indices so heterogeneous problems (one per
    chain) batch together.  Law-equivalent to calling ``fors_sample`` per
    slot; all J estimator draws of an attempt are materialized at once.
    """
    b = cfg.b
    ledger = ledger if ledger is not None else QueryLedger()
    out: np.ndarray | None = None
    active = np.arange(n_slots)
    attempts = np.zeros(n_slots, dtype=np.int64)
    while active.size:
        k = active.size
        attempts[active] += 1
        over = attempts[active] > cfg.max_attempts
        if over.any():
            raise BudgetExhaustedError(
                "attempt budget exhausted",
                attempts=int(attempts[active][over][0]),
                chain=int(active[over][0]))
        xs = propose_rows(active, rng)
        if out is None:
            out = np.empty((n_slots, xs.shape[1]))
        js = poisson_inversion(2 * b, rng, size=k)
        u = rng.random(k)
        ledger.fors_attempts += k
        total = int(js.sum())
        if total:
            reps = np.repeat(np.arange(k), js)
            ws = source.draw_w_rows(active[reps], xs[reps], rng)
            ledger.w_draws += total
            if ws.shape != (total,):
                raise EstimatorRangeError("row source returned a bad shape")
            if np.any(~np.isfinite(ws)) or np.any(np.abs(ws) > b + 1e-12):
                raise EstimatorRangeError("row estimator draw outside [-B, B]")
            prods = segment_prod((b + ws) / (2 * b), js)
        else:
            prods = np.ones(k)
        acc = u < prods
        out[active[acc]] = xs[acc]
        active = active[~acc]
    assert out is not None
    return out


def fors_sample_many(proposal_rows: Callable[[int, np.random.Generator], np.ndarray],
                     source: RowEstimatorSource, cfg: FORSConfig, n_samples: int,
                     rng: np.random.Generator,
                     ledger: QueryLedger | None = None) -> np.ndarray:
    """Collect ``n_samples`` iid accepted points from one shared target.

    ``proposal_rows(k, rng)`` returns a (k, d) batch from q.  Attempts are
    simulated in adaptive batches until enough are accepted; output order is
    acceptance order, which for iid attempts is itself iid.
    """
    ledger = ledger if ledger is not None else QueryLedger()
    b = cfg.b
    got: list[np.ndarray] = []
    n_got = 0
    total_attempts = 0
    acc_est = math.exp(-b)  # pessimistic-ish initial guess, refined as we go
    attempt_cap = cfg.max_attempts * n_samples
    # keep the expected 2B * k estimator rows per batch within memory bounds
    row_cap = max(int(2_000_000 / max(2.0 * b, 1.0)), 1024)
    while n_got < n_samples:
        need = n_samples - n_got
        k = int(min(max(1.5 * need / max(acc_est, 1e-6), 1024), row_cap))
        if total_attempts + k > attempt_cap:
            k = attempt_cap - total_attempts
            if k <= 0:
                raise BudgetExhaustedError(
                    "attempt budget exhausted", attempts=total_attempts)
        total_attempts += k
        xs = proposal_rows(k, rng)
        js = poisson_inversion(2 * b, rng, size=k)
        u = rng.random(k)
        ledger.fors_attempts += k
        total = int(js.sum())
        if total:
            reps = np.repeat(np.arange(k), js)
            slots = np.zeros(total, dtype=np.int64)  # shared target: slot 0
            ws = source.draw_w_rows(slots, xs[reps], rng)
            ledger.w_draws += total
            if np.any(~np.isfinite(ws)) or np.any(np.abs(ws) > b + 1e-12):
                raise EstimatorRangeError("row estimator draw outside [-B, B]")
            prods = segment_prod((b + ws) / (2 * b), js)
        else:
            prods = np.ones(k)
        acc = u < prods
        n_acc = int(acc.sum())
        if n_acc:
            got.append(xs[acc])
            n_got += n_acc
        acc_est = max(n_got / max(total_attempts, 1), 1e-4)
    return np.concatenate(got, axis=0)[:n_samples]


# ---------------------------------------------------------------------------
# diagnostics
# ---------------------------------------------------------------------------

def fors_attempt_batch(proposal_rows: Callable[[int, np.random.Generator], np.ndarray],
                       source: RowEstimatorSource, cfg: FORSConfig,
                       n_attempts: int, rng: np.random.Generator,
                       ledger: QueryLedger | None = None) -> np.ndarray:
    """Simulate a fixed number of independent acceptance attempts.

    Returns the boolean acceptance mask, one entry per attempt, for checking
    the per-attempt acceptance law against exp(E[W] - B).  No points are
    collected.
    """
    ledger = ledger if ledger is not None else QueryLedger()
    b = cfg.b
    mask = np.empty(n_attempts, dtype=bool)
    done = 0
    while done < n_attempts:
        k = min(n_attempts - done, 4_000_000)
        xs = proposal_rows(k, rng)
        js = poisson_inversion(2 * b, rng, size=k)
        u = rng.random(k)
        ledger.fors_attempts += k
        total = int(js.sum())
        if total:
            reps = np.repeat(np.arange(k), js)
            ws = source.draw_w_rows(np.zeros(total, dtype=np.int64), xs[reps], rng)
            ledger.w_draws += total
            prods = segment_prod((b + ws) / (2 * b), js)
        else:
            prods = np.ones(k)
        mask[done:done + k] = u < prods
        done += k
    return mask


def acceptance_probability(values, probs, b: float) -> float:
    """Exact per-attempt acceptance probability for a discrete W law.

    For W supported on ``values`` with probabilities ``probs`` (support must
    lie in [-B, B]), the Poisson product construction accepts with
    probability exp(E[W] - B).
    """
    values = np.asarray(values, dtype=float)
    probs = np.asarray(probs, dtype=float)
    if values.shape != probs.shape or values.ndim != 1:
        raise ValueError("values and probs must be matching 1-D arrays")
    if np.any(probs < 0) or not math.isclose(probs.sum(), 1.0, abs_tol=1e-9):
        raise ValueError("probs must be a probability vector")
    if np.any(np.abs(values) > b + 1e-12):
        raise EstimatorRangeError("W support must lie in [-B, B]")
    return float(np.exp(np.dot(values, probs) - b))


@dataclass(frozen=True)
class WDrawReport:
    quantile: float
    bound: float
    passed: bool
    total_draws: int
    calls: int
    aggregate_constant: float


def wdraw_tail_check(b: float, delta: float, counts) -> WDrawReport:
    """Compare per-call W-draw counts against the 3*B*e^(2B)*log(2/delta) bound.

    ``counts`` holds the number of W draws each of T calls consumed.  The
    report carries the empirical (1-delta) quantile, the theoretical bound,
    and the aggregate constant total / (B e^{2B} (T + log(1/delta))) for
    logging (no hard assertion on the aggregate).
    """
    counts = np.asarray(counts, dtype=np.int64)
    if counts.ndim != 1 or counts.size == 0:
        raise ValueError("counts must be a nonempty 1-D array")
    if not (0 < delta < 1):
        raise ValueError("delta must lie in (0, 1)")
    bound = 3.0 * b * math.exp(2.0 * b) * math.log(2.0 / delta)
    q = float(np.quantile(counts, 1.0 - delta))
    total = int(counts.sum())
    agg = total / (b * math.exp(2.0 * b) * (counts.size + math.log(1.0 / delta)))
    return WDrawReport(quantile=q, bound=bound, passed=q <= bound,
                       total_draws=total, calls=counts.size,
                       aggregate_constant=agg)
