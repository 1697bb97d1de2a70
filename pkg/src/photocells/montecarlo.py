"""Event-level Monte Carlo of the detection process.

A single response is simulated in two stages: the cell filling ``n`` is
drawn from the Bose-Einstein law, then the absorbed count ``k`` from the
geometric law with mean ``n``.  A window draws a Poisson number of
responses and, for each, repeats elementary interactions until one yields
``k >= 1``.

Reproducibility: trials are split into fixed-size chunks and chunk ``c``
draws from its own Philox stream keyed by ``SeedSequence(seed,
spawn_key=(c,))``.  The chunk layout depends only on ``trials``, so the
result is identical for any number of workers.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Callable, NamedTuple, Union

import numpy as np
from scipy import stats

from .counting import CountingWindow, _as_window, response_rate
from .distributions import (
    MeanOccupancy,
    ModelMode,
    TruncatedPmf,
    _as_nbar,
    mean_transition_probability,
)
from .errors import EmptyHistogramError

__all__ = [
    "CHUNK_SIZE",
    "SimulationConfig",
    "CountHistogram",
    "BinComparison",
    "ComparisonReport",
    "sample_single_response",
    "sample_conditional_response",
    "sample_window",
    "compare",
    "total_variation",
]

CHUNK_SIZE = 1 << 16
# inversion table is used up to this Poisson mean
POISSON_INVERSION_MAX = 30.0


@dataclass(frozen=True)
class SimulationConfig:
    seed: int
    trials: int
    workers: int = 1
    mode: ModelMode = ModelMode.EXACT

    def __post_init__(self):
        if int(self.seed) != self.seed or not (0 <= self.seed < 2**64):
            raise ValueError(f"seed must be an unsigned 64-bit integer, got {self.seed!r}")
        if int(self.trials) != self.trials or self.trials < 1:
            raise ValueError(f"trials must be a positive integer, got {self.trials!r}")
        if int(self.workers) != self.workers or self.workers < 1:
            raise ValueError(f"workers must be a positive integer, got {self.workers!r}")
        object.__setattr__(self, "mode", ModelMode.parse(self.mode))


@dataclass
class CountHistogram:
    """Occurrence counts indexed by ``k`` (``counts[k]``) over ``total`` trials."""

    counts: np.ndarray
    total: int = field(default=-1)

    def __post_init__(self):
        self.counts = np.asarray(self.counts, dtype=np.int64)
        if self.counts.ndim != 1:
            raise ValueError("counts must be 1-D")
        if np.any(self.counts < 0):
            raise ValueError("counts must be nonnegative")
        s = int(self.counts.sum())
        if self.total < 0:
            self.total = s
        if s != self.total:
            raise ValueError(f"counts sum to {s}, not total={self.total}")

    @classmethod
    def from_samples(cls, samples: np.ndarray) -> "CountHistogram":
        samples = np.asarray(samples, dtype=np.int64)
        return cls(np.bincount(samples, minlength=1), samples.size)

    def __add__(self, other: "CountHistogram") -> "CountHistogram":
        n = max(self.counts.size, other.counts.size)
        merged = np.zeros(n, dtype=np.int64)
        merged[: self.counts.size] += self.counts
        merged[: other.counts.size] += other.counts
        return CountHistogram(merged, self.total + other.total)

    def frequencies(self) -> np.ndarray:
        if self.total == 0:
            raise EmptyHistogramError("histogram has no trials")
        return self.counts / self.total

    def mean(self) -> float:
        return float(np.dot(np.arange(self.counts.size), self.counts)) / self.total

    def as_dict(self) -> dict[int, int]:
        return {int(k): int(c) for k, c in enumerate(self.counts) if c}

    def conditioned_on_response(self) -> "CountHistogram":
        """Drop the ``k = 0`` bin."""
        counts = self.counts.copy()
        counts[0] = 0
        return CountHistogram(counts, int(counts.sum()))


class BinComparison(NamedTuple):
    k: int
    empirical: float
    analytic: float
    delta: float


@dataclass(frozen=True)
class ComparisonReport:
    tv_distance: float
    chi_square: float
    dof: int
    p_value: float
    per_bin: list[BinComparison]


# ---------------------------------------------------------------------------
# random streams and elementary samplers


def _chunk_rng(seed: int, chunk: int) -> np.random.Generator:
    return np.random.Generator(np.random.Philox(np.random.SeedSequence(seed, spawn_key=(chunk,))))


def _chunks(trials: int) -> list[tuple[int, int]]:
    return [(c, min(CHUNK_SIZE, trials - c * CHUNK_SIZE)) for c in range(-(-trials // CHUNK_SIZE))]


def _geometric(u: np.ndarray, log_ratio) -> np.ndarray:
    """Inverse-CDF draw from ``P(j) = (1-r) r**j`` given ``log r`` (``-inf`` for r = 0)."""
    log_ratio = np.broadcast_to(np.asarray(log_ratio, dtype=np.float64), u.shape)
    out = np.zeros(u.shape, dtype=np.int64)
    live = np.isfinite(log_ratio)
    out[live] = np.floor(np.log1p(-u[live]) / log_ratio[live]).astype(np.int64)
    return out


def _log_ratio_for_mean(mean) -> np.ndarray:
    # log(m/(m+1)); -inf where m == 0
    mean = np.asarray(mean, dtype=np.float64)
    with np.errstate(divide="ignore"):
        return -np.log1p(1.0 / mean)


def _elementary(rng: np.random.Generator, nbar: float, size: int) -> np.ndarray:
    """Photons absorbed in ``size`` independent elementary interactions."""
    cells = _geometric(rng.random(size), _log_ratio_for_mean(nbar))
    return _geometric(rng.random(size), _log_ratio_for_mean(cells))


def _responses(rng: np.random.Generator, nbar: float, size: int) -> np.ndarray:
    """``size`` response sizes: elementary interactions repeated until ``k >= 1``."""
    out = np.empty(size, dtype=np.int64)
    filled = 0
    # batch sizing only; acceptance itself is decided by the draws
    accept = max(mean_transition_probability(nbar), 1e-6)
    while filled < size:
        need = size - filled
        batch = min(int(need / accept * 1.1) + 16, 1 << 22)
        k = _elementary(rng, nbar, batch)
        k = k[k >= 1][:need]
        out[filled : filled + k.size] = k
        filled += k.size
    return out


def _poisson(rng: np.random.Generator, mean: float, size: int) -> np.ndarray:
    if mean == 0.0:
        return np.zeros(size, dtype=np.int64)
    if mean > POISSON_INVERSION_MAX:
        return rng.poisson(mean, size)
    top = int(mean + 20.0 * math.sqrt(mean) + 30)
    cdf = np.cumsum(stats.poisson.pmf(np.arange(top + 1), mean))
    return np.minimum(np.searchsorted(cdf, rng.random(size), side="right"), top)


def _run(config: SimulationConfig, chunk_fn: Callable[[np.random.Generator, int], np.ndarray]) -> CountHistogram:
    def one(job):
        chunk, size = job
        return CountHistogram.from_samples(chunk_fn(_chunk_rng(config.seed, chunk), size))

    jobs = _chunks(config.trials)
    if config.workers == 1:
        parts = [one(j) for j in jobs]
    else:
        with ThreadPoolExecutor(max_workers=config.workers) as pool:
            parts = list(pool.map(one, jobs))
    hist = parts[0]
    for part in parts[1:]:
        hist = hist + part
    return hist


# ---------------------------------------------------------------------------
# public samplers


def sample_single_response(nbar: Union[float, MeanOccupancy], config: SimulationConfig) -> CountHistogram:
    """Histogram of photons absorbed per elementary interaction (estimates ``U_k``)."""
    nbar = _as_nbar(nbar)
    return _run(config, lambda rng, size: _elementary(rng, nbar, size))


def sample_conditional_response(nbar: Union[float, MeanOccupancy], config: SimulationConfig) -> CountHistogram:
    """Histogram of response sizes, each from interactions repeated until ``k >= 1``."""
    nbar = _as_nbar(nbar)
    if nbar == 0.0:
        raise ValueError("no detector response can occur at nbar = 0")
    return _run(config, lambda rng, size: _responses(rng, nbar, size))


def sample_window(
    nbar: Union[float, MeanOccupancy],
    window: Union[float, CountingWindow],
    config: SimulationConfig,
) -> CountHistogram:
    """Histogram of total photons per window (estimates the window count PMF)."""
    nbar = _as_nbar(nbar)
    rate = response_rate(nbar, _as_window(window), config.mode)

    def chunk(rng, size):
        m = _poisson(rng, rate, size)
        sizes = _responses(rng, nbar, int(m.sum())) if nbar > 0 else np.zeros(int(m.sum()), np.int64)
        ends = np.cumsum(m)
        csum = np.concatenate([[0], np.cumsum(sizes)])
        return csum[ends] - csum[ends - m]

    return _run(config, chunk)


# ---------------------------------------------------------------------------
# comparison


def _aligned(hist: CountHistogram, analytic: TruncatedPmf) -> tuple[np.ndarray, np.ndarray]:
    freq = hist.frequencies()
    a = analytic.dense()
    n = max(freq.size, a.size)
    return np.pad(freq, (0, n - freq.size)), np.pad(a, (0, n - a.size))


def total_variation(hist: CountHistogram, analytic: TruncatedPmf) -> float:
    """Half the L1 distance; the analytic tail bound counts as unmatched mass."""
    e, a = _aligned(hist, analytic)
    return 0.5 * (math.fsum(np.abs(e - a)) + analytic.tail_bound)


def compare(hist: CountHistogram, analytic: TruncatedPmf, min_expected: float = 10.0) -> ComparisonReport:
    """Total-variation distance and Pearson chi-square of a histogram against a PMF.

    Bins expecting fewer than ``min_expected`` counts are pooled together
    with everything outside the listed support; if the pool itself is too
    thin it is merged into the highest kept bin.
    """
    if hist.total == 0:
        raise EmptyHistogramError("cannot compare an empty histogram")
    e, a = _aligned(hist, analytic)
    listed = np.zeros(a.size, dtype=bool)
    listed[analytic.k_min : analytic.k_max + 1] = True
    per_bin = [
        BinComparison(int(k), float(e[k]), float(a[k]), float(e[k] - a[k]))
        for k in range(e.size)
        if listed[k] or e[k] > 0
    ]

    observed = hist.counts if hist.counts.size == e.size else np.pad(hist.counts, (0, e.size - hist.counts.size))
    expected = hist.total * a
    keep = expected >= min_expected
    obs_kept = observed[keep].astype(np.float64)
    exp_kept = expected[keep]
    obs_pool = hist.total - obs_kept.sum()
    exp_pool = hist.total - exp_kept.sum()
    if exp_kept.size and exp_pool < min_expected:
        obs_kept[-1] += obs_pool
        exp_kept[-1] += exp_pool
    else:
        obs_kept = np.append(obs_kept, obs_pool)
        exp_kept = np.append(exp_kept, exp_pool)
    with np.errstate(divide="ignore", invalid="ignore"):
        terms = np.where(exp_kept > 0, (obs_kept - exp_kept) ** 2 / exp_kept, np.where(obs_kept > 0, np.inf, 0.0))
    chi_square = float(terms.sum())
    dof = max(exp_kept.size - 1, 0)
    p_value = float(stats.chi2.sf(chi_square, dof)) if dof > 0 else 1.0

    return ComparisonReport(total_variation(hist, analytic), chi_square, dof, p_value, per_bin)
