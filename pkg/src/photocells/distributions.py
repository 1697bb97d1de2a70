"""Single-response photon detection distributions.

The model has one physical parameter, the mean occupancy ``nbar`` of a
phase-space cell.  Cell fillings are Bose-Einstein (geometric) distributed,
and a cell filled with ``n`` photons yields ``k`` absorbed photons with a
geometric law of mean ``n``.  The detection distribution ``U_k`` is the
mixture of the latter over the former.

Every infinite series is cut off with a certified tail bound, so each
returned :class:`TruncatedPmf` satisfies ``sum(probs) + tail_bound ~ 1``.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass
from typing import NamedTuple, Union

import numpy as np

from .errors import DegenerateInputError, TruncationCapExceeded

__all__ = [
    "MeanOccupancy",
    "TruncationPolicy",
    "TruncatedPmf",
    "ModelMode",
    "MeanEstimate",
    "DEFAULT_POLICY",
    "transition_probability",
    "cell_filling_pmf",
    "absorption_pmf",
    "detection_pmf",
    "detection_mean",
    "no_response_probability",
    "mean_transition_probability",
    "conditional_response_pmf",
]

# entries below this are flushed to zero and booked as tail mass
UNDERFLOW = 1e-300

# cells are processed in blocks so the (n, k) work matrix stays small
_BLOCK_ELEMENTS = 2_000_000


@dataclass(frozen=True)
class MeanOccupancy:
    """Mean number of photons per phase-space cell."""

    nbar: float

    def __post_init__(self):
        _check_nbar(self.nbar)

    @property
    def transition_probability(self) -> float:
        return transition_probability(self.nbar)


@dataclass(frozen=True)
class TruncationPolicy:
    """How far infinite sums are carried.

    ``epsilon`` is the largest total probability mass a truncated PMF may
    drop; ``max_terms`` caps the length of any single index range.
    """

    epsilon: float = 1e-12
    max_terms: int = 10**6

    def __post_init__(self):
        if not (0.0 < self.epsilon < 1.0):
            raise ValueError(f"epsilon must lie in (0, 1), got {self.epsilon!r}")
        if int(self.max_terms) != self.max_terms or self.max_terms < 1:
            raise ValueError(f"max_terms must be a positive integer, got {self.max_terms!r}")

    def scaled(self, factor: float) -> "TruncationPolicy":
        """Same policy with ``epsilon`` multiplied by ``factor`` (0 < factor <= 1)."""
        return TruncationPolicy(self.epsilon * factor, self.max_terms)


DEFAULT_POLICY = TruncationPolicy()


class ModelMode(enum.Enum):
    """Which no-response probability is used where the two readings differ.

    ``EXACT`` uses the exactly summed probability of any response,
    ``1 - U_0``.  ``PAPER_APPROX`` substitutes ``P_x = nbar/(nbar+1)``,
    which is what one gets after replacing ``-ln(1-P_x)`` by ``P_x``.
    """

    EXACT = "exact"
    PAPER_APPROX = "paper"

    @classmethod
    def parse(cls, value: Union[str, "ModelMode"]) -> "ModelMode":
        if isinstance(value, cls):
            return value
        return cls(str(value).lower())


@dataclass(frozen=True)
class TruncatedPmf:
    """Finite prefix of a PMF on ``k_min, k_min+1, ...`` plus a tail bound.

    ``tail_bound`` is an upper bound on the probability mass not listed in
    ``probs`` (beyond the last index, plus any underflow-flushed entries).
    """

    probs: np.ndarray
    k_min: int = 0
    tail_bound: float = 0.0

    def __post_init__(self):
        probs = np.array(self.probs, dtype=np.float64)
        if probs.ndim != 1 or probs.size == 0:
            raise ValueError("probs must be a non-empty 1-D array")
        if np.any(probs < 0) or not np.all(np.isfinite(probs)):
            raise ValueError("probs must be finite and nonnegative")
        if self.tail_bound < 0:
            raise ValueError("tail_bound must be nonnegative")
        probs.setflags(write=False)
        object.__setattr__(self, "probs", probs)
        object.__setattr__(self, "k_min", int(self.k_min))
        object.__setattr__(self, "tail_bound", float(self.tail_bound))

    def __len__(self) -> int:
        return self.probs.size

    @property
    def k(self) -> np.ndarray:
        return np.arange(self.k_min, self.k_min + self.probs.size)

    @property
    def k_max(self) -> int:
        return self.k_min + self.probs.size - 1

    def total(self) -> float:
        return math.fsum(self.probs)

    def mean(self) -> float:
        return math.fsum(self.k * self.probs)

    def prob(self, k: int) -> float:
        """Listed probability at ``k``; zero outside the stored range."""
        i = k - self.k_min
        if 0 <= i < self.probs.size:
            return float(self.probs[i])
        return 0.0

    def dense(self) -> np.ndarray:
        """Probabilities indexed from ``k = 0`` (zeros below ``k_min``)."""
        return np.concatenate([np.zeros(self.k_min), self.probs])


class MeanEstimate(NamedTuple):
    """A truncated mean and a certified bound on what the truncation dropped."""

    value: float
    remainder: float


def _check_nbar(nbar) -> float:
    nbar = float(nbar)
    if not math.isfinite(nbar) or nbar < 0:
        raise ValueError(f"mean occupancy must be finite and >= 0, got {nbar!r}")
    return nbar


def _as_nbar(nbar: Union[float, MeanOccupancy]) -> float:
    if isinstance(nbar, MeanOccupancy):
        return nbar.nbar
    return _check_nbar(nbar)


def _flush_underflow(probs: np.ndarray, tail: float) -> tuple[np.ndarray, float]:
    small = probs < UNDERFLOW
    if np.any(small):
        tail += float(probs[small].sum())
        probs = probs.copy()
        probs[small] = 0.0
    return probs, tail


def _geometric_length(p: float, budget: float, policy: TruncationPolicy) -> int:
    """Smallest count ``L`` of leading terms with ``p**L <= budget``."""
    if p == 0.0:
        return 1
    length = max(1, math.ceil(math.log(budget) / math.log(p)))
    while p**length > budget:
        length += 1
    while length > 1 and p ** (length - 1) <= budget:
        length -= 1
    if length > policy.max_terms:
        raise TruncationCapExceeded(
            f"geometric series with ratio {p:.6g} needs {length} terms "
            f"(max_terms={policy.max_terms})"
        )
    return length


def _geometric_pmf(mean: float, budget: float, policy: TruncationPolicy) -> TruncatedPmf:
    # P(j) = (1/(mean+1)) * (mean/(mean+1))**j
    q = 1.0 / (mean + 1.0)
    p = mean * q
    length = _geometric_length(p, budget, policy)
    probs = q * p ** np.arange(length, dtype=np.float64)
    tail = p**length
    probs, tail = _flush_underflow(probs, tail)
    return TruncatedPmf(probs, 0, tail)


def transition_probability(nbar: Union[float, MeanOccupancy]) -> float:
    """``P_x = nbar / (nbar + 1)``, also the excited/ground atom ratio at equilibrium."""
    nbar = _as_nbar(nbar)
    return nbar / (nbar + 1.0)


def cell_filling_pmf(
    nbar: Union[float, MeanOccupancy], policy: TruncationPolicy = DEFAULT_POLICY
) -> TruncatedPmf:
    """Bose-Einstein occupancy ``P_n`` of a single cell."""
    return _geometric_pmf(_as_nbar(nbar), policy.epsilon, policy)


def absorption_pmf(mean_absorbed: float, policy: TruncationPolicy = DEFAULT_POLICY) -> TruncatedPmf:
    """Probability ``R_k`` of absorbing ``k`` quanta in one elementary process.

    The per-quantum absorption probability is ``R_x = <k>/(<k>+1)`` and
    ``R_k = (1 - R_x) R_x**k``.
    """
    return _geometric_pmf(_check_nbar(mean_absorbed), policy.epsilon, policy)


class _DetectionTerms(NamedTuple):
    probs: np.ndarray
    cells: np.ndarray  # truncated P_n, n = 0..N
    outer_tail: float  # exact mass of cells n > N
    inner_tail: float  # exact mass at k > K from cells n <= N
    flushed: float


def _inner_tail(cells: np.ndarray, log_r: np.ndarray, k_last: int) -> float:
    # sum_n P_n r_n**(K+1): mass of k > K for the retained cells (n >= 1)
    return float(np.dot(cells[1:], np.exp((k_last + 1) * log_r)))


def _detection_terms(nbar: float, policy: TruncationPolicy) -> _DetectionTerms:
    half = 0.5 * policy.epsilon
    cells_pmf = _geometric_pmf(nbar, half, policy)
    cells = cells_pmf.probs
    outer_tail = cells_pmf.tail_bound
    n = np.arange(1, cells.size, dtype=np.float64)
    log_r = -np.log1p(1.0 / n)

    # smallest K whose inner tail is within budget: doubling then bisection
    hi = 1
    while _inner_tail(cells, log_r, hi) > half:
        if hi >= policy.max_terms:
            raise TruncationCapExceeded(
                f"detection PMF at nbar={nbar:.6g} needs more than {policy.max_terms} terms"
            )
        hi = min(2 * hi, policy.max_terms)
    lo = 0
    if _inner_tail(cells, log_r, lo) <= half:
        hi = lo
    while hi - lo > 1:
        mid = (lo + hi) // 2
        if _inner_tail(cells, log_r, mid) <= half:
            hi = mid
        else:
            lo = mid
    k_last = hi
    if k_last + 1 > policy.max_terms:
        raise TruncationCapExceeded(
            f"detection PMF at nbar={nbar:.6g} needs {k_last + 1} terms (max_terms={policy.max_terms})"
        )
    inner_tail = _inner_tail(cells, log_r, k_last)

    k = np.arange(k_last + 1, dtype=np.float64)
    probs = np.zeros(k_last + 1)
    probs[0] = cells[0]  # empty cell: nothing absorbed
    weights = cells[1:] / (n + 1.0)
    block = max(1, _BLOCK_ELEMENTS // (k_last + 1))
    for start in range(0, n.size, block):
        stop = start + block
        probs += weights[start:stop] @ np.exp(np.outer(log_r[start:stop], k))

    probs, flushed = _flush_underflow(probs, 0.0)
    return _DetectionTerms(probs, cells, outer_tail, inner_tail, flushed)


def detection_pmf(
    nbar: Union[float, MeanOccupancy], policy: TruncationPolicy = DEFAULT_POLICY
) -> TruncatedPmf:
    """Probability ``U_k`` of detecting ``k`` photons in one elementary interaction.

    ``U_k = sum_n P_n (1/(n+1)) (n/(n+1))**k``.  The cell sum stops once the
    remaining occupancy mass is at most ``epsilon/2`` and the ``k`` range
    stops once the remaining response mass is at most ``epsilon/2``.
    """
    nbar = _as_nbar(nbar)
    if nbar == 0.0:
        return TruncatedPmf(np.ones(1), 0, 0.0)
    t = _detection_terms(nbar, policy)
    return TruncatedPmf(t.probs, 0, t.outer_tail + t.inner_tail + t.flushed)


def detection_mean(
    nbar: Union[float, MeanOccupancy], policy: TruncationPolicy = DEFAULT_POLICY
) -> MeanEstimate:
    """``sum_k k U_k`` over the truncated PMF, with a bound on the dropped part.

    The untruncated value equals ``nbar``.
    """
    nbar = _as_nbar(nbar)
    if nbar == 0.0:
        return MeanEstimate(0.0, 0.0)
    t = _detection_terms(nbar, policy)
    k_last = t.probs.size - 1
    value = math.fsum(np.arange(k_last + 1) * t.probs)

    # geometric tails: sum_{j>J} j (1-p) p**j = p**(J+1) (J + 1 + p/(1-p))
    n_last = t.cells.size - 1
    outer = t.outer_tail * (n_last + 1 + nbar)
    n = np.arange(1, n_last + 1, dtype=np.float64)
    r_pow = np.exp((k_last + 1) * -np.log1p(1.0 / n))
    inner = float(np.dot(t.cells[1:], r_pow * (k_last + 1 + n)))
    return MeanEstimate(value, outer + inner + t.flushed * k_last)


def no_response_probability(nbar: Union[float, MeanOccupancy]) -> float:
    """Closed form ``U_0 = ln(1 + nbar) / nbar`` (1 at ``nbar = 0``)."""
    nbar = _as_nbar(nbar)
    if nbar == 0.0:
        return 1.0
    return math.log1p(nbar) / nbar


def _response_probability(nbar: float) -> float:
    # 1 - ln(1+x)/x; the alternating series avoids cancellation at small x
    if nbar < 1e-2:
        return math.fsum((-1) ** j * nbar ** (j - 1) / j for j in range(2, 16))
    return 1.0 - math.log1p(nbar) / nbar


def mean_transition_probability(
    nbar: Union[float, MeanOccupancy], mode: Union[str, ModelMode] = ModelMode.EXACT
) -> float:
    """Ensemble mean of ``n/(n+1)`` over Bose-Einstein cell fillings.

    Exactly this is ``1 + ((1-P_x)/P_x) ln(1-P_x) = 1 - U_0``, close to
    ``P_x/2`` for small ``nbar``.  ``PAPER_APPROX`` returns ``P_x`` itself.
    """
    nbar = _as_nbar(nbar)
    if nbar == 0.0:
        return 0.0
    if ModelMode.parse(mode) is ModelMode.PAPER_APPROX:
        return transition_probability(nbar)
    return _response_probability(nbar)


def conditional_response_pmf(
    nbar: Union[float, MeanOccupancy],
    mode: Union[str, ModelMode] = ModelMode.EXACT,
    policy: TruncationPolicy = DEFAULT_POLICY,
) -> TruncatedPmf:
    """Photons per detector response, given that a response happened.

    ``H_k = U_k / D`` for ``k >= 1`` with ``D = 1 - U_0`` (exact) or
    ``D = P_x`` (paper approximation; then the result does not sum to 1).
    """
    nbar = _as_nbar(nbar)
    if nbar == 0.0:
        raise DegenerateInputError("no detector response can occur at nbar = 0")
    mode = ModelMode.parse(mode)
    exact_d = _response_probability(nbar)
    denom = exact_d if mode is ModelMode.EXACT else transition_probability(nbar)
    # tighten the budget so the rescaled tail stays within epsilon
    u = detection_pmf(nbar, policy.scaled(min(1.0, exact_d)))
    if u.probs.size < 2:
        raise TruncationCapExceeded("detection PMF too short to condition on k >= 1")
    return TruncatedPmf(u.probs[1:] / denom, 1, u.tail_bound / denom)
