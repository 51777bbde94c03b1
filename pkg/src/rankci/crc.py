"""Risk-controlled confidence intervals via label-mass perturbation.

The estimator family here turns each document's predicted label distribution
into an optimistic or pessimistic variant controlled by a single strength
parameter lambda in the open interval (-1, 1):

* lambda > 0 removes ``lambda`` of probability mass from the lowest labels
  upward and renormalises, shifting expected gain up (optimistic);
* lambda < 0 mirrors this, removing ``|lambda|`` from the highest labels
  downward (pessimistic);
* lambda = 0 leaves the distribution unchanged.

Removal at strength ``m`` from the bottom is, per label r,

    Q(r) = max(0,  P(r) - max(0,  m - sum of P below r))

followed by renormalisation; the outer clamp keeps entries non-negative once
``m`` exceeds the mass below a label.  Before renormalisation the entries
always sum to 1 - m.  The per-document expected gain under the perturbed
distribution is non-decreasing in lambda, which is what lets calibration use
binary search.

Calibration picks the pair (lambda_low, lambda_high) on batches of labeled
queries so that, on at most a controlled fraction of batches, the perturbed
dataset utility falls on the wrong side of the true batch utility.  The two
one-sided risk budgets are alpha/2 each, tightened by a finite-batch
correction: each achieved loss must come in under (alpha - (1-alpha)/M) / 2
for M batches.  When no strength inside (-1, 1) satisfies a bound the
calibration *fails explicitly* instead of returning an unsound interval.
"""

from __future__ import annotations

import json
import math
from collections.abc import Iterable, Sequence
from dataclasses import dataclass

import numpy as np

from .errors import (
    CalibrationInfeasibleError,
    EmptyQuerySetError,
    InsufficientDataError,
    MissingDistributionError,
    TooFewBatchesError,
    UnlabeledQueryError,
)
from .metrics import MetricSpec, gain, gain_vector, query_utility_true, rank_weight
from .model import CiReport, Dataset, RelevanceDistribution
from .seeding import stream

# A calibration batch is a non-empty multiset of labeled query ids.
CalibrationBatch = tuple[str, ...]

# Representable ends of the open strength interval (-1, 1).
_LAM_EDGE = 1.0 - 1e-9


def _check_lambda(lam: float) -> float:
    lam = float(lam)
    if not (-1.0 < lam < 1.0):
        raise ValueError(f"perturbation strength must lie strictly inside (-1, 1), got {lam!r}")
    return lam


def _perturb_rows(probs: np.ndarray, lam: float) -> np.ndarray:
    """Perturb every row of a (rows, labels) matrix at strength ``lam``.

    Rows must be valid probability vectors.  Returns renormalised rows.
    """
    if lam == 0.0:
        return probs.copy()
    if lam < 0.0:
        return _perturb_rows(probs[:, ::-1], -lam)[:, ::-1]
    below = np.cumsum(probs, axis=1) - probs
    q = np.maximum(0.0, probs - np.maximum(0.0, lam - below))
    return q / q.sum(axis=1, keepdims=True)


def perturb_distribution(dist: RelevanceDistribution, lam: float) -> RelevanceDistribution:
    """Optimistically (lam > 0) or pessimistically (lam < 0) perturb one
    distribution.

    Examples: probs (0.2, 0.3, 0.5) at lam = +0.3 become (0, 2/7, 5/7);
    at lam = -0.4 they become (1/3, 1/2, 1/6).  A one-hot distribution is
    unchanged by any strength, since removed mass is restored by
    renormalisation.
    """
    lam = _check_lambda(lam)
    row = np.asarray(dist.probs, dtype=float)[None, :]
    out = _perturb_rows(row, lam)[0]
    return RelevanceDistribution(tuple(float(x) for x in out))


def mu_crc(spec: MetricSpec, dist: RelevanceDistribution, lam: float) -> float:
    """Expected gain of the perturbed distribution.

    Equals ``expected_gain(spec, dist)`` at lam = 0, tends to the gain of the
    top label as lam -> 1 and of label 0 as lam -> -1 (for distributions with
    mass at the extremes), and is non-decreasing in lam throughout.
    """
    lam = _check_lambda(lam)
    row = np.asarray(dist.probs, dtype=float)[None, :]
    gains = np.array([gain(spec, r) for r in range(len(dist.probs))], dtype=float)
    if lam == 0.0:
        return float(row[0] @ gains)
    return float(_perturb_rows(row, lam)[0] @ gains)


class _UtilityEngine:
    """Stacked per-document arrays for fast perturbed-utility evaluation.

    Holds, for a fixed query list, every ranked document inside the metric
    cutoff as one row: its predicted label probabilities, its rank weight,
    and the index of its query.  ``per_query_utility(lam)`` then perturbs all
    rows at once and segment-sums weight * expected gain per query.
    """

    def __init__(self, spec: MetricSpec, dataset: Dataset, query_ids: Sequence[str]):
        self.query_ids = list(query_ids)
        self.gains = gain_vector(spec, dataset.scale)
        probs: list[tuple[float, ...]] = []
        weights: list[float] = []
        segments: list[int] = []
        for qi, qid in enumerate(self.query_ids):
            ranking = dataset.rankings[qid]
            for rank, doc in enumerate(ranking.doc_ids, start=1):
                w = rank_weight(spec, rank)
                if w == 0.0:
                    continue
                dist = dataset.predicted.get((qid, doc))
                if dist is None:
                    raise MissingDistributionError(
                        f"query {qid!r}: document {doc!r} has no predicted distribution"
                    )
                probs.append(dist.probs)
                weights.append(w)
                segments.append(qi)
        n_labels = dataset.scale.num_labels
        self.probs = np.array(probs, dtype=float).reshape(len(probs), n_labels)
        self.weights = np.array(weights, dtype=float)
        self.segments = np.array(segments, dtype=np.intp)

    def per_query_utility(self, lam: float) -> np.ndarray:
        """Perturbed utility of every query, in query_ids order."""
        mu = _perturb_rows(self.probs, lam) @ self.gains
        return np.bincount(self.segments, weights=self.weights * mu, minlength=len(self.query_ids))


def utility_crc(spec: MetricSpec, queries: Iterable[str], dataset: Dataset, lam: float) -> float:
    """Mean perturbed utility over a query set at strength ``lam``."""
    lam = _check_lambda(lam)
    qs = list(queries)
    if not qs:
        raise EmptyQuerySetError("perturbed utility over an empty query set")
    return float(_UtilityEngine(spec, dataset, qs).per_query_utility(lam).mean())


def interval(
    spec: MetricSpec,
    queries: Iterable[str],
    dataset: Dataset,
    lam_low: float,
    lam_high: float,
) -> tuple[float, float]:
    """The pair (utility at lam_low, utility at lam_high).

    Requires lam_low < lam_high; monotonicity of the perturbed utility then
    makes this an ordered interval.
    """
    lam_low = _check_lambda(lam_low)
    lam_high = _check_lambda(lam_high)
    if not lam_low < lam_high:
        raise ValueError(f"lam_low must be < lam_high, got {lam_low} >= {lam_high}")
    qs = list(queries)
    if not qs:
        raise EmptyQuerySetError("interval over an empty query set")
    engine = _UtilityEngine(spec, dataset, qs)
    return (
        float(engine.per_query_utility(lam_low).mean()),
        float(engine.per_query_utility(lam_high).mean()),
    )


def build_batches(
    labeled_queries: Iterable[str],
    *,
    mode: str = "bootstrap",
    num_batches: int | None = None,
    batch_size: int | None = None,
    seed: int = 0,
) -> list[CalibrationBatch]:
    """Assemble calibration batches from labeled query ids.

    mode="bootstrap": ``num_batches`` batches of ``batch_size`` ids drawn
    with replacement (batch_size defaults to the number of labeled queries).
    mode="per_query": one singleton batch per labeled query, sorted.
    Deterministic for a given seed.
    """
    pool = sorted(set(labeled_queries))
    if not pool:
        raise InsufficientDataError("no labeled queries to build calibration batches from")
    if mode == "per_query":
        return [(q,) for q in pool]
    if mode != "bootstrap":
        raise ValueError(f"mode must be 'bootstrap' or 'per_query', got {mode!r}")
    if num_batches is None or num_batches < 1:
        raise ValueError(f"num_batches must be a positive integer, got {num_batches!r}")
    if batch_size is None:
        batch_size = len(pool)
    if batch_size < 1:
        raise ValueError(f"batch_size must be a positive integer, got {batch_size!r}")
    rng = stream(seed)
    idx = rng.integers(0, len(pool), size=(num_batches, batch_size))
    return [tuple(pool[i] for i in row) for row in idx]


def calibration_threshold(alpha: float, num_batches: int) -> float:
    """Per-side risk threshold (alpha - (1 - alpha) / M) / 2 for M batches."""
    return 0.5 * (alpha - (1.0 - alpha) / num_batches)


def required_batches(alpha: float) -> int:
    """Smallest batch count this module accepts: ceil((1 - alpha)/alpha) + 1.

    At alpha = 0.05 this is 20; below it the risk threshold is non-positive
    and calibration cannot succeed.
    """
    return math.ceil((1.0 - alpha) / alpha - 1e-9) + 1


@dataclass(frozen=True)
class CrcCalibration:
    """A calibrated perturbation-strength pair plus its audit trail.

    Serialisable with :meth:`to_text` / :meth:`from_text` so calibration and
    interval construction can run as separate invocations.
    """

    lambda_low: float
    lambda_high: float
    alpha: float
    num_batches: int
    achieved_loss_low: float
    achieved_loss_high: float

    def __post_init__(self):
        if not (-1.0 < self.lambda_low < 1.0) or not (-1.0 < self.lambda_high < 1.0):
            raise ValueError("perturbation strengths must lie strictly inside (-1, 1)")
        if not self.lambda_low < self.lambda_high:
            raise ValueError(
                f"lambda_low must be < lambda_high, got {self.lambda_low} >= {self.lambda_high}"
            )
        if not 0.0 < self.alpha < 1.0:
            raise ValueError(f"alpha must lie in (0, 1), got {self.alpha!r}")
        if self.num_batches < 1:
            raise ValueError("num_batches must be positive")
        thr = calibration_threshold(self.alpha, self.num_batches)
        for name, loss in (("low", self.achieved_loss_low), ("high", self.achieved_loss_high)):
            if not 0.0 <= loss < thr:
                raise ValueError(
                    f"achieved {name}-side loss {loss} is not below the risk threshold {thr}"
                )

    def to_text(self) -> str:
        return json.dumps(
            {
                "lambda_low": self.lambda_low,
                "lambda_high": self.lambda_high,
                "alpha": self.alpha,
                "num_batches": self.num_batches,
                "achieved_loss_low": self.achieved_loss_low,
                "achieved_loss_high": self.achieved_loss_high,
            },
            sort_keys=True,
        )

    @classmethod
    def from_text(cls, text: str) -> "CrcCalibration":
        try:
            raw = json.loads(text)
            return cls(
                lambda_low=float(raw["lambda_low"]),
                lambda_high=float(raw["lambda_high"]),
                alpha=float(raw["alpha"]),
                num_batches=int(raw["num_batches"]),
                achieved_loss_low=float(raw["achieved_loss_low"]),
                achieved_loss_high=float(raw["achieved_loss_high"]),
            )
        except (KeyError, TypeError) as e:
            raise ValueError(f"malformed calibration record: {e}") from None


def _search_smallest(pred, tol: float) -> float:
    """Smallest strength in (-1, 1) satisfying a monotone predicate.

    ``pred(lam)`` must be False-then-True as lam increases.  Returns a probed
    satisfying value at most ``tol`` above the boundary (conservative: never
    below it).  Raises if even the top of the interval fails.
    """
    hi = _LAM_EDGE
    if not pred(hi):
        raise CalibrationInfeasibleError(
            "no perturbation strength below 1 satisfies the risk bound"
        )
    lo = -_LAM_EDGE
    if pred(lo):
        return lo  # the whole interval satisfies the bound
    while hi - lo > tol:
        mid = 0.5 * (lo + hi)
        if pred(mid):
            hi = mid
        else:
            lo = mid
    return hi


def _search_largest(pred, tol: float) -> float:
    """Mirror of :func:`_search_smallest`: True-then-False as lam increases."""
    lo = -_LAM_EDGE
    if not pred(lo):
        raise CalibrationInfeasibleError(
            "no perturbation strength above -1 satisfies the risk bound"
        )
    hi = _LAM_EDGE
    if pred(hi):
        return hi
    while hi - lo > tol:
        mid = 0.5 * (lo + hi)
        if pred(mid):
            lo = mid
        else:
            hi = mid
    return lo


def calibrate(
    spec: MetricSpec,
    batches: Sequence[CalibrationBatch],
    dataset: Dataset,
    alpha: float,
    *,
    tol: float = 1e-6,
) -> CrcCalibration:
    """Calibrate the perturbation-strength pair on labeled batches.

    lambda_high is the smallest strength whose fraction of batches with
    perturbed utility *below* the true batch utility stays under the risk
    threshold; lambda_low mirrors it on the other side.  Both are found by
    binary search to ``tol`` and rounded conservatively (lambda_high up,
    lambda_low down).  If the searches cross, lambda_low is nudged just under
    lambda_high.

    Raises :class:`TooFewBatchesError` when the batch count makes the
    threshold non-positive, and :class:`CalibrationInfeasibleError` when no
    strength inside (-1, 1) satisfies a bound.
    """
    if not 0.0 < alpha < 1.0:
        raise ValueError(f"alpha must lie in (0, 1), got {alpha!r}")
    batches = [tuple(b) for b in batches]
    num_batches = len(batches)
    if num_batches == 0:
        raise InsufficientDataError("no calibration batches given")
    if any(len(b) == 0 for b in batches):
        raise ValueError("calibration batches must be non-empty")
    needed = required_batches(alpha)
    if num_batches < needed:
        raise TooFewBatchesError(
            f"{num_batches} calibration batches, but alpha={alpha} needs at least {needed} "
            "for a positive risk threshold"
        )
    thr = calibration_threshold(alpha, num_batches)
    if thr <= 0.0:
        raise TooFewBatchesError(
            f"risk threshold {thr} is non-positive for {num_batches} batches at alpha={alpha}"
        )

    qids = sorted({q for b in batches for q in b})
    for q in qids:
        if q not in dataset.rankings:
            raise UnlabeledQueryError(f"calibration batch names unknown query {q!r}")
    true_u = {q: query_utility_true(spec, dataset.rankings[q], dataset.truth) for q in qids}
    engine = _UtilityEngine(spec, dataset, qids)
    qindex = {q: i for i, q in enumerate(qids)}

    flat_q = np.array([qindex[q] for b in batches for q in b], dtype=np.intp)
    flat_b = np.repeat(np.arange(num_batches), [len(b) for b in batches])
    sizes = np.array([len(b) for b in batches], dtype=float)
    flat_true = np.array([true_u[q] for b in batches for q in b], dtype=float)
    batch_true = np.bincount(flat_b, weights=flat_true, minlength=num_batches) / sizes

    def batch_crc(lam: float) -> np.ndarray:
        pq = engine.per_query_utility(lam)
        return np.bincount(flat_b, weights=pq[flat_q], minlength=num_batches) / sizes

    def loss_high(lam: float) -> float:
        return float(np.mean(batch_crc(lam) < batch_true))

    def loss_low(lam: float) -> float:
        return float(np.mean(batch_crc(lam) > batch_true))

    lam_high = _search_smallest(lambda l: loss_high(l) < thr, tol)
    lam_low = _search_largest(lambda l: loss_low(l) < thr, tol)
    if lam_low >= lam_high:
        # Degenerate data (e.g. predictions exactly matching truth) can leave
        # both searches unconstrained; keep an ordered pair just under the
        # upper strength.  Widening the low side can only reduce its loss.
        nudged = lam_high - 1e-9
        lam_low = nudged if nudged > -1.0 else 0.5 * (lam_high + -1.0)

    return CrcCalibration(
        lambda_low=lam_low,
        lambda_high=lam_high,
        alpha=alpha,
        num_batches=num_batches,
        achieved_loss_low=loss_low(lam_low),
        achieved_loss_high=loss_high(lam_high),
    )


def crc_ci(
    spec: MetricSpec,
    target_queries: Iterable[str],
    dataset: Dataset,
    calibration: CrcCalibration,
) -> CiReport:
    """Interval for the target queries from a calibrated strength pair.

    The point estimate is the unperturbed predicted utility of the targets;
    the bounds are the perturbed utilities at lambda_low and lambda_high.
    """
    qs = list(target_queries)
    if not qs:
        raise EmptyQuerySetError("interval over an empty query set")
    engine = _UtilityEngine(spec, dataset, qs)
    lo = float(engine.per_query_utility(calibration.lambda_low).mean())
    hi = float(engine.per_query_utility(calibration.lambda_high).mean())
    est = float(engine.per_query_utility(0.0).mean())
    return CiReport(
        method="crc",
        estimate=est,
        lower=min(lo, hi),
        upper=max(lo, hi),
        alpha=calibration.alpha,
        diagnostics={
            "lambda_low": calibration.lambda_low,
            "lambda_high": calibration.lambda_high,
            "achieved_loss_low": calibration.achieved_loss_low,
            "achieved_loss_high": calibration.achieved_loss_high,
            "num_batches": float(calibration.num_batches),
            "threshold": calibration_threshold(calibration.alpha, calibration.num_batches),
        },
    )
