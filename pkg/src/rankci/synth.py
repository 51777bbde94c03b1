"""Synthetic datasets with a controllable annotator.

Generates fully-judged collections where the predicted label distributions
come from a distance-decay kernel around the true label: mass proportional
to sharpness**(-|r - r_true|).  Sharpness 1 is an uninformative annotator
(uniform), larger is sharper, and infinity is the one-hot limit.  Rankings
order documents by true label plus unit Gaussian noise, so better documents
tend to sit higher — like a real retrieval run.

Two transforms distort or improve predictions after the fact:

* :func:`apply_bias` pushes mass toward the *complement* of each label's
  probability — strength beta interpolates from unchanged (0) through
  uniform (0.5) to a normalised inversion (1), modelling a systematically
  wrong annotator;
* :func:`apply_oracle` mixes the prediction with the one-hot truth —
  strength tau interpolates from unchanged (0) to a perfect annotator (1).

Generation is deterministic for a given seed and independent of query
evaluation order (each query draws from its own derived stream).
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import UnlabeledQueryError
from .model import Dataset, Judgment, LabelScale, RankedList, RelevanceDistribution
from .seeding import stream


@dataclass(frozen=True)
class SynthConfig:
    """Shape and annotator quality of a generated dataset."""

    num_queries: int
    docs_per_query: int
    scale: LabelScale
    truth_prior: tuple[float, ...]
    annotator_sharpness: float
    seed: int = 0

    def __post_init__(self):
        object.__setattr__(self, "truth_prior", tuple(float(p) for p in self.truth_prior))
        if self.num_queries < 0:
            raise ValueError(f"num_queries must be >= 0, got {self.num_queries}")
        if self.docs_per_query < 1:
            raise ValueError(f"docs_per_query must be >= 1, got {self.docs_per_query}")
        if len(self.truth_prior) != self.scale.num_labels:
            raise ValueError(
                f"truth_prior has {len(self.truth_prior)} entries for a scale of "
                f"{self.scale.num_labels} labels"
            )
        if any(p < 0 for p in self.truth_prior) or abs(sum(self.truth_prior) - 1.0) > 1e-9:
            raise ValueError("truth_prior must be a probability vector")
        if not self.annotator_sharpness > 0:
            raise ValueError(f"annotator_sharpness must be > 0, got {self.annotator_sharpness}")


def _kernel(scale: LabelScale, true_label: int, sharpness: float) -> tuple[float, ...]:
    """Predicted distribution for one document: decay away from the truth."""
    if math.isinf(sharpness):
        return tuple(1.0 if r == true_label else 0.0 for r in scale.labels())
    weights = [sharpness ** (-abs(r - true_label)) for r in scale.labels()]
    total = sum(weights)
    return tuple(w / total for w in weights)


def generate(config: SynthConfig) -> Dataset:
    """Generate a fully-judged synthetic dataset.

    Every ranked document gets a judgment drawn from the truth prior and a
    predicted distribution from the annotator kernel, so every query is
    labeled.
    """
    width = max(3, len(str(max(config.num_queries - 1, 0))))
    rankings: dict[str, RankedList] = {}
    truth: dict[tuple[str, str], Judgment] = {}
    predicted: dict[tuple[str, str], RelevanceDistribution] = {}
    num_labels = config.scale.num_labels

    for qi in range(config.num_queries):
        qid = f"q{qi:0{width}d}"
        rng = stream(config.seed, qi)
        labels = rng.choice(num_labels, size=config.docs_per_query, p=config.truth_prior)
        scores = labels + rng.normal(0.0, 1.0, size=config.docs_per_query)
        doc_ids = [f"d{j:04d}" for j in range(config.docs_per_query)]
        order = sorted(range(config.docs_per_query), key=lambda j: (-scores[j], doc_ids[j]))
        rankings[qid] = RankedList(query_id=qid, doc_ids=tuple(doc_ids[j] for j in order))
        for j in range(config.docs_per_query):
            key = (qid, doc_ids[j])
            truth[key] = Judgment(int(labels[j]))
            predicted[key] = RelevanceDistribution(
                _kernel(config.scale, int(labels[j]), config.annotator_sharpness)
            )

    return Dataset(scale=config.scale, rankings=rankings, truth=truth, predicted=predicted)


def apply_bias(dist: RelevanceDistribution, beta: float) -> RelevanceDistribution:
    """Distort a prediction toward the complement of its own mass.

    Each entry becomes ((1 - beta) * p + beta * (1 - p)) / Z with Z the
    normaliser.  beta 0 is the identity, 0.5 yields the uniform distribution,
    and 1 the normalised inversion — e.g. (0.2, 0.3, 0.5) -> (0.4, 0.35, 0.25).
    """
    if not 0.0 <= beta <= 1.0:
        raise ValueError(f"beta must lie in [0, 1], got {beta!r}")
    mixed = [(1.0 - beta) * p + beta * (1.0 - p) for p in dist.probs]
    total = sum(mixed)
    return RelevanceDistribution(tuple(m / total for m in mixed))


def apply_oracle(dist: RelevanceDistribution, true_label: int, tau: float) -> RelevanceDistribution:
    """Mix a prediction with the one-hot truth at strength tau.

    tau 0 is the identity, 1 the perfect annotator; e.g. (0.5, 0.5) with
    truth 1 at tau 0.5 -> (0.25, 0.75).
    """
    if not 0.0 <= tau <= 1.0:
        raise ValueError(f"tau must lie in [0, 1], got {tau!r}")
    if not 0 <= true_label < len(dist.probs):
        raise ValueError(f"true_label {true_label} is off the distribution's scale")
    out = [
        (1.0 - tau) * p + (tau if r == true_label else 0.0)
        for r, p in enumerate(dist.probs)
    ]
    return RelevanceDistribution(tuple(out))


def bias_dataset(dataset: Dataset, beta: float) -> Dataset:
    """Apply :func:`apply_bias` to every predicted distribution."""
    if beta == 0.0:
        return dataset
    predicted = {key: apply_bias(d, beta) for key, d in dataset.predicted.items()}
    return Dataset(
        scale=dataset.scale, rankings=dataset.rankings, truth=dataset.truth, predicted=predicted
    )


def oracle_dataset(dataset: Dataset, tau: float) -> Dataset:
    """Apply :func:`apply_oracle` to every predicted distribution.

    Requires a judgment for every predicted pair (synthetic datasets are
    fully judged).
    """
    if tau == 0.0:
        return dataset
    predicted = {}
    for key, d in dataset.predicted.items():
        judgment = dataset.truth.get(key)
        if judgment is None:
            raise UnlabeledQueryError(f"pair {key!r} has no judgment to mix toward")
        predicted[key] = apply_oracle(d, judgment.label, tau)
    return Dataset(
        scale=dataset.scale, rankings=dataset.rankings, truth=dataset.truth, predicted=predicted
    )
