"""Reading and writing retrieval corpora, plus dataset splitting.

Three line-oriented text formats:

* **run** — ``qid Q0 docid rank score tag`` (six whitespace-separated
  fields).  The stored rank field is ignored on parse; document order is
  recomputed from score descending with doc id ascending as the tie-break.
* **qrels** — ``qid iteration docid label`` (four fields).  The iteration
  field is ignored; labels must sit on the dataset's scale.
* **dists** — one JSON object per line with keys ``qid``, ``docid`` and
  ``probs`` (the predicted label distribution, lowest label first).

Parsers accept LF or CRLF and report the 1-based line number of anything
malformed.  Writers emit a canonical form: sorted lines, LF endings, floats
rendered with ``repr`` (shortest digit string that round-trips exactly, at
most 17 significant digits), so parse -> write -> parse is the identity.
"""

from __future__ import annotations

import json
import warnings
from collections.abc import Mapping

from .errors import ParseError
from .model import Dataset, Judgment, LabelScale, RankedList, RelevanceDistribution, Split
from .seeding import stream


def _lines(text: str):
    """Yield (1-based line number, stripped line), skipping blanks."""
    for i, raw in enumerate(text.split("\n"), start=1):
        line = raw.rstrip("\r").strip()
        if line:
            yield i, line


def _fmt(x: float) -> str:
    return repr(float(x))


# ---------------------------------------------------------------------------
# run files


def parse_run(text: str) -> dict[str, RankedList]:
    """Parse a run file into rankings keyed by query id.

    Duplicate (query, document) pairs and unparseable scores are errors; the
    rank column is recomputed rather than trusted.
    """
    rows: dict[str, list[tuple[float, str]]] = {}
    seen: set[tuple[str, str]] = set()
    for lineno, line in _lines(text):
        fields = line.split()
        if len(fields) != 6:
            raise ParseError(f"expected 6 fields in run line, got {len(fields)}", line=lineno)
        qid, _iteration, docid, _rank, score_s, _tag = fields
        try:
            score = float(score_s)
        except ValueError:
            raise ParseError(f"unparseable score {score_s!r}", line=lineno) from None
        if (qid, docid) in seen:
            raise ParseError(f"duplicate entry for query {qid!r} doc {docid!r}", line=lineno)
        seen.add((qid, docid))
        rows.setdefault(qid, []).append((score, docid))

    rankings: dict[str, RankedList] = {}
    for qid in sorted(rows):
        ordered = sorted(rows[qid], key=lambda sd: (-sd[0], sd[1]))
        rankings[qid] = RankedList(query_id=qid, doc_ids=tuple(d for _, d in ordered))
    return rankings


def write_run(rankings: Mapping[str, RankedList], tag: str = "rankci") -> str:
    """Write rankings in canonical form with synthetic descending scores."""
    out = []
    for qid in sorted(rankings):
        docs = rankings[qid].doc_ids
        for rank, doc in enumerate(docs, start=1):
            score = float(len(docs) - rank + 1)
            out.append(f"{qid} Q0 {doc} {rank} {_fmt(score)} {tag}")
    return "\n".join(out) + ("\n" if out else "")


# ---------------------------------------------------------------------------
# qrels files


def parse_qrels(text: str, scale: LabelScale) -> dict[tuple[str, str], Judgment]:
    """Parse judgments; labels outside 0..max_label are rejected."""
    truth: dict[tuple[str, str], Judgment] = {}
    for lineno, line in _lines(text):
        fields = line.split()
        if len(fields) != 4:
            raise ParseError(f"expected 4 fields in qrels line, got {len(fields)}", line=lineno)
        qid, _iteration, docid, label_s = fields
        try:
            label = int(label_s)
        except ValueError:
            raise ParseError(f"unparseable label {label_s!r}", line=lineno) from None
        if not 0 <= label <= scale.max_label:
            raise ParseError(
                f"label {label} for query {qid!r} doc {docid!r} is off the 0..{scale.max_label} scale",
                line=lineno,
            )
        if (qid, docid) in truth:
            raise ParseError(f"duplicate judgment for query {qid!r} doc {docid!r}", line=lineno)
        truth[(qid, docid)] = Judgment(label)
    return truth


def write_qrels(truth: Mapping[tuple[str, str], Judgment]) -> str:
    out = [
        f"{qid} 0 {docid} {truth[(qid, docid)].label}"
        for qid, docid in sorted(truth)
    ]
    return "\n".join(out) + ("\n" if out else "")


# ---------------------------------------------------------------------------
# predicted-distribution files

PROB_LINE_SUM_TOL = 1e-6


def parse_dists(text: str, scale: LabelScale) -> dict[tuple[str, str], RelevanceDistribution]:
    """Parse predicted label distributions, validating each line's vector."""
    predicted: dict[tuple[str, str], RelevanceDistribution] = {}
    for lineno, line in _lines(text):
        try:
            obj = json.loads(line)
        except json.JSONDecodeError as e:
            raise ParseError(f"invalid JSON: {e.msg}", line=lineno) from None
        if not isinstance(obj, dict):
            raise ParseError("distribution line is not a JSON object", line=lineno)
        try:
            qid, docid, probs = obj["qid"], obj["docid"], obj["probs"]
        except KeyError as e:
            raise ParseError(f"missing key {e.args[0]!r}", line=lineno) from None
        if not isinstance(qid, str) or not isinstance(docid, str) or not isinstance(probs, list):
            raise ParseError("qid/docid must be strings and probs a list", line=lineno)
        if len(probs) != scale.num_labels:
            raise ParseError(
                f"probs has {len(probs)} entries for a scale of {scale.num_labels} labels",
                line=lineno,
            )
        try:
            vec = [float(p) for p in probs]
        except (TypeError, ValueError):
            raise ParseError("probs entries must be numbers", line=lineno) from None
        if any(not 0.0 <= p <= 1.0 for p in vec):
            raise ParseError("probs entries must lie in [0, 1]", line=lineno)
        if abs(sum(vec) - 1.0) > PROB_LINE_SUM_TOL:
            raise ParseError(f"probs sum {sum(vec)!r} != 1", line=lineno)
        if (qid, docid) in predicted:
            raise ParseError(f"duplicate distribution for query {qid!r} doc {docid!r}", line=lineno)
        predicted[(qid, docid)] = RelevanceDistribution(tuple(vec))
    return predicted


def infer_scale_from_dists(text: str) -> LabelScale:
    """Label scale implied by the first distribution line of the file."""
    for lineno, line in _lines(text):
        try:
            obj = json.loads(line)
            return LabelScale(len(list(obj["probs"])) - 1)
        except Exception:
            raise ParseError("cannot infer label scale from first distribution line", line=lineno) from None
    raise ParseError("empty distribution file; cannot infer label scale")


def write_dists(predicted: Mapping[tuple[str, str], RelevanceDistribution]) -> str:
    out = []
    for qid, docid in sorted(predicted):
        probs = [float(p) for p in predicted[(qid, docid)].probs]
        out.append(json.dumps({"qid": qid, "docid": docid, "probs": probs}))
    return "\n".join(out) + ("\n" if out else "")


# ---------------------------------------------------------------------------
# dataset assembly and splitting


def build_dataset(
    run_text: str,
    dists_text: str,
    qrels_text: str | None = None,
    scale: LabelScale | None = None,
) -> Dataset:
    """Assemble a :class:`Dataset` from file contents.

    When ``scale`` is omitted it is inferred from the distribution file's
    first line.
    """
    if scale is None:
        scale = infer_scale_from_dists(dists_text)
    rankings = parse_run(run_text)
    predicted = parse_dists(dists_text, scale)
    truth = parse_qrels(qrels_text, scale) if qrels_text is not None else {}
    return Dataset(scale=scale, rankings=rankings, truth=truth, predicted=predicted)


def split_dataset(
    dataset: Dataset,
    ratio: float,
    strata: Mapping[str, str] | None = None,
    seed: int = 0,
) -> Split:
    """Split queries into validation and test sides.

    Only labeled queries are eligible for validation (``ratio`` is the
    validation fraction of each stratum's labeled queries, rounded);
    unlabeled queries always land on the test side.  With ``strata`` given,
    the split is performed within each stratum.  A stratum with fewer than 2
    labeled queries triggers a warning and is placed wholly on one side by
    the seed draw.  Deterministic for a given seed.
    """
    if not 0.0 <= ratio <= 1.0:
        raise ValueError(f"ratio must lie in [0, 1], got {ratio!r}")
    labeled = dataset.labeled_queries()
    unlabeled = [q for q in dataset.queries() if q not in set(labeled)]

    groups: dict[str, list[str]] = {}
    for q in labeled:
        stratum = strata.get(q, "") if strata is not None else ""
        groups.setdefault(stratum, []).append(q)

    rng = stream(seed)
    validation: set[str] = set()
    test: set[str] = set(unlabeled)
    for stratum in sorted(groups):
        members = sorted(groups[stratum])
        if len(members) < 2:
            warnings.warn(
                f"stratum {stratum!r} has fewer than 2 labeled queries; "
                "placing it wholly on one side by the seed draw",
                stacklevel=2,
            )
            side = validation if rng.random() < ratio else test
            side.update(members)
            continue
        perm = rng.permutation(len(members))
        n_val = int(round(ratio * len(members)))
        for pos, idx in enumerate(perm):
            (validation if pos < n_val else test).add(members[idx])

    return Split(validation=frozenset(validation), test=frozenset(test))
