"""Experiment harness: coverage/width sweeps over synthetic or file datasets.

A plan names a dataset source, a metric, grids over the labeled-query budget
n, the annotator-bias strength beta, and the oracle-mixing strength tau, and
a repeat count.  The labeled query pool is split 50:50 once per sweep into a
validation half and a test half, and the test half's true utility is the
coverage target throughout.  For every grid point and repeat, the harness

1. draws n labeled queries (without replacement) from the validation half,
2. hands each method only what it is allowed to see — the true utilities of
   the n drawn queries, plus (for the prediction-based methods) the predicted
   distributions of every query, and
3. records the interval, its width, and whether it covered the test half's
   true utility.

The bootstrap interval is built from the n true utilities alone; the
prediction-powered interval combines them with predictions over the whole
pool; the risk-controlled interval calibrates its perturbation bounds on
batches resampled from the n draws and is then computed over the test half's
predictions only.  Repeats may run on several worker threads; every unit of
work draws from its own seed-derived stream and rows are sorted afterwards,
so the output is byte-identical regardless of worker count.

Outputs: ``rows.csv`` (one row per method/grid point/repeat),
``aggregate.csv`` (coverage with a binomial band, mean width),
``per_query.csv`` (one interval per query from singleton-batch calibration,
sorted by true utility descending), and ``summary.json``.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import sys
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, replace
from pathlib import Path

import numpy as np

from .bootstrap import bootstrap_ci
from .corpus import build_dataset
from .crc import build_batches, calibrate, crc_ci
from .errors import CalibrationInfeasibleError, RankciError
from .metrics import (
    MetricSpec,
    dataset_utility,
    format_metric,
    parse_metric,
    predicted_utilities,
    true_utilities,
)
from .model import Dataset, LabelScale
from .ppi import ppi_ci, ppi_estimate
from .seeding import child_seed, stream
from .synth import SynthConfig, bias_dataset, generate, oracle_dataset

METHODS = ("bootstrap", "ppi", "crc")

ROW_FIELDS = ["method", "n", "beta", "tau", "repeat", "width", "covered", "low", "high", "truth", "status"]
AGG_FIELDS = [
    "method", "n", "beta", "tau", "runs", "failures",
    "coverage", "coverage_band_low", "coverage_band_high", "mean_width",
]
PER_QUERY_FIELDS = ["tau", "query_id", "low", "high", "truth", "predicted", "covered"]


@dataclass(frozen=True)
class ExperimentPlan:
    """Everything needed to reproduce one experiment run."""

    name: str
    metric: MetricSpec
    synth: SynthConfig | None = None
    run_path: str | None = None
    qrels_path: str | None = None
    dists_path: str | None = None
    alpha: float = 0.05
    repeats: int = 500
    # Calibration batch count; also used as the bootstrap resample count.
    # Desk-scale default of 2000 (a full-scale run would use 10000).
    num_batches: int = 2000
    n_grid: tuple[int, ...] = (10, 20, 40, 80)
    beta_grid: tuple[float, ...] = (0.0,)
    tau_grid: tuple[float, ...] = (0.0,)
    methods: tuple[str, ...] = METHODS
    seed: int = 7
    # Seed for the one-time validation/test halving of the labeled pool,
    # kept separate from the sweep seed so redrawing repeats never moves
    # the split.
    split_seed: int = 11
    workers: int = 1
    output_dir: str = "harness-out"

    def __post_init__(self):
        file_source = self.run_path is not None or self.dists_path is not None
        if (self.synth is None) == (not file_source):
            raise ValueError("a plan needs exactly one dataset source: synth or run/qrels/dists paths")
        if file_source and not (self.run_path and self.qrels_path and self.dists_path):
            raise ValueError("a file-sourced plan needs run, qrels and dists paths")
        if not 0.0 < self.alpha < 1.0:
            raise ValueError(f"alpha must lie in (0, 1), got {self.alpha!r}")
        if self.repeats < 1:
            raise ValueError("repeats must be >= 1")
        if self.workers < 1:
            raise ValueError("workers must be >= 1")
        for m in self.methods:
            if m not in METHODS:
                raise ValueError(f"unknown method {m!r}; expected a subset of {METHODS}")
        if not self.n_grid or any(n < 2 for n in self.n_grid):
            raise ValueError("n_grid must contain integers >= 2")


def default_plan(**overrides) -> ExperimentPlan:
    """The desk-scale synthetic plan: 200 queries of 100 documents on a 0-3
    scale with sparse relevance, a sharp annotator, 500 repeats, 2000
    batches."""
    synth = overrides.pop("synth", None) or SynthConfig(
        num_queries=200,
        docs_per_query=100,
        scale=LabelScale(3),
        truth_prior=(0.85, 0.08, 0.04, 0.03),
        annotator_sharpness=7.0,
        seed=11,
    )
    fields = dict(name="desk-scale", metric=parse_metric("dcg@10"), synth=synth)
    fields.update(overrides)
    return ExperimentPlan(**fields)


def load_dataset_for_plan(plan: ExperimentPlan) -> Dataset:
    if plan.synth is not None:
        return generate(plan.synth)
    return build_dataset(
        run_text=Path(plan.run_path).read_text(encoding="utf-8"),
        dists_text=Path(plan.dists_path).read_text(encoding="utf-8"),
        qrels_text=Path(plan.qrels_path).read_text(encoding="utf-8"),
    )


def _transform(dataset: Dataset, beta: float, tau: float) -> Dataset:
    return oracle_dataset(bias_dataset(dataset, beta), tau)


def halve_pool(pool: list[str], seed: int) -> tuple[list[str], list[str]]:
    """Split the labeled pool into validation and test halves, randomly but
    reproducibly.  Returns (validation, test), both sorted."""
    if len(pool) < 4:
        raise ValueError("need at least 4 labeled queries to form two halves")
    order = stream(seed).permutation(sorted(pool))
    half = len(order) // 2
    return sorted(order[:half].tolist()), sorted(order[half:].tolist())


def sweep(
    dataset: Dataset,
    spec: MetricSpec,
    *,
    n_grid: tuple[int, ...],
    beta_grid: tuple[float, ...] = (0.0,),
    tau_grid: tuple[float, ...] = (0.0,),
    methods: tuple[str, ...] = METHODS,
    repeats: int = 500,
    alpha: float = 0.05,
    num_batches: int = 2000,
    seed: int = 7,
    split_seed: int = 11,
    workers: int = 1,
) -> list[dict]:
    """Run the repeat grid and return one row dict per method/point/repeat.

    All methods at the same grid point and repeat see the same labeled draw
    from the validation half; coverage is judged against the test half's true
    utility.  Deterministic for a given seed, independent of ``workers``.
    """
    pool = dataset.labeled_queries()
    validation, test = halve_pool(pool, split_seed)
    val_arr = np.array(validation)

    true_u = true_utilities(spec, dataset, pool)
    truth_target = dataset_utility(spec, test, true_u)

    # One transformed dataset and its predicted utilities per (beta, tau).
    points = [(n, beta, tau) for n in n_grid for beta in beta_grid for tau in tau_grid]
    transformed: dict[tuple[float, float], tuple[Dataset, dict[str, float]]] = {}
    for _, beta, tau in points:
        if (beta, tau) not in transformed:
            ds_t = _transform(dataset, beta, tau)
            transformed[(beta, tau)] = (ds_t, predicted_utilities(spec, ds_t, pool))

    def one_repeat(point_idx: int, repeat: int) -> list[dict]:
        n, beta, tau = points[point_idx]
        ds_t, pred_u = transformed[(beta, tau)]
        base = {"n": n, "beta": beta, "tau": tau, "repeat": repeat, "truth": truth_target}
        rows = []
        if n > len(validation):
            for method in methods:
                rows.append({**base, "method": method, "width": "", "covered": "",
                             "low": "", "high": "",
                             "status": f"error: n={n} exceeds validation half size {len(validation)}"})
            return rows
        rng = stream(seed, point_idx, repeat, 0)
        labeled = sorted(rng.choice(val_arr, size=n, replace=False).tolist())
        labeled_true = [true_u[q] for q in labeled]
        for method in methods:
            try:
                if method == "bootstrap":
                    ci = bootstrap_ci(labeled_true, alpha, resamples=num_batches,
                                      seed=child_seed(seed, point_idx, repeat, 1))
                elif method == "ppi":
                    est = ppi_estimate(labeled_true, [pred_u[q] for q in labeled],
                                       [pred_u[q] for q in pool])
                    ci = ppi_ci(est, alpha)
                else:
                    batches = build_batches(labeled, mode="bootstrap", num_batches=num_batches,
                                            batch_size=n, seed=child_seed(seed, point_idx, repeat, 2))
                    cal = calibrate(spec, batches, ds_t, alpha)
                    ci = crc_ci(spec, test, ds_t, cal)
            except CalibrationInfeasibleError as e:
                rows.append({**base, "method": method, "width": "", "covered": "",
                             "low": "", "high": "", "status": f"calibration-infeasible: {e}"})
                continue
            rows.append({**base, "method": method, "width": ci.width,
                         "covered": int(ci.lower <= truth_target <= ci.upper),
                         "low": ci.lower, "high": ci.upper, "status": "ok"})
        return rows

    tasks = [(pi, rep) for pi in range(len(points)) for rep in range(repeats)]
    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool_exec:
            chunks = list(pool_exec.map(lambda t: one_repeat(*t), tasks))
    else:
        chunks = [one_repeat(*t) for t in tasks]

    rows = [row for chunk in chunks for row in chunk]
    rows.sort(key=lambda r: (r["method"], r["n"], r["beta"], r["tau"], r["repeat"]))
    return rows


def aggregate(rows: list[dict]) -> list[dict]:
    """Coverage (with a 1.96-sigma binomial band) and mean width per grid point."""
    groups: dict[tuple, list[dict]] = {}
    for row in rows:
        groups.setdefault((row["method"], row["n"], row["beta"], row["tau"]), []).append(row)
    out = []
    for key in sorted(groups, key=lambda k: (str(k[0]), k[1], k[2], k[3])):
        method, n, beta, tau = key
        ok = [r for r in groups[key] if r["status"] == "ok"]
        failures = len(groups[key]) - len(ok)
        if ok:
            p = sum(r["covered"] for r in ok) / len(ok)
            band = 1.96 * float(np.sqrt(p * (1.0 - p) / len(ok)))
            mean_width = sum(r["width"] for r in ok) / len(ok)
            out.append({"method": method, "n": n, "beta": beta, "tau": tau,
                        "runs": len(ok), "failures": failures, "coverage": p,
                        "coverage_band_low": p - band, "coverage_band_high": p + band,
                        "mean_width": mean_width})
        else:
            out.append({"method": method, "n": n, "beta": beta, "tau": tau,
                        "runs": 0, "failures": failures, "coverage": "",
                        "coverage_band_low": "", "coverage_band_high": "", "mean_width": ""})
    return out


def per_query_rows(
    dataset: Dataset,
    spec: MetricSpec,
    *,
    tau_grid: tuple[float, ...] = (0.0,),
    alpha: float = 0.05,
    split_seed: int = 11,
) -> list[dict]:
    """Per-query intervals on the test half, calibrated with singleton
    batches on the validation half, for each oracle strength; sorted by true
    utility descending."""
    pool = dataset.labeled_queries()
    validation, test = halve_pool(pool, split_seed)
    true_u = true_utilities(spec, dataset, pool)
    out = []
    for tau in tau_grid:
        ds_t = _transform(dataset, 0.0, tau)
        pred_u = predicted_utilities(spec, ds_t, pool)
        batches = build_batches(validation, mode="per_query")
        cal = calibrate(spec, batches, ds_t, alpha)
        for q in sorted(test, key=lambda q: (-true_u[q], q)):
            ci = crc_ci(spec, [q], ds_t, cal)
            out.append({
                "tau": tau, "query_id": q, "low": ci.lower, "high": ci.upper,
                "truth": true_u[q], "predicted": pred_u[q],
                "covered": int(ci.lower <= true_u[q] <= ci.upper),
            })
    return out


def _write_csv(path: Path, fields: list[str], rows: list[dict]) -> None:
    buf = io.StringIO()
    writer = csv.DictWriter(buf, fieldnames=fields, lineterminator="\n")
    writer.writeheader()
    writer.writerows(rows)
    path.write_text(buf.getvalue(), encoding="utf-8")


def run_plan(plan: ExperimentPlan) -> Path:
    """Execute a plan and write rows, aggregates, per-query intervals and a
    summary into its output directory.  Returns that directory."""
    out_dir = Path(plan.output_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    dataset = load_dataset_for_plan(plan)

    rows = sweep(
        dataset, plan.metric,
        n_grid=plan.n_grid, beta_grid=plan.beta_grid, tau_grid=plan.tau_grid,
        methods=plan.methods, repeats=plan.repeats, alpha=plan.alpha,
        num_batches=plan.num_batches, seed=plan.seed, split_seed=plan.split_seed,
        workers=plan.workers,
    )
    _write_csv(out_dir / "rows.csv", ROW_FIELDS, rows)

    aggs = aggregate(rows)
    _write_csv(out_dir / "aggregate.csv", AGG_FIELDS, aggs)

    pq = per_query_rows(dataset, plan.metric, tau_grid=plan.tau_grid, alpha=plan.alpha,
                        split_seed=plan.split_seed)
    _write_csv(out_dir / "per_query.csv", PER_QUERY_FIELDS, pq)

    summary = {
        "name": plan.name,
        "metric": format_metric(plan.metric),
        "alpha": plan.alpha,
        "repeats": plan.repeats,
        "num_batches": plan.num_batches,
        "n_grid": list(plan.n_grid),
        "beta_grid": list(plan.beta_grid),
        "tau_grid": list(plan.tau_grid),
        "methods": list(plan.methods),
        "seed": plan.seed,
        "split_seed": plan.split_seed,
        "source": "synthetic" if plan.synth is not None else "files",
        "aggregate": aggs,
    }
    (out_dir / "summary.json").write_text(
        json.dumps(summary, indent=2, sort_keys=True) + "\n", encoding="utf-8"
    )
    return out_dir


# ---------------------------------------------------------------------------
# plan files


_PLAN_KEYS = {
    "name", "metric", "alpha", "repeats", "batches", "n_grid", "beta_grid",
    "tau_grid", "methods", "seed", "split_seed", "workers", "output_dir",
    "queries", "docs_per_query", "max_label", "truth_prior", "sharpness", "synth_seed",
    "run", "qrels", "dists",
}


def _parse_kv(text: str) -> dict[str, str]:
    out: dict[str, str] = {}
    for i, raw in enumerate(text.split("\n"), start=1):
        line = raw.rstrip("\r").strip()
        if not line or line.startswith("#"):
            continue
        if "=" not in line:
            raise ValueError(f"plan line {i}: expected 'key = value', got {line!r}")
        key, _, value = line.partition("=")
        key, value = key.strip(), value.strip()
        if key not in _PLAN_KEYS:
            raise ValueError(f"plan line {i}: unknown key {key!r}")
        out[key] = value
    return out


def _floats(s: str) -> tuple[float, ...]:
    return tuple(float(x) for x in s.split(",") if x.strip())


def _ints(s: str) -> tuple[int, ...]:
    return tuple(int(x) for x in s.split(",") if x.strip())


def load_plan(text: str) -> ExperimentPlan:
    """Parse a ``key = value`` plan file (see README for the key list)."""
    kv = _parse_kv(text)
    file_source = "run" in kv or "qrels" in kv or "dists" in kv
    synth = None
    if not file_source:
        max_label = int(kv.get("max_label", "3"))
        prior = _floats(kv["truth_prior"]) if "truth_prior" in kv else (0.85, 0.08, 0.04, 0.03)
        synth = SynthConfig(
            num_queries=int(kv.get("queries", "200")),
            docs_per_query=int(kv.get("docs_per_query", "100")),
            scale=LabelScale(max_label),
            truth_prior=prior,
            annotator_sharpness=float(kv.get("sharpness", "7.0")),
            seed=int(kv.get("synth_seed", "11")),
        )
    fields = dict(
        name=kv.get("name", "experiment"),
        metric=parse_metric(kv.get("metric", "dcg@10")),
        synth=synth,
        run_path=kv.get("run"),
        qrels_path=kv.get("qrels"),
        dists_path=kv.get("dists"),
        alpha=float(kv.get("alpha", "0.05")),
        repeats=int(kv.get("repeats", "500")),
        num_batches=int(kv.get("batches", "2000")),
        seed=int(kv.get("seed", "7")),
        split_seed=int(kv.get("split_seed", "11")),
        workers=int(kv.get("workers", "1")),
        output_dir=kv.get("output_dir", "harness-out"),
    )
    if "n_grid" in kv:
        fields["n_grid"] = _ints(kv["n_grid"])
    if "beta_grid" in kv:
        fields["beta_grid"] = _floats(kv["beta_grid"])
    if "tau_grid" in kv:
        fields["tau_grid"] = _floats(kv["tau_grid"])
    if "methods" in kv:
        fields["methods"] = tuple(m.strip() for m in kv["methods"].split(",") if m.strip())
    return ExperimentPlan(**fields)


def main(argv: list[str] | None = None) -> int:
    parser = argparse.ArgumentParser(
        prog="rankci-harness",
        description="Run a coverage/width experiment plan.",
    )
    parser.add_argument("plan", help="path to a key = value plan file")
    parser.add_argument("--output-dir", help="override the plan's output directory")
    parser.add_argument("--workers", type=int, help="override the plan's worker count")
    args = parser.parse_args(argv)
    try:
        plan = load_plan(Path(args.plan).read_text(encoding="utf-8"))
        overrides = {}
        if args.output_dir is not None:
            overrides["output_dir"] = args.output_dir
        if args.workers is not None:
            overrides["workers"] = args.workers
        if overrides:
            plan = replace(plan, **overrides)
        out_dir = run_plan(plan)
    except OSError as e:
        print(f"error: {e}", file=sys.stderr)
        return 2
    except (RankciError, ValueError) as e:
        print(f"error: {e}", file=sys.stderr)
        return 2
    print(f"wrote {out_dir / 'rows.csv'}")
    print(f"wrote {out_dir / 'aggregate.csv'}")
    print(f"wrote {out_dir / 'per_query.csv'}")
    print(f"wrote {out_dir / 'summary.json'}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
