"""Risk-controlled intervals: perturbation algebra, batch calibration, and
the serialised calibration record."""

import numpy as np
import pytest

from rankci.crc import (
    CrcCalibration,
    build_batches,
    calibrate,
    calibration_threshold,
    crc_ci,
    interval,
    mu_crc,
    perturb_distribution,
    required_batches,
    utility_crc,
)
from rankci.errors import (
    CalibrationInfeasibleError,
    EmptyQuerySetError,
    InsufficientDataError,
    TooFewBatchesError,
)
from rankci.metrics import expected_gain, gain, parse_metric, predicted_utilities
from rankci.model import Dataset, Judgment, LabelScale, RankedList, RelevanceDistribution
from rankci.seeding import stream
from rankci.synth import SynthConfig, generate

DCG = parse_metric("dcg@10")
PREC = parse_metric("prec@5")


# --- perturbation ------------------------------------------------------------


def test_perturb_optimistic_worked_example():
    d = perturb_distribution(RelevanceDistribution((0.2, 0.3, 0.5)), 0.3)
    assert d.probs[0] == pytest.approx(0.0, abs=1e-15)
    assert d.probs[1] == pytest.approx(2.0 / 7.0, abs=1e-12)
    assert d.probs[2] == pytest.approx(5.0 / 7.0, abs=1e-12)


def test_perturb_pessimistic_worked_example():
    d = perturb_distribution(RelevanceDistribution((0.2, 0.3, 0.5)), -0.4)
    assert d.probs[0] == pytest.approx(1.0 / 3.0, abs=1e-12)
    assert d.probs[1] == pytest.approx(1.0 / 2.0, abs=1e-12)
    assert d.probs[2] == pytest.approx(1.0 / 6.0, abs=1e-12)


def test_perturb_zero_strength_is_identity():
    d = RelevanceDistribution((0.25, 0.5, 0.25))
    assert perturb_distribution(d, 0.0).probs == d.probs


def test_perturb_one_hot_is_invariant_at_any_strength():
    for hot in range(3):
        probs = tuple(1.0 if r == hot else 0.0 for r in range(3))
        for lam in (-0.99, -0.4, 0.0, 0.4, 0.99):
            out = perturb_distribution(RelevanceDistribution(probs), lam)
            assert out.probs == pytest.approx(probs, abs=1e-15)


@pytest.mark.parametrize("lam", [-1.0, 1.0, -1.5, 2.0])
def test_perturb_rejects_out_of_range_strength(lam):
    with pytest.raises(ValueError):
        perturb_distribution(RelevanceDistribution((0.5, 0.5)), lam)


def test_perturbed_distributions_stay_normalised():
    rng = stream(31)
    for _ in range(200):
        probs = rng.dirichlet(np.ones(4))
        for lam in (-0.9, -0.3, 0.2, 0.7):
            out = perturb_distribution(RelevanceDistribution(tuple(probs)), lam)
            assert sum(out.probs) == pytest.approx(1.0, abs=1e-12)
            assert all(p >= 0.0 for p in out.probs)


def test_expected_label_is_monotone_in_strength():
    rng = stream(32)
    grid = np.linspace(-0.95, 0.95, 39)
    for _ in range(50):
        d = RelevanceDistribution(tuple(rng.dirichlet(np.ones(5))))
        values = [mu_crc(PREC, d, lam) for lam in grid]
        assert all(b - a >= -1e-12 for a, b in zip(values, values[1:]))


# --- perturbed expected gain --------------------------------------------------


def test_mu_crc_at_zero_equals_expected_gain():
    d = RelevanceDistribution((0.1, 0.2, 0.3, 0.4))
    for spec in (DCG, PREC):
        assert mu_crc(spec, d, 0.0) == pytest.approx(expected_gain(spec, d), abs=1e-15)


def test_mu_crc_extreme_strengths_reach_the_gain_range():
    rng = stream(33)
    for _ in range(50):
        raw = rng.dirichlet(np.ones(4)) + 0.05
        d = RelevanceDistribution(tuple(raw / raw.sum()))
        for spec in (DCG, PREC):
            assert mu_crc(spec, d, 0.999) == pytest.approx(gain(spec, 3), abs=1e-3)
            assert mu_crc(spec, d, -0.999) == pytest.approx(gain(spec, 0), abs=1e-3)


# --- dataset fixtures ---------------------------------------------------------


def _synth(sharpness=3.0, queries=30, docs=8, seed=2):
    return generate(SynthConfig(
        num_queries=queries, docs_per_query=docs, scale=LabelScale(2),
        truth_prior=(0.5, 0.3, 0.2), annotator_sharpness=sharpness, seed=seed,
    ))


def test_utility_crc_at_zero_matches_predicted_utility():
    ds = _synth()
    qs = ds.queries()[:10]
    pred_u = predicted_utilities(DCG, ds, qs)
    direct = sum(pred_u.values()) / len(qs)
    assert utility_crc(DCG, qs, ds, 0.0) == pytest.approx(direct, abs=1e-12)


def test_utility_crc_counts_duplicate_queries_twice():
    ds = _synth()
    a, b = ds.queries()[:2]
    u = utility_crc(DCG, [a, a, b], ds, 0.0)
    pred_u = predicted_utilities(DCG, ds, [a, b])
    assert u == pytest.approx((2 * pred_u[a] + pred_u[b]) / 3.0, abs=1e-12)


def test_interval_orders_and_validates():
    ds = _synth()
    qs = ds.queries()[:5]
    lo, hi = interval(DCG, qs, ds, -0.5, 0.5)
    assert lo <= hi
    with pytest.raises(ValueError):
        interval(DCG, qs, ds, 0.5, -0.5)
    with pytest.raises(EmptyQuerySetError):
        interval(DCG, [], ds, -0.5, 0.5)


# --- batches -------------------------------------------------------------------


def test_build_batches_bootstrap_mode():
    pool = [f"q{i}" for i in range(8)]
    batches = build_batches(pool, num_batches=50, batch_size=6, seed=4)
    assert len(batches) == 50
    assert all(len(b) == 6 for b in batches)
    assert all(q in set(pool) for b in batches for q in b)
    assert batches == build_batches(pool, num_batches=50, batch_size=6, seed=4)
    assert batches != build_batches(pool, num_batches=50, batch_size=6, seed=5)


def test_build_batches_default_size_is_pool_size():
    pool = ["a", "b", "c"]
    batches = build_batches(pool, num_batches=10, seed=0)
    assert all(len(b) == 3 for b in batches)


def test_build_batches_per_query_mode():
    batches = build_batches(["c", "a", "b"], mode="per_query")
    assert batches == [("a",), ("b",), ("c",)]


def test_build_batches_validation():
    with pytest.raises(InsufficientDataError):
        build_batches([], mode="per_query")
    with pytest.raises(ValueError):
        build_batches(["a"], mode="jackknife")
    with pytest.raises(ValueError):
        build_batches(["a"], mode="bootstrap")  # num_batches missing
    with pytest.raises(ValueError):
        build_batches(["a"], num_batches=5, batch_size=0)


# --- thresholds -----------------------------------------------------------------


def test_calibration_threshold_values():
    assert calibration_threshold(0.05, 10_000) == pytest.approx(0.0249525, abs=1e-9)
    assert calibration_threshold(0.05, 2_000) == pytest.approx(0.0247625, abs=1e-9)
    assert calibration_threshold(0.05, 20) == pytest.approx(0.00125, abs=1e-12)
    # at 19 batches the threshold is zero up to float rounding; the batch
    # count check, not the sign of this value, is what rejects it
    assert abs(calibration_threshold(0.05, 19)) < 1e-12


def test_required_batches():
    assert required_batches(0.05) == 20
    assert required_batches(0.1) == 10
    assert required_batches(0.5) == 2
    # the threshold is meaningfully positive from the required count upward
    # and vanishes (to rounding) one batch below it
    for alpha in (0.05, 0.1, 0.25):
        m = required_batches(alpha)
        assert calibration_threshold(alpha, m) > 1e-6
        assert calibration_threshold(alpha, m - 1) < 1e-12


# --- calibration ------------------------------------------------------------------


def test_calibrate_rejects_too_few_batches():
    ds = _synth()
    batches = build_batches(ds.queries(), num_batches=19, seed=0)
    with pytest.raises(TooFewBatchesError):
        calibrate(DCG, batches, ds, alpha=0.05)


def test_calibrate_succeeds_with_perfect_predictions_and_minimum_batches():
    # An infinitely sharp annotator predicts the exact one-hot truth, so the
    # perturbed utility equals the true utility at every strength and both
    # achieved losses are zero.
    ds = _synth(sharpness=float("inf"))
    batches = build_batches(ds.queries(), num_batches=20, seed=1)
    cal = calibrate(DCG, batches, ds, alpha=0.05)
    assert cal.achieved_loss_low == 0.0
    assert cal.achieved_loss_high == 0.0
    assert -1.0 < cal.lambda_low < cal.lambda_high < 1.0
    ci = crc_ci(DCG, ds.queries(), ds, cal)
    # the interval collapses onto the (exactly predicted) utility
    assert ci.width == pytest.approx(0.0, abs=1e-9)


def test_calibrate_raises_when_no_strength_can_reach_the_truth():
    # Predictions stuck at label 0 are one-hot, hence invariant under every
    # perturbation strength, while the true labels sit at 1: no strength
    # makes the optimistic bound reach the truth.
    scale = LabelScale(1)
    rankings, truth, predicted = {}, {}, {}
    for i in range(10):
        qid = f"q{i}"
        rankings[qid] = RankedList(query_id=qid, doc_ids=("d0", "d1"))
        for doc in ("d0", "d1"):
            truth[(qid, doc)] = Judgment(1)
            predicted[(qid, doc)] = RelevanceDistribution((1.0, 0.0))
    ds = Dataset(scale=scale, rankings=rankings, truth=truth, predicted=predicted)
    batches = build_batches(ds.queries(), num_batches=25, seed=0)
    with pytest.raises(CalibrationInfeasibleError):
        calibrate(PREC, batches, ds, alpha=0.05)


def test_calibrate_is_invariant_to_batch_order():
    ds = _synth()
    batches = build_batches(ds.queries(), num_batches=40, batch_size=10, seed=6)
    a = calibrate(DCG, batches, ds, alpha=0.05)
    b = calibrate(DCG, list(reversed(batches)), ds, alpha=0.05)
    assert (a.lambda_low, a.lambda_high) == (b.lambda_low, b.lambda_high)


def test_calibrate_keeps_losses_under_threshold_and_is_recomputable():
    ds = _synth(sharpness=2.0, queries=40, docs=10, seed=9)
    batches = build_batches(ds.queries(), num_batches=60, batch_size=12, seed=7)
    cal = calibrate(DCG, batches, ds, alpha=0.1)
    thr = calibration_threshold(0.1, 60)
    assert 0.0 <= cal.achieved_loss_high < thr
    assert 0.0 <= cal.achieved_loss_low < thr

    # Recompute the high-side loss from scratch with the public pieces.
    from rankci.metrics import query_utility_true

    misses = 0
    for batch in batches:
        true_mean = float(np.mean([
            query_utility_true(DCG, ds.rankings[q], ds.truth) for q in batch
        ]))
        if utility_crc(DCG, batch, ds, cal.lambda_high) < true_mean:
            misses += 1
    assert misses / len(batches) == pytest.approx(cal.achieved_loss_high, abs=1e-12)


def test_crc_ci_report_contents():
    ds = _synth()
    batches = build_batches(ds.queries(), num_batches=30, batch_size=10, seed=8)
    cal = calibrate(DCG, batches, ds, alpha=0.1)
    ci = crc_ci(DCG, ds.queries(), ds, cal)
    assert ci.method == "crc"
    assert ci.lower <= ci.upper
    assert ci.estimate == pytest.approx(utility_crc(DCG, ds.queries(), ds, 0.0), abs=1e-12)
    assert ci.diagnostics["lambda_low"] == cal.lambda_low
    assert ci.diagnostics["lambda_high"] == cal.lambda_high
    with pytest.raises(EmptyQuerySetError):
        crc_ci(DCG, [], ds, cal)


# --- the serialised record ----------------------------------------------------------


def test_calibration_record_round_trips_exactly():
    cal = CrcCalibration(lambda_low=-0.123456789, lambda_high=0.987654321,
                         alpha=0.05, num_batches=2000,
                         achieved_loss_low=0.0205, achieved_loss_high=0.0215)
    again = CrcCalibration.from_text(cal.to_text())
    assert again == cal


def test_calibration_record_validates_itself():
    with pytest.raises(ValueError):
        CrcCalibration(lambda_low=0.5, lambda_high=0.4, alpha=0.05,
                       num_batches=2000, achieved_loss_low=0.0, achieved_loss_high=0.0)
    with pytest.raises(ValueError):
        CrcCalibration(lambda_low=-0.5, lambda_high=0.5, alpha=0.05,
                       num_batches=2000, achieved_loss_low=0.5, achieved_loss_high=0.0)
    with pytest.raises(ValueError):
        CrcCalibration(lambda_low=-1.0, lambda_high=0.5, alpha=0.05,
                       num_batches=2000, achieved_loss_low=0.0, achieved_loss_high=0.0)


@pytest.mark.parametrize("text", ["not json", "[1, 2]", '{"lambda_low": 0.1}'])
def test_calibration_record_rejects_malformed_text(text):
    with pytest.raises(ValueError):
        CrcCalibration.from_text(text)
