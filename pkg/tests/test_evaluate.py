from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from flowforensics.classifiers.model import ClassifierSpec
from flowforensics.evaluate import (
    ConfusionMatrix,
    cross_validate,
    confusion_matrix,
    format_report,
    metrics,
    percent,
    stratified_folds,
)
from flowforensics.ingest import synth_flows

# Printed matrices: rows are actual Normal / Attack, columns predicted Normal / Attack.
PRINTED = {
    "ARM": ConfusionMatrix(tn=31785, fp=10894, fn=12675, tp=108654),
    "DT": ConfusionMatrix(tn=84607, fp=8393, fn=9058, tp=155615),
    "NB": ConfusionMatrix(tn=84101, fp=8899, fn=61380, tp=103293),
    "ANN": ConfusionMatrix(tn=2719, fp=90281, fn=2562, tp=162111),
}
PRINTED_RATES = {"ARM": ("86.45%", "13.55%"), "DT": ("93.23%", "6.77%"), "NB": ("72.73%", "27.27%"), "ANN": ("63.97%", "36.03%")}


def test_confusion_matrix_small_cases():
    assert confusion_matrix([1, 1, 0], [1, 1, 0]) == ConfusionMatrix(tp=2, tn=1)
    assert confusion_matrix([1], [0]) == ConfusionMatrix(fp=1)
    assert confusion_matrix([0], [1]) == ConfusionMatrix(fn=1)


def test_confusion_matrix_errors():
    with pytest.raises(ValueError, match="length"):
        confusion_matrix([0, 1], [0])
    with pytest.raises(ValueError):
        confusion_matrix([2], [0])
    with pytest.raises(ValueError):
        ConfusionMatrix(tp=-1)


def test_reconstructed_dt_lists():
    cm = PRINTED["DT"]
    actual = [0] * (cm.tn + cm.fp) + [1] * (cm.fn + cm.tp)
    pred = [0] * cm.tn + [1] * cm.fp + [0] * cm.fn + [1] * cm.tp
    assert confusion_matrix(pred, actual) == ConfusionMatrix(tn=84607, fp=8393, fn=9058, tp=155615)


@pytest.mark.parametrize("name", ["DT", "NB", "ANN"])
def test_printed_matrices_give_printed_rates(name):
    m = metrics(PRINTED[name])
    assert (m.accuracy_pct, m.far_pct) == PRINTED_RATES[name]
    assert round(float(m.accuracy * 100), 2) == float(PRINTED_RATES[name][0][:-1])


def test_rule_matrix_diverges_from_printed_rates():
    cm = PRINTED["ARM"]
    assert cm.total == 164008
    m = metrics(cm)
    assert (m.accuracy_pct, m.far_pct) == ("85.63%", "14.37%")
    assert (m.accuracy_pct, m.far_pct) != PRINTED_RATES["ARM"]


def test_metrics_empty_errors():
    with pytest.raises(ValueError):
        metrics(ConfusionMatrix())


def test_percent_rounds_half_up():
    assert percent(Fraction(12345, 1000000)) == "1.23%"
    assert percent(Fraction(1, 8)) == "12.50%"
    assert percent(Fraction(5, 10000)) == "0.05%"
    assert percent(Fraction(125, 1000000)) == "0.01%"


matrices = st.builds(
    ConfusionMatrix, *(st.integers(0, 10**9) for _ in range(4))
).filter(lambda cm: cm.total > 0)


@settings(max_examples=1000, deadline=None)
@given(matrices)
def test_accuracy_plus_far_is_one(cm):
    m = metrics(cm)
    assert m.accuracy + m.far == 1


@given(st.lists(st.integers(0, 1), min_size=1, max_size=50))
def test_perfect_prediction_has_no_errors(labels):
    cm = confusion_matrix(labels, labels)
    assert cm.fp == cm.fn == 0


def test_folds_small_balanced():
    labels = [0, 1] * 5
    folds = stratified_folds(labels, 5, seed=0)
    for f in folds:
        assert sorted(np.asarray(labels)[f].tolist()) == [0, 1]


def test_fold_sizes_at_full_scale():
    labels = np.array([0] * 93000 + [1] * 164673)
    folds = stratified_folds(labels, 10, seed=0)
    assert {len(f) for f in folds} <= {25767, 25768}
    assert sum(len(f) for f in folds) == 257673


def test_folds_deterministic():
    labels = np.random.default_rng(1).integers(0, 2, 200)
    a = stratified_folds(labels, 10, 7)
    b = stratified_folds(labels, 10, 7)
    assert all(np.array_equal(x, y) for x, y in zip(a, b))


def test_folds_class_too_small():
    with pytest.raises(ValueError, match="fewer than k"):
        stratified_folds([0] * 20 + [1] * 3, 5, 0)


@settings(max_examples=100, deadline=None)
@given(st.integers(2, 12), st.integers(0, 200), st.integers(0, 200), st.integers(0, 2**31))
def test_fold_partition_and_ratio(k, n0, n1, seed):
    n0, n1 = n0 + k, n1 + k
    labels = np.array([0] * n0 + [1] * n1)
    folds = stratified_folds(labels, k, seed)
    allidx = np.concatenate(folds)
    assert sorted(allidx.tolist()) == list(range(n0 + n1))
    for f in folds:
        for cls, n_cls in ((0, n0), (1, n1)):
            got = int((labels[f] == cls).sum())
            assert abs(got - n_cls / k) < 1
        assert abs(len(f) - (n0 + n1) / k) < 1


def test_cv_separable_dt():
    d = synth_flows(1000, 0.5, 6.0, seed=0)
    rep = cross_validate(d, ClassifierSpec("dt"), k=10, seed=0)
    assert rep.pooled.total == len(d)
    assert rep.metrics.accuracy > Fraction(95, 100)


def test_cv_no_signal_near_majority_prior():
    accs = []
    for seed in range(20):
        d = synth_flows(300, 0.7, 0.0, seed=seed)
        accs.append(float(cross_validate(d, ClassifierSpec("nb"), k=5, seed=seed).metrics.accuracy))
    assert abs(np.mean(accs) - 0.7) <= 0.05


def test_constant_baseline_on_full_scale_proportions():
    d = synth_flows(257673, 164673 / 257673, 1.0, seed=0)
    rep = cross_validate(d, ClassifierSpec("const", {"label": 0}), k=10, seed=0)
    assert rep.metrics.accuracy == Fraction(93000, 257673)
    assert rep.metrics.accuracy_pct == "36.09%"


def test_rigorous_mode_records_fold_features():
    d = synth_flows(200, 0.5, 2.0, seed=3)
    rep = cross_validate(d, ClassifierSpec("nb"), k=4, seed=1, mode="rigorous", top_k=3)
    assert len(rep.fold_features) == 4
    assert all(len(f) == 3 for f in rep.fold_features)
    assert "fold_features.1=" in format_report([rep])


def test_reproduction_projection_and_report_format():
    d = synth_flows(200, 0.5, 2.0, seed=3)
    rep = cross_validate(d, ClassifierSpec("dt"), k=5, seed=2, features=["sbytes", "dbytes"])
    text = format_report([rep])
    lines = text.splitlines()
    assert lines[:6] == ["[DT]", "classifier=DT", "k=5", "seed=2", "mode=reproduction", "features=sbytes,dbytes"]
    assert lines[6] == "fold,tp,tn,fp,fn,accuracy,far"
    assert lines[12].startswith("pooled,")
    assert format_report([rep]) == format_report([cross_validate(d, ClassifierSpec("dt"), k=5, seed=2, features=["sbytes", "dbytes"])])


def test_invalid_mode():
    with pytest.raises(ValueError):
        cross_validate(synth_flows(50, 0.5, 1.0, 0), ClassifierSpec("dt"), k=2, mode="fast")
