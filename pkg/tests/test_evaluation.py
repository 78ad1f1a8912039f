import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from oracles import concordance_auc
from planktonad import evaluation as ev
from planktonad.dataset import SampleLabel
from planktonad.errors import DomainError, ShapeError
from planktonad.evaluation import ConfusionCounts
from planktonad.oneclass import DecisionThreshold, select_threshold_eer

OK, NOK = SampleLabel.OK, SampleLabel.NOK


def test_counts_perfect():
    labels = [OK, OK, NOK, NOK]
    assert ev.confusion_counts(labels, labels) == ConfusionCounts(2, 2, 0, 0)


def test_counts_ok_positive_fp_fn_semantics():
    # FP: NOK predicted OK, FN: OK predicted NOK
    assert ev.confusion_counts([NOK, OK], [OK, NOK], "OK") == ConfusionCounts(0, 0, 1, 1)
    assert ev.confusion_counts([OK], [NOK]) == ConfusionCounts(0, 0, 1, 0)
    assert ev.confusion_counts([NOK], [OK]) == ConfusionCounts(0, 0, 0, 1)


def test_counts_random_tally():
    rng = np.random.default_rng(0)
    pred = [OK if v else NOK for v in rng.random(100) < 0.5]
    true = [OK if v else NOK for v in rng.random(100) < 0.5]
    tally = {"tp": 0, "tn": 0, "fp": 0, "fn": 0}
    for p, t in zip(pred, true):
        key = ("t" if p == t else "f") + ("p" if p == OK else "n")
        tally[key] += 1
    c = ev.confusion_counts(pred, true)
    assert (c.tp, c.tn, c.fp, c.fn) == (tally["tp"], tally["tn"], tally["fp"], tally["fn"])
    assert c.total == 100
    swapped = ev.confusion_counts(pred, true, NOK)
    assert (swapped.tp, swapped.tn, swapped.fp, swapped.fn) == (c.tn, c.tp, c.fn, c.fp)


def test_counts_length_mismatch():
    with pytest.raises(ShapeError):
        ev.confusion_counts([OK], [OK, NOK])


def test_f1_table_value():
    assert ev.f1_score(0.94, 0.79) == pytest.approx(0.86, abs=0.005)


@given(st.floats(0.0, 1.0))
def test_f1_identity(p):
    assert abs(ev.f1_score(p, p) - p) <= 1e-12


def test_zero_division():
    precision, recall, specificity, f1 = ev.binary_metrics(ConfusionCounts(0, 5, 0, 5))
    assert (precision, recall, f1) == (0.0, 0.0, 0.0)
    assert specificity == 1.0


def test_metric_formulas():
    c = ConfusionCounts(tp=8, tn=6, fp=2, fn=4)
    precision, recall, specificity, f1 = ev.binary_metrics(c)
    assert precision == 8 / 10
    assert recall == 8 / 12
    assert specificity == 6 / 8
    assert f1 == pytest.approx(2 * precision * recall / (precision + recall), abs=1e-15)


def test_auc_separated_and_constant():
    assert ev.roc_auc([0.1, 0.2, 0.8, 0.9], [OK, OK, NOK, NOK])[1] == 1.0
    assert ev.roc_auc([0.5] * 4, [OK, NOK, OK, NOK])[1] == 0.5


def test_auc_single_class():
    with pytest.raises(DomainError):
        ev.roc_auc([0.1, 0.2], [OK, OK])


@pytest.mark.parametrize("seed", range(10))
def test_auc_matches_concordance(seed):
    rng = np.random.default_rng(seed)
    scores = np.round(rng.random(50), 1)  # rounding creates ties
    nok = rng.random(50) < 0.4
    nok[:2] = [True, False]
    points, auc = ev.roc_auc(scores, nok)
    assert abs(auc - concordance_auc(scores, nok)) <= 1e-9
    assert tuple(points[0]) == (0.0, 0.0) and tuple(points[-1]) == (1.0, 1.0)
    assert np.all(np.diff(points[:, 0]) >= 0) and np.all(np.diff(points[:, 1]) >= 0)


def test_report_perfect():
    scores = [0.1, 0.2, 0.8, 0.9]
    labels = [OK, OK, NOK, NOK]
    t = select_threshold_eer(scores, labels)
    r = ev.build_report("ConvM3-BAE1/ErrMetrics/LOF", "all", scores, labels, t)
    assert r.f1 == r.precision == r.recall == r.auc == 1.0
    assert r.counts == ConfusionCounts(2, 2, 0, 0)


@settings(max_examples=50, deadline=None)
@given(st.lists(st.tuples(st.floats(0, 1), st.booleans()), min_size=4, max_size=30))
def test_report_internal_consistency(pairs):
    scores = [p[0] for p in pairs]
    labels = [NOK if p[1] else OK for p in pairs]
    if len(set(labels)) < 2:
        return
    r = ev.build_report("x", "all", scores, labels, select_threshold_eer(scores, labels))
    assert abs(r.f1 - ev.f1_score(r.precision, r.recall)) <= 1e-9
    for v in (r.auc, r.f1, r.precision, r.recall, r.specificity):
        assert 0.0 <= v <= 1.0
    assert r.counts.total == len(scores)


def test_accuracy_invariant_for_balanced_sets():
    rng = np.random.default_rng(1)
    truth = [OK] * 10 + [NOK] * 10
    pred = [OK if v else NOK for v in rng.random(20) < 0.5]
    a = ev.confusion_counts(pred, truth, OK)
    b = ev.confusion_counts(pred, truth, NOK)
    assert (a.tp + a.tn) == (b.tp + b.tn)


def test_report_csv_and_json(tmp_path):
    t = DecisionThreshold(0.5, 0.0, 0.0, "validation")
    r = ev.build_report("c", "all", [0.1, 0.9], [OK, NOK], t)
    ev.write_reports_csv(tmp_path / "r.csv", [r])
    header = (tmp_path / "r.csv").read_text().splitlines()[0]
    assert header == ",".join(ev.REPORT_COLUMNS)
    assert ev.EvaluationReport.from_json(r.to_json()) == r
    assert "F1 1.00" in r.display()
