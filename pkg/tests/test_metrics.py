import math

import numpy as np
import pytest

from touchprint import (
    EvalSummary,
    HistoryCurve,
    MetricsError,
    PredictionRecord,
    compare_reports,
    confusion,
    export_curves,
    summarize,
)
from touchprint.metrics import read_curves, read_history, read_predictions, write_predictions


def one_hotish(k, label, p=1.0):
    probs = np.full(k, (1.0 - p) / (k - 1)) if k > 1 else np.array([1.0])
    probs[label] = p
    return probs


def random_preds(rng, n, k):
    preds = []
    for i in range(n):
        raw = rng.random(k) + 1e-6
        probs = raw / raw.sum()
        preds.append(PredictionRecord(f"img{i}.png", int(rng.integers(0, k)), probs))
    return preds


def brute_force_summary(preds, k):
    """Independent per-record implementation of all five metrics."""
    correct = 0
    loss = 0.0
    cm = [[0] * k for _ in range(k)]
    for r in preds:
        pred = max(range(k), key=lambda j: (r.probs[j], -j))  # ties -> lowest index
        cm[r.true_label][pred] += 1
        if pred == r.true_label:
            correct += 1
        loss += -math.log(max(float(r.probs[r.true_label]), 1e-12))
    precision, recall, f1 = [], [], []
    for c in range(k):
        tp = cm[c][c]
        col = sum(cm[t][c] for t in range(k))
        row = sum(cm[c])
        p = tp / col if col else 0.0
        r_ = tp / row if row else 0.0
        precision.append(p)
        recall.append(r_)
        f1.append(2 * p * r_ / (p + r_) if p + r_ > 0 else 0.0)
    return (
        correct / len(preds),
        loss / len(preds),
        sum(precision) / k,
        sum(recall) / k,
        sum(f1) / k,
    )


# --- confusion ---------------------------------------------------------------

def test_all_correct_is_diagonal():
    preds = [PredictionRecord(f"{i}", i, one_hotish(3, i)) for i in range(3)]
    cm = confusion(preds, 3)
    assert np.array_equal(cm.counts, np.eye(3, dtype=int))


def test_single_misclassification_cell():
    cm = confusion([PredictionRecord("x", 0, one_hotish(3, 2, 0.9))], 3)
    assert cm.counts[0, 2] == 1 and cm.total == 1


def test_argmax_tie_lowest_index():
    cm = confusion([PredictionRecord("x", 1, np.array([0.5, 0.5, 0.0]))], 3)
    assert cm.counts[1, 0] == 1


def test_confusion_random_tally_oracle(rng):
    k = 7
    preds = random_preds(rng, 100, k)
    cm = confusion(preds, k).counts
    expected = np.zeros((k, k), dtype=int)
    for r in preds:
        expected[r.true_label, int(np.argmax(r.probs))] += 1
    assert np.array_equal(cm, expected)


def test_wrong_prob_length_fatal():
    with pytest.raises(MetricsError, match="x.png"):
        confusion([PredictionRecord("x.png", 0, one_hotish(4, 0))], 3)


def test_label_out_of_range_fatal():
    with pytest.raises(MetricsError, match="out of range"):
        confusion([PredictionRecord("x.png", 3, one_hotish(3, 0))], 3)


# --- summarize ------------------------------------------------------------------

def test_perfect_predictions():
    preds = [PredictionRecord(f"{i}", i % 3, one_hotish(3, i % 3)) for i in range(9)]
    s = summarize(preds, 3)
    assert s.accuracy == 1.0 and s.loss == 0.0 and s.f1 == 1.0


def test_uniform_probs_loss_is_log_k(rng):
    k = 200
    probs = np.full(k, 1.0 / k)
    preds = [PredictionRecord(f"{i}", int(rng.integers(0, k)), probs.copy()) for i in range(40)]
    s = summarize(preds, k)
    assert abs(s.loss - math.log(200)) < 1e-9


def test_summarize_matches_brute_force(rng):
    for k in (3, 10):
        preds = random_preds(rng, 200, k)
        s = summarize(preds, k)
        acc, loss, prec, rec, f1 = brute_force_summary(preds, k)
        assert abs(s.accuracy - acc) <= 1e-9
        assert abs(s.loss - loss) <= 1e-9
        assert abs(s.precision - prec) <= 1e-9
        assert abs(s.recall - rec) <= 1e-9
        assert abs(s.f1 - f1) <= 1e-9


def test_empty_predictions_error():
    with pytest.raises(MetricsError):
        summarize([], 3)


def test_macro_f1_invariant_under_relabeling(rng):
    k = 5
    preds = random_preds(rng, 150, k)
    perm = rng.permutation(k)
    remapped = [
        PredictionRecord(r.path, int(perm[r.true_label]), r.probs[np.argsort(perm)])
        for r in preds
    ]
    a = summarize(preds, k)
    b = summarize(remapped, k)
    assert abs(a.f1 - b.f1) <= 1e-12
    assert abs(a.precision - b.precision) <= 1e-12
    assert abs(a.recall - b.recall) <= 1e-12


def test_loss_strictly_decreases_when_true_prob_rises():
    lo = PredictionRecord("a", 0, np.array([0.4, 0.6]))
    hi = PredictionRecord("a", 0, np.array([0.5, 0.5]))
    other = PredictionRecord("b", 1, np.array([0.3, 0.7]))
    assert summarize([hi, other], 2).loss < summarize([lo, other], 2).loss


def test_loss_bounded_by_floor():
    preds = [PredictionRecord("a", 0, np.array([0.0, 1.0]))]
    s = summarize(preds, 2)
    assert s.loss <= -math.log(1e-12) + 1e-9


def test_prediction_record_validation():
    with pytest.raises(MetricsError):
        PredictionRecord("x", 0, np.array([0.5, 0.6]))  # sum != 1
    with pytest.raises(MetricsError):
        PredictionRecord("x", 0, np.array([-0.1, 1.1]))
    with pytest.raises(MetricsError):
        PredictionRecord("x", -1, np.array([1.0]))


# --- comparison report ------------------------------------------------------------

def sample_summary(name, acc=0.9):
    return EvalSummary(name, acc, 0.5, 0.9, 0.9, 0.9)


def test_identical_lists_zero_delta():
    a = [sample_summary("vgg16"), sample_summary("vgg19")]
    rep = compare_reports(a, a)
    doc = rep.to_json_dict()
    assert all(m["accuracy_delta"] == 0.0 for m in doc["models"])
    assert "+0.00" in rep.to_text()


def test_vgg16_table_delta():
    without = [EvalSummary("VGG-16", 0.93, 33.86, 0.95, 0.93, 0.94)]
    with_ = [EvalSummary("VGG-16", 0.98, 0.20, 0.99, 0.93, 0.98)]
    rep = compare_reports(without, with_)
    doc = rep.to_json_dict()
    assert abs(doc["models"][0]["accuracy_delta"] - 0.05) < 1e-12
    assert "+0.05" in rep.to_text()


def test_table_row_formatting():
    with_ = [EvalSummary("VGG-16", 0.98, 0.20, 0.99, 0.93, 0.98)]
    without = [EvalSummary("VGG-16", 0.93, 1.0, 0.95, 0.93, 0.94)]
    text = compare_reports(without, with_).to_text()
    assert "0.98 / 0.20 / 0.99 / 0.93 / 0.98" in text


def test_empty_lists_error():
    with pytest.raises(MetricsError):
        compare_reports([], [])


def test_mismatched_models_error():
    with pytest.raises(MetricsError, match="resnet50"):
        compare_reports([sample_summary("vgg16")], [sample_summary("resnet50")])


# --- curves and files ---------------------------------------------------------------

def test_export_single_epoch(tmp_path):
    h = HistoryCurve("vgg16", ((0.5, 1.2, 0.4, 1.4),))
    p = tmp_path / "c.csv"
    export_curves(h, p)
    lines = p.read_text().splitlines()
    assert len(lines) == 2
    assert lines[0] == "epoch,train_accuracy,train_loss,val_accuracy,val_loss"


def test_curves_round_trip(tmp_path, rng):
    rows = tuple(tuple(float(v) for v in rng.random(4)) for _ in range(100))
    h = HistoryCurve("m", rows)
    p = tmp_path / "c.csv"
    export_curves(h, p)
    back = read_curves(p)
    assert len(back) == 100
    assert all(got == want for got, want in zip(back, rows))


def test_history_json_round_trip(tmp_path):
    p = tmp_path / "h.json"
    p.write_text(
        '{"model": "vgg16", "config": {"epochs": 2}, "epochs": ['
        '{"train_acc": 0.5, "train_loss": 1.0, "val_acc": 0.4, "val_loss": 1.2},'
        '{"train_acc": 0.9, "train_loss": 0.3, "val_acc": 0.8, "val_loss": 0.5}]}'
    )
    h = read_history(p)
    assert h.model == "vgg16" and len(h.epochs) == 2


def test_history_requires_epochs(tmp_path):
    p = tmp_path / "h.json"
    p.write_text('{"model": "x", "epochs": []}')
    with pytest.raises(MetricsError):
        read_history(p)


def test_predictions_csv_round_trip(tmp_path, rng):
    k = 4
    preds = random_preds(rng, 10, k)
    p = tmp_path / "preds.csv"
    write_predictions(preds, k, p)
    back, kk = read_predictions(p)
    assert kk == k and len(back) == 10
    for a, b in zip(preds, back):
        assert a.path == b.path and a.true_label == b.true_label
        assert np.array_equal(a.probs, b.probs)


def test_predictions_bad_header(tmp_path):
    p = tmp_path / "preds.csv"
    p.write_text("file,label,p0\nx,0,1.0\n")
    with pytest.raises(MetricsError):
        read_predictions(p)


def test_eval_summary_validation():
    with pytest.raises(MetricsError):
        EvalSummary("m", 1.2, 0.1, 0.5, 0.5, 0.5)
    with pytest.raises(MetricsError):
        EvalSummary("m", 0.5, -0.1, 0.5, 0.5, 0.5)
