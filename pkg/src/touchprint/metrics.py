"""Classification metrics and comparison reports.

Predictions arrive as CSV rows of `path,true_label,p0,...,p{K-1}`. A
summary carries accuracy, categorical cross-entropy loss, and macro
precision/recall/F1 over all K classes (a class with no support counts as
zero). Reports render side-by-side without/with-preprocessing tables in
plain text and JSON.
"""

from __future__ import annotations

import json
import math
import os
from dataclasses import dataclass

import numpy as np

from .errors import MetricsError

PROB_FLOOR = 1e-12


@dataclass(frozen=True)
class PredictionRecord:
    path: str
    true_label: int
    probs: np.ndarray

    def __post_init__(self):
        p = np.asarray(self.probs, dtype=np.float64)
        if p.ndim != 1:
            raise MetricsError(f"{self.path}: probs must be a flat vector")
        if self.true_label < 0:
            raise MetricsError(f"{self.path}: true_label must be >= 0")
        if np.any(p < 0.0) or np.any(p > 1.0):
            raise MetricsError(f"{self.path}: probabilities outside [0, 1]")
        if abs(float(p.sum()) - 1.0) > 1e-6:
            raise MetricsError(f"{self.path}: probabilities sum to {p.sum():.8f}, not 1")
        p.flags.writeable = False
        object.__setattr__(self, "probs", p)


@dataclass(frozen=True)
class ConfusionMatrix:
    counts: np.ndarray  # rows = true class, cols = predicted class

    def __post_init__(self):
        c = np.asarray(self.counts, dtype=np.int64)
        if c.ndim != 2 or c.shape[0] != c.shape[1]:
            raise MetricsError(f"confusion matrix must be square, got {c.shape}")
        if np.any(c < 0):
            raise MetricsError("confusion matrix counts must be nonnegative")
        c.flags.writeable = False
        object.__setattr__(self, "counts", c)

    @property
    def total(self) -> int:
        return int(self.counts.sum())


@dataclass(frozen=True)
class EvalSummary:
    model_name: str
    accuracy: float
    loss: float
    precision: float
    recall: float
    f1: float

    def __post_init__(self):
        for field_name in ("accuracy", "precision", "recall", "f1"):
            v = getattr(self, field_name)
            if not 0.0 <= v <= 1.0:
                raise MetricsError(f"{field_name} must be in [0, 1], got {v}")
        if self.loss < 0.0:
            raise MetricsError(f"loss must be >= 0, got {self.loss}")


@dataclass(frozen=True)
class HistoryCurve:
    model: str
    epochs: tuple  # (train_acc, train_loss, val_acc, val_loss) per epoch

    def __post_init__(self):
        rows = tuple(tuple(float(v) for v in row) for row in self.epochs)
        if len(rows) < 1:
            raise MetricsError("history must contain at least one epoch")
        if any(len(row) != 4 for row in rows):
            raise MetricsError("each history epoch needs exactly 4 values")
        object.__setattr__(self, "epochs", rows)


def confusion(preds: list[PredictionRecord], k: int) -> ConfusionMatrix:
    """Argmax-decision confusion matrix; ties pick the lowest class index."""
    counts = np.zeros((k, k), dtype=np.int64)
    for r in preds:
        if len(r.probs) != k:
            raise MetricsError(f"{r.path}: expected {k} probabilities, got {len(r.probs)}")
        if r.true_label >= k:
            raise MetricsError(f"{r.path}: true_label {r.true_label} out of range for K={k}")
        counts[r.true_label, int(np.argmax(r.probs))] += 1
    return ConfusionMatrix(counts)


def summarize(preds: list[PredictionRecord], k: int, model_name: str = "") -> EvalSummary:
    """Accuracy, cross-entropy loss, and macro precision/recall/F1."""
    if not preds:
        raise MetricsError("cannot summarize an empty prediction list")
    cm = confusion(preds, k).counts

    total = cm.sum()
    accuracy = float(np.trace(cm)) / float(total)

    loss = 0.0
    for r in preds:
        loss += -math.log(max(float(r.probs[r.true_label]), PROB_FLOOR))
    loss /= len(preds)

    diag = np.diag(cm).astype(np.float64)
    col = cm.sum(axis=0).astype(np.float64)
    row = cm.sum(axis=1).astype(np.float64)
    precision_c = np.divide(diag, col, out=np.zeros(k), where=col > 0)
    recall_c = np.divide(diag, row, out=np.zeros(k), where=row > 0)
    pr_sum = precision_c + recall_c
    f1_c = np.divide(2.0 * precision_c * recall_c, pr_sum, out=np.zeros(k), where=pr_sum > 0)

    return EvalSummary(
        model_name=model_name,
        accuracy=accuracy,
        loss=float(loss),
        precision=float(precision_c.mean()),
        recall=float(recall_c.mean()),
        f1=float(f1_c.mean()),
    )


def _fmt(v: float) -> str:
    return f"{v:.2f}"


def _metric_cell(s: EvalSummary) -> str:
    return " / ".join(_fmt(v) for v in (s.accuracy, s.loss, s.precision, s.recall, s.f1))


@dataclass(frozen=True)
class ComparisonReport:
    without: tuple
    with_: tuple

    def to_json_dict(self) -> dict:
        def row(s: EvalSummary) -> dict:
            return {
                "accuracy": s.accuracy,
                "loss": s.loss,
                "precision": s.precision,
                "recall": s.recall,
                "f1": s.f1,
            }

        models = []
        for a, b in zip(self.without, self.with_):
            models.append(
                {
                    "model": a.model_name,
                    "without_preprocessing": row(a),
                    "with_preprocessing": row(b),
                    "accuracy_delta": b.accuracy - a.accuracy,
                }
            )
        return {"metrics": ["accuracy", "loss", "precision", "recall", "f1"], "models": models}

    def to_text(self) -> str:
        header = ("Model", "Without (acc / loss / prec / rec / f1)", "With (acc / loss / prec / rec / f1)", "dAcc")
        rows = []
        for a, b in zip(self.without, self.with_):
            rows.append((a.model_name, _metric_cell(a), _metric_cell(b), f"{b.accuracy - a.accuracy:+.2f}"))
        widths = [max(len(r[i]) for r in [header, *rows]) for i in range(4)]
        lines = []
        sep = "-+-".join("-" * w for w in widths)
        lines.append(" | ".join(h.ljust(w) for h, w in zip(header, widths)))
        lines.append(sep)
        for r in rows:
            lines.append(" | ".join(c.ljust(w) for c, w in zip(r, widths)))
        return "\n".join(lines) + "\n"


def compare_reports(without: list[EvalSummary], with_: list[EvalSummary]) -> ComparisonReport:
    """Pair up per-model summaries from the two arms; model sets must match."""
    if not without or not with_:
        raise MetricsError("comparison needs at least one summary on each side")
    names_a = [s.model_name for s in without]
    names_b = {s.model_name for s in with_}
    if set(names_a) != names_b or len(names_a) != len(with_):
        only_a = sorted(set(names_a) - names_b)
        only_b = sorted(names_b - set(names_a))
        raise MetricsError(
            f"model sets differ: only-without={only_a}, only-with={only_b}"
        )
    by_name = {s.model_name: s for s in with_}
    return ComparisonReport(tuple(without), tuple(by_name[n] for n in names_a))


CURVE_HEADER = "epoch,train_accuracy,train_loss,val_accuracy,val_loss"


def export_curves(history: HistoryCurve, path: str | os.PathLike) -> None:
    """One CSV row per epoch; values round-trip losslessly."""
    lines = [CURVE_HEADER]
    for i, (ta, tl, va, vl) in enumerate(history.epochs, start=1):
        lines.append(f"{i},{ta!r},{tl!r},{va!r},{vl!r}")
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write("\n".join(lines) + "\n")


def read_curves(path: str | os.PathLike) -> list[tuple]:
    with open(path, "r", encoding="utf-8") as fh:
        lines = fh.read().splitlines()
    if not lines or lines[0] != CURVE_HEADER:
        raise MetricsError(f"{path}: expected header {CURVE_HEADER!r}")
    rows = []
    for lineno, line in enumerate(lines[1:], start=2):
        if not line:
            continue
        parts = line.split(",")
        if len(parts) != 5:
            raise MetricsError(f"{path}: line {lineno}: expected 5 fields")
        rows.append(tuple(float(v) for v in parts[1:]))
    return rows


def read_history(path: str | os.PathLike) -> HistoryCurve:
    """Parse the trainer's history JSON: {model, epochs:[{train_acc, ...}]}."""
    try:
        with open(path, "r", encoding="utf-8") as fh:
            doc = json.load(fh)
    except FileNotFoundError:
        raise MetricsError(f"{path}: no such file") from None
    except json.JSONDecodeError as e:
        raise MetricsError(f"{path}: invalid JSON: {e}") from None
    if not isinstance(doc, dict) or "model" not in doc or "epochs" not in doc:
        raise MetricsError(f"{path}: history must contain 'model' and 'epochs'")
    epochs = []
    for i, e in enumerate(doc["epochs"]):
        try:
            epochs.append((e["train_acc"], e["train_loss"], e["val_acc"], e["val_loss"]))
        except (TypeError, KeyError):
            raise MetricsError(f"{path}: epoch {i}: missing train/val accuracy or loss") from None
    return HistoryCurve(model=doc["model"], epochs=tuple(epochs))


def read_predictions(path: str | os.PathLike) -> tuple[list[PredictionRecord], int]:
    """Parse a predictions CSV, returning the records and K from the header."""
    try:
        with open(path, "r", encoding="utf-8") as fh:
            lines = fh.read().splitlines()
    except FileNotFoundError:
        raise MetricsError(f"{path}: no such file") from None
    if not lines:
        raise MetricsError(f"{path}: empty predictions file")
    header = lines[0].split(",")
    if header[:2] != ["path", "true_label"] or len(header) < 3:
        raise MetricsError(f"{path}: header must be path,true_label,p0,...")
    k = len(header) - 2
    if header[2:] != [f"p{i}" for i in range(k)]:
        raise MetricsError(f"{path}: probability columns must be p0..p{k - 1}")
    records = []
    for lineno, line in enumerate(lines[1:], start=2):
        if not line:
            continue
        parts = line.split(",")
        if len(parts) != k + 2:
            raise MetricsError(f"{path}: line {lineno}: expected {k + 2} fields, got {len(parts)}")
        try:
            rec = PredictionRecord(parts[0], int(parts[1]), np.array([float(v) for v in parts[2:]]))
        except ValueError:
            raise MetricsError(f"{path}: line {lineno}: non-numeric field") from None
        except MetricsError as e:
            raise MetricsError(f"{path}: line {lineno}: {e}") from None
        records.append(rec)
    return records, k


def write_predictions(preds: list[PredictionRecord], k: int, path: str | os.PathLike) -> None:
    lines = ["path,true_label," + ",".join(f"p{i}" for i in range(k))]
    for r in preds:
        lines.append(f"{r.path},{r.true_label}," + ",".join(repr(float(p)) for p in r.probs))
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write("\n".join(lines) + "\n")


def write_summary(summary: EvalSummary, path: str | os.PathLike) -> None:
    doc = {
        "model": summary.model_name,
        "accuracy": summary.accuracy,
        "loss": summary.loss,
        "precision": summary.precision,
        "recall": summary.recall,
        "f1": summary.f1,
    }
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        json.dump(doc, fh, indent=2)
        fh.write("\n")


def read_summary(path: str | os.PathLike) -> EvalSummary:
    try:
        with open(path, "r", encoding="utf-8") as fh:
            doc = json.load(fh)
    except FileNotFoundError:
        raise MetricsError(f"{path}: no such file") from None
    except json.JSONDecodeError as e:
        raise MetricsError(f"{path}: invalid JSON: {e}") from None
    try:
        return EvalSummary(
            model_name=doc["model"],
            accuracy=float(doc["accuracy"]),
            loss=float(doc["loss"]),
            precision=float(doc["precision"]),
            recall=float(doc["recall"]),
            f1=float(doc["f1"]),
        )
    except (TypeError, KeyError):
        raise MetricsError(f"{path}: summary must contain model/accuracy/loss/precision/recall/f1") from None
