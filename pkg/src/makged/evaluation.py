"""Confusion counts, macro-averaged metrics and the results table."""

from __future__ import annotations

from collections.abc import Sequence
from dataclasses import asdict, dataclass

from .dataset import Label
from .errors import EmptyMatrix, MisalignedInputs
from .protocol import RunStats

COLUMNS = ("Accuracy", "F1-Score", "Precision", "Recall")


@dataclass(frozen=True)
class ConfusionMatrix:
    """Counts with Incorrect as the positive class."""

    tp: int = 0
    fp: int = 0
    fn: int = 0
    tn: int = 0

    @property
    def n(self) -> int:
        return self.tp + self.fp + self.fn + self.tn

    def swapped(self) -> ConfusionMatrix:
        return ConfusionMatrix(tp=self.tn, fp=self.fn, fn=self.fp, tn=self.tp)


@dataclass(frozen=True)
class MetricsReport:
    accuracy: float
    macro_precision: float
    macro_recall: float
    macro_f1: float
    n: int


def confusion(predictions: Sequence, gold: Sequence) -> ConfusionMatrix:
    """Position-aligned comparison; both sides expose ``.triple`` and ``.label``."""
    if len(predictions) != len(gold):
        raise MisalignedInputs(f"{len(predictions)} predictions vs {len(gold)} gold examples")
    tp = fp = fn = tn = 0
    for i, (p, g) in enumerate(zip(predictions, gold)):
        if tuple(p.triple) != tuple(g.triple):
            raise MisalignedInputs(f"row {i}: prediction for {tuple(p.triple)} but gold is {tuple(g.triple)}")
        pred_pos = p.label is Label.INCORRECT
        gold_pos = g.label is Label.INCORRECT
        if pred_pos and gold_pos:
            tp += 1
        elif pred_pos:
            fp += 1
        elif gold_pos:
            fn += 1
        else:
            tn += 1
    return ConfusionMatrix(tp, fp, fn, tn)


def _ratio(num: float, den: float) -> float:
    return num / den if den else 0.0


def _prf(tp: int, fp: int, fn: int) -> tuple[float, float, float]:
    p = _ratio(tp, tp + fp)
    r = _ratio(tp, tp + fn)
    return p, r, _ratio(2 * p * r, p + r)


def metrics(cm: ConfusionMatrix) -> MetricsReport:
    """Accuracy plus unweighted two-class means of precision, recall and F1 (0/0 taken as 0)."""
    if cm.n < 1:
        raise EmptyMatrix("no scored examples")
    p_inc, r_inc, f_inc = _prf(cm.tp, cm.fp, cm.fn)
    p_cor, r_cor, f_cor = _prf(cm.tn, cm.fn, cm.fp)
    return MetricsReport(
        accuracy=(cm.tp + cm.tn) / cm.n,
        macro_precision=(p_inc + p_cor) / 2,
        macro_recall=(r_inc + r_cor) / 2,
        macro_f1=(f_inc + f_cor) / 2,
        n=cm.n,
    )


def report(m: MetricsReport, stats: RunStats | None = None) -> str:
    lines = [
        " ".join(COLUMNS),
        f"{m.accuracy:.4f} {m.macro_f1:.4f} {m.macro_precision:.4f} {m.macro_recall:.4f}",
        f"n={m.n}",
    ]
    if stats is not None:
        lines += [
            f"avg_rounds={stats.mean_rounds:.2f}",
            f"tie_rate={stats.tie_fraction:.2f}",
            "methods: " + " ".join(f"{k}={v}" for k, v in stats.methods.items()),
        ]
    return "\n".join(lines)


def report_json(m: MetricsReport, stats: RunStats | None = None) -> dict:
    doc = {"metrics": {k: (round(v, 4) if isinstance(v, float) else v) for k, v in asdict(m).items()}}
    if stats is not None:
        doc["protocol"] = {
            "avg_rounds": round(stats.mean_rounds, 4),
            "tie_rate": round(stats.tie_fraction, 4),
            "methods": stats.methods,
            "decided": stats.n,
        }
    return doc
