"""Cross-validation harness, hyperparameter search, metrics and significance testing."""

from __future__ import annotations

import math
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field, replace
from typing import Sequence

import numpy as np

from .choquet import train_choquet
from .classify import METHODS, ScoredReferenceSet, assign_batch
from .dataset import FoldPlan, PerformanceTable, infer_scales, stratified_folds
from .encoding import count_clamped
from .learner import TrainConfig, train


# --------------------------------------------------------------------------- metrics

@dataclass(frozen=True)
class ConfusionMatrix:
    counts: np.ndarray  # rows = true class, columns = predicted

    @classmethod
    def from_labels(cls, truth, predicted, q: int) -> "ConfusionMatrix":
        cm = np.zeros((q, q), dtype=np.int64)
        np.add.at(cm, (np.asarray(truth) - 1, np.asarray(predicted) - 1), 1)
        return cls(cm)

    @property
    def total(self) -> int:
        return int(self.counts.sum())


@dataclass(frozen=True)
class MetricsReport:
    accuracy: float
    precision: tuple
    recall: tuple
    f_measure: tuple
    macro_precision: float
    macro_recall: float
    macro_f: float

    def summary(self) -> dict:
        return {"accuracy": self.accuracy, "precision": self.macro_precision,
                "recall": self.macro_recall, "f_measure": self.macro_f}


def _ratio(num, den):
    return np.divide(num, den, out=np.zeros(len(num), dtype=float), where=den > 0)


def metrics(cm: ConfusionMatrix) -> MetricsReport:
    """Accuracy plus per-class and macro-averaged precision, recall and F.

    Zero denominators give 0. Macro F is the mean of the per-class F values.
    """
    C = np.asarray(cm.counts, dtype=float)
    if C.size == 0 or C.sum() == 0:
        raise ValueError("confusion matrix is empty")
    tp = np.diag(C)
    prec = _ratio(tp, C.sum(axis=0))
    rec = _ratio(tp, C.sum(axis=1))
    f = _ratio(2 * prec * rec, prec + rec)
    return MetricsReport(
        accuracy=float(tp.sum() / C.sum()),
        precision=tuple(prec.tolist()), recall=tuple(rec.tolist()), f_measure=tuple(f.tolist()),
        macro_precision=float(prec.mean()), macro_recall=float(rec.mean()), macro_f=float(f.mean()),
    )


def mean_summary(reports: Sequence[MetricsReport]) -> dict:
    keys = ("accuracy", "precision", "recall", "f_measure")
    return {k: float(np.mean([r.summary()[k] for r in reports])) for k in keys}


# --------------------------------------------------------------------------- grids

def paper_values() -> list:
    """10^e and 5*10^e for e = -8..8, in increasing order (34 values)."""
    out = []
    for e in range(-8, 9):
        out.extend([float(f"1e{e}"), float(f"5e{e}")])
    return out


QUICK_VALUES = [1e-3, 1e-1, 10.0]


@dataclass(frozen=True)
class GridSpec:
    C1: tuple
    C2: tuple
    K: tuple = (None,)
    methods: tuple = ("m2",)
    forms: tuple = ("none",)

    def __post_init__(self):
        for name in ("C1", "C2", "K", "methods", "forms"):
            vals = tuple(getattr(self, name))
            if not vals:
                raise ValueError(f"grid list {name} is empty")
            object.__setattr__(self, name, vals)
        if any(not v > 0 for v in self.C1 + self.C2):
            raise ValueError("grid constants must be positive")
        for m in self.methods:
            if m not in METHODS:
                raise ValueError(f"unknown method {m!r}")

    def points(self) -> list:
        """(form, C1, C2) triples in grid order."""
        return [(f, c1, c2) for f in self.forms for c1 in self.C1 for c2 in self.C2]

    def classifier_points(self, smallest_class: int) -> list:
        """(method, K) pairs; K is only varied for m4 and capped at the smallest class."""
        out = []
        for m in self.methods:
            if m == "m4":
                ks = [k for k in self.K if k is not None and k <= smallest_class] or [1]
                out.extend((m, k) for k in ks)
            else:
                out.append((m, None))
        return out


def paper_grid(methods=("m2",), forms=("none",)) -> GridSpec:
    vals = tuple(paper_values())
    return GridSpec(C1=vals, C2=vals, K=tuple(range(1, 11)), methods=tuple(methods), forms=tuple(forms))


def quick_grid(methods=("m2",), forms=("none",)) -> GridSpec:
    vals = tuple(QUICK_VALUES)
    return GridSpec(C1=vals, C2=vals, K=(1, 3, 5), methods=tuple(methods), forms=tuple(forms))


# --------------------------------------------------------------------------- fitting

@dataclass(frozen=True)
class ExperimentConfig:
    """What to fit and how to classify; ``model`` is 'value' (piecewise-linear) or 'choquet'."""

    model: str = "value"
    form: str = "none"
    policy: str = "both"
    gamma: object = 2
    directions: tuple = None
    method: str = "m2"
    K: int = None
    C1: float = 1e-3
    C2: float = 1e-3

    def __post_init__(self):
        if self.model not in ("value", "choquet"):
            raise ValueError(f"unknown model {self.model!r}")
        if self.method not in METHODS:
            raise ValueError(f"unknown method {self.method!r}")


@dataclass
class FittedPredictor:
    """A trained model plus its scored reference set."""

    model: object
    refs: ScoredReferenceSet
    scales: tuple = ()

    def values(self, performances) -> np.ndarray:
        return self.model.values(performances)

    def predict(self, performances, method: str, K: int = None) -> np.ndarray:
        return assign_batch(method, self.refs, self.values(performances), K)


def fit(table: PerformanceTable, config: ExperimentConfig, jobs: int = 1) -> FittedPredictor:
    """Fit scales (or ECDF) and the model on ``table`` only."""
    if config.model == "choquet":
        model = train_choquet(table, config.directions, config.C1)
        scales = ()
    else:
        scales = tuple(infer_scales(table, config.gamma, config.directions))
        model = train(table, scales, TrainConfig(form=config.form, policy=config.policy,
                                                 C1=config.C1, C2=config.C2, jobs=jobs))
    refs = ScoredReferenceSet.from_arrays(model.values(table.performances), table.labels, table.q)
    return FittedPredictor(model, refs, scales)


def _accuracy(truth, pred) -> float:
    return float(np.mean(np.asarray(truth) == np.asarray(pred)))


# --------------------------------------------------------------------------- grid search

@dataclass(frozen=True)
class GridResult:
    config: ExperimentConfig
    score: float
    evaluated: int


def _grid_point(args):
    train_t, val_t, base, form, c1, c2, cls_points = args
    cfg = replace(base, form=form, C1=c1, C2=c2)
    try:
        pred = fit(train_t, cfg)
    except (ValueError, RuntimeError):
        # an infeasible or degenerate point simply cannot win
        return [(-1.0, m, k) for m, k in cls_points]
    vals = pred.values(val_t.performances)
    out = []
    for m, k in cls_points:
        out.append((_accuracy(val_t.labels, assign_batch(m, pred.refs, vals, k)), m, k))
    return out


def grid_search(train_table: PerformanceTable, validation_table: PerformanceTable,
                base: ExperimentConfig, grid: GridSpec, jobs: int = 1) -> GridResult:
    """Validation accuracy of every grid point; the first best point in grid order wins.

    For the Choquet model C2 plays no role, so only the first C2 value is tried.
    """
    points = grid.points()
    if base.model == "choquet":
        points = [(f, c1, c2) for f, c1, c2 in points if c2 == grid.C2[0]]
    smallest = int(train_table.class_counts().min())
    cls_points = grid.classifier_points(smallest)
    tasks = [(train_table, validation_table, base, f, c1, c2, cls_points) for f, c1, c2 in points]
    if jobs > 1 and len(tasks) > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            results = list(pool.map(_grid_point, tasks))
    else:
        results = [_grid_point(t) for t in tasks]
    best, best_cfg = -np.inf, None
    for (f, c1, c2), res in zip(points, results):
        for acc, m, k in res:
            if acc > best:
                best = acc
                best_cfg = replace(base, form=f, C1=c1, C2=c2, method=m, K=k)
    return GridResult(best_cfg, float(best), len(points) * len(cls_points))


# --------------------------------------------------------------------------- cross-validation

@dataclass
class FoldResult:
    fold: int
    metrics: MetricsReport
    config: ExperimentConfig
    validation_score: float = None
    train_seconds: float = 0.0
    predict_seconds: float = 0.0
    search_seconds: float = 0.0
    clamped: int = 0
    scales: list = field(default_factory=list)
    structure: str = "none"
    predictions: list = field(default_factory=list)

    def to_dict(self) -> dict:
        return {
            "fold": self.fold,
            "metrics": asdict(self.metrics),
            "config": _config_dict(self.config),
            "validation_score": self.validation_score,
            "runtime": {"search": self.search_seconds, "train": self.train_seconds,
                        "predict": self.predict_seconds},
            "clamped": self.clamped,
            "scales": self.scales,
            "structure": self.structure,
        }


@dataclass
class CvResult:
    folds: list
    mean: dict
    seed: int = None

    @property
    def accuracies(self) -> list:
        return [f.metrics.accuracy for f in self.folds]

    def to_dict(self) -> dict:
        return {"seed": self.seed, "mean": self.mean, "folds": [f.to_dict() for f in self.folds]}


def _config_dict(cfg: ExperimentConfig) -> dict:
    d = asdict(cfg)
    d["gamma"] = list(cfg.gamma) if isinstance(cfg.gamma, (tuple, list)) else cfg.gamma
    d["directions"] = list(cfg.directions) if cfg.directions is not None else None
    return d


def inner_split(folds: FoldPlan, test_fold: int):
    """Inner training and validation indices: the fold after the test fold validates."""
    val_fold = (test_fold + 1) % folds.K
    a = folds.assignments
    return np.flatnonzero((a != test_fold) & (a != val_fold)), np.flatnonzero(a == val_fold)


def cross_validate(table: PerformanceTable, config: ExperimentConfig, folds: FoldPlan,
                   grid: GridSpec = None, jobs: int = 1) -> CvResult:
    """Evaluate ``config`` on every fold of ``folds``.

    Scales (or the ECDF) and the model are fitted on the training folds
    only. With a grid, hyperparameters are chosen on one validation fold
    carved from the training folds, then the model is refitted on all
    training folds with the chosen setting.
    """
    results = []
    for k in range(folds.K):
        train_idx, test_idx = folds.train_index(k), folds.test_index(k)
        train_t, test_t = table.subset(train_idx), table.subset(test_idx)
        train_t.check_all_classes_present()
        cfg, val_score, t_search = config, None, 0.0
        if grid is not None:
            inner_idx, val_idx = inner_split(folds, k)
            t0 = time.perf_counter()
            gr = grid_search(table.subset(inner_idx), table.subset(val_idx), config, grid, jobs)
            t_search = time.perf_counter() - t0
            if gr.config is None:
                raise ValueError(f"fold {k}: no grid point could be trained")
            cfg, val_score = gr.config, gr.score
        t0 = time.perf_counter()
        pred = fit(train_t, cfg, jobs=jobs if grid is None else 1)
        t_train = time.perf_counter() - t0
        t0 = time.perf_counter()
        yhat = pred.predict(test_t.performances, cfg.method, cfg.K)
        t_pred = time.perf_counter() - t0
        cm = ConfusionMatrix.from_labels(test_t.labels, yhat, table.q)
        clamped = count_clamped(pred.scales, test_t.performances) if pred.scales else 0
        structure = pred.model.structure.describe(table.criterion_names) if hasattr(pred.model, "structure") else "none"
        results.append(FoldResult(
            fold=k, metrics=metrics(cm), config=cfg, validation_score=val_score,
            train_seconds=t_train, predict_seconds=t_pred, search_seconds=t_search,
            clamped=clamped, scales=[[s.alpha, s.beta, s.direction, s.gamma] for s in pred.scales],
            structure=structure, predictions=[int(v) for v in yhat],
        ))
    return CvResult(folds=results, mean=mean_summary([r.metrics for r in results]), seed=folds.seed)


def repeat_seeds(seed: int, repeats: int) -> list:
    """Independent, reproducible per-repeat seeds derived from one master seed."""
    return [int(s.generate_state(1)[0]) for s in np.random.SeedSequence(seed).spawn(repeats)]


def repeated_cv(table: PerformanceTable, config: ExperimentConfig, K: int = 5, repeats: int = 10,
                seed: int = 0, grid: GridSpec = None, jobs: int = 1) -> list:
    return [cross_validate(table, config, stratified_folds(table, K, s), grid, jobs)
            for s in repeat_seeds(seed, repeats)]


# --------------------------------------------------------------------------- t-test

def _betacf(a: float, b: float, x: float) -> float:
    """Continued fraction for the incomplete beta function (modified Lentz)."""
    tiny = 1e-300
    qab, qap, qam = a + b, a + 1.0, a - 1.0
    c, d = 1.0, 1.0 - qab * x / qap
    d = 1.0 / (d if abs(d) > tiny else tiny)
    h = d
    for m in range(1, 10000):
        m2 = 2 * m
        aa = m * (b - m) * x / ((qam + m2) * (a + m2))
        d = 1.0 + aa * d
        d = 1.0 / (d if abs(d) > tiny else tiny)
        c = 1.0 + aa / c
        c = c if abs(c) > tiny else tiny
        h *= d * c
        aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2))
        d = 1.0 + aa * d
        d = 1.0 / (d if abs(d) > tiny else tiny)
        c = 1.0 + aa / c
        c = c if abs(c) > tiny else tiny
        delta = d * c
        h *= delta
        if abs(delta - 1.0) < 1e-15:
            return h
    raise ArithmeticError("incomplete beta continued fraction did not converge")


def betainc_regularized(a: float, b: float, x: float) -> float:
    """I_x(a, b) for a, b > 0 and 0 <= x <= 1."""
    if not 0.0 <= x <= 1.0:
        raise ValueError("x must lie in [0, 1]")
    if x in (0.0, 1.0):
        return x
    ln_front = (math.lgamma(a + b) - math.lgamma(a) - math.lgamma(b)
                + a * math.log(x) + b * math.log1p(-x))
    front = math.exp(ln_front)
    if x < (a + 1.0) / (a + b + 2.0):
        return front * _betacf(a, b, x) / a
    return 1.0 - front * _betacf(b, a, 1.0 - x) / b


def student_t_sf(t: float, df: float) -> float:
    """Upper-tail probability P(T > t) for Student's t with ``df`` degrees of freedom."""
    if math.isinf(t):
        return 0.0 if t > 0 else 1.0
    t2 = t * t
    if t2 < df:
        # near zero df/(df+t^2) rounds to 1; use the complementary argument
        tail = 0.5 - 0.5 * betainc_regularized(0.5, df / 2.0, t2 / (df + t2))
    else:
        tail = 0.5 * betainc_regularized(df / 2.0, 0.5, df / (df + t2))
    return tail if t >= 0 else 1.0 - tail


@dataclass(frozen=True)
class TTestResult:
    t: float
    p: float
    df: int
    degenerate: bool = False


def paired_t_test(xs, ys) -> TTestResult:
    """One-tailed paired t-test of H1: mean(xs) > mean(ys).

    With zero variance of the differences the statistic is undefined; the
    result is flagged degenerate with p = 0 for a positive mean difference,
    0.5 for none and 1 for a negative one.
    """
    x = np.asarray(xs, dtype=float)
    y = np.asarray(ys, dtype=float)
    if x.shape != y.shape:
        raise ValueError("paired samples must have equal length")
    n = x.size
    if n < 2:
        raise ValueError("at least two pairs are required")
    d = x - y
    mean = float(d.mean())
    sd = float(d.std(ddof=1))
    if sd == 0.0:
        if mean > 0:
            return TTestResult(math.inf, 0.0, n - 1, True)
        if mean < 0:
            return TTestResult(-math.inf, 1.0, n - 1, True)
        return TTestResult(0.0, 0.5, n - 1, True)
    t = mean / (sd / math.sqrt(n))
    return TTestResult(t, student_t_sf(t, n - 1), n - 1)


# --------------------------------------------------------------------------- reports

def text_table(rows: Sequence[tuple], header: Sequence[str]) -> str:
    """Aligned columns; numbers rendered with four decimals."""
    cells = [[str(h) for h in header]]
    for row in rows:
        cells.append([f"{v:.4f}" if isinstance(v, float) else str(v) for v in row])
    widths = [max(len(r[i]) for r in cells) for i in range(len(header))]
    lines = ["  ".join(c.rjust(w) if i else c.ljust(w) for i, (c, w) in enumerate(zip(r, widths)))
             for r in cells]
    lines.insert(1, "  ".join("-" * w for w in widths))
    return "\n".join(lines)


def cv_table(named_results: dict) -> str:
    """Rows per metric, one column per named experiment (mirrors a results-table layout)."""
    names = list(named_results)
    rows = []
    for key, label in (("accuracy", "Accuracy"), ("precision", "Precision"),
                       ("recall", "Recall"), ("f_measure", "F-measure")):
        rows.append((label, *[float(named_results[n][key]) for n in names]))
    return text_table(rows, ["Metric", *names])
