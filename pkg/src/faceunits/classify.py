"""Linear SVM with leave-one-out outer and stratified k-fold inner CV.

The soft-margin hinge-loss SVM

    min_w  0.5 * ||w||^2  +  C * sum_i max(0, 1 - y_i * w . x~_i)

is solved through its dual, the box-constrained QP

    min_a  0.5 * a' Q a - sum(a),   0 <= a <= C,   Q_ij = y_i y_j x~_i . x~_j

by a dense primal-dual interior-point iteration (Mehrotra predictor and
corrector).  x~ is the feature vector with a constant 1 appended, so the
bias is the last (regularized) weight.  Interior-point is used instead of
coordinate descent because degenerate duals (several points exactly on the
margin) stall first-order methods short of the 1e-6 duality-gap contract.
Nothing is randomized: training is deterministic, and Q is invariant under
a global label flip, so flipping labels negates weights bit-exactly.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .core import _readonly
from .errors import ConvergenceError, InputError, StratificationError


@dataclass(frozen=True, eq=False)
class LabeledDataset:
    """Feature rows with binary labels, one row per video."""

    features: np.ndarray        # V x F
    labels: tuple[str, ...]
    video_ids: tuple[str, ...]

    def __post_init__(self):
        features = _readonly(self.features)
        labels = tuple(str(v) for v in self.labels)
        ids = tuple(str(v) for v in self.video_ids)
        if features.ndim != 2 or features.shape[0] < 1:
            raise InputError(f"features must be V x F, got shape {features.shape}")
        if not np.isfinite(features).all():
            raise InputError("feature entries must be finite")
        if len(labels) != features.shape[0] or len(ids) != features.shape[0]:
            raise InputError(
                f"{features.shape[0]} rows but {len(labels)} labels and "
                f"{len(ids)} video ids")
        if len(set(ids)) != len(ids):
            dupes = sorted({v for v in ids if ids.count(v) > 1})
            raise InputError(f"duplicate video ids: {dupes}")
        classes = sorted(set(labels))
        if len(classes) != 2:
            raise InputError(
                f"exactly two classes are required, got {classes}")
        object.__setattr__(self, "features", features)
        object.__setattr__(self, "labels", labels)
        object.__setattr__(self, "video_ids", ids)

    @property
    def classes(self) -> tuple[str, str]:
        a, b = sorted(set(self.labels))
        return a, b


@dataclass(frozen=True)
class CvConfig:
    c_grid: tuple[float, ...] = (0.01, 0.1, 1.0, 10.0, 100.0)
    inner_folds: int = 5
    seed: int = 0
    standardize: bool = True

    def __post_init__(self):
        grid = tuple(float(c) for c in self.c_grid)
        if not grid:
            raise InputError("c_grid must not be empty")
        if any(not (np.isfinite(c) and c > 0) for c in grid):
            raise InputError("c_grid entries must be positive finite reals")
        if list(grid) != sorted(grid):
            raise InputError("c_grid must be sorted ascending")
        if self.inner_folds < 2:
            raise InputError("inner_folds must be at least 2")
        object.__setattr__(self, "c_grid", grid)


@dataclass(frozen=True, eq=False)
class LinearSvmModel:
    weights: np.ndarray
    bias: float

    def decision(self, features) -> np.ndarray:
        return np.atleast_2d(np.asarray(features, dtype=float)) @ self.weights + self.bias


def _duality_gap(signed, alpha, c) -> tuple[float, float]:
    """(gap, primal) for the augmented SVM at dual point alpha."""
    w = signed.T @ alpha
    reg = float(w @ w)
    hinge = float(np.maximum(0.0, 1.0 - signed @ w).sum())
    primal = 0.5 * reg + c * hinge
    return reg + c * hinge - float(alpha.sum()), primal


def train_linear_svm(features, labels, c, *, tol=1e-6,
                     max_iterations=100) -> LinearSvmModel:
    """Fit the soft-margin linear SVM at cost weight ``c``.

    ``labels`` must be +/-1.  Iterates until the duality gap certificate
    reaches ``tol``: gap(w, alpha) <= tol * max(1, primal objective).  The
    decision rule is sign(w . x + b).
    """
    data = np.atleast_2d(np.asarray(features, dtype=float))
    y = np.asarray(labels, dtype=float).ravel()
    c = float(c)
    if not (np.isfinite(c) and c > 0):
        raise InputError("c must be a positive finite real")
    if data.shape[0] != y.size:
        raise InputError(f"{data.shape[0]} rows but {y.size} labels")
    if not np.isfinite(data).all():
        raise InputError("feature entries must be finite")
    if set(np.unique(y).tolist()) != {-1.0, 1.0}:
        raise InputError("labels must contain both classes, coded as -1 and +1")

    count, width = data.shape
    signed = np.hstack([data, np.ones((count, 1))]) * y[:, None]
    gram = signed @ signed.T

    alpha = np.full(count, 0.5 * c)
    lower = np.ones(count)   # multiplier for alpha >= 0
    upper = np.ones(count)   # multiplier for alpha <= c
    boundary = 0.995
    gap = np.inf
    mu_previous = np.inf
    for iteration in range(1, max_iterations + 1):
        gap, primal = _duality_gap(signed, alpha, c)
        if gap <= tol * max(1.0, primal):
            break
        slack = c - alpha
        grad = gram @ alpha - 1.0
        r_dual = grad - lower + upper
        mu = (float(alpha @ lower) + float(slack @ upper)) / (2 * count)

        scaling = lower / alpha + upper / slack
        matrix = gram + np.diag(scaling)
        try:
            chol = np.linalg.cholesky(matrix)
        except np.linalg.LinAlgError:
            matrix = matrix + (1e-12 * np.trace(matrix)) * np.eye(count)
            chol = np.linalg.cholesky(matrix)

        def newton(rhs2, rhs3):
            rhs = -r_dual + rhs2 / alpha - rhs3 / slack
            da = np.linalg.solve(chol.T, np.linalg.solve(chol, rhs))
            dl = (rhs2 - lower * da) / alpha
            du = (rhs3 + upper * da) / slack
            return da, dl, du

        def max_step(da, dl, du):
            steps = [1.0]
            with np.errstate(divide="ignore"):
                for value, delta in ((alpha, da), (slack, -da),
                                     (lower, dl), (upper, du)):
                    shrinking = delta < 0.0
                    if shrinking.any():
                        steps.append(float((value[shrinking]
                                            / -delta[shrinking]).min()))
            return min(steps)

        # predictor (affine) step sets the centering weight
        da, dl, du = newton(-alpha * lower, -slack * upper)
        theta = max_step(da, dl, du)
        mu_affine = (float((alpha + theta * da) @ (lower + theta * dl))
                     + float((slack - theta * da) @ (upper + theta * du))
                     ) / (2 * count)
        sigma = min(1.0, (mu_affine / mu) ** 3) if mu > 0 else 0.0
        if mu > 0.9 * mu_previous:
            # truncated steps stopped reducing mu: recenter hard before
            # pushing again (degenerate margins cycle otherwise)
            sigma = max(sigma, 0.8)
        mu_previous = mu

        # corrector step toward sigma * mu on the central path
        da, dl, du = newton(sigma * mu - alpha * lower - da * dl,
                            sigma * mu - slack * upper + da * du)
        theta = boundary * max_step(da, dl, du)
        alpha = alpha + theta * da
        lower = lower + theta * dl
        upper = upper + theta * du
    else:
        raise ConvergenceError(
            f"SVM interior-point iteration did not reach duality gap "
            f"{tol:.1e} * max(1, primal) within {max_iterations} iterations "
            f"(gap {gap:.3e})",
            iterations=max_iterations, last_update=gap)
    w = signed.T @ alpha
    return LinearSvmModel(weights=_readonly(w[:width]), bias=float(w[width]))


def _fit_standardizer(data) -> tuple[np.ndarray, np.ndarray]:
    mean = data.mean(axis=0)
    scale = data.std(axis=0)
    constant = np.all(data == data[0:1, :], axis=0)
    scale = np.where(constant | (scale == 0.0), 1.0, scale)
    return mean, scale


def _stratified_folds(y, fold_count, rng) -> np.ndarray:
    """Per-class round-robin fold assignment in a seeded global order.

    The shuffle is over sample positions, not classes, so the assignment
    depends only on the class partition: renaming (or sign-flipping) the two
    classes leaves every sample's fold unchanged, which makes nested
    evaluation exactly label-symmetric.
    """
    folds = np.empty(y.size, dtype=int)
    seen = {-1.0: 0, 1.0: 0}
    for i in rng.permutation(y.size):
        value = float(y[i])
        folds[i] = seen[value] % fold_count
        seen[value] += 1
    return folds


def _select_c(train_x, train_y, cfg: CvConfig, rng) -> float:
    """Pick C by stratified inner-CV accuracy, pooled over validation folds;
    ties go to the smaller C (the grid is ascending)."""
    folds = _stratified_folds(train_y, cfg.inner_folds, rng)
    split = []
    for fold in range(cfg.inner_folds):
        hold = folds == fold
        if not hold.any():
            continue
        fit_y = train_y[~hold]
        if not ((fit_y == 1.0).any() and (fit_y == -1.0).any()):
            raise StratificationError(
                f"inner fold {fold} leaves a training part with only one class")
        split.append(hold)
    best_c = cfg.c_grid[0]
    best_hits = -1
    for c in cfg.c_grid:
        hits = 0
        for hold in split:
            model = train_linear_svm(train_x[~hold], train_y[~hold], c)
            hits += int((np.where(model.decision(train_x[hold]) >= 0.0, 1.0, -1.0)
                         == train_y[hold]).sum())
        if hits > best_hits:
            best_hits = hits
            best_c = c
    return best_c


@dataclass(frozen=True)
class VideoPrediction:
    video_id: str
    label: str
    predicted: str
    chosen_c: float
    decision_value: float


@dataclass(frozen=True)
class EvaluationReport:
    accuracy: float
    per_class_accuracy: dict[str, float]
    predictions: tuple[VideoPrediction, ...]
    class_labels: tuple[str, str]
    c_grid: tuple[float, ...]
    inner_folds: int
    seed: int
    standardize: bool
    stratified_inner: bool = True

    @property
    def chosen_c_per_fold(self) -> tuple[float, ...]:
        return tuple(p.chosen_c for p in self.predictions)

    def to_obj(self) -> dict:
        return {
            "accuracy": self.accuracy,
            "per_class_accuracy": dict(self.per_class_accuracy),
            "class_labels": list(self.class_labels),
            "predictions": [
                {"video_id": p.video_id, "label": p.label, "predicted": p.predicted,
                 "chosen_c": p.chosen_c, "decision_value": p.decision_value}
                for p in self.predictions],
            "c_grid": list(self.c_grid),
            "inner_folds": self.inner_folds,
            "seed": self.seed,
            "standardize": self.standardize,
            "stratified_inner": self.stratified_inner,
        }


def nested_loo_evaluate(data: LabeledDataset,
                        cfg: CvConfig | None = None) -> EvaluationReport:
    """Leave-one-out evaluation with a per-fold inner CV choosing C.

    For every held-out video: standardize on the training fold (when
    configured), pick C by stratified inner CV, retrain on the whole training
    fold and predict the held-out video.  Fold shuffling is seeded per outer
    fold, so reruns are identical.
    """
    cfg = cfg or CvConfig()
    neg, pos = data.classes
    y = np.where(np.asarray(data.labels) == pos, 1.0, -1.0)
    count = y.size
    if count < cfg.inner_folds + 1:
        raise InputError(
            f"{count} videos cannot support leave-one-out with "
            f"{cfg.inner_folds}-fold inner CV; at least {cfg.inner_folds + 1} are needed")
    for value, name in ((1.0, pos), (-1.0, neg)):
        if (y == value).sum() < 2:
            raise StratificationError(
                f"class {name!r} has fewer than 2 videos, so some training fold "
                f"would lose it")

    predictions = []
    hits = 0
    class_hits = {neg: 0, pos: 0}
    class_total = {neg: 0, pos: 0}
    for held in range(count):
        keep = np.arange(count) != held
        train_x = data.features[keep]
        train_y = y[keep]
        test_x = data.features[held]
        if cfg.standardize:
            mean, scale = _fit_standardizer(train_x)
            train_x = (train_x - mean) / scale
            test_x = (test_x - mean) / scale
        rng = np.random.default_rng([cfg.seed, 0, held])
        chosen_c = _select_c(train_x, train_y, cfg, rng)
        model = train_linear_svm(train_x, train_y, chosen_c)
        value = float(model.decision(test_x[None, :])[0])
        predicted = pos if value >= 0.0 else neg
        truth = data.labels[held]
        class_total[truth] += 1
        if predicted == truth:
            hits += 1
            class_hits[truth] += 1
        predictions.append(VideoPrediction(
            video_id=data.video_ids[held], label=truth, predicted=predicted,
            chosen_c=chosen_c, decision_value=value))
    return EvaluationReport(
        accuracy=hits / count,
        per_class_accuracy={name: class_hits[name] / class_total[name]
                            for name in (neg, pos)},
        predictions=tuple(predictions),
        class_labels=(neg, pos),
        c_grid=cfg.c_grid,
        inner_folds=cfg.inner_folds,
        seed=cfg.seed,
        standardize=cfg.standardize)


def subsampled_weight_rows(data: LabeledDataset, cfg: CvConfig | None = None,
                           subsample_count: int = 100,
                           fraction: float = 0.9) -> tuple[np.ndarray, float]:
    """Weight vectors from seeded retrainings on stratified random subsets.

    C is selected once by inner CV on the full dataset, then each retraining
    uses a random ``fraction`` of every class.  Weights are in standardized
    feature space when standardization is on.  Returns (rows, chosen_c).
    """
    cfg = cfg or CvConfig()
    if subsample_count < 1:
        raise InputError("subsample_count must be positive")
    if not 0.0 < fraction <= 1.0:
        raise InputError("fraction must lie in (0, 1]")
    neg, pos = data.classes
    y = np.where(np.asarray(data.labels) == pos, 1.0, -1.0)
    features = data.features
    if cfg.standardize:
        mean, scale = _fit_standardizer(features)
        features = (features - mean) / scale
    chosen_c = _select_c(features, y, cfg, np.random.default_rng([cfg.seed, 1]))
    rows = np.empty((subsample_count, features.shape[1]))
    for s in range(subsample_count):
        rng = np.random.default_rng([cfg.seed, 2, s])
        picked = []
        for value in (-1.0, 1.0):
            members = np.flatnonzero(y == value)
            take = max(1, int(round(fraction * members.size)))
            picked.append(members[rng.permutation(members.size)][:take])
        idx = np.sort(np.concatenate(picked))
        model = train_linear_svm(features[idx], y[idx], chosen_c)
        rows[s] = model.weights
    return rows, chosen_c


@dataclass(frozen=True)
class ComponentWeightSummary:
    component: str
    component_index: int
    values: tuple[float, ...]   # one aggregate per retraining
    median: float
    mean: float
    q25: float
    q75: float
    minimum: float
    maximum: float


def component_weight_summary(weight_rows, channel_names) -> tuple[ComponentWeightSummary, ...]:
    """Aggregate feature weights per behavioral component.

    For component q, average |weight| over the 2Q-1 row-major pair features
    whose channel pair includes q, separately for every weight row; summaries
    are sorted by descending median (ties by component index).
    """
    rows = np.atleast_2d(np.asarray(weight_rows, dtype=float))
    names = tuple(channel_names)
    q = len(names)
    if rows.shape[1] != q * q:
        raise InputError(
            f"weight rows have {rows.shape[1]} features, expected {q * q} "
            f"for {q} channels")
    magnitudes = np.abs(rows)
    summaries = []
    for comp in range(q):
        idx = sorted({comp * q + j for j in range(q)} | {i * q + comp for i in range(q)})
        values = magnitudes[:, idx].mean(axis=1)
        summaries.append(ComponentWeightSummary(
            component=names[comp],
            component_index=comp,
            values=tuple(float(v) for v in values),
            median=float(np.median(values)),
            mean=float(values.mean()),
            q25=float(np.percentile(values, 25)),
            q75=float(np.percentile(values, 75)),
            minimum=float(values.min()),
            maximum=float(values.max())))
    return tuple(sorted(summaries, key=lambda s: (-s.median, s.component_index)))
