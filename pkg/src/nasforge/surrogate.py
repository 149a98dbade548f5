"""Performance predictors: regressors from encoded features to F1.

Eleven model kinds share one ``fit`` / ``predict`` surface: four linear
training strategies (ordinary least squares, ridge, lasso, stochastic
gradient descent), five non-linear regressors (k-nearest and radius
neighbours, random forest, gradient boosted trees, a small MLP), and two
random baselines that anchor the metric tables.  Models are evaluated with
5-fold cross validation plus a held-out test split, reporting Pearson's r,
Kendall's tau-b, the coefficient of determination, and RMSE.

Tree and neighbour models wrap scikit-learn estimators; the linear solvers
and the MLP are implemented here (lasso by cyclic coordinate descent, the
MLP on the shared dense-network machinery).  Training rows are canonically
sorted before fitting, so every kind is invariant to input row order.
"""

from __future__ import annotations

import json
import pickle
import warnings
from dataclasses import dataclass, field
from hashlib import blake2b

import numpy as np
from scipy import stats as scipy_stats
from sklearn.ensemble import GradientBoostingRegressor, RandomForestRegressor
from sklearn.linear_model import SGDRegressor
from sklearn.neighbors import KNeighborsRegressor, RadiusNeighborsRegressor

from .archspace import Architecture, encode_features
from .nnet import MLP, mse_loss_and_grads

REGRESSOR_KINDS = (
    "ols",
    "ridge",
    "lasso",
    "sgd-linear",
    "knn",
    "radius-nn",
    "random-forest",
    "gbt",
    "mlp",
    "random-uniform",
    "random-normal",
)

HYPER_DEFAULTS: dict[str, dict] = {
    "ols": {},
    "ridge": {"alpha": 1.0},
    "lasso": {"alpha": 1e-3, "tol": 1e-6, "max_sweeps": 10_000},
    "sgd-linear": {"max_iter": 5000, "eta0": 1e-5, "learning_rate": "constant"},
    "knn": {"n_neighbours": 100, "weights": "uniform"},
    "radius-nn": {"radius": 16.0, "weights": "distance"},
    "random-forest": {
        "n_estimators": 100,
        "max_depth": 15,
        "min_samples_split": 50,
        "min_samples_leaf": 25,
    },
    "gbt": {"n_estimators": 75, "max_depth": 4, "max_leaves": 8, "shrinkage": 0.1},
    "mlp": {"hidden": (48, 48), "alpha": 1e-3, "epochs": 2000, "step": 1e-2},
    "random-uniform": {},
    "random-normal": {},
}


class TooFewRecordsError(ValueError):
    """Not enough records to form the requested folds."""


@dataclass(frozen=True)
class PerformanceRecord:
    """One trained-instance row: architecture, init seed, score, size."""

    arch: Architecture
    seed: int
    f1_post_quant: float
    trainable_params: int

    def to_json_dict(self) -> dict:
        out = self.arch.to_json_dict()
        out.update(
            seed=self.seed, f1=self.f1_post_quant, params=self.trainable_params
        )
        return out

    @classmethod
    def from_json_dict(cls, obj: dict) -> "PerformanceRecord":
        return cls(
            arch=Architecture.from_json_dict(obj),
            seed=int(obj["seed"]),
            f1_post_quant=float(obj["f1"]),
            trainable_params=int(obj["params"]),
        )


def write_records(records, path) -> None:
    with open(path, "w") as fh:
        for rec in records:
            fh.write(json.dumps(rec.to_json_dict(), separators=(",", ":")) + "\n")


def read_records(path) -> list[PerformanceRecord]:
    out = []
    with open(path) as fh:
        for line in fh:
            line = line.strip()
            if line:
                out.append(PerformanceRecord.from_json_dict(json.loads(line)))
    return out


def records_matrix(records) -> tuple[np.ndarray, np.ndarray]:
    x = np.stack([encode_features(r.arch) for r in records])
    y = np.array([r.f1_post_quant for r in records])
    return x, y


def split_cv(records, n_folds: int = 5, test_fraction: float = 0.1, seed: int = 0):
    """Seed-deterministic disjoint partition into n folds plus a test set."""
    n = len(records)
    if n < max(10, n_folds):
        raise TooFewRecordsError(f"need at least 10 records, got {n}")
    order = np.random.default_rng(seed).permutation(n)
    n_test = int(round(n * test_fraction))
    test = [records[k] for k in order[:n_test]]
    rest = order[n_test:]
    folds = [
        [records[k] for k in chunk] for chunk in np.array_split(rest, n_folds)
    ]
    return folds, test


def _canonical_row_order(x: np.ndarray, y: np.ndarray) -> np.ndarray:
    # lexicographic sort over (features, target) so fitting is invariant to
    # the order training rows arrive in
    keys = np.vstack([y[None, :], x.T[::-1]])
    return np.lexsort(keys)


def _feats_seed(feats: np.ndarray, seed: int) -> list[int]:
    digest = blake2b(np.ascontiguousarray(feats, dtype=float).tobytes(), digest_size=8)
    return [seed, int.from_bytes(digest.digest(), "big")]


def _solve_ridge(x: np.ndarray, y: np.ndarray, alpha: float) -> np.ndarray:
    """Least squares with an L2 penalty on everything but the intercept.

    Solved as an augmented minimum-norm lstsq so alpha=0 degrades exactly to
    ordinary least squares, rank-deficient or not.
    """
    n, p = x.shape
    design = np.hstack([x, np.ones((n, 1))])
    if alpha > 0.0:
        ridge_rows = np.hstack([np.sqrt(alpha) * np.eye(p), np.zeros((p, 1))])
        design = np.vstack([design, ridge_rows])
        y = np.concatenate([y, np.zeros(p)])
    coef, _, rank, _ = np.linalg.lstsq(design, y, rcond=None)
    if alpha == 0.0 and rank < p + 1:
        warnings.warn(
            f"rank-deficient design (rank {rank} of {p + 1}); "
            "using the minimum-norm solution",
            stacklevel=3,
        )
    return coef


def _fit_lasso(x: np.ndarray, y: np.ndarray, alpha: float, tol: float, max_sweeps: int):
    """Cyclic coordinate descent on (1/2n)||y - Xw - b||^2 + alpha*||w||_1."""
    n, p = x.shape
    x_mean = x.mean(axis=0)
    y_mean = y.mean()
    xc = x - x_mean
    yc = y - y_mean
    col_sq = (xc**2).sum(axis=0) / n
    w = np.zeros(p)
    resid = yc.copy()
    for _ in range(max_sweeps):
        max_delta = 0.0
        for j in range(p):
            if col_sq[j] == 0.0:
                continue
            rho = xc[:, j] @ resid / n + col_sq[j] * w[j]
            new = np.sign(rho) * max(abs(rho) - alpha, 0.0) / col_sq[j]
            delta = new - w[j]
            if delta != 0.0:
                resid -= delta * xc[:, j]
                w[j] = new
                max_delta = max(max_delta, abs(delta))
        if max_delta < tol:
            break
    intercept = y_mean - x_mean @ w
    return w, intercept


@dataclass
class TrainedModel:
    """A fitted predictor; ``predict`` accepts one vector or a matrix."""

    kind: str
    payload: dict = field(default_factory=dict)

    def predict(self, feats) -> float | np.ndarray:
        x = np.asarray(feats, dtype=float)
        single = x.ndim == 1
        if single:
            x = x[None, :]
        out = self._predict_matrix(x)
        return float(out[0]) if single else out

    def _predict_matrix(self, x: np.ndarray) -> np.ndarray:
        kind, payload = self.kind, self.payload
        if kind in ("ols", "ridge"):
            return x @ payload["coef"][:-1] + payload["coef"][-1]
        if kind == "lasso":
            return x @ payload["w"] + payload["intercept"]
        if kind == "mlp":
            return payload["net"].forward(x)[:, 0]
        if kind in ("sgd-linear", "knn", "random-forest", "gbt"):
            return payload["estimator"].predict(x)
        if kind == "radius-nn":
            with warnings.catch_warnings():
                warnings.simplefilter("ignore")  # empty neighbourhoods warn
                pred = payload["estimator"].predict(x)
            return np.where(np.isnan(pred), payload["train_mean"], pred)
        if kind == "random-uniform":
            return np.array(
                [
                    np.random.default_rng(_feats_seed(row, payload["seed"])).uniform()
                    for row in x
                ]
            )
        if kind == "random-normal":
            return np.array(
                [
                    np.random.default_rng(_feats_seed(row, payload["seed"])).normal(
                        payload["train_mean"], payload["train_std"]
                    )
                    for row in x
                ]
            )
        raise ValueError(f"unknown regressor kind {kind!r}")

    def save(self, path) -> None:
        with open(path, "wb") as fh:
            pickle.dump(self, fh)

    @classmethod
    def load(cls, path) -> "TrainedModel":
        with open(path, "rb") as fh:
            model = pickle.load(fh)
        if not isinstance(model, cls):
            raise TypeError(f"{path} does not contain a TrainedModel")
        return model


def fit(kind: str, train, hyper: dict | None = None, seed: int = 0) -> TrainedModel:
    """Fit one predictor kind on performance records.

    ``hyper`` overrides the recorded defaults (unknown keys are errors).
    Deterministic given the seed, including under row permutations.
    """
    if kind not in REGRESSOR_KINDS:
        raise ValueError(f"unknown regressor kind {kind!r}")
    if len(train) == 0:
        raise ValueError("empty training set")
    params = dict(HYPER_DEFAULTS[kind])
    for key, value in (hyper or {}).items():
        if key not in params:
            raise ValueError(f"unknown hyperparameter {key!r} for kind {kind!r}")
        params[key] = value

    x, y = records_matrix(train)
    order = _canonical_row_order(x, y)
    x, y = x[order], y[order]

    if kind == "ols":
        return TrainedModel(kind, {"coef": _solve_ridge(x, y, 0.0)})
    if kind == "ridge":
        return TrainedModel(kind, {"coef": _solve_ridge(x, y, params["alpha"])})
    if kind == "lasso":
        w, intercept = _fit_lasso(
            x, y, params["alpha"], params["tol"], params["max_sweeps"]
        )
        return TrainedModel(kind, {"w": w, "intercept": intercept})
    if kind == "sgd-linear":
        est = SGDRegressor(
            loss="squared_error",
            max_iter=params["max_iter"],
            eta0=params["eta0"],
            learning_rate=params["learning_rate"],
            random_state=seed,
        )
        est.fit(x, y)
        return TrainedModel(kind, {"estimator": est})
    if kind == "knn":
        est = KNeighborsRegressor(
            n_neighbors=min(params["n_neighbours"], len(y)),
            weights=params["weights"],
        )
        est.fit(x, y)
        return TrainedModel(kind, {"estimator": est})
    if kind == "radius-nn":
        est = RadiusNeighborsRegressor(
            radius=params["radius"], weights=params["weights"]
        )
        est.fit(x, y)
        return TrainedModel(kind, {"estimator": est, "train_mean": float(y.mean())})
    if kind == "random-forest":
        est = RandomForestRegressor(
            n_estimators=params["n_estimators"],
            max_depth=params["max_depth"],
            min_samples_split=params["min_samples_split"],
            min_samples_leaf=params["min_samples_leaf"],
            random_state=seed,
        )
        est.fit(x, y)
        return TrainedModel(kind, {"estimator": est})
    if kind == "gbt":
        est = GradientBoostingRegressor(
            n_estimators=params["n_estimators"],
            max_depth=params["max_depth"],
            max_leaf_nodes=params["max_leaves"],
            learning_rate=params["shrinkage"],
            loss="squared_error",
            random_state=seed,
        )
        est.fit(x, y)
        return TrainedModel(kind, {"estimator": est})
    if kind == "mlp":
        sizes = (x.shape[1], *params["hidden"], 1)
        net = MLP(sizes, seed=seed)
        for _ in range(params["epochs"]):
            _, grads = mse_loss_and_grads(net, x, y[:, None], l2=params["alpha"])
            for p, g in zip(net.params, grads):
                p -= params["step"] * g
        return TrainedModel(kind, {"net": net})
    if kind == "random-uniform":
        return TrainedModel(kind, {"seed": seed})
    if kind == "random-normal":
        return TrainedModel(
            kind,
            {"seed": seed, "train_mean": float(y.mean()), "train_std": float(y.std())},
        )
    raise AssertionError("unreachable")


def predict(model: TrainedModel, feats) -> float | np.ndarray:
    """Surrogate estimate of post-quantization F1; may leave [0, 1]."""
    return model.predict(feats)


def metrics(y_true, y_pred) -> dict:
    """Pearson's r, Kendall's tau-b, R^2, and RMSE for one prediction set.

    Zero-variance inputs make the correlation measures undefined; they are
    reported as NaN rather than silently coerced to 0.
    """
    yt = np.asarray(y_true, dtype=float)
    yp = np.asarray(y_pred, dtype=float)
    if yt.shape != yp.shape or yt.ndim != 1 or yt.size < 2:
        raise ValueError("metrics need two equal-length vectors of size >= 2")
    rmse = float(np.sqrt(np.mean((yt - yp) ** 2)))
    ss_tot = float(np.sum((yt - yt.mean()) ** 2))
    if ss_tot == 0.0:
        r_squared = float("nan")
    else:
        r_squared = 1.0 - float(np.sum((yt - yp) ** 2)) / ss_tot
    if yt.std() == 0.0 or yp.std() == 0.0:
        pearson = float("nan")
        kendall = float("nan")
    else:
        pearson = float(np.corrcoef(yt, yp)[0, 1])
        kendall = float(scipy_stats.kendalltau(yt, yp).statistic)
    return {
        "pearson_r": pearson,
        "kendall_tau": kendall,
        "r_squared": r_squared,
        "rmse": rmse,
    }


METRIC_NAMES = ("pearson_r", "kendall_tau", "r_squared", "rmse", "rmse_train")


@dataclass(frozen=True)
class CvReport:
    """Per-fold validation metrics plus their mean and std over folds."""

    kind: str
    folds: tuple[dict, ...]
    mean: dict
    std: dict

    def to_json_dict(self) -> dict:
        return {
            "kind": self.kind,
            "folds": list(self.folds),
            "mean": self.mean,
            "std": self.std,
        }


def cross_validate(
    kind: str,
    records,
    hyper: dict | None = None,
    seed: int = 0,
    n_folds: int = 5,
    test_fraction: float = 0.1,
) -> CvReport:
    """Rotate each fold out as validation, fit on the rest, aggregate.

    The held-out test split never enters any fold.  Fold fit seeds derive
    from the master seed, so results do not depend on execution order.
    """
    folds, _ = split_cv(records, n_folds=n_folds, test_fraction=test_fraction, seed=seed)
    rows = []
    for k in range(n_folds):
        train = [r for j, f in enumerate(folds) if j != k for r in f]
        fit_seed = int(np.random.SeedSequence([seed, k]).generate_state(1)[0])
        model = fit(kind, train, hyper=hyper, seed=fit_seed)
        xv, yv = records_matrix(folds[k])
        xt, yt = records_matrix(train)
        row = metrics(yv, model.predict(xv))
        row["rmse_train"] = metrics(yt, model.predict(xt))["rmse"]
        rows.append(row)
    mean = {m: float(np.mean([r[m] for r in rows])) for m in METRIC_NAMES}
    std = {m: float(np.std([r[m] for r in rows])) for m in METRIC_NAMES}
    return CvReport(kind=kind, folds=tuple(rows), mean=mean, std=std)


_TABLE_COLUMNS = (
    ("pearson_r", "Pearson's R"),
    ("kendall_tau", "Kendall's tau"),
    ("r_squared", "R^2"),
    ("rmse", "RMSE"),
    ("rmse_train", "RMSE (train)"),
)


def report_table(reports) -> str:
    """Aligned text table of CV results, one row per kind, sorted by RMSE."""
    header = ["Algorithm"] + [label for _, label in _TABLE_COLUMNS]
    body = []
    for rep in sorted(reports, key=lambda r: r.mean["rmse"]):
        row = [rep.kind]
        for key, _ in _TABLE_COLUMNS:
            row.append(f"{100 * rep.mean[key]:.1f}% +- {100 * rep.std[key]:.2f}%")
        body.append(row)
    widths = [max(len(r[c]) for r in [header] + body) for c in range(len(header))]
    lines = []
    for row in [header] + body:
        lines.append("  ".join(cell.ljust(w) for cell, w in zip(row, widths)).rstrip())
    return "\n".join(lines)
