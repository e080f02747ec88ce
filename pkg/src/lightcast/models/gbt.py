"""Histogram gradient-boosted regression trees (squared loss, leaf-wise growth)
and a forecasting wrapper over lagged/calendar tabular features."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from sklearn.base import BaseEstimator, RegressorMixin

from ..exceptions import InsufficientDataError, NotFittedError
from ..frame import HOUR, TimeSeriesFrame
from ..validation import check_frame, check_matrix, check_vector

MODEL_VERSION = 1


@dataclass(frozen=True)
class GbtConfig:
    max_rounds: int = 500
    learning_rate: float = 0.05
    max_leaves: int = 31
    min_samples_leaf: int = 20
    n_bins: int = 63
    l2_leaf_penalty: float = 1.0
    early_stopping_rounds: int | None = 50
    n_lags: int = 24
    calendar: bool = True

    def __post_init__(self):
        if not 0 < self.learning_rate <= 1:
            raise ValueError("learning_rate must lie in (0, 1]")
        if self.max_leaves < 2:
            raise ValueError("max_leaves must be >= 2")
        if self.n_bins < 2:
            raise ValueError("n_bins must be >= 2")


# ---------------------------------------------------------------- binning


def bin_thresholds(x: np.ndarray, n_bins: int) -> np.ndarray:
    """Upper bin boundaries (excluding the open last bin).

    With at most ``n_bins`` distinct values every value gets its own bin and
    the boundaries are midpoints, so histogram splits coincide with an exact
    split search.
    """
    u = np.unique(x)
    if u.size <= 1:
        return np.zeros(0)
    if u.size <= n_bins:
        return (u[:-1] + u[1:]) / 2.0
    q = np.quantile(x, np.linspace(0, 1, n_bins + 1)[1:-1])
    q = np.unique(q)
    return q[q < u[-1]]


def apply_bins(X: np.ndarray, thresholds: list) -> np.ndarray:
    out = np.empty(X.shape, dtype=np.intp)
    for j, thr in enumerate(thresholds):
        out[:, j] = np.searchsorted(thr, X[:, j], side="left")
    return out


# ------------------------------------------------------------------ trees


@dataclass
class Tree:
    """Flat binary tree. ``feature == -1`` marks a leaf."""

    feature: list = field(default_factory=list)
    threshold: list = field(default_factory=list)
    bin: list = field(default_factory=list)
    left: list = field(default_factory=list)
    right: list = field(default_factory=list)
    value: list = field(default_factory=list)

    def add_leaf(self, value: float) -> int:
        self.feature.append(-1)
        self.threshold.append(0.0)
        self.bin.append(-1)
        self.left.append(-1)
        self.right.append(-1)
        self.value.append(float(value))
        return len(self.value) - 1

    @property
    def n_leaves(self) -> int:
        return sum(1 for f in self.feature if f < 0)

    def apply(self, X: np.ndarray) -> np.ndarray:
        """Leaf index reached by every row of ``X``."""
        feature = np.asarray(self.feature)
        thr = np.asarray(self.threshold)
        left = np.asarray(self.left)
        right = np.asarray(self.right)
        node = np.zeros(X.shape[0], dtype=np.intp)
        active = feature[node] >= 0
        while active.any():
            idx = np.nonzero(active)[0]
            nd = node[idx]
            go_left = X[idx, feature[nd]] <= thr[nd]
            node[idx] = np.where(go_left, left[nd], right[nd])
            active[idx] = feature[node[idx]] >= 0
        return node

    def predict(self, X: np.ndarray) -> np.ndarray:
        return np.asarray(self.value)[self.apply(X)]

    def predict_row(self, x) -> float:
        n = 0
        feature, thr = self.feature, self.threshold
        while feature[n] >= 0:
            n = self.left[n] if x[feature[n]] <= thr[n] else self.right[n]
        return self.value[n]

    def to_dict(self) -> dict:
        return {k: list(getattr(self, k)) for k in
                ("feature", "threshold", "bin", "left", "right", "value")}

    @classmethod
    def from_dict(cls, d: dict) -> "Tree":
        return cls(**{k: list(v) for k, v in d.items()})


@dataclass
class _Leaf:
    node: int
    rows: np.ndarray
    G: float
    H: float
    hist_g: np.ndarray
    hist_h: np.ndarray
    gain: float = -np.inf
    feature: int = -1
    bin: int = -1


class _Grower:
    def __init__(self, Xb, n_bins_per_feature, max_bins, min_samples_leaf, lam, max_leaves):
        self.Xb = Xb
        self.nbf = np.asarray(n_bins_per_feature)
        self.B = max_bins
        self.F = Xb.shape[1]
        self.offsets = np.arange(self.F) * max_bins
        self.msl = min_samples_leaf
        self.lam = lam
        self.max_leaves = max_leaves
        # split at bin b is valid for b in [0, nbf - 2]
        self.valid = np.arange(max_bins)[None, :] < (self.nbf[:, None] - 1)

    def histograms(self, rows, g):
        codes = (self.Xb[rows] + self.offsets).ravel()
        size = self.F * self.B
        hg = np.bincount(codes, weights=np.repeat(g[rows], self.F), minlength=size)
        hh = np.bincount(codes, minlength=size).astype(float)
        return hg.reshape(self.F, self.B), hh.reshape(self.F, self.B)

    def evaluate(self, leaf: _Leaf, min_gain: float):
        if leaf.rows.size < 2 * self.msl or self.F == 0:
            return
        GL = np.cumsum(leaf.hist_g, axis=1)
        HL = np.cumsum(leaf.hist_h, axis=1)
        GR = leaf.G - GL
        HR = leaf.H - HL
        lam = self.lam
        parent = leaf.G ** 2 / (leaf.H + lam)
        with np.errstate(divide="ignore", invalid="ignore"):
            gain = GL ** 2 / (HL + lam) + GR ** 2 / (HR + lam) - parent
        ok = self.valid & (HL >= self.msl) & (HR >= self.msl)
        gain = np.where(ok, gain, -np.inf)
        flat = int(np.argmax(gain))
        best = gain.flat[flat]
        if best > min_gain:
            leaf.gain = float(best)
            leaf.feature, leaf.bin = divmod(flat, self.B)

    def grow(self, g: np.ndarray, thresholds: list):
        tree = Tree()
        lam = self.lam
        rows = np.arange(g.size)
        G, H = float(g.sum()), float(g.size)
        hg, hh = self.histograms(rows, g)
        root = _Leaf(tree.add_leaf(-G / (H + lam)), rows, G, H, hg, hh)
        min_gain = 1e-12 * max(1.0, float(np.dot(g, g)))
        self.evaluate(root, min_gain)
        leaves = [root]
        while len(leaves) < self.max_leaves:
            i = max(range(len(leaves)), key=lambda k: (leaves[k].gain, -k))
            leaf = leaves[i]
            if not np.isfinite(leaf.gain):
                break
            f, b = leaf.feature, leaf.bin
            go_left = self.Xb[leaf.rows, f] <= b
            lrows, rrows = leaf.rows[go_left], leaf.rows[~go_left]
            small, large = (lrows, rrows) if lrows.size <= rrows.size else (rrows, lrows)
            sg, sh = self.histograms(small, g)
            lg_, lh_ = leaf.hist_g - sg, leaf.hist_h - sh
            if small is lrows:
                (Lg, Lh), (Rg, Rh) = (sg, sh), (lg_, lh_)
            else:
                (Lg, Lh), (Rg, Rh) = (lg_, lh_), (sg, sh)
            GL, HL = float(g[lrows].sum()), float(lrows.size)
            GR, HR = float(g[rrows].sum()), float(rrows.size)
            node = leaf.node
            tree.feature[node] = f
            tree.bin[node] = b
            tree.threshold[node] = float(thresholds[f][b])
            tree.value[node] = 0.0
            lnode = tree.add_leaf(-GL / (HL + lam))
            rnode = tree.add_leaf(-GR / (HR + lam))
            tree.left[node], tree.right[node] = lnode, rnode
            lleaf = _Leaf(lnode, lrows, GL, HL, Lg, Lh)
            rleaf = _Leaf(rnode, rrows, GR, HR, Rg, Rh)
            self.evaluate(lleaf, min_gain)
            self.evaluate(rleaf, min_gain)
            leaves[i:i + 1] = [lleaf, rleaf]
        return tree, len(leaves) > 1


def _rmse(a, b) -> float:
    return float(np.sqrt(np.mean((a - b) ** 2)))


class GBTRegressor(RegressorMixin, BaseEstimator):
    """Gradient-boosted regression trees on histogram-binned features.

    Each round adds ``learning_rate * T_m(x)`` where ``T_m`` is grown
    leaf-wise on the squared-loss gradients ``yhat - y`` with leaf values
    ``-G / (H + l2_leaf_penalty)``.

    Parameters
    ----------
    max_rounds, learning_rate, max_leaves, min_samples_leaf, n_bins,
    l2_leaf_penalty, early_stopping_rounds
        See :class:`GbtConfig`. ``early_stopping_rounds=None`` disables
        early stopping.

    Attributes
    ----------
    base_score_ : float
        Mean of the training target.
    trees_ : list of Tree
    train_rmse_ : list of float
        Training RMSE after each round (index 0 is the base score alone).
    val_rmse_ : list of float
        Same for the validation set, when one was given.
    best_iteration_ : int
        Number of trees kept.
    """

    def __init__(self, max_rounds=500, learning_rate=0.05, max_leaves=31,
                 min_samples_leaf=20, n_bins=63, l2_leaf_penalty=1.0,
                 early_stopping_rounds=50):
        self.max_rounds = max_rounds
        self.learning_rate = learning_rate
        self.max_leaves = max_leaves
        self.min_samples_leaf = min_samples_leaf
        self.n_bins = n_bins
        self.l2_leaf_penalty = l2_leaf_penalty
        self.early_stopping_rounds = early_stopping_rounds

    def fit(self, X, y, eval_set=None):
        X = check_matrix(X)
        y = check_vector(y, "y")
        if X.shape[0] != y.size or y.size == 0:
            raise ValueError(f"X has {X.shape[0]} rows, y has {y.size}")
        if not 0 < self.learning_rate <= 1:
            raise ValueError("learning_rate must lie in (0, 1]")
        if self.max_leaves < 2 or self.n_bins < 2:
            raise ValueError("max_leaves and n_bins must be >= 2")
        use_es = self.early_stopping_rounds is not None and self.early_stopping_rounds > 0
        if eval_set is not None:
            Xv = check_matrix(eval_set[0], X.shape[1])
            yv = check_vector(eval_set[1], "y_val")
            if Xv.shape[0] != yv.size or yv.size == 0:
                raise ValueError("validation set must be nonempty and aligned")
        elif use_es:
            raise ValueError("early stopping needs a validation set (eval_set)")
        self.n_features_in_ = X.shape[1]
        self.thresholds_ = [bin_thresholds(X[:, j], self.n_bins) for j in range(X.shape[1])]
        Xb = apply_bins(X, self.thresholds_)
        nbf = [t.size + 1 for t in self.thresholds_]
        grower = _Grower(Xb, nbf, max(nbf) if nbf else 1, self.min_samples_leaf,
                         float(self.l2_leaf_penalty), self.max_leaves)
        self.base_score_ = float(np.mean(y))
        pred = np.full(y.size, self.base_score_)
        eta = float(self.learning_rate)
        trees = []
        self.train_rmse_ = [_rmse(y, pred)]
        self.val_rmse_ = []
        if eval_set is not None:
            pred_v = np.full(yv.size, self.base_score_)
            self.val_rmse_.append(_rmse(yv, pred_v))
        best, best_round = (self.val_rmse_[0] if self.val_rmse_ else np.inf), 0
        for m in range(1, self.max_rounds + 1):
            g = pred - y
            tree, did_split = grower.grow(g, self.thresholds_)
            if not did_split:
                break
            trees.append(tree)
            pred = pred + eta * np.asarray(tree.value)[_leaf_of_rows(tree, Xb)]
            self.train_rmse_.append(_rmse(y, pred))
            if eval_set is not None:
                pred_v = pred_v + eta * tree.predict(Xv)
                v = _rmse(yv, pred_v)
                self.val_rmse_.append(v)
                if v < best:
                    best, best_round = v, m
                elif use_es and m - best_round >= self.early_stopping_rounds:
                    break
        self.n_rounds_run_ = len(trees)
        if eval_set is not None and use_es:
            trees = trees[:best_round]
        self.best_iteration_ = len(trees)
        self.trees_ = trees
        return self

    def _check_fitted(self):
        if not hasattr(self, "trees_"):
            raise NotFittedError("GBTRegressor is not fitted")

    def predict(self, X, n_trees: int | None = None) -> np.ndarray:
        self._check_fitted()
        X = check_matrix(X, self.n_features_in_)
        out = np.full(X.shape[0], self.base_score_)
        for tree in self.trees_[:n_trees]:
            out += self.learning_rate * tree.predict(X)
        return out

    def predict_row(self, x) -> float:
        eta = self.learning_rate
        return self.base_score_ + eta * sum(t.predict_row(x) for t in self.trees_)

    def to_dict(self) -> dict:
        self._check_fitted()
        return {
            "params": self.get_params(),
            "n_features": self.n_features_in_,
            "base_score": self.base_score_,
            "bins": [t.tolist() for t in self.thresholds_],
            "best_iteration": self.best_iteration_,
            "trees": [t.to_dict() for t in self.trees_],
        }

    @classmethod
    def from_dict(cls, d: dict) -> "GBTRegressor":
        obj = cls(**d["params"])
        obj.n_features_in_ = int(d["n_features"])
        obj.base_score_ = float(d["base_score"])
        obj.thresholds_ = [np.asarray(t, dtype=float) for t in d["bins"]]
        obj.best_iteration_ = int(d["best_iteration"])
        obj.trees_ = [Tree.from_dict(t) for t in d["trees"]]
        return obj


def _leaf_of_rows(tree: Tree, Xb: np.ndarray) -> np.ndarray:
    """Route binned training rows (``bin <= split bin`` goes left)."""
    feature = np.asarray(tree.feature)
    bins = np.asarray(tree.bin)
    left = np.asarray(tree.left)
    right = np.asarray(tree.right)
    node = np.zeros(Xb.shape[0], dtype=np.intp)
    active = feature[node] >= 0
    while active.any():
        idx = np.nonzero(active)[0]
        nd = node[idx]
        go_left = Xb[idx, feature[nd]] <= bins[nd]
        node[idx] = np.where(go_left, left[nd], right[nd])
        active[idx] = feature[node[idx]] >= 0
    return node


# ------------------------------------------------------- tabular features


def hour_of_day(ts) -> np.ndarray:
    return (np.asarray(ts, dtype=np.int64) // HOUR) % 24


def day_of_week(ts) -> np.ndarray:
    """Monday = 0. The epoch (1970-01-01) was a Thursday."""
    return (np.asarray(ts, dtype=np.int64) // 86400 + 3) % 7


def feature_names(regressors, n_lags: int, calendar: bool) -> list:
    names = [f"lag_{l}" for l in range(1, n_lags + 1)] + list(regressors)
    if calendar:
        names += ["hour", "dow"]
    return names


def build_tabular_features(frame: TimeSeriesFrame, target: str, regressors=(),
                           n_lags: int = 24, calendar: bool = True):
    """Rows ``t >= n_lags`` with features ``[y[t-1..t-n_lags], regressors[t], hour, dow]``.

    Returns
    -------
    features : ndarray
    targets : ndarray
    names : list of str
    rows : ndarray
        Frame row index of each feature row.
    """
    check_frame(frame, required=[target, *regressors], hourly=True)
    n = len(frame)
    if n <= n_lags:
        raise InsufficientDataError(f"{n} rows cannot supply {n_lags} lags")
    y = frame[target]
    rows = np.arange(n_lags, n)
    cols = [y[rows - l] for l in range(1, n_lags + 1)]
    cols += [frame[r][rows] for r in regressors]
    if calendar:
        ts = frame.timestamps[rows]
        cols += [hour_of_day(ts).astype(float), day_of_week(ts).astype(float)]
    feats = np.column_stack(cols) if cols else np.zeros((rows.size, 0))
    return feats, y[rows], feature_names(regressors, n_lags, calendar), rows


class GBTForecaster(RegressorMixin, BaseEstimator):
    """Recursive multi-step forecaster built on :class:`GBTRegressor`.

    ``fit`` tabularizes the training rows (and the validation rows passed via
    ``eval_frame``/``eval_y``, whose lags may reach back into training).
    ``predict`` refills the target lags with its own forecasts.
    """

    def __init__(self, regressors=(), n_lags=24, calendar=True, max_rounds=500,
                 learning_rate=0.05, max_leaves=31, min_samples_leaf=20, n_bins=63,
                 l2_leaf_penalty=1.0, early_stopping_rounds=50):
        self.regressors = regressors
        self.n_lags = n_lags
        self.calendar = calendar
        self.max_rounds = max_rounds
        self.learning_rate = learning_rate
        self.max_leaves = max_leaves
        self.min_samples_leaf = min_samples_leaf
        self.n_bins = n_bins
        self.l2_leaf_penalty = l2_leaf_penalty
        self.early_stopping_rounds = early_stopping_rounds

    @classmethod
    def from_config(cls, cfg: GbtConfig, regressors=()) -> "GBTForecaster":
        from dataclasses import asdict

        return cls(regressors=tuple(regressors), **asdict(cfg))

    def _booster(self) -> GBTRegressor:
        return GBTRegressor(self.max_rounds, self.learning_rate, self.max_leaves,
                            self.min_samples_leaf, self.n_bins, self.l2_leaf_penalty,
                            self.early_stopping_rounds)

    def _stack(self, X: TimeSeriesFrame, y) -> TimeSeriesFrame:
        return X.select(self.regressors_).with_column("__target__", y)

    def fit(self, X: TimeSeriesFrame, y, eval_frame: TimeSeriesFrame | None = None, eval_y=None):
        X = check_frame(X, required=self.regressors)
        y = check_vector(y, "y")
        self.regressors_ = tuple(self.regressors)
        train = self._stack(X, y)
        F, t, names, _ = build_tabular_features(train, "__target__", self.regressors_,
                                                self.n_lags, self.calendar)
        eval_set = None
        if eval_frame is not None:
            ev = self._stack(check_frame(eval_frame, required=self.regressors_),
                             check_vector(eval_y, "eval_y"))
            both = TimeSeriesFrame(np.concatenate([train.timestamps, ev.timestamps]),
                                   train.columns, np.vstack([train.values, ev.values]))
            Fa, ta, _, rows = build_tabular_features(both, "__target__", self.regressors_,
                                                     self.n_lags, self.calendar)
            mask = rows >= len(train)
            eval_set = (Fa[mask], ta[mask])
        es = self.early_stopping_rounds if eval_set is not None else None
        booster = self._booster().set_params(early_stopping_rounds=es)
        self.booster_ = booster.fit(F, t, eval_set=eval_set)
        self.feature_names_ = names
        self.history_ = y[-self.n_lags:].copy()
        return self

    def _check_fitted(self):
        if not hasattr(self, "booster_"):
            raise NotFittedError("GBTForecaster is not fitted")

    def _exog_block(self, X: TimeSeriesFrame) -> np.ndarray:
        cols = [X[r] for r in self.regressors_]
        if self.calendar:
            cols += [hour_of_day(X.timestamps).astype(float),
                     day_of_week(X.timestamps).astype(float)]
        return np.column_stack(cols) if cols else np.zeros((len(X), 0))

    def predict(self, X: TimeSeriesFrame, history=None) -> np.ndarray:
        """Recursive forecast over the rows of ``X`` from the given target tail."""
        self._check_fitted()
        X = check_frame(X, required=self.regressors_)
        hist = self.history_ if history is None else check_vector(history, "history")
        L = self.n_lags
        if hist.size < L:
            raise ValueError(f"history tail needs {L} values, got {hist.size}")
        buf = list(hist[-L:])
        exog = self._exog_block(X)
        out = np.empty(len(X))
        booster = self.booster_
        for h in range(len(X)):
            x = buf[::-1][:L] + list(exog[h])
            out[h] = booster.predict_row(x)
            buf.append(out[h])
        return out

    def predict_one_step(self, X: TimeSeriesFrame, y, history=None) -> np.ndarray:
        """Predictions using observed lags (teacher forcing)."""
        self._check_fitted()
        X = check_frame(X, required=self.regressors_)
        y = check_vector(y, "y")
        hist = self.history_ if history is None else check_vector(history, "history")
        L = self.n_lags
        full = np.concatenate([hist[-L:], y])
        idx = np.arange(L, full.size)
        lags = np.column_stack([full[idx - l] for l in range(1, L + 1)])
        return self.booster_.predict(np.column_stack([lags, self._exog_block(X)]))

    def to_dict(self) -> dict:
        self._check_fitted()
        return {
            "kind": "gbt",
            "version": MODEL_VERSION,
            "regressors": list(self.regressors_),
            "n_lags": int(self.n_lags),
            "calendar": bool(self.calendar),
            "feature_names": self.feature_names_,
            "history": self.history_.tolist(),
            "ensemble": self.booster_.to_dict(),
        }

    @classmethod
    def from_dict(cls, d: dict) -> "GBTForecaster":
        if d.get("kind") != "gbt":
            raise ValueError(f"not a GBT model document: kind={d.get('kind')!r}")
        booster = GBTRegressor.from_dict(d["ensemble"])
        params = {k: v for k, v in booster.get_params().items()}
        obj = cls(regressors=tuple(d["regressors"]), n_lags=d["n_lags"],
                  calendar=d["calendar"], **params)
        obj.regressors_ = tuple(d["regressors"])
        obj.booster_ = booster
        obj.feature_names_ = list(d["feature_names"])
        obj.history_ = np.asarray(d["history"], dtype=float)
        return obj


def fit_gbt(config: GbtConfig, train_features, train_targets, val_features=None,
            val_targets=None) -> GBTRegressor:
    model = GBTRegressor(config.max_rounds, config.learning_rate, config.max_leaves,
                         config.min_samples_leaf, config.n_bins, config.l2_leaf_penalty,
                         config.early_stopping_rounds)
    eval_set = None if val_features is None else (val_features, val_targets)
    if eval_set is None:
        model.set_params(early_stopping_rounds=None)
    return model.fit(train_features, train_targets, eval_set=eval_set)


def predict_gbt(model: GBTRegressor, features) -> np.ndarray:
    return model.predict(features)
