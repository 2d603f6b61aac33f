"""HT-weighted classifiers: a linear SVM over polynomial features and a Gini tree."""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field

import numpy as np

from . import _backend
from .designs import as_bits
from .errors import TrainingError, WeightUndefinedError
from .estimators import Population
from .inclusion import as_pi

LAMBDA_GRID = (1e-4, 1e-3, 1e-2, 1e-1, 1.0)


def feature_expand(x, degree: int = 2) -> np.ndarray:
    """Polynomial feature map.

    Degree 1 is the identity. Degree 2 returns, in order, the raw features,
    their squares, then the products ``x_i x_j`` for ``i < j`` in row-major
    order. Accepts a single vector or an ``(m, d)`` matrix.
    """
    if degree not in (1, 2):
        raise ValueError(f"unsupported degree {degree!r}; use 1 or 2")
    x = np.asarray(x, dtype=np.float64)
    single = x.ndim == 1
    X = x[None, :] if single else x
    if degree == 2:
        iu, ju = np.triu_indices(X.shape[1], 1)
        X = np.hstack([X, X**2, X[:, iu] * X[:, ju]])
    return X[0] if single else X


def expanded_dim(d: int, degree: int) -> int:
    return d if degree == 1 else 2 * d + d * (d - 1) // 2


def _sign(v):
    return np.where(v >= 0, 1, -1)


@dataclass(eq=False)
class LinearModel:
    """``g(x) = sign(phi(x) . theta - b)`` with ``sign(0) = +1``."""

    theta: np.ndarray
    b: float
    degree: int = 2
    lam: float = 0.0
    objective: float | None = None
    info: dict = field(default_factory=dict)

    def __post_init__(self):
        self.theta = np.asarray(self.theta, dtype=np.float64)
        self.b = float(self.b)
        if not (np.all(np.isfinite(self.theta)) and math.isfinite(self.b)):
            raise TrainingError("linear model has non-finite coordinates")

    @property
    def n_features(self) -> int:
        d, k = 0, 0
        while k < self.theta.shape[0]:
            d += 1
            k = expanded_dim(d, self.degree)
        return d

    def decision_function(self, X) -> np.ndarray:
        X = np.asarray(X, dtype=np.float64)
        Z = feature_expand(X, self.degree)
        if Z.shape[-1] != self.theta.shape[0]:
            raise ValueError(f"expected {self.n_features} raw features, got {X.shape[-1]}")
        return Z @ self.theta - self.b

    def predict(self, X) -> np.ndarray:
        return _sign(self.decision_function(X))

    def to_dict(self) -> dict:
        d = {"type": "linear", "theta": self.theta.tolist(), "b": self.b, "degree": self.degree, "lambda": self.lam}
        if self.objective is not None:
            d["objective"] = self.objective
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "LinearModel":
        return cls(np.array(d["theta"]), d["b"], int(d.get("degree", 1)), float(d.get("lambda", 0.0)), d.get("objective"))


def _training_set(pop: Population, sample, pi):
    bits = as_bits(sample)
    if bits.shape[0] != pop.N:
        raise ValueError("sample indicator and population differ in length")
    idx = np.flatnonzero(bits)
    if idx.size == 0:
        raise TrainingError("empty sample")
    pi = as_pi(pi)
    if np.any(pi[idx] <= 0):
        raise WeightUndefinedError("sampled unit with zero inclusion probability")
    return idx, 1.0 / pi[idx]


def svm_objective(Z, y, w, N: int, lam: float, theta, b) -> float:
    """``(1/N) sum w_i hinge(y_i (z_i . theta - b)) + lam |theta|^2``."""
    margin = y * (Z @ theta - b)
    return float(np.dot(w, np.maximum(0.0, 1.0 - margin)) / N + lam * np.dot(theta, theta))


@dataclass(frozen=True)
class StepSchedule:
    """Step sizes ``eta_t = eta0 / (1 + t / t0)``."""

    eta0: float = 1.0
    t0: float = 100.0

    def __call__(self, t: int) -> float:
        return self.eta0 / (1.0 + t / self.t0)


def _fit_dual(Z, y, w, N, lam, order):
    # 1/(2 lam) times the primal is the C-SVM with per-sample C_i = w_i / (2 lam N)
    Zo = Z[order]
    K = Zo @ Zo.T
    C = w[order] / (2.0 * lam * N)
    alpha, rho, iters = _backend.smo_solve(K, y[order].astype(np.float64), C)
    theta = (alpha * y[order]) @ Zo
    return theta, rho, {"solver": "dual", "iterations": int(iters)}


def _fit_subgradient(Z, y, w, N, lam, schedule, epochs, theta0, b0, history):
    # steps are taken on the objective divided by its loss mass W / N (same minimiser)
    W = w.sum()
    lam_s = lam * N / W
    wn = w / W
    radius = 1.0 / math.sqrt(lam_s)
    theta, b = theta0.copy(), float(b0)
    avg_t, avg_b = np.zeros_like(theta), 0.0
    best_t, best_b, best = theta.copy(), b, svm_objective(Z, y, w, N, lam, theta, b)
    start = epochs // 2
    for t in range(epochs):
        active = y * (Z @ theta - b) < 1.0
        coef = wn[active] * y[active]
        g = -(coef @ Z[active])
        gb = float(coef.sum())
        eta = schedule(t)
        theta = (theta - eta * g) / (1.0 + 2.0 * eta * lam_s)
        nrm = float(np.linalg.norm(theta))
        if nrm > radius:
            theta *= radius / nrm
        b -= eta * gb
        if not (np.all(np.isfinite(theta)) and math.isfinite(b)):
            raise TrainingError(f"subgradient iterates diverged at step {t}")
        if t >= start:
            k = t - start + 1
            avg_t += (theta - avg_t) / k
            avg_b += (b - avg_b) / k
            # keep the best suffix average seen so far
            obj = svm_objective(Z, y, w, N, lam, avg_t, avg_b)
            if obj <= best:
                best_t, best_b, best = avg_t.copy(), avg_b, obj
            if history is not None:
                history.append(best)
    return best_t, best_b, {"solver": "subgradient", "iterations": epochs}


def train_weighted_svm(
    pop: Population,
    sample,
    pi,
    lam: float,
    degree: int = 2,
    schedule: StepSchedule | None = None,
    epochs: int = 500,
    rng: np.random.Generator | None = None,
    solver: str = "dual",
    standardize: bool = False,
    N: int | None = None,
    history: list | None = None,
) -> LinearModel:
    """Minimise the HT-weighted regularised hinge objective over ``(theta, b)``.

    ``N`` defaults to the population size. ``solver="dual"`` solves the problem
    exactly by SMO on the dual; ``"subgradient"`` runs the projected, averaged
    full-batch subgradient method with ``schedule`` and returns the best suffix
    average of the iterates (``history`` receives its objective per step).
    With ``standardize`` the expanded features are centred and scaled by their
    HT-weighted moments on the sample before solving and the result is mapped
    back to raw features.
    ``rng`` randomises the start (unit order for the dual, initial point for
    the subgradient method).
    """
    if lam <= 0:
        raise ValueError("lambda must be positive")
    idx, w = _training_set(pop, sample, pi)
    N = pop.N if N is None else N
    y = pop.labels[idx].astype(np.float64)
    Z = feature_expand(pop.features[idx], degree)
    if standardize:
        W = w.sum()
        mu = (w @ Z) / W
        sd = np.sqrt((w @ (Z - mu) ** 2) / W)
        sd[sd <= 1e-12 * max(1.0, float(np.abs(mu).max()))] = 1.0
    else:
        mu, sd = np.zeros(Z.shape[1]), np.ones(Z.shape[1])
    Zs = (Z - mu) / sd
    if np.unique(y).size == 1:
        # one-class sample: theta = 0 and b on the label side minimises the objective
        theta, b, info = np.zeros(Z.shape[1]), -y[0], {"solver": solver, "iterations": 0}
    elif solver == "dual":
        order = rng.permutation(idx.size) if rng is not None else np.arange(idx.size)
        theta, b, info = _fit_dual(Zs, y, w, N, lam, order)
    elif solver == "subgradient":
        schedule = schedule or StepSchedule()
        theta0 = rng.normal(scale=0.01, size=Z.shape[1]) if rng is not None else np.zeros(Z.shape[1])
        theta, b, info = _fit_subgradient(Zs, y, w, N, lam, schedule, epochs, theta0, 0.0, history)
    else:
        raise ValueError(f"unknown solver {solver!r}")
    obj = svm_objective(Zs, y, w, N, lam, theta, b)
    if not math.isfinite(obj):
        raise TrainingError("objective is not finite")
    raw_theta = theta / sd
    raw_b = b + float(mu @ raw_theta)
    info = dict(info, standardized=standardize, n_train=int(idx.size))
    return LinearModel(raw_theta, raw_b, degree, lam, obj, info)


def _fold_ids(m: int, folds: int, rng) -> np.ndarray:
    perm = rng.permutation(m) if rng is not None else np.arange(m)
    ids = np.empty(m, dtype=np.int64)
    ids[perm] = np.arange(m) % folds
    return ids


def select_lambda_cv(
    pop: Population,
    sample,
    pi,
    grid=LAMBDA_GRID,
    folds: int = 5,
    degree: int = 2,
    rng: np.random.Generator | None = None,
    weighted_validation: bool = True,
    **train_kw,
) -> tuple[float, dict]:
    """Pick lambda by k-fold cross-validation over the sampled units.

    Validation risk is the 1/pi-weighted misclassification rate of each held-out
    fold (plain rate with ``weighted_validation=False``). Ties go to the
    larger lambda. Returns ``(lambda, {lambda: risk})``.
    """
    idx, w = _training_set(pop, sample, pi)
    pi_arr = as_pi(pi)
    fid = _fold_ids(idx.size, min(folds, idx.size), rng)
    scores = {}
    for lam in grid:
        num = den = 0.0
        for k in range(min(folds, idx.size)):
            tr = np.zeros(pop.N, dtype=bool)
            tr[idx[fid != k]] = True
            va = idx[fid == k]
            if not tr.any() or va.size == 0:
                continue
            model = train_weighted_svm(pop, tr, pi_arr, lam, degree, N=pop.N, **train_kw)
            err = (model.predict(pop.features[va]) != pop.labels[va]).astype(np.float64)
            vw = w[fid == k] if weighted_validation else np.ones(va.size)
            num += float(vw @ err)
            den += float(vw.sum())
        scores[lam] = num / den
    best = min(scores.values())
    chosen = max(lam for lam, s in scores.items() if s <= best)
    return chosen, scores


# --------------------------------------------------------------------------
# trees


@dataclass(eq=False)
class TreeNode:
    label: int = 1
    weight: float = 0.0
    feature: int = -1
    threshold: float = math.nan
    left: "TreeNode | None" = None
    right: "TreeNode | None" = None

    @property
    def is_leaf(self) -> bool:
        return self.left is None

    def to_dict(self) -> dict:
        if self.is_leaf:
            return {"leaf": True, "label": self.label, "weight": self.weight}
        return {
            "leaf": False,
            "feature": self.feature,
            "threshold": self.threshold,
            "label": self.label,
            "weight": self.weight,
            "left": self.left.to_dict(),
            "right": self.right.to_dict(),
        }

    @classmethod
    def from_dict(cls, d: dict) -> "TreeNode":
        if d.get("leaf", "left" not in d):
            return cls(int(d["label"]), float(d.get("weight", 0.0)))
        return cls(
            int(d.get("label", 1)),
            float(d.get("weight", 0.0)),
            int(d["feature"]),
            float(d["threshold"]),
            cls.from_dict(d["left"]),
            cls.from_dict(d["right"]),
        )


@dataclass(eq=False)
class TreeModel:
    """Binary tree; ``x[feature] <= threshold`` goes left."""

    root: TreeNode
    n_features: int
    max_depth: int = 8
    min_leaf_weight: float = 1.0

    def predict(self, X) -> np.ndarray:
        X = np.asarray(X, dtype=np.float64)
        single = X.ndim == 1
        X = X[None, :] if single else X
        if X.shape[1] != self.n_features:
            raise ValueError(f"expected {self.n_features} features, got {X.shape[1]}")
        out = np.empty(X.shape[0], dtype=np.int64)
        stack = [(self.root, np.arange(X.shape[0]))]
        while stack:
            node, rows = stack.pop()
            if node.is_leaf:
                out[rows] = node.label
                continue
            go_left = X[rows, node.feature] <= node.threshold
            stack.append((node.left, rows[go_left]))
            stack.append((node.right, rows[~go_left]))
        return out[0] if single else out

    @property
    def depth(self) -> int:
        def rec(n):
            return 0 if n.is_leaf else 1 + max(rec(n.left), rec(n.right))

        return rec(self.root)

    def to_dict(self) -> dict:
        return {
            "type": "tree",
            "n_features": self.n_features,
            "max_depth": self.max_depth,
            "min_leaf_weight": self.min_leaf_weight,
            "root": self.root.to_dict(),
        }

    @classmethod
    def from_dict(cls, d: dict) -> "TreeModel":
        return cls(TreeNode.from_dict(d["root"]), int(d["n_features"]), int(d.get("max_depth", 8)), float(d.get("min_leaf_weight", 1.0)))


def weighted_gini(y, w) -> float:
    """``W * G`` with ``G = 2 p q`` the Gini index of the weighted node."""
    P = float(w[y > 0].sum())
    Q = float(w[y <= 0].sum())
    W = P + Q
    return 0.0 if W <= 0 else 2.0 * P * Q / W


def _grow(X, y, w, depth, max_depth, min_leaf_weight) -> TreeNode:
    W = float(w.sum())
    label = 1 if float(w @ y) >= 0 else -1
    node = TreeNode(label, W)
    impurity = weighted_gini(y, w)
    if depth >= max_depth or impurity <= 0.0 or y.shape[0] < 2:
        return node
    scores, thr = _backend.split_scores(X, y.astype(np.float64), w, min_leaf_weight)
    best = float(scores.min())
    tol = 1e-12 * max(W, 1.0)
    if not math.isfinite(best) or impurity - best <= tol:
        return node
    # first candidate within tolerance: lowest feature, then lowest threshold
    flat = int(np.flatnonzero(scores.ravel() <= best + tol)[0])
    j, k = divmod(flat, scores.shape[1])
    t = float(thr[j, k])
    left = X[:, j] <= t
    node.feature, node.threshold = j, t
    node.left = _grow(X[left], y[left], w[left], depth + 1, max_depth, min_leaf_weight)
    node.right = _grow(X[~left], y[~left], w[~left], depth + 1, max_depth, min_leaf_weight)
    return node


def train_weighted_tree(
    pop: Population, sample, pi, max_depth: int = 8, min_leaf_weight: float = 1.0
) -> TreeModel:
    """Greedy CART with each sampled unit carrying mass ``1 / pi_i``."""
    idx, w = _training_set(pop, sample, pi)
    X = pop.features[idx]
    y = pop.labels[idx]
    root = _grow(X, y, w, 0, max_depth, min_leaf_weight)
    return TreeModel(root, pop.d, max_depth, min_leaf_weight)


# --------------------------------------------------------------------------
# stumps and generic helpers


@dataclass(frozen=True)
class Stump:
    """``sign`` if ``x[feature] > threshold`` else ``-sign``."""

    feature: int
    threshold: float
    sign: int = 1

    def predict(self, X) -> np.ndarray:
        X = np.atleast_2d(np.asarray(X, dtype=np.float64))
        return np.where(X[:, self.feature] > self.threshold, self.sign, -self.sign)

    def to_dict(self) -> dict:
        return {"type": "stump", "feature": self.feature, "threshold": self.threshold, "sign": self.sign}


def stump_class(X, include_constants: bool = True) -> list[Stump]:
    """Axis-aligned stumps at every midpoint of distinct feature values, both signs.

    The two constant classifiers come first when ``include_constants``.
    """
    X = np.atleast_2d(np.asarray(X, dtype=np.float64))
    out = [Stump(0, -math.inf, 1), Stump(0, -math.inf, -1)] if include_constants else []
    for j in range(X.shape[1]):
        v = np.unique(X[:, j])
        for t in 0.5 * (v[1:] + v[:-1]):
            out.append(Stump(j, float(t), 1))
            out.append(Stump(j, float(t), -1))
    return out


def predict(model, x) -> np.ndarray:
    return model.predict(x)


def model_from_dict(d: dict):
    kind = d.get("type", "linear" if "theta" in d else "tree")
    if kind == "linear":
        return LinearModel.from_dict(d)
    if kind == "tree":
        return TreeModel.from_dict(d)
    if kind == "stump":
        return Stump(int(d["feature"]), float(d["threshold"]), int(d.get("sign", 1)))
    raise ValueError(f"unknown model type {kind!r}")


def save_model(model, path) -> None:
    with open(path, "w") as fh:
        json.dump(model.to_dict(), fh, indent=2)


def load_model(path):
    with open(path) as fh:
        return model_from_dict(json.load(fh))
