"""Finite-sum objectives with component, batch and full gradient oracles.

A problem holds n * m component functions f_{i,j} (m per node), all over
R^p. Node i's local cost is the mean of its m components and the global
cost is the mean over nodes. Two families are provided: a non-convex
logistic regression model and diagonal quadratics with closed-form optima
for exact testing.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np


def softplus(z):
    """log(1 + e^z), overflow-safe: max(z, 0) + log1p(e^{-|z|})."""
    z = np.asarray(z, dtype=float)
    return np.maximum(z, 0.0) + np.log1p(np.exp(-np.abs(z)))


def sigmoid(z):
    """1 / (1 + e^{-z}) evaluated without overflow for any finite z."""
    z = np.asarray(z, dtype=float)
    out = np.empty_like(z)
    pos = z >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-z[pos]))
    ez = np.exp(z[~pos])
    out[~pos] = ez / (1.0 + ez)
    return out


class FiniteSumProblem:
    """Interface shared by all problem families.

    Attributes n, m, p give the shape (nodes, components per node,
    dimension); L is a valid mean-squared smoothness modulus. Subclasses
    must provide the component oracles; the stacked/batch oracles have
    generic implementations that subclasses may vectorize.
    """

    n: int
    m: int
    p: int
    L: float

    def component_value(self, i: int, j: int, x: np.ndarray) -> float:
        raise NotImplementedError

    def component_gradient(self, i: int, j: int, x: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    def _check_node(self, i: int) -> None:
        if not 0 <= i < self.n:
            raise IndexError(f"node index {i} out of range [0, {self.n})")

    def batch_value(self, i: int, x: np.ndarray) -> float:
        self._check_node(i)
        return float(np.mean([self.component_value(i, j, x) for j in range(self.m)]))

    def batch_gradient(self, i: int, x: np.ndarray) -> np.ndarray:
        """Local cost gradient at node i: the mean of its m component gradients."""
        self._check_node(i)
        g = np.stack([self.component_gradient(i, j, x) for j in range(self.m)])
        return g.mean(axis=0)

    def full_value(self, x: np.ndarray) -> float:
        return float(np.mean([self.batch_value(i, x) for i in range(self.n)]))

    def full_gradient(self, x: np.ndarray) -> np.ndarray:
        """Global cost gradient: mean of the n local batch gradients."""
        g = np.stack([self.batch_gradient(i, x) for i in range(self.n)])
        return g.mean(axis=0)

    def batch_gradients(self, X: np.ndarray) -> np.ndarray:
        """Stacked local gradients: row i is node i's batch gradient at X[i]."""
        return np.stack([self.batch_gradient(i, X[i]) for i in range(self.n)])

    def minibatch_gradients(self, X: np.ndarray, indices: np.ndarray) -> np.ndarray:
        """Row i: mean of node i's component gradients at X[i] over indices[i].

        ``indices`` has shape (n, B); draws may repeat (sampling is with
        replacement).
        """
        out = np.empty((self.n, self.p))
        for i in range(self.n):
            g = np.stack([self.component_gradient(i, int(j), X[i]) for j in indices[i]])
            out[i] = g.mean(axis=0)
        return out

    def dissimilarity_at(self, x: np.ndarray) -> float:
        """(1/n) sum_i ||grad f_i(x) - grad F(x)||^2 at one point.

        Zero exactly when every node's local gradient agrees at x.
        """
        g = self.batch_gradients(np.tile(np.asarray(x, dtype=float), (self.n, 1)))
        gbar = g.mean(axis=0)
        return float(np.mean(np.sum((g - gbar) ** 2, axis=1)))


def estimate_smoothness(problem: FiniteSumProblem) -> float:
    """Mean-squared smoothness modulus carried by the problem."""
    return problem.L


# ---------------------------------------------------------------------------
# non-convex logistic regression

@dataclass(frozen=True)
class LogisticDataset:
    """Unit-norm features with +/-1 labels and a non-convex regularizer weight.

    features: (n, m, p) with each feature vector normalized to unit length;
    labels: (n, m) in {-1, +1}; reg: weight R of the ridge-like bounded term
    R * sum_d x_d^2 / (1 + x_d^2).
    """

    features: np.ndarray
    labels: np.ndarray
    reg: float = 1e-3

    def __post_init__(self):
        f = np.asarray(self.features, dtype=float)
        y = np.asarray(self.labels, dtype=float)
        if f.ndim != 3:
            raise ValueError(f"features must have shape (n, m, p), got {f.shape}")
        if y.shape != f.shape[:2]:
            raise ValueError(f"labels shape {y.shape} does not match features {f.shape[:2]}")
        norms = np.linalg.norm(f, axis=2)
        if np.abs(norms - 1.0).max() > 1e-9:
            raise ValueError("feature vectors must be unit-norm")
        if not np.isin(y, (-1.0, 1.0)).all():
            raise ValueError("labels must be exactly -1 or +1")
        if self.reg < 0:
            raise ValueError("regularization weight must be nonnegative")
        object.__setattr__(self, "features", f)
        object.__setattr__(self, "labels", y)

    @property
    def n(self) -> int:
        return self.features.shape[0]

    @property
    def m(self) -> int:
        return self.features.shape[1]

    @property
    def p(self) -> int:
        return self.features.shape[2]


class LogisticProblem(FiniteSumProblem):
    """Non-convex binary logistic regression.

    Component loss at (i, j): log(1 + exp(-(x . theta_{i,j}) xi_{i,j})) plus
    the bounded regularizer r(x) = R sum_d x_d^2 / (1 + x_d^2). With
    unit-norm features the loss curvature is at most 1/4 and the
    regularizer curvature at most 2R, giving the default L = 1/4 + 2R;
    pass ``L`` to override.
    """

    def __init__(self, dataset: LogisticDataset, L: float | None = None):
        self.dataset = dataset
        self.n = dataset.n
        self.m = dataset.m
        self.p = dataset.p
        self.L = float(L) if L is not None else 0.25 + 2.0 * dataset.reg

    def _reg_value(self, x):
        x2 = x * x
        return self.dataset.reg * float(np.sum(x2 / (1.0 + x2)))

    def _reg_gradient(self, x):
        return 2.0 * self.dataset.reg * x / (1.0 + x * x) ** 2

    def component_value(self, i, j, x):
        d = self.dataset
        x = np.asarray(x, dtype=float)
        margin = float(d.features[i, j] @ x) * d.labels[i, j]
        return float(softplus(-margin)) + self._reg_value(x)

    def component_gradient(self, i, j, x):
        d = self.dataset
        x = np.asarray(x, dtype=float)
        theta = d.features[i, j]
        xi = d.labels[i, j]
        margin = float(theta @ x) * xi
        return -xi * float(sigmoid(-margin)) * theta + self._reg_gradient(x)

    def batch_value(self, i, x):
        self._check_node(i)
        d = self.dataset
        x = np.asarray(x, dtype=float)
        margins = (d.features[i] @ x) * d.labels[i]
        return float(np.mean(softplus(-margins))) + self._reg_value(x)

    def batch_gradient(self, i, x):
        self._check_node(i)
        d = self.dataset
        x = np.asarray(x, dtype=float)
        margins = (d.features[i] @ x) * d.labels[i]
        coeff = -d.labels[i] * sigmoid(-margins)
        return (coeff @ d.features[i]) / self.m + self._reg_gradient(x)

    def full_value(self, x):
        d = self.dataset
        x = np.asarray(x, dtype=float)
        margins = (d.features @ x) * d.labels
        return float(np.mean(softplus(-margins))) + self._reg_value(x)

    def full_gradient(self, x):
        d = self.dataset
        x = np.asarray(x, dtype=float)
        margins = (d.features @ x) * d.labels
        coeff = -d.labels * sigmoid(-margins)
        return np.einsum("im,imp->p", coeff, d.features) / (self.n * self.m) + self._reg_gradient(x)

    def batch_gradients(self, X):
        d = self.dataset
        X = np.asarray(X, dtype=float)
        margins = np.einsum("imp,ip->im", d.features, X) * d.labels
        coeff = -d.labels * sigmoid(-margins)
        loss = np.einsum("im,imp->ip", coeff, d.features) / self.m
        return loss + 2.0 * d.reg * X / (1.0 + X * X) ** 2

    def minibatch_gradients(self, X, indices):
        d = self.dataset
        X = np.asarray(X, dtype=float)
        rows = np.arange(self.n)[:, None]
        theta = d.features[rows, indices]          # (n, B, p)
        xi = d.labels[rows, indices]               # (n, B)
        margins = np.einsum("ibp,ip->ib", theta, X) * xi
        coeff = -xi * sigmoid(-margins)
        loss = np.einsum("ib,ibp->ip", coeff, theta) / indices.shape[1]
        return loss + 2.0 * d.reg * X / (1.0 + X * X) ** 2


# ---------------------------------------------------------------------------
# diagonal quadratics (exact optima for oracle tests)

class QuadraticProblem(FiniteSumProblem):
    """Per-component diagonal quadratics f_{i,j}(x) = 0.5 sum_d a_d (x_d - c_d)^2.

    curvatures and centers have shape (n, m, p) with curvatures > 0. The
    global minimizer and optimal value are available in closed form, and
    L is the largest curvature entry (the max eigenvalue over all
    component Hessians).
    """

    def __init__(self, curvatures: np.ndarray, centers: np.ndarray):
        a = np.asarray(curvatures, dtype=float)
        c = np.asarray(centers, dtype=float)
        if a.shape != c.shape or a.ndim != 3:
            raise ValueError("curvatures and centers must share shape (n, m, p)")
        if (a <= 0).any():
            raise ValueError("curvatures must be strictly positive")
        self.curvatures = a
        self.centers = c
        self.n, self.m, self.p = a.shape
        self.L = float(a.max())
        # global cost is 0.5 x' Abar x - x' b + const with diagonal Abar
        self._abar = a.mean(axis=(0, 1))
        self._b = (a * c).mean(axis=(0, 1))
        self._const = 0.5 * float((a * c * c).mean(axis=(0, 1)).sum())

    def component_value(self, i, j, x):
        d = np.asarray(x, dtype=float) - self.centers[i, j]
        return 0.5 * float(np.sum(self.curvatures[i, j] * d * d))

    def component_gradient(self, i, j, x):
        return self.curvatures[i, j] * (np.asarray(x, dtype=float) - self.centers[i, j])

    def batch_gradient(self, i, x):
        self._check_node(i)
        a = self.curvatures[i]
        return (a * (np.asarray(x, dtype=float) - self.centers[i])).mean(axis=0)

    def batch_value(self, i, x):
        self._check_node(i)
        d = np.asarray(x, dtype=float) - self.centers[i]
        return 0.5 * float((self.curvatures[i] * d * d).sum(axis=1).mean())

    def full_gradient(self, x):
        return self._abar * np.asarray(x, dtype=float) - self._b

    def full_value(self, x):
        x = np.asarray(x, dtype=float)
        return 0.5 * float(x @ (self._abar * x)) - float(x @ self._b) + self._const

    def batch_gradients(self, X):
        X = np.asarray(X, dtype=float)
        return np.einsum("imp,imp->ip", self.curvatures,
                         X[:, None, :] - self.centers) / self.m

    def minibatch_gradients(self, X, indices):
        X = np.asarray(X, dtype=float)
        rows = np.arange(self.n)[:, None]
        a = self.curvatures[rows, indices]
        c = self.centers[rows, indices]
        return (a * (X[:, None, :] - c)).mean(axis=1)

    def minimizer(self) -> np.ndarray:
        return self._b / self._abar

    def optimal_value(self) -> float:
        return self.full_value(self.minimizer())

    def node_minimizer(self, i: int) -> np.ndarray:
        a = self.curvatures[i].mean(axis=0)
        return (self.curvatures[i] * self.centers[i]).mean(axis=0) / a
