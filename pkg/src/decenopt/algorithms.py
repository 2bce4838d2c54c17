"""Decentralized update rules and the parameter/complexity calculators.

GT-SARAH is a double loop: each outer cycle starts from a local batch
gradient, then runs q inner iterations of a recursive variance-reduced
estimator fused across the network by gradient tracking. The matrix form
of one update is

    y_{t+1} = W y_t + v_t - v_{t-1}
    x_{t+1} = W x_t - alpha y_{t+1}

with per-node rows stacked into (n, p) arrays. DSGD and DSGT baselines
share the same synchronous-round conventions. Every update mutates the
passed state in place and advances its cost counters; one synchronous
round (both the tracker and state exchanges of a step) counts as one
communication round carrying two vectors per neighbor.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

ALGORITHMS = ("gt-sarah", "dsgd", "dsgt")

# vectors exchanged per neighbor in one synchronous round (tracker + state,
# or state only for dsgd); rounds are what the comm_rounds counter counts
MESSAGE_VECTORS_PER_ROUND = {"gt-sarah": 2, "dsgd": 1, "dsgt": 2}


@dataclass
class CostCounters:
    """Component-gradient and communication-round totals for one run."""

    grads: int = 0
    rounds: int = 0


@dataclass
class NetworkState:
    """Live variables of a GT-SARAH run, stacked per node.

    x is the current state matrix (n, p); y the gradient trackers; v the
    estimator from the previous iterate (v^{t-1}; the carried v^{-1,s} at a
    cycle start). x_prev holds the previous inner state while the inner
    loop is active.
    """

    x: np.ndarray
    y: np.ndarray
    v: np.ndarray
    s: int = 1
    t: int = 0
    x_prev: np.ndarray | None = None
    counters: CostCounters = field(default_factory=CostCounters)


def initial_state(x0: np.ndarray, n: int) -> NetworkState:
    """All nodes at the same start point, trackers and estimators at zero."""
    x0 = np.asarray(x0, dtype=float)
    return NetworkState(x=np.tile(x0, (n, 1)), y=np.zeros((n, x0.size)),
                        v=np.zeros((n, x0.size)))


def sample_indices(rngs, m: int, B: int) -> np.ndarray:
    """(n, B) component indices, B i.i.d. uniform draws per node with replacement.

    Each node draws from its own stream, so the result does not depend on
    the order in which nodes are processed.
    """
    return np.stack([rng.integers(0, m, size=B) for rng in rngs])


def sarah_estimator(problem, X, X_prev, V_prev, indices) -> np.ndarray:
    """Recursive estimator: minibatch(grad(X) - grad(X_prev)) + V_prev, row-wise."""
    g_new = problem.minibatch_gradients(X, indices)
    g_old = problem.minibatch_gradients(X_prev, indices)
    return (g_new - g_old) + V_prev


def gt_sarah_outer_init(state: NetworkState, problem, W: np.ndarray, alpha: float) -> NetworkState:
    """Cycle start: local batch gradients, then one tracking + state round.

    Costs n*m component gradients and one communication round. Requires the
    state at (t=0, s) carrying y^{0,s} and v^{-1,s} (zeros at s=1).
    """
    if alpha < 0:
        raise ValueError("step size must be nonnegative")
    if state.t != 0:
        raise ValueError(f"outer init requires t=0, state is at t={state.t}")
    v0 = problem.batch_gradients(state.x)
    y1 = W @ state.y + v0 - state.v
    x1 = W @ state.x - alpha * y1
    state.x_prev = state.x
    state.x, state.y, state.v = x1, y1, v0
    state.t = 1
    state.counters.grads += problem.n * problem.m
    state.counters.rounds += 1
    return state


def gt_sarah_inner_step(state: NetworkState, problem, W: np.ndarray, alpha: float,
                        B: int, rngs) -> NetworkState:
    """One inner iteration: sample, update estimator, track, descend.

    Costs 2*n*B component gradients (each sampled index is evaluated at the
    current and the previous state) and one communication round.
    """
    if not 1 <= B <= problem.m:
        raise ValueError(f"minibatch size {B} outside [1, {problem.m}]")
    if state.t < 1 or state.x_prev is None:
        raise ValueError("inner step requires a completed outer init")
    idx = sample_indices(rngs, problem.m, B)
    v = sarah_estimator(problem, state.x, state.x_prev, state.v, idx)
    y = W @ state.y + v - state.v
    x = W @ state.x - alpha * y
    state.x_prev = state.x
    state.x, state.y, state.v = x, y, v
    state.t += 1
    state.counters.grads += 2 * problem.n * B
    state.counters.rounds += 1
    return state


def gt_sarah_cycle_handoff(state: NetworkState, q: int) -> NetworkState:
    """Roll indices to the next cycle; no gradient or communication cost.

    x, y carry over unchanged and the final inner estimator becomes the
    next cycle's v^{-1}.
    """
    if state.t != q + 1:
        raise ValueError(f"handoff requires t={q + 1}, state is at t={state.t}")
    state.s += 1
    state.t = 0
    state.x_prev = None
    return state


# ---------------------------------------------------------------------------
# baselines

@dataclass
class BaselineState:
    """State of a DSGD/DSGT run: x (n, p), tracker y and last gradient g for DSGT."""

    x: np.ndarray
    y: np.ndarray | None = None
    g: np.ndarray | None = None
    k: int = 0
    counters: CostCounters = field(default_factory=CostCounters)


def baseline_state(x0: np.ndarray, n: int) -> BaselineState:
    x0 = np.asarray(x0, dtype=float)
    return BaselineState(x=np.tile(x0, (n, 1)))


def _minibatch(problem, X, B, rngs):
    # rngs=None selects the deterministic full pass (requires B == m)
    if rngs is None:
        if B != problem.m:
            raise ValueError("full-pass mode requires B = m")
        return problem.batch_gradients(X), problem.n * problem.m
    idx = sample_indices(rngs, problem.m, B)
    return problem.minibatch_gradients(X, idx), problem.n * B


def dsgd_step(state: BaselineState, problem, W: np.ndarray, alpha: float,
              B: int, rngs) -> BaselineState:
    """Mix then descend along a local minibatch gradient: x <- W x - alpha g."""
    g, cost = _minibatch(problem, state.x, B, rngs)
    state.x = W @ state.x - alpha * g
    state.k += 1
    state.counters.grads += cost
    state.counters.rounds += 1
    return state


def dsgt_init(state: BaselineState, problem, B: int, rngs) -> BaselineState:
    """Seed the tracker with one minibatch gradient: y = g at the start point."""
    g, cost = _minibatch(problem, state.x, B, rngs)
    state.y = g
    state.g = g
    state.counters.grads += cost
    return state


def dsgt_step(state: BaselineState, problem, W: np.ndarray, alpha: float,
              B: int, rngs) -> BaselineState:
    """Stochastic gradient tracking: y <- W y + g_new - g_old, x <- W x - alpha y.

    The node average of y equals the node average of the latest gradients
    by telescoping, which is what lets every node follow the global
    gradient.
    """
    if state.y is None or state.g is None:
        raise ValueError("dsgt_step requires dsgt_init first")
    g, cost = _minibatch(problem, state.x, B, rngs)
    state.y = W @ state.y + g - state.g
    state.x = W @ state.x - alpha * state.y
    state.g = g
    state.k += 1
    state.counters.grads += cost
    state.counters.rounds += 1
    return state


# ---------------------------------------------------------------------------
# parameter and complexity calculators

def max_stepsize(n: int, B: int, q: int, lam: float, L: float,
                 variant: str = "complexity") -> float:
    """Largest admissible step size for GT-SARAH.

    min{ (1-lam^2)^2 / (4 sqrt(42)),
         (n B / 6 q)^{1/2},
         (4 n B / (7 n B + 24 q))^e * (1-lam^2) / 6 } / (2 L)

    with e = 1/4 for ``variant="asymptotic"`` and e = 1/3 for
    ``variant="complexity"`` (the tighter bound that underwrites the
    iteration-count and complexity guarantees).
    """
    if not 0.0 <= lam < 1.0:
        raise ValueError(f"lambda must lie in [0, 1), got {lam}")
    if L <= 0:
        raise ValueError("smoothness modulus must be positive")
    if min(n, B, q) < 1:
        raise ValueError("n, B, q must be positive")
    if variant == "asymptotic":
        e = 0.25
    elif variant == "complexity":
        e = 1.0 / 3.0
    else:
        raise ValueError(f"unknown variant {variant!r}")
    one = 1.0 - lam * lam
    t1 = one ** 2 / (4.0 * math.sqrt(42.0))
    t2 = math.sqrt(n * B / (6.0 * q))
    t3 = (4.0 * n * B / (7.0 * n * B + 24.0 * q)) ** e * one / 6.0
    return min(t1, t2, t3) / (2.0 * L)


def gradient_optimal_batch(n: int, m: int, lam: float) -> int:
    """Largest minibatch that retains the best gradient complexity: floor(R)."""
    r = max(math.sqrt(m / n) * (1.0 - lam) ** 3, 1.0)
    return int(min(math.floor(r), m))


def communication_optimal_batch(n: int, m: int, lam: float) -> int:
    """Smallest minibatch attaining the best communication complexity: ceil(C)."""
    c = max(math.sqrt(m / n) * (1.0 - lam) ** 1.5, 1.0)
    return int(min(math.ceil(c), m))


def recommend_parameters(n: int, m: int, lam: float, goal: str = "gradient") -> tuple:
    """Minibatch size and inner-loop length (B, q) for the given objective.

    goal="gradient" minimizes total gradient computations, goal="communication"
    minimizes communication rounds; q = ceil(m / B) either way.
    """
    if not 0.0 <= lam < 1.0:
        raise ValueError(f"lambda must lie in [0, 1), got {lam}")
    if goal == "gradient":
        B = gradient_optimal_batch(n, m, lam)
    elif goal == "communication":
        B = communication_optimal_batch(n, m, lam)
    else:
        raise ValueError(f"unknown goal {goal!r}")
    return B, max(1, math.ceil(m / B))


@dataclass(frozen=True)
class ComplexityEstimate:
    """Predicted totals to reach squared stationarity epsilon^2.

    H counts component gradient computations across all nodes, K counts
    communication rounds; both are the bracketed max-expressions evaluated
    verbatim (the universal constants hidden by the theory are taken as 1).
    """

    H: float
    K: float
    regime: str
    B_R: int
    B_C: int


def predicted_complexity(n: int, m: int, B: int, lam: float,
                         Delta: float = 1.0, epsilon: float = 0.1) -> ComplexityEstimate:
    """Gradient/communication complexity of GT-SARAH at minibatch size B.

    H is non-decreasing and K non-increasing in B. ``Delta`` is the
    initial-condition constant L (F(x0) - F*) + mean ||grad f_i(x0)||^2;
    it is problem data the caller must supply (default 1 is a unit
    placeholder, not an estimate).
    """
    if not 0.0 <= lam < 1.0:
        raise ValueError(f"lambda must lie in [0, 1), got {lam}")
    if epsilon <= 0 or Delta <= 0 or min(n, m, B) < 1:
        raise ValueError("n, m, B, Delta, epsilon must be positive")
    gap = 1.0 - lam
    N = n * m
    scale = Delta / epsilon ** 2
    H = max(n * B / gap ** 2,
            math.sqrt(N),
            m ** (1 / 3) * n ** (2 / 3) * B ** (1 / 3) / gap) * scale
    K = max(1.0 / gap ** 2,
            math.sqrt(m) / (math.sqrt(n) * B),
            m ** (1 / 3) / (n ** (1 / 3) * B ** (2 / 3) * gap)) * scale
    if n <= math.sqrt(N) * gap ** 3:
        regime = "big-data"
    elif n >= math.sqrt(N) * gap ** 1.5:
        regime = "large-network"
    else:
        regime = "intermediate"
    return ComplexityEstimate(H=H, K=K, regime=regime,
                              B_R=gradient_optimal_batch(n, m, lam),
                              B_C=communication_optimal_batch(n, m, lam))


@dataclass
class RunConfig:
    """Parameters of one experiment run.

    alpha may be the string "auto", which resolves to
    max_stepsize(..., variant="complexity"). For gt-sarah give S (outer
    cycles) or epochs; for dsgd/dsgt give steps or epochs, where one epoch
    is m component gradients per node. q defaults to m for gt-sarah.
    """

    algorithm: str
    alpha: float | str = "auto"
    B: int = 1
    q: int | None = None
    S: int | None = None
    steps: int | None = None
    epochs: float | None = None
    seed: int = 0
    epsilon: float = 0.1
    record_every: int | None = None
    def33_every: int | None = None
    x0: np.ndarray | None = None
    replicate: int = 0
    divergence_norm: float = 1e12

    def __post_init__(self):
        if self.algorithm not in ALGORITHMS:
            raise ValueError(f"unknown algorithm {self.algorithm!r}; expected one of {ALGORITHMS}")
        if self.B < 1:
            raise ValueError("minibatch size must be at least 1")
        if self.q is not None and self.q < 1:
            raise ValueError("inner-loop length must be at least 1")
        if isinstance(self.alpha, str):
            if self.alpha != "auto":
                raise ValueError(f"alpha must be nonnegative or 'auto', got {self.alpha!r}")
        elif self.alpha < 0:
            # an explicit 0 freezes descent (consensus-only diagnostics);
            # 'auto' always resolves to a positive bound
            raise ValueError(f"alpha must be nonnegative or 'auto', got {self.alpha}")
