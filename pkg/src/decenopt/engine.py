"""Experiment driver: synchronous round loop, metrics, cost accounting, traces.

A run produces a RunTrace of per-iteration records. Metric evaluations use
full gradients and are never charged to the gradient or communication
counters; they also never touch the sampling streams, so recording cadence
cannot change a trajectory.

Trace indexing: gt-sarah records carry the outer cycle s and inner index t
(t = 0..q within a cycle, plus one terminal record at t = q+1 of the last
cycle); dsgd/dsgt records carry s = 0 and t = step index.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace

import numpy as np

from .algorithms import (RunConfig, baseline_state, dsgd_step, dsgt_init, dsgt_step,
                         gt_sarah_cycle_handoff, gt_sarah_inner_step,
                         gt_sarah_outer_init, initial_state, max_stepsize)
from .graph import spectral_quantities
from .streams import node_streams

CSV_HEADER = ("algorithm,seed,s,t,epochs,grads_total,comm_rounds,"
              "stationary_gap,consensus_error,objective,def33_mean")

_ALG_STREAM_ID = {"gt-sarah": 0, "dsgd": 1, "dsgt": 2}


class DivergenceError(RuntimeError):
    """Raised when the stacked state leaves the finite trust region."""

    def __init__(self, message, trace=None):
        super().__init__(message)
        self.trace = trace


def consensus_error(X: np.ndarray) -> float:
    """(1/n) sum_i ||x_i - xbar||, the dispersion of node states."""
    X = np.asarray(X, dtype=float)
    xbar = X.mean(axis=0)
    return float(np.linalg.norm(X - xbar, axis=1).mean())


def stationary_gap(problem, X: np.ndarray) -> float:
    """||grad F(xbar)|| + consensus error; zero iff consensus at a stationary point."""
    X = np.asarray(X, dtype=float)
    xbar = X.mean(axis=0)
    return float(np.linalg.norm(problem.full_gradient(xbar))) + consensus_error(X)


def def33_term(problem, X: np.ndarray) -> float:
    """Per-iterate squared stationarity: (1/n) sum_i ||grad F(x_i)||^2 + L^2 ||x_i - xbar||^2."""
    X = np.asarray(X, dtype=float)
    xbar = X.mean(axis=0)
    total = 0.0
    for i in range(X.shape[0]):
        g = problem.full_gradient(X[i])
        d = X[i] - xbar
        total += float(g @ g) + problem.L ** 2 * float(d @ d)
    return total / X.shape[0]


def def33_metric(problem, states) -> float:
    """Mean of def33_term over a trajectory of stacked states."""
    vals = [def33_term(problem, X) for X in states]
    if not vals:
        raise ValueError("def33_metric needs at least one state")
    return float(np.mean(vals))


def outer_iteration_bound(f0: float, f_star: float, grad_sq_mean: float,
                          alpha: float, q: int, L: float, epsilon: float) -> int:
    """Outer cycles sufficient to push the running def33 mean below epsilon^2.

    Evaluates (4 L (f0 - f*) + mean ||grad f_i(x0)||^2) / ((q+1) alpha L eps^2)
    and rounds up. Requires the optimal value f*, so it is only available
    on problems where f* is known.
    """
    if alpha <= 0 or L <= 0 or epsilon <= 0 or q < 1:
        raise ValueError("alpha, L, epsilon must be positive and q >= 1")
    bound = (4.0 * L * (f0 - f_star) + grad_sq_mean) / ((q + 1) * alpha * L * epsilon ** 2)
    return max(1, math.ceil(bound))


@dataclass(frozen=True)
class TraceRecord:
    s: int
    t: int
    epochs: float
    grads_total: int
    comm_rounds: int
    stationary_gap: float
    consensus_error: float
    objective: float
    def33_mean: float


@dataclass
class RunTrace:
    """Recorded metrics of one run plus the final stacked state."""

    algorithm: str
    seed: int
    records: list = field(default_factory=list)
    final_x: np.ndarray | None = None

    @property
    def final(self) -> TraceRecord:
        return self.records[-1]

    def to_csv(self, target) -> None:
        """Write the documented CSV schema; floats in round-trip repr form."""
        own = isinstance(target, (str, bytes))
        f = open(target, "w") if own else target
        try:
            f.write(CSV_HEADER + "\n")
            for r in self.records:
                f.write(",".join([
                    self.algorithm, str(self.seed), str(r.s), str(r.t),
                    repr(r.epochs), str(r.grads_total), str(r.comm_rounds),
                    repr(r.stationary_gap), repr(r.consensus_error),
                    repr(r.objective), repr(r.def33_mean),
                ]) + "\n")
        finally:
            if own:
                f.close()


class _Recorder:
    """Accumulates the running def33 mean and emits trace records."""

    def __init__(self, problem, trace, record_every, def33_every):
        self.problem = problem
        self.trace = trace
        self.record_every = record_every
        self.def33_every = def33_every
        self.j = 0
        self.def33_sum = 0.0
        self.def33_count = 0

    def observe(self, X, counters, s, t, force=False):
        nm = self.problem.n * self.problem.m
        if self.j % self.def33_every == 0 and not force:
            self.def33_sum += def33_term(self.problem, X)
            self.def33_count += 1
        if force or self.j % self.record_every == 0:
            xbar = X.mean(axis=0)
            ce = consensus_error(X)
            grad_norm = float(np.linalg.norm(self.problem.full_gradient(xbar)))
            self.trace.records.append(TraceRecord(
                s=s, t=t,
                epochs=counters.grads / nm,
                grads_total=counters.grads,
                comm_rounds=counters.rounds,
                stationary_gap=grad_norm + ce,
                consensus_error=ce,
                objective=self.problem.full_value(xbar),
                def33_mean=self.def33_sum / max(1, self.def33_count),
            ))
        if not force:
            self.j += 1


def _check_finite(X, limit, trace, where):
    if not np.isfinite(X).all() or np.linalg.norm(X) > limit:
        raise DivergenceError(
            f"state norm left the finite trust region (> {limit:g}) at {where}", trace)


def _resolve(config: RunConfig, problem, lam: float) -> RunConfig:
    cfg = replace(config)
    if cfg.B > problem.m:
        raise ValueError(f"minibatch size {cfg.B} exceeds m={problem.m}")
    if cfg.algorithm == "gt-sarah":
        q = cfg.q if cfg.q is not None else problem.m
        S = cfg.S
        if S is None:
            if cfg.epochs is None:
                raise ValueError("gt-sarah needs S or epochs")
            S = max(1, round(cfg.epochs * problem.m / (problem.m + 2 * q * cfg.B)))
        cfg = replace(cfg, q=q, S=S)
        cycle = q + 1
    else:
        steps = cfg.steps
        if steps is None:
            if cfg.epochs is None:
                raise ValueError(f"{cfg.algorithm} needs steps or epochs")
            steps = max(1, round(cfg.epochs * problem.m / cfg.B))
        q_eq = max(1, math.ceil(problem.m / cfg.B))
        cfg = replace(cfg, steps=steps, q=cfg.q if cfg.q is not None else q_eq)
        cycle = steps + 1
    if cfg.alpha == "auto":
        cfg = replace(cfg, alpha=max_stepsize(problem.n, cfg.B, cfg.q, lam, problem.L,
                                              variant="complexity"))
    if cfg.record_every is None:
        cfg = replace(cfg, record_every=max(1, math.ceil(cycle / 4))
                      if cfg.algorithm == "gt-sarah" else max(1, math.ceil(cycle / 40)))
    if cfg.def33_every is None:
        cfg = replace(cfg, def33_every=cfg.record_every)
    return cfg


def run(problem, weights, config: RunConfig) -> RunTrace:
    """Execute one experiment run and return its trace.

    ``weights`` is a MixingMatrix or a plain (n, n) array. All nodes start
    from the same point (config.x0, default the origin). Raises
    DivergenceError (with the partial trace attached) if the state norm
    exceeds config.divergence_norm or turns non-finite.
    """
    W = np.asarray(getattr(weights, "entries", weights), dtype=float)
    if W.shape != (problem.n, problem.n):
        raise ValueError(f"weights shape {W.shape} does not match n={problem.n}")
    lam = getattr(weights, "lam", None)
    if lam is None:
        lam, _ = spectral_quantities(W)
    cfg = _resolve(config, problem, lam)

    x0 = np.zeros(problem.p) if cfg.x0 is None else np.asarray(cfg.x0, dtype=float)
    rngs = node_streams(cfg.seed, problem.n,
                        namespace=(_ALG_STREAM_ID[cfg.algorithm], cfg.replicate))
    trace = RunTrace(algorithm=cfg.algorithm, seed=cfg.seed)
    rec = _Recorder(problem, trace, cfg.record_every, cfg.def33_every)

    if cfg.algorithm == "gt-sarah":
        state = initial_state(x0, problem.n)
        for s in range(1, cfg.S + 1):
            rec.observe(state.x, state.counters, s, 0)
            gt_sarah_outer_init(state, problem, W, cfg.alpha)
            _check_finite(state.x, cfg.divergence_norm, trace, f"(s={s}, t=1)")
            for t in range(1, cfg.q + 1):
                rec.observe(state.x, state.counters, s, t)
                gt_sarah_inner_step(state, problem, W, cfg.alpha, cfg.B, rngs)
                _check_finite(state.x, cfg.divergence_norm, trace, f"(s={s}, t={t + 1})")
            if s < cfg.S:
                gt_sarah_cycle_handoff(state, cfg.q)
        rec.observe(state.x, state.counters, cfg.S, cfg.q + 1, force=True)
        trace.final_x = state.x
        return trace

    state = baseline_state(x0, problem.n)
    if cfg.algorithm == "dsgt":
        dsgt_init(state, problem, cfg.B, rngs)
    step = dsgd_step if cfg.algorithm == "dsgd" else dsgt_step
    for k in range(cfg.steps):
        rec.observe(state.x, state.counters, 0, k)
        step(state, problem, W, cfg.alpha, cfg.B, rngs)
        _check_finite(state.x, cfg.divergence_norm, trace, f"(step {k + 1})")
    rec.observe(state.x, state.counters, 0, cfg.steps, force=True)
    trace.final_x = state.x
    return trace
