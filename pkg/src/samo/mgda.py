"""Multiple-gradient descent on a differentiable model.

The descent direction is the negated minimum-norm convex combination of the
objective gradients. For two objectives the simplex-constrained quadratic
subproblem has a closed form; for more it is solved with an away-step
Frank-Wolfe iteration, which converges linearly on the simplex and reaches
the tight duality-gap tolerance cheaply for small objective counts.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np

from .core import (
    BoxBounds,
    ConfigurationError,
    ParetoApproximation,
    SamoError,
    non_dominated_filter,
)
from .sampling import latin_hypercube

logger = logging.getLogger(__name__)

_FW_GAP_TOL = 1e-10
_FW_MAX_ITER = 10_000
_SIMPLEX_TOL = 1e-10


@dataclass(frozen=True)
class DescentStep:
    """Common descent direction d = -J^T w with its simplex weights."""

    direction: np.ndarray
    weights: np.ndarray
    norm: float

    def __post_init__(self) -> None:
        w = np.asarray(self.weights, dtype=float)
        if np.any(w < -_SIMPLEX_TOL) or abs(w.sum() - 1.0) > _SIMPLEX_TOL:
            raise SamoError("descent weights must lie on the unit simplex")


@dataclass(frozen=True)
class MgdaConfig:
    learning_rate: float = 0.05
    max_iterations: int = 10_000
    tolerance: float = 1e-6
    n_starts: int = 100
    backtracking: bool = False
    seed: int = 0

    def __post_init__(self) -> None:
        if self.learning_rate <= 0.0:
            raise ConfigurationError("learning_rate must be strictly positive")
        if self.tolerance <= 0.0:
            raise ConfigurationError("tolerance must be strictly positive")
        if self.max_iterations < 1 or self.n_starts < 1:
            raise ConfigurationError("max_iterations and n_starts must be positive")


def _min_norm_weights_fw(G: np.ndarray, objective_trace=None) -> np.ndarray:
    """Minimize w^T G w over the unit simplex by away-step Frank-Wolfe."""
    n = G.shape[0]
    w = np.full(n, 1.0 / n)
    for _ in range(_FW_MAX_ITER):
        if objective_trace is not None:
            objective_trace.append(float(w @ G @ w))
        grad = 2.0 * G @ w
        toward = int(np.argmin(grad))
        gap = float(grad @ w - grad[toward])
        if gap < _FW_GAP_TOL:
            break
        d_fw = -w.copy()
        d_fw[toward] += 1.0
        active = np.flatnonzero(w > 0.0)
        away = active[int(np.argmax(grad[active]))]
        d_aw = w.copy()
        d_aw[away] -= 1.0
        if grad @ d_fw <= grad @ d_aw:
            d, gamma_max = d_fw, 1.0
        else:
            d = d_aw
            gamma_max = w[away] / (1.0 - w[away]) if w[away] < 1.0 else 1.0
        curvature = 2.0 * float(d @ G @ d)
        if curvature <= 0.0:
            gamma = gamma_max
        else:
            gamma = min(max(-float(grad @ d) / curvature, 0.0), gamma_max)
        if gamma <= 0.0:
            break
        w = np.clip(w + gamma * d, 0.0, None)
        w /= w.sum()
    return w


def common_descent_direction(jacobian: np.ndarray) -> DescentStep:
    """Solve the simplex-constrained quadratic subproblem for the weights
    minimizing || sum_k w_k grad_k ||^2 and return the descent step.

    K = 1 reduces to plain gradient descent; K = 2 uses the closed form
    w* = clip(<g2 - g1, g2> / ||g1 - g2||^2, 0, 1); larger K uses
    Frank-Wolfe. Zero gradient rows are legitimate (that objective is
    already critical and the weights may concentrate there with d = 0).
    """
    J = np.atleast_2d(np.asarray(jacobian, dtype=float))
    if not np.all(np.isfinite(J)):
        raise SamoError("jacobian contains non-finite entries")
    n_obj = J.shape[0]
    if n_obj == 1:
        w = np.array([1.0])
    elif n_obj == 2:
        g1, g2 = J[0], J[1]
        diff = g1 - g2
        denom = float(diff @ diff)
        if denom == 0.0:
            w = np.array([0.5, 0.5])
        else:
            w1 = min(max(float((g2 - g1) @ g2) / denom, 0.0), 1.0)
            w = np.array([w1, 1.0 - w1])
    else:
        w = _min_norm_weights_fw(J @ J.T)
    direction = -(w @ J)
    return DescentStep(direction=direction, weights=w, norm=float(np.linalg.norm(direction)))


def kkt_residual(jacobian: np.ndarray) -> float:
    """Minimum over the simplex of || sum_k a_k grad_k ||; zero iff the
    point is critical for the model."""
    return common_descent_direction(jacobian).norm


@dataclass(frozen=True)
class MgdaResult:
    x: np.ndarray
    converged: bool
    iterations: int
    trace: np.ndarray  # columns: iteration, ||d||, objectives...


def mgda_run(model, x0: np.ndarray, bounds: BoxBounds, cfg: MgdaConfig) -> MgdaResult:
    """Iterate x <- clamp(x + eta * d) until ||d|| drops below the
    criticality tolerance or the iteration budget is exhausted.

    `model` is anything with predict(x) and input_jacobian(x). The returned
    trace has one row per iteration: (iteration, ||d||, objectives).
    """
    x = np.asarray(x0, dtype=float).copy()
    if not bounds.contains(x):
        raise ConfigurationError("starting point must lie within bounds")
    eta = cfg.learning_rate
    rows = []
    converged = False
    iteration = 0
    for iteration in range(1, cfg.max_iterations + 1):
        jac = np.atleast_2d(model.input_jacobian(x))
        if not np.all(np.isfinite(jac)):
            raise SamoError(
                f"non-finite gradient at iteration {iteration}; trace length {len(rows)}"
            )
        step = common_descent_direction(jac)
        objectives = np.asarray(model.predict(x), dtype=float)
        rows.append([float(iteration), step.norm, *objectives.tolist()])
        if step.norm < cfg.tolerance:
            converged = True
            break
        candidate = np.clip(x + eta * step.direction, bounds.lower, bounds.upper)
        if cfg.backtracking:
            # halve the step until the weighted objective decreases
            weighted = float(step.weights @ objectives)
            local_eta = eta
            for _ in range(30):
                cand_val = float(step.weights @ np.asarray(model.predict(candidate), dtype=float))
                if cand_val <= weighted or local_eta < 1e-12:
                    break
                local_eta *= 0.5
                candidate = np.clip(x + local_eta * step.direction, bounds.lower, bounds.upper)
        x = candidate
    return MgdaResult(
        x=x,
        converged=converged,
        iterations=iteration,
        trace=np.array(rows, dtype=float),
    )


def multistart_mgda(
    model, bounds: BoxBounds, cfg: MgdaConfig, trace_writer=None
) -> ParetoApproximation:
    """Descend from Latin-hypercube starting points and keep the
    non-dominated converged endpoints. `trace_writer(start_index, trace)`
    receives every start's iteration trace when given."""
    starts = latin_hypercube(cfg.n_starts, bounds, cfg.seed).matrix()
    points = []
    dropped = 0
    for start_index, x0 in enumerate(starts):
        result = mgda_run(model, x0, bounds, cfg)
        if trace_writer is not None:
            trace_writer(start_index, result.trace)
        if result.converged:
            points.append(result.x)
        else:
            dropped += 1
    if dropped:
        logger.info("multistart: %d of %d starts did not converge", dropped, cfg.n_starts)
    if not points:
        raise SamoError("no start converged; consider more iterations or a smaller step")
    X = np.array(points)
    Y = np.array([np.asarray(model.predict(x), dtype=float) for x in X])
    keep = non_dominated_filter(Y)
    return ParetoApproximation.from_arrays(X[keep], Y[keep])
