"""Monotone block-wise gradient descent with backtracking."""

import logging
import math
from typing import Callable, Dict, List, Tuple

import numpy as np
from pydantic import BaseModel, ConfigDict, Field

from ..errors import FitDivergedError, UVFaceError
from ..models.fitting import FitConfig, Termination

logger = logging.getLogger(__name__)

Blocks = Dict[str, np.ndarray]
Objective = Callable[[Blocks], Tuple[float, Blocks]]


class DescentResult(BaseModel):
    """Final parameter blocks and the accepted-loss trace."""

    model_config = ConfigDict(arbitrary_types_allowed=True)

    params: Dict[str, np.ndarray]
    trace: List[float] = Field(default_factory=list)
    termination: Termination = "budget"
    iterations: int = 0
    rejected_steps: int = 0


class GradientDescent:
    """
    Gradient descent where every parameter block keeps its own step size.

    Each iteration visits the blocks in order. A block's trial step is halved
    until the loss decreases (at most ``max_halvings`` times) and grown by
    ``step_growth`` once accepted, so accepted losses never increase. Trials
    whose objective raises or returns a non-finite value count as failures.
    The loop converges after ``stall_patience`` consecutive iterations whose
    relative improvement is at most ``relative_tolerance``.
    """

    def __init__(self, cfg: FitConfig):
        self.cfg = cfg

    def _evaluate(self, objective: Objective, params: Blocks) -> Tuple[float, Blocks]:
        try:
            value, grads = objective(params)
        except (UVFaceError, ValueError, FloatingPointError) as exc:
            logger.debug("trial rejected: %s", exc)
            return math.inf, {}
        return float(value), grads

    def minimize(
        self, objective: Objective, params: Blocks, scales: Dict[str, float]
    ) -> DescentResult:
        """
        Minimise objective over the blocks named in scales.

        Args:
            objective: Maps blocks to (loss, gradient per block)
            params: Initial value of every block the objective reads
            scales: Step multiplier per block to optimise

        Returns:
            DescentResult with the final blocks and trace
        """
        cfg = self.cfg
        current = {k: np.array(v, dtype=np.float64) for k, v in params.items()}
        value, grads = self._evaluate(objective, current)
        if not math.isfinite(value):
            raise FitDivergedError("objective is not finite at the initial point", [])
        trace = [value]
        active = [
            name for name, scale in scales.items() if scale > 0 and current[name].size
        ]
        if not active:
            return DescentResult(
                params=current, trace=trace, termination="no_parameters"
            )

        steps = {name: cfg.step_size * scales[name] for name in active}
        rejected = 0
        failing = 0
        stalled = 0
        termination: Termination = "budget"
        iteration = 0
        while iteration < cfg.max_iterations:
            iteration += 1
            if value <= cfg.tolerance:
                termination = "converged"
                iteration -= 1
                break
            start = value
            moved = False
            tried = False
            all_failed = True
            for name in active:
                grad = grads.get(name)
                if grad is None or not np.any(grad):
                    continue
                for _ in range(cfg.max_halvings + 1):
                    tried = True
                    trial = dict(current)
                    trial[name] = current[name] - steps[name] * grad
                    trial_value, trial_grads = self._evaluate(objective, trial)
                    if math.isfinite(trial_value):
                        all_failed = False
                    if trial_value < value:
                        current, value, grads = trial, trial_value, trial_grads
                        steps[name] *= cfg.step_growth
                        moved = True
                        break
                    rejected += 1
                    steps[name] *= 0.5
            trace.append(value)

            if not moved:
                if not tried:
                    termination = "converged"
                    break
                failing = failing + 1 if all_failed else 0
                if failing >= cfg.divergence_patience:
                    message = f"every trial failed for {failing} consecutive iterations"
                    raise FitDivergedError(message, trace)
                if not all_failed:
                    termination = "step_underflow"
                    break
                continue
            failing = 0
            if start - value > cfg.relative_tolerance * abs(start):
                stalled = 0
                continue
            stalled += 1
            if stalled >= cfg.stall_patience:
                termination = "converged"
                break
        logger.debug(
            "descent finished after %d iterations (%s), loss %.6g",
            iteration,
            termination,
            value,
        )
        return DescentResult(
            params=current,
            trace=trace,
            termination=termination,
            iterations=iteration,
            rejected_steps=rejected,
        )
