"""Fitting configuration and result models."""

from typing import Any, Dict, List, Literal, Optional

from pydantic import BaseModel, Field

from .camera import ProjectionParams
from .lighting import SHLighting
from .losses import LossWeights

Termination = Literal["converged", "budget", "step_underflow", "no_parameters"]


class FitConfig(BaseModel):
    """Settings of the gradient-descent analysis-by-synthesis loop."""

    step_size: float = Field(1e-2, gt=0, description="Initial step size")
    max_iterations: int = Field(2000, gt=0, description="Iteration budget")
    tolerance: float = Field(
        1e-12, ge=0, description="Stop when the loss drops below this value"
    )
    relative_tolerance: float = Field(
        1e-12, ge=0, description="Relative improvement counted as no progress"
    )
    stall_patience: int = Field(
        3, gt=0, description="Consecutive no-progress iterations before stopping"
    )
    max_halvings: int = Field(20, ge=0, description="Backtracking halvings per step")
    step_growth: float = Field(
        2.0, ge=1.0, description="Step multiplier after an accepted step"
    )
    divergence_patience: int = Field(
        5, gt=0, description="Consecutive iterations with only failed trials tolerated"
    )
    fit_projection: bool = Field(True, description="Update m")
    fit_lighting: bool = Field(True, description="Update L")
    fit_shape: bool = Field(True, description="Update f_S")
    fit_albedo: bool = Field(True, description="Update f_A")
    staged: bool = Field(
        True, description="Landmarks+m, then L+f_A, then all enabled blocks"
    )
    block_scales: Dict[str, float] = Field(
        default_factory=lambda: {
            "f": 1.0,
            "angles": 1.0,
            "t2d": 1.0,
            "light": 1.0,
            "f_S": 1.0,
            "f_A": 1.0,
        },
        description="Per-block step multipliers",
    )
    auto_scale: bool = Field(
        True, description="Divide angle and f_S steps by f^2 at the start of a fit"
    )
    normal_weight: float = Field(
        0.1, ge=0, description="Weight of the (1 - n.n') term in shape fits"
    )
    texture_space: Literal["uv", "image"] = Field(
        "uv", description="Where the texture fit compares against the target"
    )
    weights: LossWeights = Field(default_factory=LossWeights)

    def scale_for(self, block: str) -> float:
        return float(self.block_scales.get(block, 1.0))


class FitResult(BaseModel):
    """Parameters recovered by a fit and how the loop ended."""

    projection: Optional[ProjectionParams] = None
    light: Optional[SHLighting] = None
    f_S: List[float] = Field(default_factory=list)
    f_A: List[float] = Field(default_factory=list)
    trace: List[float] = Field(default_factory=list, description="Accepted losses")
    termination: Termination = "budget"
    iterations: int = 0
    rejected_steps: int = 0
    breakdown: Dict[str, float] = Field(default_factory=dict)
    nme: Optional[float] = None

    @property
    def final_loss(self) -> float:
        return self.trace[-1] if self.trace else float("nan")

    @property
    def is_monotone(self) -> bool:
        """Check the accepted-loss sequence never increases."""
        return all(b <= a for a, b in zip(self.trace, self.trace[1:]))

    def to_report(self) -> Dict[str, Any]:
        """Convert to a JSON-serialisable report."""
        return {
            "projection": (
                dict(zip(ProjectionParams.ORDER, self.projection.to_vector().tolist()))
                if self.projection
                else None
            ),
            "light": self.light.to_vector().tolist() if self.light else None,
            "f_S": list(self.f_S),
            "f_A": list(self.f_A),
            "final_loss": self.final_loss,
            "iterations": self.iterations,
            "rejected_steps": self.rejected_steps,
            "termination": self.termination,
            "breakdown": dict(self.breakdown),
            "nme": self.nme,
            "trace": list(self.trace),
        }


class ParamFile(BaseModel):
    """The parameter tuple (m, L, f_S, f_A) as stored in a parameter file."""

    projection: ProjectionParams
    light: SHLighting
    f_S: List[float] = Field(default_factory=list)
    f_A: List[float] = Field(default_factory=list)

    @classmethod
    def from_result(cls, result: FitResult) -> "ParamFile":
        if result.projection is None or result.light is None:
            raise ValueError("fit result carries no projection or lighting")
        return cls(
            projection=result.projection,
            light=result.light,
            f_S=list(result.f_S),
            f_A=list(result.f_A),
        )
