"""Decoders mapping parameter vectors to shapes and albedos."""

from typing import Optional, Protocol, runtime_checkable

import numpy as np

from ..errors import ShapeMismatchError
from ..models.morphable import LinearModel


@runtime_checkable
class Decoder(Protocol):
    """Parameter vector to flat output vector, with a matching backward pass."""

    @property
    def param_dim(self) -> int:
        ...

    def decode(self, params: np.ndarray) -> np.ndarray:
        ...

    def decode_backward(self, params: np.ndarray, upstream: np.ndarray) -> np.ndarray:
        ...


def linear_decode(model: LinearModel, params: np.ndarray) -> np.ndarray:
    """mean + bases @ params."""
    return model.decode(params)


def truncate(model: LinearModel, k: int) -> LinearModel:
    """The same model restricted to its first k parameters."""
    return model.truncate(k)


class TwoLayerDecoder:
    """
    Small nonlinear decoder: mean + W2 tanh(W1 p + b1) + b2.

    Weights are fixed at construction; nothing here is trained.
    """

    def __init__(
        self,
        w1: np.ndarray,
        b1: np.ndarray,
        w2: np.ndarray,
        b2: np.ndarray,
        mean: Optional[np.ndarray] = None,
    ):
        self.w1 = np.asarray(w1, dtype=np.float64)
        self.b1 = np.asarray(b1, dtype=np.float64)
        self.w2 = np.asarray(w2, dtype=np.float64)
        self.b2 = np.asarray(b2, dtype=np.float64)
        hidden, _ = self.w1.shape
        if self.b1.shape != (hidden,) or self.w2.shape[1] != hidden:
            raise ShapeMismatchError("hidden layer sizes do not agree")
        if self.b2.shape != (self.w2.shape[0],):
            raise ShapeMismatchError("output bias does not match the output layer")
        if mean is None:
            mean = np.zeros(self.w2.shape[0])
        self.mean = np.asarray(mean, dtype=np.float64)

    @classmethod
    def random(
        cls,
        param_dim: int,
        hidden: int,
        output_dim: int,
        seed: int = 0,
        scale: float = 0.1,
        mean: Optional[np.ndarray] = None,
    ) -> "TwoLayerDecoder":
        rng = np.random.default_rng(seed)
        return cls(
            w1=rng.normal(0.0, 1.0 / np.sqrt(param_dim), (hidden, param_dim)),
            b1=rng.normal(0.0, 0.1, hidden),
            w2=rng.normal(0.0, scale / np.sqrt(hidden), (output_dim, hidden)),
            b2=np.zeros(output_dim),
            mean=mean,
        )

    @property
    def param_dim(self) -> int:
        return int(self.w1.shape[1])

    def _check(self, params: np.ndarray) -> np.ndarray:
        params = np.asarray(params, dtype=np.float64)
        if params.shape != (self.param_dim,):
            raise ShapeMismatchError(
                f"expected {self.param_dim} parameters, got shape {params.shape}"
            )
        return params

    def decode(self, params: np.ndarray) -> np.ndarray:
        hidden = np.tanh(self.w1 @ self._check(params) + self.b1)
        return self.mean + self.w2 @ hidden + self.b2

    def decode_backward(self, params: np.ndarray, upstream: np.ndarray) -> np.ndarray:
        hidden = np.tanh(self.w1 @ self._check(params) + self.b1)
        grad_hidden = self.w2.T @ np.asarray(upstream, dtype=np.float64).reshape(-1)
        return self.w1.T @ (grad_hidden * (1.0 - hidden * hidden))
