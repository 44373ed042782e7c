"""Agent dynamics, dynamic couplings, and bounded noise.

Both shipped models are driftless; the omni-directional robot maps wheel
angular velocities through its geometry matrix and a planar rotation.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Mapping, Optional, Sequence

import numpy as np

from .errors import DimensionMismatchError
from .formulas import StateLayout


@dataclass(frozen=True)
class SingleIntegrator:
    """x' = u with identity actuation."""

    n: int = 2

    @property
    def state_dim(self) -> int:
        return self.n

    @property
    def input_dim(self) -> int:
        return self.n

    def drift(self, x: np.ndarray) -> np.ndarray:
        self._check(x)
        return np.zeros(self.n)

    def actuation(self, x: np.ndarray) -> np.ndarray:
        self._check(x)
        return np.eye(self.n)

    def _check(self, x):
        if x.shape != (self.n,):
            raise DimensionMismatchError(f"expected state of dim {self.n}, got {x.shape}")


@dataclass(frozen=True)
class OmniRobot:
    """Three-wheeled omni-directional robot: planar position plus heading.

    Inputs are the angular velocities of the three wheels; the body maps
    them through Rot(heading) * inv(B^T) * wheel_radius, where B encodes the
    wheel geometry for a body of the given radius.
    """

    wheel_radius: float = 0.02
    body_radius: float = 0.2

    state_dim = 3
    input_dim = 3

    def geometry(self) -> np.ndarray:
        c, s = math.cos(math.pi / 6), math.sin(math.pi / 6)
        L = self.body_radius
        return np.array([
            [0.0, c, -c],
            [-1.0, s, s],
            [L, L, L],
        ])

    def drift(self, x: np.ndarray) -> np.ndarray:
        self._check(x)
        return np.zeros(3)

    def actuation(self, x: np.ndarray) -> np.ndarray:
        self._check(x)
        c, s = math.cos(x[2]), math.sin(x[2])
        rot = np.array([[c, -s, 0.0], [s, c, 0.0], [0.0, 0.0, 1.0]])
        return rot @ np.linalg.inv(self.geometry().T) * self.wheel_radius

    def _check(self, x):
        if x.shape != (3,):
            raise DimensionMismatchError(f"expected state of dim 3, got {x.shape}")


DynamicsModel = SingleIntegrator | OmniRobot


def drift(model: DynamicsModel, x: np.ndarray) -> np.ndarray:
    return model.drift(np.asarray(x, dtype=float))


def actuation(model: DynamicsModel, x: np.ndarray) -> np.ndarray:
    return model.actuation(np.asarray(x, dtype=float))


# ---------------------------------------------------------------------------
# Couplings.
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class NoCoupling:
    def rate(self, x: np.ndarray, layout: StateLayout, agent: int) -> np.ndarray:
        return np.zeros(layout.dim(agent))


@dataclass(frozen=True)
class SaturatedConsensus:
    """gain * sum of neighbor state differences, norm-clamped to the bound."""

    gain: float
    bound: float
    edges: tuple[tuple[int, int], ...]

    def rate(self, x: np.ndarray, layout: StateLayout, agent: int) -> np.ndarray:
        out = np.zeros(layout.dim(agent))
        xi = x[layout.slice_of(agent)]
        for a, b in self.edges:
            other = b if a == agent else (a if b == agent else None)
            if other is None:
                continue
            xj = x[layout.slice_of(other)]
            n = min(xi.size, xj.size)
            out[:n] += self.gain * (xj[:n] - xi[:n])
        norm = float(np.linalg.norm(out))
        if norm > self.bound:
            out *= self.bound / norm
        return out


CouplingModel = NoCoupling | SaturatedConsensus


def coupling(model: CouplingModel, x: np.ndarray, layout: StateLayout, agent: int) -> np.ndarray:
    """Coupling state-rate for one agent given the stacked state."""
    return model.rate(np.asarray(x, dtype=float), layout, agent)


# ---------------------------------------------------------------------------
# Noise.
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class NoiseModel:
    """Per-agent uniform box noise, deterministic in (seed, step, agent).

    The draw is held constant across one integration step, which keeps the
    disturbance piecewise-continuous in time.
    """

    half_widths: Mapping[int, tuple[float, ...]] = field(default_factory=dict)
    seed: int = 0

    def sample(self, step_index: int, agent: int, dim: Optional[int] = None) -> np.ndarray:
        w = np.asarray(self.half_widths.get(agent, ()), dtype=float)
        if dim is None:
            dim = w.size
        if w.size not in (0, dim):
            raise DimensionMismatchError(
                f"noise box for agent {agent} has dim {w.size}, state has {dim}"
            )
        if w.size == 0 or not np.any(w):
            return np.zeros(dim)
        rng = np.random.default_rng((self.seed, step_index, agent))
        return rng.uniform(-w, w)


def sample_noise(model: NoiseModel, step_index: int, agent: int, dim: Optional[int] = None) -> np.ndarray:
    return model.sample(step_index, agent, dim)
