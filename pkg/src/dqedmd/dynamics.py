"""Benchmark systems, RK4 discretization and snapshot assembly."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

__all__ = [
    "SystemModel",
    "SimConfig",
    "TrajectorySet",
    "PENDULUM",
    "VAN_DER_POL",
    "SYSTEMS",
    "LINEAR_TEST_MATRIX",
    "get_system",
    "known_system_names",
    "linear_map_model",
    "linear_flow_model",
    "vector_field",
    "rk4_step",
    "initial_conditions",
    "simulate_trajectories",
    "build_snapshot_pairs",
]


@dataclass(frozen=True)
class SystemModel:
    """A dynamical system, continuous (``vector_field``) or discrete (``step_map``).

    Continuous systems are advanced with RK4; discrete ones apply their map
    directly and ignore ``dt``.
    """

    name: str
    vector_field: Optional[Callable[[np.ndarray], np.ndarray]] = None
    step_map: Optional[Callable[[np.ndarray], np.ndarray]] = None
    n: int = 2

    def __post_init__(self):
        if (self.vector_field is None) == (self.step_map is None):
            raise ValueError("give exactly one of vector_field or step_map")

    @property
    def is_discrete(self) -> bool:
        return self.step_map is not None


def _pendulum(x):
    return np.stack([x[1], 0.01 * x[1] - np.sin(x[0])])


def _van_der_pol(x):
    return np.stack([x[1], (1 - x[0] ** 2) * x[1] - x[0]])


PENDULUM = SystemModel("pendulum", vector_field=_pendulum)
VAN_DER_POL = SystemModel("vanderpol", vector_field=_van_der_pol)

# Public systems (CLI choices). Test-only models are reachable via get_system.
SYSTEMS = {m.name: m for m in (PENDULUM, VAN_DER_POL)}

LINEAR_TEST_MATRIX = np.array([[0.9, 0.1], [0.0, 0.8]])


def linear_map_model(A, name="linear") -> SystemModel:
    """Discrete ``x_{t+1} = A x_t``; used by exact-recovery tests."""
    A = np.array(A, dtype=float)
    return SystemModel(name, step_map=lambda x: A @ x, n=A.shape[0])


def linear_flow_model(A, name="linear_flow") -> SystemModel:
    """Continuous ``dx/dt = A x``; used by integrator tests."""
    A = np.array(A, dtype=float)
    return SystemModel(name, vector_field=lambda x: A @ x, n=A.shape[0])


_HIDDEN = {"linear": lambda: linear_map_model(LINEAR_TEST_MATRIX)}


def get_system(name: str) -> SystemModel:
    if name in SYSTEMS:
        return SYSTEMS[name]
    if name in _HIDDEN:
        return _HIDDEN[name]()
    raise ValueError(
        f"unknown system {name!r}; choose from {sorted(SYSTEMS)}")


def known_system_names() -> list[str]:
    return sorted(SYSTEMS) + sorted(_HIDDEN)


def vector_field(model: SystemModel, x) -> np.ndarray:
    x = np.asarray(x, dtype=float)
    if x.shape[0] != model.n:
        raise ValueError(f"state must have {model.n} components")
    if model.vector_field is None:
        raise ValueError(f"{model.name} is a discrete map without a vector field")
    return model.vector_field(x)


def rk4_step(model: SystemModel, x, dt: float) -> np.ndarray:
    """One classical RK4 step. ``x`` may be ``(n,)`` or ``(n, k)`` for ``k`` states."""
    if dt <= 0:
        raise ValueError("dt must be positive")
    f = model.vector_field
    x = np.asarray(x, dtype=float)
    k1 = f(x)
    k2 = f(x + 0.5 * dt * k1)
    k3 = f(x + 0.5 * dt * k2)
    k4 = f(x + dt * k3)
    return x + (dt / 6.0) * (k1 + 2 * k2 + 2 * k3 + k4)


def _advance(model: SystemModel, x, dt):
    if model.is_discrete:
        return model.step_map(x)
    return rk4_step(model, x, dt)


@dataclass(frozen=True)
class SimConfig:
    dt: float = 0.01
    steps_per_trajectory: int = 1000
    n_trajectories: int = 200
    init_box: tuple = ((-1.0, 1.0), (-1.0, 1.0))
    seed: int = 0

    def __post_init__(self):
        if not self.dt > 0:
            raise ValueError("dt must be positive")
        if self.steps_per_trajectory < 1:
            raise ValueError("steps_per_trajectory must be >= 1")
        if self.n_trajectories < 1:
            raise ValueError("n_trajectories must be >= 1")
        box = np.asarray(self.init_box, dtype=float)
        if box.ndim != 2 or box.shape[1] != 2 or np.any(box[:, 1] <= box[:, 0]):
            raise ValueError("init_box must be a list of (lo, hi) with lo < hi")
        object.__setattr__(self, "init_box",
                           tuple(tuple(float(v) for v in row) for row in box))


@dataclass
class TrajectorySet:
    """``states[m, t]`` is ``x_t`` of trajectory ``m``; shape ``(M, T + 1, n)``."""

    states: np.ndarray
    dt: float = 0.01
    system: str = ""
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        self.states = np.asarray(self.states, dtype=float)
        if self.states.ndim != 3 or self.states.shape[0] < 1 or self.states.shape[1] < 2:
            raise ValueError(
                "states must have shape (M, T + 1, n) with M >= 1 and T >= 1")

    @property
    def n_trajectories(self) -> int:
        return self.states.shape[0]

    @property
    def steps(self) -> int:
        return self.states.shape[1] - 1

    @property
    def n(self) -> int:
        return self.states.shape[2]

    def subset(self, index) -> "TrajectorySet":
        return TrajectorySet(self.states[np.asarray(index)], self.dt,
                             self.system, dict(self.meta))


def initial_conditions(cfg: SimConfig) -> np.ndarray:
    """One uniform draw on the box per trajectory, each from its own stream."""
    box = np.asarray(cfg.init_box)
    x0 = np.empty((cfg.n_trajectories, box.shape[0]))
    for m in range(cfg.n_trajectories):
        rng = np.random.default_rng([cfg.seed, m])
        x0[m] = rng.uniform(box[:, 0], box[:, 1])
    return x0


def simulate_trajectories(model: SystemModel, cfg: SimConfig) -> TrajectorySet:
    """Simulate ``M`` trajectories of ``T`` steps from random initial states."""
    x0 = initial_conditions(cfg)
    if x0.shape[1] != model.n:
        raise ValueError(
            f"init_box has {x0.shape[1]} dimensions, {model.name} needs {model.n}")
    T = cfg.steps_per_trajectory
    states = np.empty((cfg.n_trajectories, T + 1, model.n))
    x = x0.T.copy()
    states[:, 0] = x0
    for t in range(1, T + 1):
        x = _advance(model, x, cfg.dt)
        states[:, t] = x.T
    return TrajectorySet(states, cfg.dt, model.name)


def build_snapshot_pairs(trajectories) -> tuple[np.ndarray, np.ndarray]:
    """Concatenate per-trajectory pairs into ``X, X'`` of shape ``(n, M*T)``.

    Accepts a :class:`TrajectorySet` or a raw ``(M, T + 1, n)`` array. No
    pair spans two trajectories.
    """
    states = getattr(trajectories, "states", trajectories)
    states = np.asarray(states, dtype=float)
    if states.ndim != 3 or states.shape[0] == 0 or states.shape[1] < 2:
        raise ValueError("need at least one trajectory with two states")
    n = states.shape[2]
    X = states[:, :-1].reshape(-1, n).T
    Xn = states[:, 1:].reshape(-1, n).T
    return np.ascontiguousarray(X), np.ascontiguousarray(Xn)
