"""Core state-space types shared by every other module.

State vectors and matrices are plain ``numpy`` arrays; this module supplies
the validated containers around them (models, beliefs, trajectories), the
SPD repair used after every covariance update, and the radial-direction
observation matrix builder for Doppler-style measurements.

All containers are immutable after construction (arrays are copied and
marked read-only), so instances can be shared freely between concurrent
workers.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import DimensionMismatch, NonFinite, ZeroRange

#: Relative symmetry tolerance for covariance matrices.
COV_SYM_RTOL = 1e-9

#: Eigenvalue floor factor for SPD repair: floor = SPD_FLOOR * max(1, trace).
SPD_FLOOR = 1e-12

#: Position norm below which a Doppler observation has no radial direction.
DOPPLER_ZERO_RANGE = 1e-12


def _frozen(a, dtype=float) -> np.ndarray:
    """Copy ``a`` into a read-only float array."""
    out = np.array(a, dtype=dtype)
    out.setflags(write=False)
    return out


def as_vector(x, dim: int | None = None) -> np.ndarray:
    """Validate ``x`` as a finite 1-d vector, optionally of length ``dim``."""
    v = np.asarray(x, dtype=float)
    if v.ndim != 1:
        raise DimensionMismatch(f"expected 1-d vector, got shape {v.shape}")
    if dim is not None and v.shape[0] != dim:
        raise DimensionMismatch(f"expected length {dim}, got {v.shape[0]}")
    if not np.all(np.isfinite(v)):
        raise NonFinite("vector contains NaN/Inf")
    return v


def as_matrix(m, shape: tuple[int, int] | None = None) -> np.ndarray:
    """Validate ``m`` as a finite 2-d matrix, optionally of given shape."""
    a = np.asarray(m, dtype=float)
    if a.ndim != 2:
        raise DimensionMismatch(f"expected 2-d matrix, got shape {a.shape}")
    if shape is not None and a.shape != tuple(shape):
        raise DimensionMismatch(f"expected shape {shape}, got {a.shape}")
    if not np.all(np.isfinite(a)):
        raise NonFinite("matrix contains NaN/Inf")
    return a


def check_covariance(m, rtol: float = COV_SYM_RTOL) -> np.ndarray:
    """Validate that ``m`` is a covariance matrix.

    Requires symmetry within relative tolerance ``rtol`` and eigenvalues
    no smaller than ``-1e-9 * trace`` (positive semidefinite up to roundoff).
    """
    a = as_matrix(m)
    n, k = a.shape
    if n != k:
        raise DimensionMismatch(f"covariance must be square, got {a.shape}")
    scale = max(1.0, float(np.abs(a).max()))
    if np.abs(a - a.T).max() > rtol * scale:
        raise DimensionMismatch("covariance is not symmetric within tolerance")
    eigs = np.linalg.eigvalsh(0.5 * (a + a.T))
    if eigs.min() < -1e-9 * max(1.0, abs(float(np.trace(a)))):
        raise DimensionMismatch("covariance has a significantly negative eigenvalue")
    return a


def nearest_spd(m) -> np.ndarray:
    """Repair ``m`` into a symmetric positive-definite matrix.

    Returns ``(m + m.T) / 2`` with eigenvalues clamped at the floor
    ``1e-12 * max(1, trace)``.  Idempotent (within roundoff) on inputs that
    are already SPD.  The common case -- an input whose smallest eigenvalue
    already clears the floor -- is detected with a Cholesky probe and
    returns the symmetrized matrix without an eigendecomposition.
    """
    a = np.asarray(m, dtype=float)
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise DimensionMismatch(f"expected square matrix, got shape {a.shape}")
    if not np.all(np.isfinite(a)):
        raise NonFinite("matrix contains NaN/Inf")
    sym = 0.5 * (a + a.T)
    floor = SPD_FLOOR * max(1.0, abs(float(np.trace(sym))))
    try:
        np.linalg.cholesky(sym - floor * np.eye(sym.shape[0]))
        return sym
    except np.linalg.LinAlgError:
        pass
    eigvals, eigvecs = np.linalg.eigh(sym)
    clamped = np.maximum(eigvals, floor)
    repaired = (eigvecs * clamped) @ eigvecs.T
    return 0.5 * (repaired + repaired.T)


def build_doppler_H(z) -> np.ndarray:
    """Observation matrix for a 4-d Doppler measurement of a 6-d state.

    ``z`` is a Cartesian-transformed observation ``(x, y, z, radial
    velocity)``.  Rows 1-3 select the position block; row 4 projects the
    velocity onto the radial direction of the *observed* position, which
    stands in for the unknown true position.
    """
    v = as_vector(z, 4)
    r = float(np.linalg.norm(v[:3]))
    if r <= DOPPLER_ZERO_RANGE:
        raise ZeroRange(f"observation position norm {r:g} too small for a radial direction")
    H = np.zeros((4, 6))
    H[0, 0] = H[1, 1] = H[2, 2] = 1.0
    H[3, 3:] = v[:3] / r
    return H


@dataclass(frozen=True, eq=False)
class ObservationModel:
    """Per-step observation matrix: either fixed or built from the observation.

    ``static`` wraps a constant ``H``; ``doppler`` rebuilds the 4x6 radial
    matrix from each observation's Cartesian position.
    """

    kind: str
    H: np.ndarray | None = None

    @staticmethod
    def static(H) -> "ObservationModel":
        return ObservationModel(kind="static", H=_frozen(as_matrix(H)))

    @staticmethod
    def doppler() -> "ObservationModel":
        return ObservationModel(kind="doppler", H=None)

    @property
    def is_static(self) -> bool:
        return self.kind == "static"

    def shape(self, state_dim: int) -> tuple[int, int]:
        if self.is_static:
            return self.H.shape
        return (4, 6)

    def matrix_for(self, z) -> np.ndarray:
        """Resolve the observation matrix for one step."""
        if self.is_static:
            return self.H
        return build_doppler_H(z)


@dataclass(frozen=True, eq=False)
class StateSpaceModel:
    """Linear-Gaussian model: transition, observation map, and noise covariances.

    ``position_dim`` names how many leading state entries are positions;
    trajectory errors are Euclidean norms over exactly those coordinates.
    """

    F: np.ndarray
    observe: ObservationModel
    Q: np.ndarray
    R: np.ndarray
    position_dim: int

    def __post_init__(self):
        F = _frozen(as_matrix(self.F))
        n = F.shape[0]
        if F.shape != (n, n):
            raise DimensionMismatch("F must be square")
        m, nc = self.observe.shape(n)
        if nc != n:
            raise DimensionMismatch(f"observation matrix maps {nc}-d states, model has {n}")
        Q = _frozen(check_covariance(self.Q))
        R = _frozen(check_covariance(self.R))
        if Q.shape != (n, n):
            raise DimensionMismatch(f"Q shape {Q.shape} does not match state dim {n}")
        if R.shape != (m, m):
            raise DimensionMismatch(f"R shape {R.shape} does not match obs dim {m}")
        if not 0 < self.position_dim <= n:
            raise DimensionMismatch("position_dim out of range")
        object.__setattr__(self, "F", F)
        object.__setattr__(self, "Q", Q)
        object.__setattr__(self, "R", R)

    @property
    def state_dim(self) -> int:
        return self.F.shape[0]

    @property
    def obs_dim(self) -> int:
        return self.observe.shape(self.state_dim)[0]

    def with_noise(self, Q, R) -> "StateSpaceModel":
        """Same dynamics and observation map, new noise covariances."""
        return StateSpaceModel(F=self.F, observe=self.observe, Q=Q, R=R,
                               position_dim=self.position_dim)


@dataclass(frozen=True, eq=False)
class BeliefState:
    """Gaussian belief over the state at one time step."""

    mean: np.ndarray
    cov: np.ndarray
    time_index: int = 0

    def __post_init__(self):
        mean = _frozen(as_vector(self.mean))
        cov = _frozen(as_matrix(self.cov, (mean.shape[0], mean.shape[0])))
        if self.time_index < 0:
            raise DimensionMismatch("time_index must be >= 0")
        object.__setattr__(self, "mean", mean)
        object.__setattr__(self, "cov", cov)

    @property
    def dim(self) -> int:
        return self.mean.shape[0]


@dataclass(frozen=True)
class TrajectoryMeta:
    """Provenance attached to each trajectory."""

    benchmark: str = ""
    traj_id: int = 0
    seed: int | None = None


@dataclass(frozen=True, eq=False)
class Trajectory:
    """Ground-truth states (optional) plus observations for one target."""

    observations: np.ndarray
    states: np.ndarray | None = None
    meta: TrajectoryMeta = field(default_factory=TrajectoryMeta)

    def __post_init__(self):
        obs = _frozen(np.atleast_2d(np.asarray(self.observations, dtype=float)))
        if not np.all(np.isfinite(obs)):
            raise NonFinite("observations contain NaN/Inf")
        if len(obs) < 2:
            raise DimensionMismatch("trajectory must have at least 2 steps")
        object.__setattr__(self, "observations", obs)
        if self.states is not None:
            st = _frozen(np.atleast_2d(np.asarray(self.states, dtype=float)))
            if not np.all(np.isfinite(st)):
                raise NonFinite("states contain NaN/Inf")
            if len(st) != len(obs):
                raise DimensionMismatch(
                    f"states ({len(st)}) and observations ({len(obs)}) differ in length")
            object.__setattr__(self, "states", st)

    def __len__(self) -> int:
        return len(self.observations)

    @property
    def has_states(self) -> bool:
        return self.states is not None


def constant_velocity_F(dim: int) -> np.ndarray:
    """Block transition [[I, I], [0, I]] for position/velocity pairs."""
    if dim % 2:
        raise DimensionMismatch("constant-velocity state dim must be even")
    half = dim // 2
    F = np.eye(dim)
    F[:half, half:] = np.eye(half)
    return F


def doppler_model(Q=None, R=None) -> StateSpaceModel:
    """6-d position/velocity state, 4-d Cartesian+radial-velocity observation."""
    return StateSpaceModel(
        F=constant_velocity_F(6),
        observe=ObservationModel.doppler(),
        Q=np.eye(6) if Q is None else Q,
        R=np.eye(4) if R is None else R,
        position_dim=3,
    )


def lidar_model(Q=None, R=None) -> StateSpaceModel:
    """4-d position/velocity state, 2-d position observation."""
    H = np.zeros((2, 4))
    H[0, 0] = H[1, 1] = 1.0
    return StateSpaceModel(
        F=constant_velocity_F(4),
        observe=ObservationModel.static(H),
        Q=np.eye(4) if Q is None else Q,
        R=np.eye(2) if R is None else R,
        position_dim=2,
    )


def pedestrian_model(Q=None, R=None) -> StateSpaceModel:
    """6-d state (x, y, w, h, vx, vy), 4-d observation (x, y, w, h).

    Velocity feeds position only; the size pair is carried as constant.
    """
    F = np.eye(6)
    F[0, 4] = F[1, 5] = 1.0
    H = np.zeros((4, 6))
    for i in range(4):
        H[i, i] = 1.0
    return StateSpaceModel(
        F=F,
        observe=ObservationModel.static(H),
        Q=np.eye(6) if Q is None else Q,
        R=np.eye(4) if R is None else R,
        position_dim=2,
    )


MODEL_FACTORIES = {
    "doppler": doppler_model,
    "lidar": lidar_model,
    "pedestrian": pedestrian_model,
}


def model_for_benchmark(benchmark: str, Q=None, R=None) -> StateSpaceModel:
    """Model family for a benchmark label (e.g. ``"toy"`` -> Doppler)."""
    label = benchmark.lower()
    if label in ("toy", "close", "const_v", "const_a", "free", "doppler"):
        return doppler_model(Q, R)
    if label in ("lidar", "nclt"):
        return lidar_model(Q, R)
    if label in ("pedestrian", "mot"):
        return pedestrian_model(Q, R)
    raise KeyError(f"no model family for benchmark {benchmark!r}")
