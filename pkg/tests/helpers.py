"""Shared construction helpers for the test suite."""

import numpy as np

from kestrel.filters import FilterContext
from kestrel.statespace import (
    BeliefState,
    doppler_model,
    lidar_model,
    pedestrian_model,
)

FAMILIES = ("doppler", "lidar", "pedestrian")

_FACTORY = {
    "doppler": doppler_model,
    "lidar": lidar_model,
    "pedestrian": pedestrian_model,
}


def random_spd(rng, n, diag=0.5, spread=0.3):
    """Well-conditioned random SPD matrix of side n."""
    A = rng.normal(0.0, spread, size=(n, n))
    return A @ A.T + diag * np.eye(n)


def random_model(rng, family="lidar"):
    """Model of the given family with random well-conditioned noise."""
    factory = _FACTORY[family]
    probe = factory()
    n, m = probe.state_dim, probe.obs_dim
    return factory(Q=random_spd(rng, n, diag=0.3), R=random_spd(rng, m, diag=0.4))


def random_context(rng, family="lidar"):
    """Random plausible FilterContext for fidelity and equivalence sweeps."""
    model = random_model(rng, family)
    n, m = model.state_dim, model.obs_dim
    mean = rng.normal(0.0, 2.0, size=n)
    if family == "doppler":
        # keep the observed position well away from the origin
        mean[:3] += np.array([6.0, -4.0, 3.0])
    P = random_spd(rng, n)
    z = rng.normal(0.0, 1.0, size=m)
    if family == "doppler":
        z[:3] += mean[:3]
    elif model.observe.is_static:
        z += model.observe.H @ mean
    belief = BeliefState(mean=mean, cov=P, time_index=int(rng.integers(0, 5)))
    H = model.observe.matrix_for(z)
    return FilterContext(model=model, belief=belief, observation=z, H=H)
