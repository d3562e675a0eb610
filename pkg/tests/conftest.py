import numpy as np
import pytest

from armclust.model import JointModel, Trajectory

SEED = 20250810
SCALAR = JointModel("Scalar1", ("value",))


def make_model(dof: int) -> JointModel:
    if dof == 1:
        return SCALAR
    return JointModel(f"Test{dof}", tuple(f"ch{i}" for i in range(dof)))


def traj(values, frame_rate: float = 100.0, model: JointModel | None = None) -> Trajectory:
    arr = np.asarray(values, dtype=float)
    if arr.ndim == 1:
        arr = arr[:, None]
    return Trajectory(arr, frame_rate, model or make_model(arr.shape[1]))


def smooth_random(rng: np.random.Generator, frames: int, dof: int, scale: float = 1.0) -> Trajectory:
    """Random smooth multichannel trajectory (cumulative sum, lightly filtered)."""
    steps = rng.normal(0.0, scale / np.sqrt(frames), (frames, dof))
    samples = np.cumsum(steps, axis=0)
    kernel = np.ones(5) / 5.0
    for c in range(dof):
        samples[:, c] = np.convolve(samples[:, c], kernel, mode="same")
    return Trajectory(samples, 100.0, make_model(dof))


@pytest.fixture
def rng() -> np.random.Generator:
    return np.random.default_rng(SEED)
