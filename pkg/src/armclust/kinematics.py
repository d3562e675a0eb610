"""Forward kinematics of the 7-DOF arm in a fixed shoulder frame.

Convention (the contract for all exports): right-handed shoulder frame with
X anterior, Y toward the body midline (left for a right arm), Z up. At zero
angles the arm hangs straight down along -Z. Shoulder orientation follows the
globe sequence: plane of elevation about Z, elevation about the rotated Y
(positive swings the arm toward +X), then internal rotation about the humerus
long axis. Elbow flexion rotates about the local Y; supination, wrist flexion
and deviation rotate about the local Z, Y, X in that order. Under this
convention, flipping the sign of the lateralized channels mirrors the whole
pose across the X-Z (sagittal) plane.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .model import FULL7, Trajectory


@dataclass(frozen=True)
class ArmGeometry:
    """Segment lengths in meters; defaults approximate an average adult."""

    humerus_length: float = 0.31
    forearm_length: float = 0.26
    hand_length: float = 0.08

    def __post_init__(self) -> None:
        for name in ("humerus_length", "forearm_length", "hand_length"):
            if not getattr(self, name) > 0:
                raise ValueError(f"{name} must be positive, got {getattr(self, name)}")


DEFAULT_GEOMETRY = ArmGeometry()


@dataclass(frozen=True)
class Frame:
    rotation: np.ndarray
    origin: np.ndarray

    def __post_init__(self) -> None:
        r = np.asarray(self.rotation, dtype=np.float64)
        o = np.asarray(self.origin, dtype=np.float64)
        r.flags.writeable = False
        o.flags.writeable = False
        object.__setattr__(self, "rotation", r)
        object.__setattr__(self, "origin", o)


@dataclass(frozen=True)
class ArmPose:
    shoulder: Frame
    elbow: Frame
    wrist: Frame
    hand: Frame


def _rx(t: float) -> np.ndarray:
    c, s = np.cos(t), np.sin(t)
    return np.array([[1.0, 0.0, 0.0], [0.0, c, -s], [0.0, s, c]])


def _ry(t: float) -> np.ndarray:
    c, s = np.cos(t), np.sin(t)
    return np.array([[c, 0.0, s], [0.0, 1.0, 0.0], [-s, 0.0, c]])


def _rz(t: float) -> np.ndarray:
    c, s = np.cos(t), np.sin(t)
    return np.array([[c, -s, 0.0], [s, c, 0.0], [0.0, 0.0, 1.0]])


def forward_kinematics(angles: np.ndarray, geometry: ArmGeometry = DEFAULT_GEOMETRY) -> ArmPose:
    """Pose of the arm chain for one 7-vector of joint angles (radians).

    Angle order matches the Full7 channel order: plane of elevation,
    elevation, internal rotation, elbow flexion, supination, wrist flexion,
    deviation.
    """
    a = np.asarray(angles, dtype=np.float64).reshape(-1)
    if a.shape[0] != 7:
        raise ValueError(f"expected 7 joint angles, got {a.shape[0]}")
    if not np.all(np.isfinite(a)):
        raise ValueError("joint angles must be finite")
    pe, el, ir, ef, su, wf, dv = a

    down = np.array([0.0, 0.0, -1.0])
    r_humerus = _rz(pe) @ _ry(-el) @ _rz(ir)
    r_forearm = r_humerus @ _ry(-ef)
    r_hand = r_forearm @ _rz(su) @ _ry(-wf) @ _rx(dv)

    o_shoulder = np.zeros(3)
    o_elbow = r_humerus @ (geometry.humerus_length * down)
    o_wrist = o_elbow + r_forearm @ (geometry.forearm_length * down)
    o_hand = o_wrist + r_hand @ (geometry.hand_length * down)

    return ArmPose(
        shoulder=Frame(np.eye(3), o_shoulder),
        elbow=Frame(r_humerus, o_elbow),
        wrist=Frame(r_forearm, o_wrist),
        hand=Frame(r_hand, o_hand),
    )


def trace_motion(trajectory: Trajectory, geometry: ArmGeometry = DEFAULT_GEOMETRY) -> list[ArmPose]:
    """Per-frame forward kinematics of a Full7 trajectory."""
    if trajectory.model != FULL7:
        raise ValueError(
            f"forward kinematics needs the {FULL7.name} model, got {trajectory.model.name}"
        )
    return [forward_kinematics(frame, geometry) for frame in trajectory.samples]


def end_effector_trace(poses: list[ArmPose]) -> np.ndarray:
    """Hand-origin positions of a pose sequence, frames x 3."""
    return np.array([p.hand.origin for p in poses])
