"""Shared strategies and fixtures.

The matrix helpers here are the independent oracle path: 4x4 homogeneous
matrices built from closed-form elementary rotations and multiplied with
numpy, never through the quaternion code under test.
"""

from __future__ import annotations

import math

import numpy as np
from hypothesis import strategies as st

from teleopkit.core import RigidTransform

ANGLES = st.floats(-math.pi + 1e-6, math.pi, allow_nan=False, allow_infinity=False)
COORDS = st.floats(-10.0, 10.0, allow_nan=False, allow_infinity=False)


@st.composite
def rigid_transforms(draw):
    """Random valid transform from a normalized 4-gaussian quaternion."""
    q = np.array([draw(st.floats(-1, 1)) for _ in range(4)])
    if np.linalg.norm(q) < 1e-3:
        q = np.array([1.0, 0.0, 0.0, 0.0])
    q = q / np.linalg.norm(q)
    t = (draw(COORDS), draw(COORDS), draw(COORDS))
    return RigidTransform(tuple(q), t)


def mat_rot_x(a: float) -> np.ndarray:
    c, s = math.cos(a), math.sin(a)
    return np.array([[1, 0, 0], [0, c, -s], [0, s, c]], dtype=float)


def mat_rot_y(a: float) -> np.ndarray:
    c, s = math.cos(a), math.sin(a)
    return np.array([[c, 0, s], [0, 1, 0], [-s, 0, c]], dtype=float)


def mat_rot_z(a: float) -> np.ndarray:
    c, s = math.cos(a), math.sin(a)
    return np.array([[c, -s, 0], [s, c, 0], [0, 0, 1]], dtype=float)


def homogeneous(rot: np.ndarray, trans) -> np.ndarray:
    m = np.eye(4)
    m[:3, :3] = rot
    m[:3, 3] = trans
    return m


def transform_as_matrix(t: RigidTransform) -> np.ndarray:
    """Read a transform out in homogeneous-matrix form for comparison."""
    return homogeneous(np.array(t.rotation_matrix()), t.translation)
