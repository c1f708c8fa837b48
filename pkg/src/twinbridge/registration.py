"""Point-based rigid registration with fiducial registration error.

Fiducials are pre-matched by index; the solver is the centroid-demeaned
cross-covariance decomposition (SVD with a determinant correction so the
result is always a proper rotation, never a reflection).  The returned
transform maps moving-set coordinates into fixed-set coordinates, which
makes it directly insertable as a world->phantom edge in the transform
tree.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Union

import numpy as np

from .transforms import RigidTransform, UnitQuaternion, Vec3, transform_point

MIN_POINTS = 3
_DEGENERACY_RATIO = 1e-12


class RegistrationError(Exception):
    """Base class for registration failures."""


class InsufficientPointsError(RegistrationError):
    """Fewer than three fiducial pairs."""


class PairingError(RegistrationError):
    """Fixed and moving sets differ in length."""


class DegenerateError(RegistrationError):
    """The point configuration does not pin down a rotation."""


@dataclass(frozen=True)
class FiducialSet:
    """Ordered, labelled fiducial positions in meters."""

    label: str
    points: tuple[Vec3, ...]

    def __post_init__(self) -> None:
        if len(self.points) < MIN_POINTS:
            raise InsufficientPointsError(
                f"{self.label!r}: need at least {MIN_POINTS} points, "
                f"got {len(self.points)}")
        for i, p in enumerate(self.points):
            if not p.is_finite():
                raise ValueError(f"{self.label!r}: point {i} is not finite")

    def __len__(self) -> int:
        return len(self.points)

    def as_array(self) -> np.ndarray:
        return np.array([p.to_list() for p in self.points])


@dataclass(frozen=True)
class RegistrationResult:
    """Best-fit transform (moving into fixed) and its RMS residual."""

    transform: RigidTransform
    fre_m: float
    n: int


def fre(transform: RigidTransform, fixed: FiducialSet,
        moving: FiducialSet) -> float:
    """Root-mean-square residual of transform applied to the moving set."""
    if len(fixed) != len(moving):
        raise PairingError(
            f"{len(fixed)} fixed points vs {len(moving)} moving points")
    total = 0.0
    for f, m in zip(fixed.points, moving.points):
        r = transform_point(transform, m) - f
        total += r.dot(r)
    return math.sqrt(total / len(fixed))


def register_rigid(fixed: FiducialSet,
                   moving: FiducialSet) -> RegistrationResult:
    """Least-squares rigid alignment of pre-matched fiducial pairs."""
    if len(fixed) != len(moving):
        raise PairingError(
            f"{len(fixed)} fixed points vs {len(moving)} moving points")
    f = fixed.as_array()
    m = moving.as_array()
    f_bar = f.mean(axis=0)
    m_bar = m.mean(axis=0)
    h = (m - m_bar).T @ (f - f_bar)
    u, s, vt = np.linalg.svd(h)
    if s[1] < _DEGENERACY_RATIO * s[0]:
        raise DegenerateError(
            "fiducial configuration is collinear or otherwise rank-deficient")
    d = np.sign(np.linalg.det(vt.T @ u.T))
    rot = vt.T @ np.diag([1.0, 1.0, d]) @ u.T
    t = f_bar - rot @ m_bar
    transform = RigidTransform(
        rotation=UnitQuaternion.from_matrix(rot.tolist()),
        translation=Vec3.from_seq(t))
    return RegistrationResult(transform=transform,
                              fre_m=fre(transform, fixed, moving),
                              n=len(fixed))


def load_fiducials_csv(path: Union[str, Path],
                       label: str = "") -> FiducialSet:
    """Read `label,x,y,z` rows (meters, no header) into a FiducialSet."""
    path = Path(path)
    points = []
    with path.open(newline="") as fh:
        for row_no, row in enumerate(csv.reader(fh), start=1):
            if not row or all(not cell.strip() for cell in row):
                continue
            if len(row) != 4:
                raise ValueError(
                    f"{path.name}:{row_no}: expected label,x,y,z")
            try:
                points.append(Vec3(float(row[1]), float(row[2]), float(row[3])))
            except ValueError as err:
                raise ValueError(f"{path.name}:{row_no}: {err}") from None
    return FiducialSet(label=label or path.stem, points=tuple(points))


def save_fiducials_csv(fiducials: FiducialSet, path: Union[str, Path]) -> None:
    """Write `label,x,y,z` rows matching the loader's format."""
    path = Path(path)
    with path.open("w", newline="") as fh:
        writer = csv.writer(fh)
        for i, p in enumerate(fiducials.points, start=1):
            writer.writerow([f"f{i}", f"{p.x:.6f}", f"{p.y:.6f}", f"{p.z:.6f}"])


def result_to_json(result: RegistrationResult) -> dict:
    """CLI/service payload: {pose, fre_m, n}."""
    return {
        "pose": result.transform.to_list(),
        "fre_m": result.fre_m,
        "n": result.n,
    }
