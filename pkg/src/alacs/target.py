"""Planar checkerboard geometry.

Board coordinates ``(X, Y, 0)`` map into the camera frame through
``p = R_b [X, Y, 0] + t_b``. From at least four corner observations the pose
is recovered with a normalized DLT homography on undistorted coordinates,
which is then split into ``[r1 r2 t]`` and projected onto SO(3). The plane
normal (third column of ``R_b``) then gives the depth of any viewing ray that
hits the board.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import List, NamedTuple, Sequence

import numpy as np

from .camera import CameraIntrinsics, CameraPoint, NormalizedPoint, PixelPoint, _unwrap, normalize, project, unproject
from .errors import BehindCameraError, DegenerateConfigurationError, ParallelRayError

PARALLEL_TOL = 1e-9


@dataclass(frozen=True)
class BoardSpec:
    rows: int
    cols: int
    square_size: float

    def __post_init__(self) -> None:
        if self.rows < 3 or self.cols < 3:
            raise ValueError(f"board needs at least 3x3 corners, got {self.rows}x{self.cols}")
        if not self.square_size > 0:
            raise ValueError(f"square_size must be positive, got {self.square_size}")

    @property
    def width(self) -> float:
        return (self.cols - 1) * self.square_size

    @property
    def height(self) -> float:
        return (self.rows - 1) * self.square_size

    def grid(self) -> np.ndarray:
        """Corner positions on the board, shape ``(rows * cols, 2)``, row-major."""
        ys, xs = np.mgrid[0 : self.rows, 0 : self.cols]
        return np.column_stack([xs.ravel(), ys.ravel()]) * self.square_size


@dataclass(frozen=True)
class PlanePose:
    """Board-to-camera rotation ``R_b`` and board origin ``t_b`` (meters)."""

    R_b: np.ndarray
    t_b: np.ndarray

    def __post_init__(self) -> None:
        R = np.asarray(self.R_b, dtype=float).reshape(3, 3)
        t = np.asarray(self.t_b, dtype=float).reshape(3)
        object.__setattr__(self, "R_b", R)
        object.__setattr__(self, "t_b", t)

    @property
    def normal(self) -> np.ndarray:
        return self.R_b[:, 2]

    def to_camera(self, board_xy: np.ndarray) -> np.ndarray:
        """Board points ``(N, 2)`` to camera-frame points ``(N, 3)``."""
        xy = np.atleast_2d(board_xy)
        return xy @ self.R_b[:, :2].T + self.t_b


class CornerObservation(NamedTuple):
    board_xy: tuple
    pixel: PixelPoint


def rotation_from_euler(rx: float, ry: float, rz: float) -> np.ndarray:
    """``Rz @ Ry @ Rx`` for angles in radians."""
    cx, sx = np.cos(rx), np.sin(rx)
    cy, sy = np.cos(ry), np.sin(ry)
    cz, sz = np.cos(rz), np.sin(rz)
    Rx = np.array([[1, 0, 0], [0, cx, -sx], [0, sx, cx]])
    Ry = np.array([[cy, 0, sy], [0, 1, 0], [-sy, 0, cy]])
    Rz = np.array([[cz, -sz, 0], [sz, cz, 0], [0, 0, 1]])
    return Rz @ Ry @ Rx


def nearest_rotation(M: np.ndarray) -> np.ndarray:
    U, _, Vt = np.linalg.svd(M)
    D = np.diag([1.0, 1.0, np.sign(np.linalg.det(U @ Vt))])
    return U @ D @ Vt


def synthesize_corners(spec: BoardSpec, pose: PlanePose, K: CameraIntrinsics) -> List[CornerObservation]:
    """Render every board corner into the image.

    Raises:
        BehindCameraError: if any corner has non-positive depth.
    """
    grid = spec.grid()
    pts = pose.to_camera(grid)
    if np.any(pts[:, 2] <= 0):
        raise BehindCameraError("board corner at non-positive depth")
    px = project(normalize(CameraPoint(pts[:, 0], pts[:, 1], pts[:, 2])), K)
    return [
        CornerObservation((float(x), float(y)), PixelPoint(float(u), float(v)))
        for (x, y), u, v in zip(grid, np.asarray(px.u), np.asarray(px.v))
    ]


def _hartley(points: np.ndarray):
    """Similarity that moves the centroid to 0 and the mean distance to sqrt(2)."""
    c = points.mean(axis=0)
    dist = np.sqrt(((points - c) ** 2).sum(axis=1)).mean()
    if dist < 1e-15:
        raise DegenerateConfigurationError("all points coincide")
    s = np.sqrt(2.0) / dist
    return np.array([[s, 0.0, -s * c[0]], [0.0, s, -s * c[1]], [0.0, 0.0, 1.0]])


def estimate_homography(src: np.ndarray, dst: np.ndarray) -> np.ndarray:
    """Normalized DLT for ``dst ~ H src`` (both ``(N, 2)``, ``N >= 4``)."""
    src = np.asarray(src, dtype=float)
    dst = np.asarray(dst, dtype=float)
    n = len(src)
    if n < 4:
        raise DegenerateConfigurationError(f"need at least 4 corners, got {n}")
    centered = src - src.mean(axis=0)
    sv = np.linalg.svd(centered, compute_uv=False)
    if sv[1] <= 1e-9 * max(sv[0], 1e-300):
        raise DegenerateConfigurationError("board corners are collinear")
    Ts, Td = _hartley(src), _hartley(dst)
    s = np.column_stack([src, np.ones(n)]) @ Ts.T
    d = np.column_stack([dst, np.ones(n)]) @ Td.T
    A = np.zeros((2 * n, 9))
    A[0::2, 0:3] = s
    A[0::2, 6:9] = -d[:, [0]] * s
    A[1::2, 3:6] = s
    A[1::2, 6:9] = -d[:, [1]] * s
    _, S, Vt = np.linalg.svd(A)
    if S[-2] <= 1e-12 * S[0]:
        raise DegenerateConfigurationError("DLT system is rank deficient")
    Hn = Vt[-1].reshape(3, 3)
    return np.linalg.solve(Td, Hn @ Ts)


def reconstruct_pose(corners: Sequence[CornerObservation], K: CameraIntrinsics) -> PlanePose:
    """Board pose from corner correspondences.

    Raises:
        DegenerateConfigurationError: on fewer than four corners, collinear
            corners, or a rank-deficient DLT system.
    """
    if len(corners) < 4:
        raise DegenerateConfigurationError(f"need at least 4 corners, got {len(corners)}")
    board = np.array([c.board_xy for c in corners], dtype=float)
    pix = np.array([tuple(c.pixel) for c in corners], dtype=float)
    n = unproject(PixelPoint(pix[:, 0], pix[:, 1]), K)
    H = estimate_homography(board, np.column_stack([n.u_bar, n.v_bar]))
    h1, h2, h3 = H[:, 0], H[:, 1], H[:, 2]
    scale = 2.0 / (np.linalg.norm(h1) + np.linalg.norm(h2))
    if h3[2] * scale < 0:
        scale = -scale
    r1, r2, t = scale * h1, scale * h2, scale * h3
    R = nearest_rotation(np.column_stack([r1, r2, np.cross(r1, r2)]))
    return PlanePose(R, t)


def depth_on_plane(n: NormalizedPoint, pose: PlanePose):
    """Depth at which the ray ``(u_bar, v_bar, 1)`` meets the board plane.

    Raises:
        ParallelRayError: if the ray is parallel to the plane.
    """
    a, b, c = pose.normal
    den = a * np.asarray(n.u_bar, dtype=float) + b * np.asarray(n.v_bar, dtype=float) + c
    if np.any(np.abs(den) < PARALLEL_TOL):
        raise ParallelRayError("viewing ray parallel to the board plane")
    return _unwrap(float(pose.normal @ pose.t_b) / den)
