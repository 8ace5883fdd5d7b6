"""Pin-hole camera with radial-tangential lens distortion.

Maps camera-frame points to normalized coordinates (unit depth), normalized
coordinates to pixels, and pixels back to normalized coordinates::

    u_bar, v_bar = x / z, y / z
    (x_d, y_d)   = distort(u_bar, v_bar)          # k1, k2, p1, p2, k3
    u, v         = fx * x_d + cx, fy * y_d + cy

Point types are ``NamedTuple``s whose fields may hold floats or equally
shaped numpy arrays, so every function here works on single points and on
batches alike.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Any, NamedTuple, Optional, Tuple

import numpy as np

from .errors import DegenerateDepthError, NonConvergenceError

DEPTH_TOL = 1e-12
UNDISTORT_MAX_ITER = 20
UNDISTORT_TOL = 1e-12
_NEWTON_MAX_ITER = 50


class PixelPoint(NamedTuple):
    u: Any
    v: Any


class NormalizedPoint(NamedTuple):
    u_bar: Any
    v_bar: Any


class CameraPoint(NamedTuple):
    x: Any
    y: Any
    z: Any


@dataclass(frozen=True)
class CameraIntrinsics:
    """Intrinsic matrix entries plus five distortion coefficients.

    ``dist`` is ordered ``(k1, k2, p1, p2, k3)``. ``width`` and ``height``
    are optional; when given, the simulator refuses to place samples
    outside the image.
    """

    fx: float
    fy: float
    cx: float
    cy: float
    dist: Tuple[float, float, float, float, float] = (0.0, 0.0, 0.0, 0.0, 0.0)
    width: Optional[int] = None
    height: Optional[int] = None

    def __post_init__(self) -> None:
        if not (self.fx > 0 and self.fy > 0):
            raise ValueError(f"focal lengths must be positive, got fx={self.fx}, fy={self.fy}")
        dist = tuple(float(c) for c in self.dist)
        if len(dist) != 5:
            raise ValueError(f"expected 5 distortion coefficients, got {len(dist)}")
        object.__setattr__(self, "dist", dist)

    @property
    def K(self) -> np.ndarray:
        return np.array([[self.fx, 0.0, self.cx], [0.0, self.fy, self.cy], [0.0, 0.0, 1.0]])

    @property
    def has_distortion(self) -> bool:
        return any(c != 0.0 for c in self.dist)

    def in_image(self, m: PixelPoint) -> np.ndarray:
        if self.width is None or self.height is None:
            return np.ones(np.shape(m.u), dtype=bool)
        u, v = np.asarray(m.u), np.asarray(m.v)
        return (u >= 0) & (u <= self.width - 1) & (v >= 0) & (v <= self.height - 1)

    @classmethod
    def from_dict(cls, d: dict) -> "CameraIntrinsics":
        return cls(
            fx=float(d["fx"]),
            fy=float(d["fy"]),
            cx=float(d["cx"]),
            cy=float(d["cy"]),
            dist=tuple(d.get("dist", (0.0,) * 5)),
            width=d.get("width"),
            height=d.get("height"),
        )

    def to_dict(self) -> dict:
        d = {"fx": self.fx, "fy": self.fy, "cx": self.cx, "cy": self.cy, "dist": list(self.dist)}
        if self.width is not None:
            d["width"] = self.width
        if self.height is not None:
            d["height"] = self.height
        return d


def normalize(p: CameraPoint) -> NormalizedPoint:
    """Divide a camera-frame point by its depth.

    Raises:
        DegenerateDepthError: if any ``|z|`` is below ``DEPTH_TOL``.
    """
    z = np.asarray(p.z, dtype=float)
    if np.any(np.abs(z) < DEPTH_TOL):
        raise DegenerateDepthError(f"cannot normalize a point with depth {p.z!r}")
    return NormalizedPoint(_unwrap(np.asarray(p.x) / z), _unwrap(np.asarray(p.y) / z))


def distort(x, y, dist) -> Tuple[np.ndarray, np.ndarray]:
    """Apply the radial-tangential model to normalized coordinates."""
    k1, k2, p1, p2, k3 = dist
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    r2 = x * x + y * y
    radial = 1.0 + r2 * (k1 + r2 * (k2 + r2 * k3))
    xd = x * radial + 2.0 * p1 * x * y + p2 * (r2 + 2.0 * x * x)
    yd = y * radial + p1 * (r2 + 2.0 * y * y) + 2.0 * p2 * x * y
    return xd, yd


def _distort_jacobian(x, y, dist):
    k1, k2, p1, p2, k3 = dist
    r2 = x * x + y * y
    radial = 1.0 + r2 * (k1 + r2 * (k2 + r2 * k3))
    g = k1 + 2.0 * k2 * r2 + 3.0 * k3 * r2 * r2
    a = radial + 2.0 * g * x * x + 2.0 * p1 * y + 6.0 * p2 * x
    b = 2.0 * g * x * y + 2.0 * p1 * x + 2.0 * p2 * y
    d = radial + 2.0 * g * y * y + 6.0 * p1 * y + 2.0 * p2 * x
    return a, b, b, d


def project(n: NormalizedPoint, K: CameraIntrinsics) -> PixelPoint:
    """Map normalized coordinates to pixels (distortion, then intrinsics)."""
    xd, yd = distort(n.u_bar, n.v_bar, K.dist)
    return PixelPoint(_unwrap(K.fx * xd + K.cx), _unwrap(K.fy * yd + K.cy))


def undistort(xd, yd, dist) -> Tuple[np.ndarray, np.ndarray]:
    """Invert :func:`distort` by fixed-point iteration.

    The classic iteration ``x <- (x_d - tangential(x)) / radial(x)`` starts
    from the distorted coordinates. Strong barrel distortion near the image
    corners can make it contract too slowly (or not at all) within
    ``UNDISTORT_MAX_ITER`` steps; unconverged entries are then handed to a
    Newton solve. Every result gets a final Newton polish so the pixel
    round-trip error sits at rounding level.
    """
    k1, k2, p1, p2, k3 = dist
    xd = np.asarray(xd, dtype=float)
    yd = np.asarray(yd, dtype=float)
    x, y = xd.copy(), yd.copy()
    converged = np.zeros(xd.shape, dtype=bool)
    for _ in range(UNDISTORT_MAX_ITER):
        r2 = x * x + y * y
        radial = 1.0 + r2 * (k1 + r2 * (k2 + r2 * k3))
        dx = 2.0 * p1 * x * y + p2 * (r2 + 2.0 * x * x)
        dy = p1 * (r2 + 2.0 * y * y) + 2.0 * p2 * x * y
        with np.errstate(all="ignore"):
            x_new = (xd - dx) / radial
            y_new = (yd - dy) / radial
        step = np.maximum(np.abs(x_new - x), np.abs(y_new - y))
        x = np.where(converged, x, x_new)
        y = np.where(converged, y, y_new)
        converged |= step < UNDISTORT_TOL
        if converged.all():
            break
    if not converged.all():
        x = np.where(converged, x, xd)
        y = np.where(converged, y, yd)
    return _newton_undistort(x, y, xd, yd, dist)


def _newton_undistort(x, y, xd, yd, dist):
    for _ in range(_NEWTON_MAX_ITER):
        fx_, fy_ = distort(x, y, dist)
        ex, ey = fx_ - xd, fy_ - yd
        if np.all(np.maximum(np.abs(ex), np.abs(ey)) < 1e-15):
            break
        a, b, c, d = _distort_jacobian(x, y, dist)
        det = a * d - b * c
        with np.errstate(all="ignore"):
            sx = (d * ex - b * ey) / det
            sy = (a * ey - c * ex) / det
        x = x - sx
        y = y - sy
        if np.all(np.maximum(np.abs(sx), np.abs(sy)) < 1e-16):
            break
    fx_, fy_ = distort(x, y, dist)
    err = np.maximum(np.abs(fx_ - xd), np.abs(fy_ - yd))
    bad = ~np.isfinite(err) | (err > UNDISTORT_TOL)
    if np.any(bad):
        raise NonConvergenceError(f"undistortion did not converge for {int(np.sum(bad))} point(s)")
    return x, y


def unproject(m: PixelPoint, K: CameraIntrinsics) -> NormalizedPoint:
    """Recover normalized coordinates from pixel coordinates.

    Raises:
        NonConvergenceError: if iterative undistortion fails to reach
            ``UNDISTORT_TOL``.
    """
    xd = (np.asarray(m.u, dtype=float) - K.cx) / K.fx
    yd = (np.asarray(m.v, dtype=float) - K.cy) / K.fy
    if not K.has_distortion:
        return NormalizedPoint(_unwrap(xd), _unwrap(yd))
    x, y = undistort(xd, yd, K.dist)
    return NormalizedPoint(_unwrap(x), _unwrap(y))


def _unwrap(a):
    """Return a Python float for 0-d results, the array otherwise."""
    a = np.asarray(a)
    return float(a) if a.ndim == 0 else a
