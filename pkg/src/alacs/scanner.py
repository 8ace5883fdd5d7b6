"""Laser-camera triangulation model.

The laser frame ``F_l`` is related to the camera frame ``F_c`` by a rotation
``alpha`` about ``y_l`` and a horizontal offset ``L`` along ``x_l``::

    p_c = R_y(alpha) p_l + (-L cos(alpha), 0, L sin(alpha))

and the emitted light sheet is the plane ``x_l = -y_l tan(beta)``. Solving
both for a camera ray ``(u_bar, v_bar, 1)`` gives the depth::

    z_c = L / (sin(alpha) - u_bar cos(alpha) - v_bar tan(beta))

The laser rides on a linear slide; at displacement ``d`` towards the camera
the baseline is ``L = L0 - d``. Calibration estimates ``(alpha, L0, beta)``
while measurement-time queries supply ``d`` separately via ``SlideState``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

from .camera import CameraPoint, NormalizedPoint, _unwrap
from .errors import BaselineError, NegativeDepthError, SingularRayError

SINGULAR_TOL = 1e-6
SLIDE_STROKE = 0.20


@dataclass(frozen=True)
class ExtrinsicParams:
    """Laser-to-camera extrinsics. Angles in radians, ``L0`` in meters.

    Construction only demands finite values so degenerate configurations
    (``alpha = 0``, ``alpha = pi/2``) remain usable in analytic checks; use
    :meth:`validate` for the physical domain.
    """

    alpha: float
    L0: float
    beta: float = 0.0

    def __post_init__(self) -> None:
        for name in ("alpha", "L0", "beta"):
            value = float(getattr(self, name))
            if not math.isfinite(value):
                raise ValueError(f"{name} must be finite, got {value}")
            object.__setattr__(self, name, value)

    @property
    def is_physical(self) -> bool:
        return 0.0 < self.alpha < math.pi / 2 and self.L0 > 0 and abs(self.beta) < math.pi / 4

    def validate(self) -> "ExtrinsicParams":
        if not self.is_physical:
            raise ValueError(
                "extrinsics outside the physical domain "
                f"(alpha={math.degrees(self.alpha):.4f} deg, L0={self.L0 * 1e3:.4f} mm, "
                f"beta={math.degrees(self.beta):.4f} deg)"
            )
        return self

    @classmethod
    def from_units(cls, alpha_deg: float, L0_mm: float, beta_deg: float = 0.0) -> "ExtrinsicParams":
        return cls(math.radians(alpha_deg), L0_mm * 1e-3, math.radians(beta_deg))

    @classmethod
    def from_dict(cls, d: dict) -> "ExtrinsicParams":
        beta = d.get("beta_deg")
        return cls.from_units(float(d["alpha_deg"]), float(d["L0_mm"]), 0.0 if beta is None else float(beta))

    def to_dict(self) -> dict:
        return {
            "alpha_deg": math.degrees(self.alpha),
            "L0_mm": self.L0 * 1e3,
            "beta_deg": math.degrees(self.beta),
        }


@dataclass(frozen=True)
class SlideState:
    """Laser displacement ``d`` (meters) from the slide's home position."""

    d: float = 0.0

    def __post_init__(self) -> None:
        if not (0.0 <= self.d <= SLIDE_STROKE + 1e-12):
            raise ValueError(f"slide offset {self.d} m outside stroke [0, {SLIDE_STROKE}] m")


HOME = SlideState(0.0)


class LaserFramePoint(NamedTuple):
    x_l: object
    y_l: object
    z_l: object


def effective_baseline(p: ExtrinsicParams, s: SlideState = HOME) -> float:
    L = p.L0 - s.d
    if L <= 0:
        raise BaselineError(f"baseline L0 - d = {L * 1e3:.3f} mm is not positive")
    return L


def denominator(u_bar, v_bar, alpha, beta):
    """``sin(alpha) - u_bar cos(alpha) - v_bar tan(beta)``, broadcast over arrays."""
    return np.sin(alpha) - np.asarray(u_bar) * np.cos(alpha) - np.asarray(v_bar) * np.tan(beta)


def _checked_depth(u_bar, v_bar, alpha, L, beta):
    den = denominator(u_bar, v_bar, alpha, beta)
    if np.any(np.abs(den) < SINGULAR_TOL):
        raise SingularRayError("viewing ray is (nearly) parallel to the laser plane")
    z = L / den
    if np.any(z <= 0):
        raise NegativeDepthError("laser-plane intersection lies behind the camera")
    return z


def depth_high_fidelity(n: NormalizedPoint, p: ExtrinsicParams, s: SlideState = HOME):
    """Depth of the laser point seen along normalized ray ``n``.

    Raises:
        SingularRayError: if the ray is within ``SINGULAR_TOL`` of the plane.
        NegativeDepthError: if the intersection is not in front of the camera.
    """
    L = effective_baseline(p, s)
    return _unwrap(_checked_depth(n.u_bar, n.v_bar, p.alpha, L, p.beta))


def point_high_fidelity(n: NormalizedPoint, p: ExtrinsicParams, s: SlideState = HOME) -> CameraPoint:
    z = np.asarray(depth_high_fidelity(n, p, s))
    return CameraPoint(_unwrap(z * n.u_bar), _unwrap(z * n.v_bar), _unwrap(z))


def depth_low_fidelity(n: NormalizedPoint, p: ExtrinsicParams, s: SlideState = HOME):
    """Depth under the skew-free model (``beta`` ignored)."""
    L = effective_baseline(p, s)
    return _unwrap(_checked_depth(n.u_bar, n.v_bar, p.alpha, L, 0.0))


def camera_from_laser(q: LaserFramePoint, p: ExtrinsicParams, s: SlideState = HOME) -> CameraPoint:
    """Rigid transform of a laser-frame point into the camera frame.

    Uses ``L = L0 - d`` without a positivity check so that the identity
    configuration (``alpha = 0``, ``L = 0``) stays expressible.
    """
    L = p.L0 - s.d
    c, sn = math.cos(p.alpha), math.sin(p.alpha)
    x_l, y_l, z_l = (np.asarray(v, dtype=float) for v in q)
    x = c * x_l + sn * z_l - L * c
    z = -sn * x_l + c * z_l + L * sn
    return CameraPoint(_unwrap(x), _unwrap(y_l * 1.0), _unwrap(z))


def laser_plane_camera(p: ExtrinsicParams, s: SlideState = HOME):
    """Laser plane in the camera frame as ``(normal, offset)`` with ``normal . x + offset = 0``."""
    L = p.L0 - s.d
    c, sn = math.cos(p.alpha), math.sin(p.alpha)
    normal = np.array([c, math.tan(p.beta), -sn])
    return normal, L
