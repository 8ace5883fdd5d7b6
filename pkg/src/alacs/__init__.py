"""Calibration and localization toolkit for an active laser-camera scanner.

A line laser on a linear slide and a fixed camera form a triangulation
sensor. The package provides the camera model (:mod:`alacs.camera`), the
depth model (:mod:`alacs.scanner`), checkerboard geometry
(:mod:`alacs.target`), robust extrinsic calibration (:mod:`alacs.calib`),
a seeded scene simulator (:mod:`alacs.sim`) and a CLI (:mod:`alacs.cli`).
"""

__version__ = "0.1.0"

from .calib import (
    CalibrationReport,
    DataSample,
    RansacConfig,
    compare_methods,
    linear_init,
    ransac_calibrate,
    refine,
    residual,
)
from .camera import CameraIntrinsics, CameraPoint, NormalizedPoint, PixelPoint, normalize, project, unproject
from .scanner import (
    ExtrinsicParams,
    LaserFramePoint,
    SlideState,
    camera_from_laser,
    depth_high_fidelity,
    depth_low_fidelity,
    effective_baseline,
    point_high_fidelity,
)
from .target import BoardSpec, CornerObservation, PlanePose, depth_on_plane, reconstruct_pose, synthesize_corners

__all__ = [
    "BoardSpec",
    "CalibrationReport",
    "CameraIntrinsics",
    "CameraPoint",
    "CornerObservation",
    "DataSample",
    "ExtrinsicParams",
    "LaserFramePoint",
    "NormalizedPoint",
    "PixelPoint",
    "PlanePose",
    "RansacConfig",
    "SlideState",
    "camera_from_laser",
    "compare_methods",
    "depth_high_fidelity",
    "depth_low_fidelity",
    "depth_on_plane",
    "effective_baseline",
    "linear_init",
    "normalize",
    "point_high_fidelity",
    "project",
    "ransac_calibrate",
    "reconstruct_pose",
    "refine",
    "residual",
    "synthesize_corners",
    "unproject",
]
