"""Seeded synthetic scenes for calibration and localization experiments.

A checkerboard is placed at several depths so that the laser sheet crosses
it. For each placement the laser line is clipped to the board and to the
image, a few points are drawn uniformly along it, their pixels are perturbed
with Gaussian noise, and the reference depth is read off the board plane
along the *observed* ray, just like a real data-collection session where the
board pose stands in for ground truth.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from typing import List, NamedTuple, Optional, Sequence, Tuple

import numpy as np

from .calib import DataSample
from .camera import CameraIntrinsics, CameraPoint, NormalizedPoint, PixelPoint, normalize, project, unproject
from .errors import AllOccludedError, NoIntersectionError
from .scanner import ExtrinsicParams, SlideState, laser_plane_camera, point_high_fidelity
from .target import BoardSpec, PlanePose, depth_on_plane, reconstruct_pose, rotation_from_euler, synthesize_corners

DEFAULT_TRUTH = ExtrinsicParams.from_units(19.07, 381.98, 0.69)


def default_intrinsics() -> CameraIntrinsics:
    return CameraIntrinsics(
        fx=1050.0,
        fy=1050.0,
        cx=720.0,
        cy=540.0,
        dist=(-0.12, 0.08, 0.0005, -0.0003, 0.0),
        width=1440,
        height=1080,
    )


@dataclass(frozen=True)
class SceneConfig:
    """Everything needed to regenerate a synthetic data set bit for bit.

    Lengths are meters, angles radians, noise in pixels unless noted.
    ``depth_noise_sigma`` perturbs the board-derived reference depth and
    models pose-reconstruction error. With ``reconstruct_pose`` the board
    pose is instead recovered from noisy synthetic corners.
    """

    truth: ExtrinsicParams = DEFAULT_TRUTH
    board: BoardSpec = BoardSpec(11, 13, 0.05)
    intrinsics: CameraIntrinsics = field(default_factory=default_intrinsics)
    n_positions: int = 10
    depth_range: Tuple[float, float] = (0.6, 1.2)
    points_per_image: int = 3
    pixel_noise_sigma: float = 0.0
    depth_noise_sigma: float = 0.0
    outlier_fraction: float = 0.0
    outlier_depth_shift: float = 0.03
    max_tilt: float = math.radians(20.0)
    reconstruct_pose: bool = False
    corner_noise_sigma: float = 0.0
    rng_seed: int = 0

    def __post_init__(self) -> None:
        lo, hi = self.depth_range
        if not (0 < lo < hi):
            raise ValueError(f"depth_range must satisfy 0 < min < max, got {self.depth_range}")
        if not (0.0 <= self.outlier_fraction < 1.0):
            raise ValueError(f"outlier_fraction must be in [0, 1), got {self.outlier_fraction}")
        if self.n_positions < 1 or self.points_per_image < 1:
            raise ValueError("n_positions and points_per_image must be positive")
        if self.pixel_noise_sigma < 0 or self.depth_noise_sigma < 0 or self.corner_noise_sigma < 0:
            raise ValueError("noise levels must be non-negative")
        self.truth.validate()

    @property
    def n_samples(self) -> int:
        return self.n_positions * self.points_per_image

    @classmethod
    def from_dict(cls, d: dict) -> "SceneConfig":
        kw = {}
        if "truth" in d:
            kw["truth"] = ExtrinsicParams.from_dict(d["truth"])
        if "board" in d:
            b = d["board"]
            kw["board"] = BoardSpec(int(b["rows"]), int(b["cols"]), float(b["square_size_mm"]) * 1e-3)
        if "intrinsics" in d:
            kw["intrinsics"] = CameraIntrinsics.from_dict(d["intrinsics"])
        if "depth_range_mm" in d:
            lo, hi = d["depth_range_mm"]
            kw["depth_range"] = (float(lo) * 1e-3, float(hi) * 1e-3)
        simple = {
            "n_positions": ("n_positions", int, 1.0),
            "points_per_image": ("points_per_image", int, 1.0),
            "pixel_noise_px": ("pixel_noise_sigma", float, 1.0),
            "depth_noise_mm": ("depth_noise_sigma", float, 1e-3),
            "outlier_fraction": ("outlier_fraction", float, 1.0),
            "outlier_shift_mm": ("outlier_depth_shift", float, 1e-3),
            "corner_noise_px": ("corner_noise_sigma", float, 1.0),
            "rng_seed": ("rng_seed", int, 1.0),
        }
        for key, (name, conv, factor) in simple.items():
            if key in d:
                kw[name] = conv(d[key]) * factor if conv is float else conv(d[key])
        if "max_tilt_deg" in d:
            kw["max_tilt"] = math.radians(float(d["max_tilt_deg"]))
        if "reconstruct_pose" in d:
            kw["reconstruct_pose"] = bool(d["reconstruct_pose"])
        unknown = set(d) - set(simple) - {
            "truth", "board", "intrinsics", "depth_range_mm", "max_tilt_deg", "reconstruct_pose", "slide_d_mm",
        }
        if unknown:
            raise ValueError(f"unknown scene config keys: {sorted(unknown)}")
        return cls(**kw)

    def to_dict(self) -> dict:
        return {
            "truth": self.truth.to_dict(),
            "board": {"rows": self.board.rows, "cols": self.board.cols, "square_size_mm": self.board.square_size * 1e3},
            "intrinsics": self.intrinsics.to_dict(),
            "n_positions": self.n_positions,
            "depth_range_mm": [self.depth_range[0] * 1e3, self.depth_range[1] * 1e3],
            "points_per_image": self.points_per_image,
            "pixel_noise_px": self.pixel_noise_sigma,
            "depth_noise_mm": self.depth_noise_sigma * 1e3,
            "outlier_fraction": self.outlier_fraction,
            "outlier_shift_mm": self.outlier_depth_shift * 1e3,
            "max_tilt_deg": math.degrees(self.max_tilt),
            "reconstruct_pose": self.reconstruct_pose,
            "corner_noise_px": self.corner_noise_sigma,
            "rng_seed": self.rng_seed,
        }


@dataclass(frozen=True)
class ScanSweepConfig:
    offsets: Tuple[float, ...] = (0.0, 0.05, 0.10, 0.15, 0.20)

    def __post_init__(self) -> None:
        object.__setattr__(self, "offsets", tuple(float(d) for d in self.offsets))
        for d in self.offsets:
            SlideState(d)

    @classmethod
    def from_dict(cls, d: dict) -> "ScanSweepConfig":
        return cls(tuple(float(x) * 1e-3 for x in d["offsets_mm"]))


class LabeledSample(NamedTuple):
    sample: DataSample
    is_outlier: bool
    truth_point: CameraPoint


def _place_board(cfg: SceneConfig, L: float, depth: float, rng: np.random.Generator) -> PlanePose:
    """Pose a board at ``depth`` so the laser sheet crosses it away from its edges."""
    p = cfg.truth
    tilt = cfg.max_tilt
    R = rotation_from_euler(rng.uniform(-tilt, tilt), rng.uniform(-tilt, tilt), rng.uniform(-0.1, 0.1))
    v_c = rng.uniform(-0.2, 0.2)
    u_c = (math.sin(p.alpha) - v_c * math.tan(p.beta) - L / depth) / math.cos(p.alpha)
    hit = depth * np.array([u_c, v_c, 1.0])
    anchor = np.array([rng.uniform(0.3, 0.7) * cfg.board.width, rng.uniform(0.4, 0.6) * cfg.board.height])
    return PlanePose(R, hit - R[:, :2] @ anchor)


def _laser_segment(cfg: SceneConfig, pose: PlanePose, L_plane: Tuple[np.ndarray, float]):
    """Visible part of the laser line on the board as ``(origin, direction, t_lo, t_hi)``."""
    normal, offset = L_plane
    a = pose.R_b[:, :2].T @ normal
    e = float(normal @ pose.t_b) + offset
    na = float(np.hypot(*a))
    if na < 1e-12:
        raise NoIntersectionError("laser sheet is parallel to the board")
    origin = -e * a / na**2
    direction = np.array([-a[1], a[0]]) / na
    lo, hi = -np.inf, np.inf
    for axis, limit in ((0, cfg.board.width), (1, cfg.board.height)):
        o, dv = origin[axis], direction[axis]
        if abs(dv) < 1e-15:
            if not (0.0 <= o <= limit):
                raise NoIntersectionError("laser line misses the board")
            continue
        t0, t1 = sorted(((0.0 - o) / dv, (limit - o) / dv))
        lo, hi = max(lo, t0), min(hi, t1)
    if not lo < hi:
        raise NoIntersectionError("laser line misses the board")
    # keep only the stretch that lands in front of the camera and inside the image
    ts = np.linspace(lo, hi, 401)
    pts = pose.to_camera(origin + ts[:, None] * direction)
    ok = pts[:, 2] > 0
    if ok.any():
        z = np.where(ok, pts[:, 2], 1.0)
        px = project(NormalizedPoint(pts[:, 0] / z, pts[:, 1] / z), cfg.intrinsics)
        ok &= cfg.intrinsics.in_image(px)
    if not ok.any():
        raise NoIntersectionError("laser line on the board is outside the image")
    idx = np.flatnonzero(ok)
    # longest contiguous visible run
    breaks = np.flatnonzero(np.diff(idx) > 1)
    starts = np.concatenate([[0], breaks + 1])
    ends = np.concatenate([breaks, [len(idx) - 1]])
    j = int(np.argmax(ends - starts))
    t_lo, t_hi = ts[idx[starts[j]]], ts[idx[ends[j]]]
    if not t_lo < t_hi:
        raise NoIntersectionError("visible laser segment is degenerate")
    return origin, direction, t_lo, t_hi


def _observe_line(
    cfg: SceneConfig,
    pose: PlanePose,
    slide: SlideState,
    n_points: int,
    rng: np.random.Generator,
) -> List[LabeledSample]:
    plane = laser_plane_camera(cfg.truth, slide)
    origin, direction, t_lo, t_hi = _laser_segment(cfg, pose, plane)
    ts = rng.uniform(t_lo, t_hi, size=n_points)
    pts = pose.to_camera(origin + ts[:, None] * direction)
    K = cfg.intrinsics
    px = project(normalize(CameraPoint(pts[:, 0], pts[:, 1], pts[:, 2])), K)
    u = np.asarray(px.u) + rng.normal(0.0, cfg.pixel_noise_sigma, n_points)
    v = np.asarray(px.v) + rng.normal(0.0, cfg.pixel_noise_sigma, n_points)
    n = unproject(PixelPoint(u, v), K)

    ref_pose = pose
    if cfg.reconstruct_pose:
        corners = synthesize_corners(cfg.board, pose, K)
        if cfg.corner_noise_sigma > 0:
            noise = rng.normal(0.0, cfg.corner_noise_sigma, (len(corners), 2))
            corners = [
                c._replace(pixel=PixelPoint(c.pixel.u + du, c.pixel.v + dv)) for c, (du, dv) in zip(corners, noise)
            ]
        ref_pose = reconstruct_pose(corners, K)
    z = np.asarray(depth_on_plane(n, ref_pose)) + rng.normal(0.0, cfg.depth_noise_sigma, n_points)

    return [
        LabeledSample(
            DataSample(float(ub), float(vb), float(zc)),
            False,
            CameraPoint(float(x), float(y), float(zz)),
        )
        for ub, vb, zc, (x, y, zz) in zip(np.atleast_1d(n.u_bar), np.atleast_1d(n.v_bar), z, pts)
    ]


def generate_samples(
    cfg: SceneConfig,
    slide: SlideState = SlideState(0.0),
    rng: Optional[np.random.Generator] = None,
) -> List[LabeledSample]:
    """Laser samples from ``cfg.n_positions`` board placements.

    Board depths are stratified over ``cfg.depth_range``. Exactly
    ``floor(outlier_fraction * n)`` samples, picked by a seeded permutation,
    get ``outlier_depth_shift`` added to their depth and are flagged.

    Raises:
        NoIntersectionError: if the laser line misses a board.
    """
    if rng is None:
        rng = np.random.default_rng(cfg.rng_seed)
    L = cfg.truth.L0 - slide.d
    lo, hi = cfg.depth_range
    out: List[LabeledSample] = []
    for k in range(cfg.n_positions):
        depth = lo + (k + rng.uniform()) / cfg.n_positions * (hi - lo)
        pose = _place_board(cfg, L, depth, rng)
        out.extend(_observe_line(cfg, pose, slide, cfg.points_per_image, rng))

    n_out = int(math.floor(cfg.outlier_fraction * len(out) + 1e-9))
    for i in rng.permutation(len(out))[:n_out]:
        s = out[i]
        shifted = s.sample._replace(z_c=s.sample.z_c + cfg.outlier_depth_shift)
        out[i] = s._replace(sample=shifted, is_outlier=True)
    return out


def samples_of(labeled: Sequence[LabeledSample]) -> List[DataSample]:
    return [s.sample for s in labeled]


AXES = ("x", "y", "z")


@dataclass
class OffsetStats:
    """Absolute per-axis localization errors at one slide offset (meters)."""

    d: float
    errors: np.ndarray

    def stats(self, axis: int) -> dict:
        e = self.errors[:, axis]
        q25, med, q75 = np.percentile(e, [25, 50, 75])
        return {"median": float(med), "q25": float(q25), "q75": float(q75), "max": float(e.max()), "n": int(len(e))}

    @property
    def max_errors(self) -> np.ndarray:
        return self.errors.max(axis=0)


def localization_study(
    cfg: SceneConfig,
    sweep: ScanSweepConfig,
    est: ExtrinsicParams,
    reference: str = "board",
) -> List[OffsetStats]:
    """Per-offset 3-D errors of the calibrated model against the scene.

    For each slide offset a fresh outlier-free data set is drawn, each
    observed ray is triangulated with ``est`` at baseline ``L0_hat - d``,
    and compared with the reference point. ``reference="board"`` uses the
    board-derived point ``z_c * (u_bar, v_bar, 1)`` (what a checkerboard rig
    measures); ``"physical"`` uses the noiseless laser point.
    """
    if reference not in ("board", "physical"):
        raise ValueError(f"reference must be 'board' or 'physical', got {reference!r}")
    clean = replace(cfg, outlier_fraction=0.0)
    streams = np.random.SeedSequence(cfg.rng_seed).spawn(len(sweep.offsets))
    out = []
    for d, seq in zip(sweep.offsets, streams):
        slide = SlideState(d)
        labeled = generate_samples(clean, slide, np.random.default_rng(seq))
        data = np.array([s.sample for s in labeled])
        hat = point_high_fidelity(NormalizedPoint(data[:, 0], data[:, 1]), est, slide)
        hat = np.column_stack([hat.x, hat.y, hat.z])
        if reference == "board":
            ref = data[:, 2:3] * np.column_stack([data[:, 0], data[:, 1], np.ones(len(data))])
        else:
            ref = np.array([s.truth_point for s in labeled])
        out.append(OffsetStats(d, np.abs(hat - ref)))
    return out


@dataclass
class IntervalScan:
    offsets: Tuple[float, ...]
    batches: List[Optional[List[LabeledSample]]]
    candidates: List[Optional[CameraPoint]]
    selected_index: int

    @property
    def selected(self) -> CameraPoint:
        return self.candidates[self.selected_index]


def select_candidate(candidates: Sequence[Optional[CameraPoint]]) -> int:
    """Index of the unmasked candidate with the median depth.

    Placeholder for a proper scoring function: with an even number of
    candidates the lower median is taken, ties go to the earliest batch.
    """
    live = [(c.z, i) for i, c in enumerate(candidates) if c is not None]
    if not live:
        raise AllOccludedError("every scan batch is occluded")
    live.sort()
    return live[(len(live) - 1) // 2][1]


def interval_scan(
    cfg: SceneConfig,
    start_d: float,
    est: Optional[ExtrinsicParams] = None,
    occluded: Optional[Sequence[bool]] = None,
    step: float = 0.01,
    n_steps: int = 5,
) -> IntervalScan:
    """Step the laser ``n_steps`` times by ``step`` across one fixed target.

    Each unmasked batch yields a candidate point (mean of its triangulated
    laser points under ``est``, the ground truth if omitted).

    Raises:
        AllOccludedError: if ``occluded`` masks every batch.
    """
    offsets = tuple(start_d + k * step for k in range(n_steps))
    slides = [SlideState(d) for d in offsets]
    occluded = list(occluded) if occluded is not None else [False] * n_steps
    if len(occluded) != n_steps:
        raise ValueError(f"expected {n_steps} occlusion flags, got {len(occluded)}")
    if all(occluded):
        raise AllOccludedError("every scan batch is occluded")
    est = cfg.truth if est is None else est

    rng = np.random.default_rng(cfg.rng_seed)
    lo, hi = cfg.depth_range
    mid = offsets[n_steps // 2]
    pose = _place_board(cfg, cfg.truth.L0 - mid, rng.uniform(lo, hi), rng)

    batches: List[Optional[List[LabeledSample]]] = []
    candidates: List[Optional[CameraPoint]] = []
    for slide, masked in zip(slides, occluded):
        batch = _observe_line(cfg, pose, slide, cfg.points_per_image, rng)
        if masked:
            batches.append(None)
            candidates.append(None)
            continue
        data = np.array([s.sample for s in batch])
        pts = point_high_fidelity(NormalizedPoint(data[:, 0], data[:, 1]), est, slide)
        batches.append(batch)
        candidates.append(CameraPoint(float(np.mean(pts.x)), float(np.mean(pts.y)), float(np.mean(pts.z))))
    return IntervalScan(offsets, batches, candidates, select_candidate(candidates))
