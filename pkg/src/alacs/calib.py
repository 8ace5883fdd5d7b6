"""Extrinsic calibration of the laser-camera pair.

Given samples ``(u_bar, v_bar, z_c)`` the parameters ``(alpha, L0, beta)``
minimize ``sum (z_c - z_hat)^2`` with
``z_hat = L0 / (sin(alpha) - u_bar cos(alpha) - v_bar tan(beta))``.

The reciprocal of the model is linear::

    1 / z = a + b u_bar + c v_bar,   a = sin(alpha)/L0,
                                     b = -cos(alpha)/L0,
                                     c = -tan(beta)/L0

so an ordinary least-squares solve in ``1/z`` gives an exact answer on
noiseless data and a good starting point otherwise. Levenberg-Marquardt then
refines it on the depth-space objective. :func:`ransac_calibrate` wraps both
in a hypothesize-and-verify loop to reject outliers.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import List, NamedTuple, Optional, Sequence

import numpy as np

from .errors import ALACSError, NoConsensusError, NonConvergenceError, RankDeficiencyError, SingularRayError
from .scanner import SINGULAR_TOL, ExtrinsicParams

LM_MAX_ITER = 500
LM_STEP_TOL = 1e-12
LM_GRAD_TOL = 1e-10
LM_LAMBDA0 = 1e-3

METHOD_LABELS = {
    1: "Low-fidelity model + All data",
    2: "Low-fidelity model + RANSAC",
    3: "High-fidelity model + All data",
    4: "High-fidelity model + RANSAC",
}


class DataSample(NamedTuple):
    u_bar: float
    v_bar: float
    z_c: float


@dataclass(frozen=True)
class RansacConfig:
    k_max: int = 200
    epsilon: float = 0.002
    subset_size: int = 4
    rng_seed: int = 0
    workers: int = 1

    def __post_init__(self) -> None:
        if self.k_max < 0:
            raise ValueError(f"k_max must be non-negative, got {self.k_max}")
        if not self.epsilon > 0:
            raise ValueError(f"epsilon must be positive, got {self.epsilon}")
        if self.subset_size < 3:
            raise ValueError(f"subset_size must be at least 3, got {self.subset_size}")

    @classmethod
    def from_dict(cls, d: dict) -> "RansacConfig":
        return cls(
            k_max=int(d.get("k_max", cls.k_max)),
            epsilon=float(d.get("epsilon_mm", cls.epsilon * 1e3)) * 1e-3,
            subset_size=int(d.get("subset_size", cls.subset_size)),
            rng_seed=int(d.get("rng_seed", cls.rng_seed)),
            workers=int(d.get("workers", cls.workers)),
        )

    def to_dict(self) -> dict:
        return {
            "k_max": self.k_max,
            "epsilon_mm": self.epsilon * 1e3,
            "subset_size": self.subset_size,
            "rng_seed": self.rng_seed,
            "workers": self.workers,
        }


@dataclass
class CalibrationReport:
    """Outcome of one calibration method.

    ``residuals`` covers every input sample (``z_c - z_hat``, meters; NaN
    where the ray is singular under the estimate). ``mean_abs_residual`` is
    taken over ``inliers``, which is the whole set for non-robust methods.
    """

    method: int
    params: ExtrinsicParams
    fit_beta: bool
    inliers: List[int]
    residuals: np.ndarray
    mean_abs_residual: float = field(init=False)
    mean_abs_residual_all: float = field(init=False)

    def __post_init__(self) -> None:
        r = np.abs(np.asarray(self.residuals, dtype=float))
        self.mean_abs_residual = float(np.mean(r[self.inliers])) if self.inliers else float("nan")
        self.mean_abs_residual_all = float(np.mean(r))

    @property
    def label(self) -> str:
        return METHOD_LABELS.get(self.method, f"Method {self.method}")

    def to_dict(self) -> dict:
        return {
            "method": self.method,
            "label": self.label,
            "alpha_deg": math.degrees(self.params.alpha),
            "L0_mm": self.params.L0 * 1e3,
            "beta_deg": math.degrees(self.params.beta) if self.fit_beta else None,
            "n_samples": int(len(self.residuals)),
            "inliers": [int(i) for i in self.inliers],
            "mean_error_mm": self.mean_abs_residual * 1e3,
            "mean_error_all_mm": self.mean_abs_residual_all * 1e3,
            "residuals_mm": [None if not math.isfinite(r) else r * 1e3 for r in map(float, self.residuals)],
        }


def as_array(samples) -> np.ndarray:
    """Samples (sequence of ``DataSample`` or ``(n, 3)`` array) as float array."""
    a = np.asarray(samples, dtype=float)
    if a.ndim != 2 or a.shape[1] != 3:
        raise ValueError(f"expected samples of shape (n, 3), got {a.shape}")
    if not np.all(np.isfinite(a)) or np.any(a[:, 2] <= 0):
        raise ValueError("samples must be finite with positive depth z_c")
    return a


def _theta(p: ExtrinsicParams, fit_beta: bool) -> np.ndarray:
    return np.array([p.alpha, p.L0, p.beta]) if fit_beta else np.array([p.alpha, p.L0])


def _params(theta: np.ndarray) -> ExtrinsicParams:
    beta = theta[2] if len(theta) == 3 else 0.0
    return ExtrinsicParams(float(theta[0]), float(theta[1]), float(beta))


def _denominator(theta, u, v):
    den = np.sin(theta[0]) - u * np.cos(theta[0])
    if len(theta) == 3:
        den = den - v * np.tan(theta[2])
    return den


def _residuals(theta, data):
    """``z - z_hat`` or ``None`` if any ray is singular under ``theta``."""
    den = _denominator(theta, data[:, 0], data[:, 1])
    if np.any(np.abs(den) < SINGULAR_TOL) or not np.all(np.isfinite(den)):
        return None
    return data[:, 2] - theta[1] / den


def residual_jacobian(theta, data) -> np.ndarray:
    """Jacobian of ``z - z_hat`` w.r.t. ``(alpha, L0[, beta])``, shape ``(n, len(theta))``."""
    u, v = data[:, 0], data[:, 1]
    alpha, L = theta[0], theta[1]
    den = _denominator(theta, u, v)
    den2 = den * den
    cols = [
        L * (np.cos(alpha) + u * np.sin(alpha)) / den2,
        -1.0 / den,
    ]
    if len(theta) == 3:
        cols.append(-L * v / (np.cos(theta[2]) ** 2 * den2))
    return np.column_stack(cols)


def residual(sample: DataSample, est: ExtrinsicParams) -> float:
    """Depth residual ``z_c - z_hat`` of one sample (meters).

    Raises:
        SingularRayError: if the sample's ray is parallel to the laser plane.
    """
    theta = _theta(est, True)
    r = _residuals(theta, as_array([sample]))
    if r is None:
        raise SingularRayError("sample ray is (nearly) parallel to the laser plane")
    return float(r[0])


def residuals(samples, est: ExtrinsicParams) -> np.ndarray:
    """Vectorized :func:`residual`; singular rays yield NaN instead of raising."""
    data = as_array(samples)
    den = _denominator(_theta(est, True), data[:, 0], data[:, 1])
    with np.errstate(divide="ignore", invalid="ignore"):
        r = data[:, 2] - est.L0 / den
    r[np.abs(den) < SINGULAR_TOL] = np.nan
    return r


def objective(samples, est: ExtrinsicParams) -> float:
    return float(np.sum(residuals(samples, est) ** 2))


def linear_init(samples, fit_beta: bool = True) -> ExtrinsicParams:
    """Closed-form estimate from the reciprocal-depth linear model.

    Raises:
        RankDeficiencyError: if the design matrix lacks full column rank
            (too few samples, or samples that do not vary in ``u_bar``/``v_bar``).
    """
    data = as_array(samples)
    cols = [np.ones(len(data)), data[:, 0]]
    if fit_beta:
        cols.append(data[:, 1])
    A = np.column_stack(cols)
    if len(data) < A.shape[1]:
        raise RankDeficiencyError(f"{len(data)} samples cannot fix {A.shape[1]} parameters")
    # column scaling keeps the rank test independent of coordinate magnitudes
    scale = np.linalg.norm(A, axis=0)
    if np.any(scale == 0):
        raise RankDeficiencyError("design matrix has an all-zero column")
    As = A / scale
    sv = np.linalg.svd(As, compute_uv=False)
    if sv[-1] <= 1e-10 * sv[0]:
        raise RankDeficiencyError("design matrix is rank deficient")
    coef, *_ = np.linalg.lstsq(As, 1.0 / data[:, 2], rcond=None)
    coef = coef / scale
    a, b = coef[0], coef[1]
    L = 1.0 / math.hypot(a, b)
    alpha = math.atan2(a, -b)
    beta = math.atan(-coef[2] * L) if fit_beta else 0.0
    return ExtrinsicParams(alpha, L, beta)


def refine(
    samples,
    init: ExtrinsicParams,
    fit_beta: bool = True,
    max_iter: int = LM_MAX_ITER,
) -> ExtrinsicParams:
    """Levenberg-Marquardt on the depth-space least-squares objective.

    With ``fit_beta=False`` only ``(alpha, L0)`` are free and ``beta`` is
    pinned to zero. The damping starts at ``LM_LAMBDA0`` and moves by a
    factor of ten per accepted/rejected step; the loop stops once the step
    norm drops below ``LM_STEP_TOL`` or the gradient norm below
    ``LM_GRAD_TOL``.

    Raises:
        SingularRayError: if ``init`` puts a sample ray on the laser plane.
        NonConvergenceError: after ``max_iter`` iterations.
    """
    data = as_array(samples)
    n_params = 3 if fit_beta else 2
    if len(data) < n_params:
        raise RankDeficiencyError(f"{len(data)} samples cannot fix {n_params} parameters")
    theta = _theta(init, fit_beta)
    r = _residuals(theta, data)
    if r is None:
        raise SingularRayError("initial estimate places a sample ray on the laser plane")
    cost = float(r @ r)
    lam = LM_LAMBDA0
    J = residual_jacobian(theta, data)
    for _ in range(max_iter):
        g = J.T @ r
        if np.linalg.norm(g) < LM_GRAD_TOL:
            return _params(theta)
        A = J.T @ J
        d = np.diag(A).copy()
        d[d <= 0] = 1e-300
        try:
            step = np.linalg.solve(A + lam * np.diag(d), -g)
        except np.linalg.LinAlgError:
            lam *= 10.0
            continue
        if np.linalg.norm(step) < LM_STEP_TOL:
            return _params(theta)
        trial = theta + step
        r_trial = _residuals(trial, data)
        cost_trial = float(r_trial @ r_trial) if r_trial is not None else math.inf
        if cost_trial < cost:
            theta, r, cost = trial, r_trial, cost_trial
            J = residual_jacobian(theta, data)
            lam /= 10.0
        else:
            lam *= 10.0
    raise NonConvergenceError(f"Levenberg-Marquardt did not converge in {max_iter} iterations")


def fit(samples, fit_beta: bool = True) -> ExtrinsicParams:
    """Linear initialization followed by :func:`refine`."""
    return refine(samples, linear_init(samples, fit_beta), fit_beta)


def _wrap(p: ExtrinsicParams) -> ExtrinsicParams:
    # alpha is periodic; keep estimates in (-pi, pi]
    return ExtrinsicParams(math.atan2(math.sin(p.alpha), math.cos(p.alpha)), p.L0, p.beta)


def _inlier_set(data, est: ExtrinsicParams, fit_beta: bool, epsilon: float) -> np.ndarray:
    p = est if fit_beta else ExtrinsicParams(est.alpha, est.L0, 0.0)
    r = residuals(data, p)
    with np.errstate(invalid="ignore"):
        return np.flatnonzero(np.abs(r) <= epsilon)


def _hypothesis(data, cfg: RansacConfig, fit_beta: bool, k: int) -> Optional[np.ndarray]:
    rng = np.random.default_rng([cfg.rng_seed, k])
    subset = rng.choice(len(data), size=cfg.subset_size, replace=False)
    try:
        est = fit(data[subset], fit_beta)
    except ALACSError:
        return None
    return _inlier_set(data, est, fit_beta, cfg.epsilon)


def best_consensus(results: Sequence[Optional[np.ndarray]]) -> Optional[np.ndarray]:
    """Largest inlier set in round order; an equal count never replaces an earlier set."""
    best: Optional[np.ndarray] = None
    for inliers in results:
        if inliers is not None and len(inliers) > (0 if best is None else len(best)):
            best = inliers
    return best


def ransac_calibrate(samples, cfg: RansacConfig = RansacConfig(), fit_beta: bool = True) -> CalibrationReport:
    """Robust calibration by random sample consensus.

    Runs exactly ``cfg.k_max`` rounds. Round ``k`` draws ``cfg.subset_size``
    samples with a generator seeded by ``(cfg.rng_seed, k)``, fits them, and
    counts samples whose absolute depth residual is at most ``cfg.epsilon``.
    The first largest inlier set wins; the final estimate is refit on it.
    Subsets that fail to fit are skipped but still count as a round.
    Rounds may run on ``cfg.workers`` threads without changing the result.

    Raises:
        NoConsensusError: if no round yields ``cfg.subset_size`` inliers.
    """
    data = as_array(samples)
    if len(data) < cfg.subset_size:
        raise RankDeficiencyError(f"{len(data)} samples, subset size is {cfg.subset_size}")
    rounds = range(cfg.k_max)
    if cfg.workers > 1:
        with ThreadPoolExecutor(max_workers=cfg.workers) as pool:
            results = list(pool.map(lambda k: _hypothesis(data, cfg, fit_beta, k), rounds))
    else:
        results = [_hypothesis(data, cfg, fit_beta, k) for k in rounds]

    best = best_consensus(results)
    best_size = 0 if best is None else len(best)
    if best is None or best_size < cfg.subset_size:
        raise NoConsensusError(
            f"best consensus set has {best_size} samples, need at least {cfg.subset_size}"
        )
    est = _wrap(fit(data[best], fit_beta))
    return CalibrationReport(
        method=4 if fit_beta else 2,
        params=est,
        fit_beta=fit_beta,
        inliers=[int(i) for i in best],
        residuals=residuals(data, est),
    )


def calibrate_all_data(samples, fit_beta: bool = True) -> CalibrationReport:
    data = as_array(samples)
    est = _wrap(fit(data, fit_beta))
    return CalibrationReport(
        method=3 if fit_beta else 1,
        params=est,
        fit_beta=fit_beta,
        inliers=list(range(len(data))),
        residuals=residuals(data, est),
    )


def run_method(method: int, samples, cfg: RansacConfig = RansacConfig()) -> CalibrationReport:
    if method == 1:
        return calibrate_all_data(samples, fit_beta=False)
    if method == 2:
        return ransac_calibrate(samples, cfg, fit_beta=False)
    if method == 3:
        return calibrate_all_data(samples, fit_beta=True)
    if method == 4:
        return ransac_calibrate(samples, cfg, fit_beta=True)
    raise ValueError(f"unknown method {method!r}; expected 1, 2, 3 or 4")


def compare_methods(samples, cfg: RansacConfig = RansacConfig()) -> List[CalibrationReport]:
    """Run all four methods on the same samples, in method order."""
    return [run_method(m, samples, cfg) for m in (1, 2, 3, 4)]


def format_table(reports: Sequence[CalibrationReport]) -> str:
    """Aligned text table: one row per method, angles in deg, lengths in mm."""
    header = ("", "alpha (deg)", "L0 (mm)", "beta (deg)", "Mean Error |z - z_hat| (mm)")
    rows = []
    for rep in reports:
        rows.append(
            (
                f"Method {rep.method} ({rep.label})",
                f"{math.degrees(rep.params.alpha):.2f}",
                f"{rep.params.L0 * 1e3:.2f}",
                f"{math.degrees(rep.params.beta):.2f}" if rep.fit_beta else "/",
                f"{rep.mean_abs_residual * 1e3:.2f}",
            )
        )
    widths = [max(len(r[i]) for r in [header, *rows]) for i in range(len(header))]
    lines = []
    for r in [header, *rows]:
        cells = [r[0].ljust(widths[0])] + [c.rjust(w) for c, w in zip(r[1:], widths[1:])]
        lines.append("  ".join(cells).rstrip())
    rule = "-" * len(lines[0])
    return "\n".join([rule, lines[0], rule, *lines[1:], rule])
