"""Command-line front end.

Subcommands ``simulate``, ``calibrate``, ``evaluate`` and ``compare`` each
write their machine-readable results plus a ``manifest.json`` into the
``--out`` directory and print a short human-readable summary.

Exit codes:
    0  success
    2  unreadable, missing or malformed input / config
    3  scene generation or evaluation failure
    4  too few samples for the requested method
    5  RANSAC found no consensus set
    6  other calibration failure (non-convergence, singular rays)
"""

from __future__ import annotations

import argparse
import csv
import math
import sys
from dataclasses import replace
from pathlib import Path
from typing import List, Optional

from . import __version__
from .calib import RansacConfig, compare_methods, format_table, run_method
from .errors import ALACSError, InputError, NoConsensusError, RankDeficiencyError
from .io import dump_json, load_json, read_samples_csv, write_samples_csv
from .scanner import ExtrinsicParams, SlideState
from .sim import AXES, SceneConfig, ScanSweepConfig, generate_samples, localization_study, samples_of

EXIT_OK = 0
EXIT_INPUT = 2
EXIT_GENERATION = 3
EXIT_INSUFFICIENT = 4
EXIT_NO_CONSENSUS = 5
EXIT_CALIBRATION = 6


class _Exit(Exception):
    def __init__(self, code: int, message: str):
        super().__init__(message)
        self.code = code


def _manifest(command: str, out: Path, seed: Optional[int], configs: dict, options: dict) -> dict:
    return {
        "command": command,
        "config_paths": {k: str(v) for k, v in configs.items() if v is not None},
        "rng_seed": seed,
        "output_dir": str(out),
        "toolkit_version": __version__,
        "options": options,
    }


def _scene(path: str, seed: Optional[int]) -> tuple:
    try:
        raw = load_json(path)
        if not isinstance(raw, dict):
            raise InputError(f"{path}: expected a JSON object")
        cfg = SceneConfig.from_dict(raw)
        slide = SlideState(float(raw.get("slide_d_mm", 0.0)) * 1e-3)
    except InputError:
        raise
    except (KeyError, TypeError, ValueError) as exc:
        raise InputError(f"{path}: invalid scene config ({exc})") from exc
    if seed is not None:
        cfg = replace(cfg, rng_seed=seed)
    return cfg, slide


def _ransac_config(args) -> RansacConfig:
    try:
        cfg = RansacConfig.from_dict(load_json(args.config)) if args.config else RansacConfig()
        if args.seed is not None:
            cfg = replace(cfg, rng_seed=args.seed)
        if args.epsilon_mm is not None:
            cfg = replace(cfg, epsilon=args.epsilon_mm * 1e-3)
        if args.kmax is not None:
            cfg = replace(cfg, k_max=args.kmax)
        if args.workers is not None:
            cfg = replace(cfg, workers=args.workers)
    except InputError:
        raise
    except (KeyError, TypeError, ValueError) as exc:
        raise InputError(f"invalid RANSAC config ({exc})") from exc
    return cfg


def _calibrate(samples, method: str, cfg: RansacConfig):
    methods = [1, 2, 3, 4] if method == "all" else [int(method)]
    need = max(cfg.subset_size if m in (2, 4) else (3 if m == 3 else 2) for m in methods)
    if len(samples) < need:
        raise _Exit(EXIT_INSUFFICIENT, f"{len(samples)} samples given, method {method} needs at least {need}")
    try:
        if method == "all":
            return compare_methods(samples, cfg)
        return [run_method(methods[0], samples, cfg)]
    except NoConsensusError as exc:
        raise _Exit(EXIT_NO_CONSENSUS, str(exc)) from exc
    except RankDeficiencyError as exc:
        raise _Exit(EXIT_INSUFFICIENT, str(exc)) from exc
    except ALACSError as exc:
        raise _Exit(EXIT_CALIBRATION, str(exc)) from exc


def _print_estimates(reports) -> None:
    for rep in reports:
        beta = f"{math.degrees(rep.params.beta):.4f} deg" if rep.fit_beta else "/"
        print(
            f"Method {rep.method}: alpha = {math.degrees(rep.params.alpha):.4f} deg, "
            f"L0 = {rep.params.L0 * 1e3:.3f} mm, beta = {beta}, "
            f"mean |z - z_hat| = {rep.mean_abs_residual * 1e3:.3f} mm "
            f"({len(rep.inliers)}/{len(rep.residuals)} samples)"
        )


def _write_reports(out: Path, reports, method: str) -> None:
    if method == "all":
        dump_json({"reports": [r.to_dict() for r in reports]}, out / "report.json")
        (out / "table.txt").write_text(format_table(reports) + "\n", encoding="utf-8")
    else:
        dump_json(reports[0].to_dict(), out / "report.json")


def cmd_simulate(args) -> int:
    cfg, slide = _scene(args.config, args.seed)
    out = Path(args.out)
    try:
        labeled = generate_samples(cfg, slide)
    except (ALACSError, ValueError) as exc:
        raise _Exit(EXIT_GENERATION, f"scene generation failed: {exc}") from exc
    out.mkdir(parents=True, exist_ok=True)
    write_samples_csv(out / "samples.csv", samples_of(labeled), [s.is_outlier for s in labeled])
    dump_json(
        _manifest("simulate", out, cfg.rng_seed, {"scene": args.config}, {"scene": cfg.to_dict(), "slide_d_mm": slide.d * 1e3}),
        out / "manifest.json",
    )
    n_out = sum(s.is_outlier for s in labeled)
    print(f"wrote {len(labeled)} samples ({n_out} outliers) to {out / 'samples.csv'}")
    return EXIT_OK


def cmd_calibrate(args) -> int:
    samples = read_samples_csv(args.samples)
    cfg = _ransac_config(args)
    reports = _calibrate(samples, args.method, cfg)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    _write_reports(out, reports, args.method)
    dump_json(
        _manifest(
            "calibrate",
            out,
            cfg.rng_seed,
            {"samples": args.samples, "ransac": args.config},
            {"method": args.method, "ransac": cfg.to_dict()},
        ),
        out / "manifest.json",
    )
    if args.method == "all":
        print(format_table(reports))
    _print_estimates(reports)
    return EXIT_OK


def _load_estimate(path: str) -> ExtrinsicParams:
    raw = load_json(path)
    try:
        if isinstance(raw, dict) and "reports" in raw:
            by_method = {r["method"]: r for r in raw["reports"]}
            raw = by_method.get(4) or raw["reports"][-1]
        return ExtrinsicParams.from_dict(raw)
    except (KeyError, TypeError, ValueError, IndexError) as exc:
        raise InputError(f"{path}: not an extrinsics estimate ({exc})") from exc


def cmd_evaluate(args) -> int:
    cfg, _ = _scene(args.config, args.seed)
    est = _load_estimate(args.estimate)
    try:
        sweep = ScanSweepConfig.from_dict(load_json(args.sweep)) if args.sweep else ScanSweepConfig()
    except InputError:
        raise
    except (KeyError, TypeError, ValueError) as exc:
        raise InputError(f"{args.sweep}: invalid sweep config ({exc})") from exc
    try:
        stats = localization_study(cfg, sweep, est, reference=args.reference)
    except (ALACSError, ValueError) as exc:
        raise _Exit(EXIT_GENERATION, f"evaluation failed: {exc}") from exc
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    with (out / "localization.csv").open("w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["d_mm", "axis", "n", "median_mm", "q25_mm", "q75_mm", "max_mm"])
        for off in stats:
            for i, axis in enumerate(AXES):
                s = off.stats(i)
                w.writerow(
                    [repr(off.d * 1e3), axis, s["n"]]
                    + [repr(s[k] * 1e3) for k in ("median", "q25", "q75", "max")]
                )
    dump_json(
        _manifest(
            "evaluate",
            out,
            cfg.rng_seed,
            {"scene": args.config, "estimate": args.estimate, "sweep": args.sweep},
            {"reference": args.reference, "offsets_mm": [d * 1e3 for d in sweep.offsets]},
        ),
        out / "manifest.json",
    )
    print(f"{'d (mm)':>7}  {'max |dx|':>9}  {'max |dy|':>9}  {'max |dz|':>9}   (mm)")
    for off in stats:
        mx = off.max_errors * 1e3
        print(f"{off.d * 1e3:7.1f}  {mx[0]:9.3f}  {mx[1]:9.3f}  {mx[2]:9.3f}")
    return EXIT_OK


def cmd_compare(args) -> int:
    cfg, slide = _scene(args.config, args.seed)
    rcfg = _ransac_config(argparse.Namespace(**{**vars(args), "config": args.ransac}))
    try:
        labeled = generate_samples(cfg, slide)
    except (ALACSError, ValueError) as exc:
        raise _Exit(EXIT_GENERATION, f"scene generation failed: {exc}") from exc
    reports = _calibrate(samples_of(labeled), "all", rcfg)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    write_samples_csv(out / "samples.csv", samples_of(labeled), [s.is_outlier for s in labeled])
    _write_reports(out, reports, "all")
    truth = cfg.truth
    errors = [
        {
            "method": r.method,
            "alpha_err_deg": math.degrees(r.params.alpha - truth.alpha),
            "L0_err_mm": (r.params.L0 - truth.L0) * 1e3,
            "beta_err_deg": math.degrees(r.params.beta - truth.beta) if r.fit_beta else None,
        }
        for r in reports
    ]
    dump_json({"truth": truth.to_dict(), "errors": errors}, out / "parameter_errors.json")
    dump_json(
        _manifest(
            "compare",
            out,
            cfg.rng_seed,
            {"scene": args.config, "ransac": args.ransac},
            {"scene": cfg.to_dict(), "ransac": rcfg.to_dict()},
        ),
        out / "manifest.json",
    )
    print(format_table(reports))
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="alacs", description="Laser-camera scanner calibration toolkit")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    def ransac_flags(p, method=True):
        if method:
            p.add_argument("--method", choices=("1", "2", "3", "4", "all"), default="4")
        p.add_argument("--epsilon-mm", type=float, default=None, help="inlier threshold (mm)")
        p.add_argument("--kmax", type=int, default=None, help="RANSAC rounds")
        p.add_argument("--workers", type=int, default=None, help="threads for hypothesis rounds")

    p = sub.add_parser("simulate", help="generate synthetic calibration samples")
    p.add_argument("--config", required=True, help="scene config JSON")
    p.add_argument("--out", required=True, help="output directory")
    p.add_argument("--seed", type=int, default=None)
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("calibrate", help="estimate (alpha, L0, beta) from a samples CSV")
    p.add_argument("--samples", required=True, help="CSV with u_bar, v_bar, z_c_m")
    p.add_argument("--config", default=None, help="RANSAC config JSON")
    p.add_argument("--out", required=True, help="output directory")
    p.add_argument("--seed", type=int, default=None)
    ransac_flags(p)
    p.set_defaults(func=cmd_calibrate)

    p = sub.add_parser("evaluate", help="localization error statistics over slide offsets")
    p.add_argument("--config", required=True, help="scene config JSON")
    p.add_argument("--estimate", required=True, help="extrinsics JSON (alpha_deg, L0_mm, beta_deg) or report")
    p.add_argument("--sweep", default=None, help="sweep config JSON with offsets_mm")
    p.add_argument("--out", required=True, help="output directory")
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--reference", choices=("board", "physical"), default="board")
    p.set_defaults(func=cmd_evaluate)

    p = sub.add_parser("compare", help="simulate a scene and run all four calibration methods")
    p.add_argument("--config", required=True, help="scene config JSON")
    p.add_argument("--ransac", default=None, help="RANSAC config JSON")
    p.add_argument("--out", required=True, help="output directory")
    p.add_argument("--seed", type=int, default=None)
    ransac_flags(p, method=False)
    p.set_defaults(func=cmd_compare)
    return parser


def main(argv: Optional[List[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except _Exit as exc:
        print(f"error: {exc}", file=sys.stderr)
        return exc.code
    except InputError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT


if __name__ == "__main__":
    sys.exit(main())
