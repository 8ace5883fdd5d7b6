"""CSV and JSON file formats.

Units at file boundaries are degrees and millimeters, except the sample and
corner CSVs whose column names carry their unit (``z_c_m``, ``board_x_m``).
Floats are written with ``repr`` so files round-trip exactly and identical
inputs give byte-identical outputs.
"""

from __future__ import annotations

import csv
import json
from pathlib import Path
from typing import Iterable, List, Sequence, Union

from .calib import DataSample
from .camera import PixelPoint
from .errors import InputError
from .target import CornerObservation

PathLike = Union[str, Path]

SAMPLE_COLUMNS = ("u_bar", "v_bar", "z_c_m")
CORNER_COLUMNS = ("board_x_m", "board_y_m", "pixel_u", "pixel_v")


def load_json(path: PathLike) -> dict:
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as exc:
        raise InputError(f"cannot read {path}: {exc.strerror or exc}") from exc
    try:
        return json.loads(text)
    except json.JSONDecodeError as exc:
        raise InputError(f"{path}: invalid JSON ({exc.msg} at line {exc.lineno})") from exc


def dump_json(obj, path: PathLike) -> None:
    Path(path).write_text(json.dumps(obj, indent=2, sort_keys=True, allow_nan=False) + "\n", encoding="utf-8")


def _read_rows(path: PathLike, required: Sequence[str]) -> List[dict]:
    path = Path(path)
    try:
        with path.open(newline="", encoding="utf-8") as fh:
            reader = csv.DictReader(fh)
            missing = [c for c in required if c not in (reader.fieldnames or [])]
            if missing:
                raise InputError(f"{path}: missing column(s) {', '.join(missing)}")
            return list(reader)
    except OSError as exc:
        raise InputError(f"cannot read {path}: {exc.strerror or exc}") from exc


def _float(row: dict, key: str, path: PathLike, lineno: int) -> float:
    try:
        return float(row[key])
    except (TypeError, ValueError):
        raise InputError(f"{path}:{lineno}: column {key!r} is not a number: {row[key]!r}") from None


def read_samples_csv(path: PathLike) -> List[DataSample]:
    rows = _read_rows(path, SAMPLE_COLUMNS)
    return [
        DataSample(*(_float(r, c, path, i + 2) for c in SAMPLE_COLUMNS))
        for i, r in enumerate(rows)
    ]


def write_samples_csv(path: PathLike, samples: Iterable[DataSample], outlier_flags: Iterable[bool] = None) -> None:
    samples = list(samples)
    with Path(path).open("w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        if outlier_flags is None:
            w.writerow(SAMPLE_COLUMNS)
            for s in samples:
                w.writerow([repr(float(x)) for x in s])
        else:
            w.writerow([*SAMPLE_COLUMNS, "is_outlier"])
            for s, flag in zip(samples, outlier_flags):
                w.writerow([*(repr(float(x)) for x in s), int(bool(flag))])


def read_corners_csv(path: PathLike) -> List[CornerObservation]:
    rows = _read_rows(path, CORNER_COLUMNS)
    out = []
    for i, r in enumerate(rows):
        x, y, u, v = (_float(r, c, path, i + 2) for c in CORNER_COLUMNS)
        out.append(CornerObservation((x, y), PixelPoint(u, v)))
    return out


def write_corners_csv(path: PathLike, corners: Iterable[CornerObservation]) -> None:
    with Path(path).open("w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(CORNER_COLUMNS)
        for c in corners:
            w.writerow([repr(float(c.board_xy[0])), repr(float(c.board_xy[1])), repr(float(c.pixel.u)), repr(float(c.pixel.v))])
