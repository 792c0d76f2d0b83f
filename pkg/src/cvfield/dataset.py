"""Demonstration loading and preprocessing.

CSV layout: a header row `t,x1,...,xn` optionally extended by velocity
columns `v1,...,vn`, with one row per sample.  A file may instead carry a
leading `demo_id` column to pack several demonstrations into one file;
the variant is detected from the header.  A directory path is read as one
file per demonstration (sorted by name).

Positions are millimetres, times seconds.  On load every demonstration is
translated so that its end point, the motion goal, sits exactly at the
origin; the goal of the set (taken from the first demonstration, in the
original frame) is kept for reference.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import DataError, DimensionError, ParseError


@dataclass
class Demonstration:
    times: np.ndarray            # (T,), strictly increasing, seconds
    positions: np.ndarray        # (T, n), mm
    velocities: np.ndarray | None = None   # (T, n), mm/s

    def __post_init__(self):
        self.times = np.asarray(self.times, dtype=float).ravel()
        self.positions = np.atleast_2d(np.asarray(self.positions, dtype=float))
        if self.times.shape[0] != self.positions.shape[0]:
            raise DimensionError("times and positions must have equal length")
        if self.times.size == 0:
            raise DataError("empty demonstration")
        if np.any(np.diff(self.times) <= 0):
            raise DataError("times must be strictly increasing")
        if self.velocities is not None:
            self.velocities = np.atleast_2d(np.asarray(self.velocities, dtype=float))
            if self.velocities.shape != self.positions.shape:
                raise DimensionError("velocities must match positions in shape")

    @property
    def length(self):
        return self.times.shape[0]

    @property
    def dim(self):
        return self.positions.shape[1]

    @property
    def duration(self):
        return float(self.times[-1] - self.times[0])


@dataclass
class DemoSet:
    demos: list
    goal: np.ndarray   # goal in the source frame of the first demonstration

    @property
    def dim(self):
        return self.demos[0].dim


@dataclass
class PreprocessConfig:
    smoothing_window: int = 5     # odd, >= 1
    resample_len: int = 1000
    constraint_points: int = 250

    def validate(self):
        if self.smoothing_window < 1 or self.smoothing_window % 2 == 0:
            raise DataError("smoothing_window must be odd and >= 1")
        if self.resample_len < 2:
            raise DataError("resample_len must be at least 2")
        if self.constraint_points < 1:
            raise DataError("constraint_points must be at least 1")


def _parse_header(fields):
    fields = [f.strip().lower() for f in fields]
    has_id = fields and fields[0] == "demo_id"
    body = fields[1:] if has_id else fields
    if not body or body[0] != "t":
        raise ParseError("header must start with 't' (optionally after 'demo_id')", line=1)
    xcols = [c for c in body[1:] if c.startswith("x")]
    vcols = [c for c in body[1:] if c.startswith("v")]
    n = len(xcols)
    if n == 0 or body[1:] != [f"x{i}" for i in range(1, n + 1)] + [f"v{i}" for i in range(1, len(vcols) + 1)]:
        raise ParseError(f"unrecognized column layout {fields}", line=1)
    if vcols and len(vcols) != n:
        raise ParseError(f"{len(vcols)} velocity columns for {n} position columns", line=1)
    return has_id, n, bool(vcols)


def _parse_file(path, has_velocities):
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise ParseError(f"{path}: empty file", line=1)
        has_id, n, file_has_v = _parse_header(header)
        if has_velocities is True and not file_has_v:
            raise ParseError(f"{path}: velocity columns required but absent", line=1)
        want_v = file_has_v if has_velocities is None else bool(has_velocities)
        ncols = len(header)
        groups, order = {}, []
        for lineno, row in enumerate(reader, start=2):
            if not row or all(not c.strip() for c in row):
                continue
            if len(row) != ncols:
                raise ParseError(f"{path}: expected {ncols} fields, got {len(row)}", line=lineno)
            try:
                vals = [float(c) for c in (row[1:] if has_id else row)]
            except ValueError as exc:
                raise ParseError(f"{path}: {exc}", line=lineno)
            key = row[0].strip() if has_id else None
            if key not in groups:
                groups[key] = []
                order.append(key)
            groups[key].append(vals)
    demos = []
    for key in order:
        block = np.asarray(groups[key], dtype=float)
        vel = block[:, 1 + n:1 + 2 * n] if (want_v and file_has_v) else None
        try:
            demos.append(Demonstration(block[:, 0], block[:, 1:1 + n], vel))
        except (DataError, DimensionError) as exc:
            raise DataError(f"{path}" + (f" (demo_id {key})" if key else "") + f": {exc}")
    if not demos:
        raise ParseError(f"{path}: no data rows")
    return demos


def load_demonstrations(path, has_velocities=None):
    """Load one or more demonstrations and move every goal to the origin.

    `path` is a CSV file or a directory of CSV files.  `has_velocities`
    forces the expectation of velocity columns (None = infer from header).
    """
    path = Path(path)
    if path.is_dir():
        files = sorted(path.glob("*.csv"))
        if not files:
            raise ParseError(f"{path}: no .csv files in directory")
    else:
        files = [path]
    demos = []
    for f in files:
        demos.extend(_parse_file(f, has_velocities))
    dim = demos[0].dim
    for d in demos:
        if d.dim != dim:
            raise DimensionError(f"demonstrations mix dimensions {dim} and {d.dim}")
    goal = demos[0].positions[-1].copy()
    for d in demos:
        d.positions = d.positions - d.positions[-1]
    return DemoSet(demos, goal)


def _moving_average(values, window):
    # shrinking window at the edges keeps constants exactly constant
    half = window // 2
    T = values.shape[0]
    csum = np.vstack([np.zeros((1, values.shape[1])), np.cumsum(values, axis=0)])
    lo = np.clip(np.arange(T) - half, 0, T)
    hi = np.clip(np.arange(T) + half + 1, 0, T)
    return (csum[hi] - csum[lo]) / (hi - lo)[:, None]


def finite_difference_velocities(demo, cfg=None):
    """Estimate velocities by central differences plus moving-average smoothing.

    Interior samples use the centered difference over the bracketing
    timestamps, the ends use one-sided differences; affine trajectories
    reproduce their exact velocity.  Returns a new Demonstration.
    """
    cfg = cfg or PreprocessConfig()
    cfg.validate()
    if demo.length < 3:
        raise DataError("need at least 3 samples for central differences")
    t, x = demo.times, demo.positions
    v = np.empty_like(x)
    v[1:-1] = (x[2:] - x[:-2]) / (t[2:] - t[:-2])[:, None]
    v[0] = (x[1] - x[0]) / (t[1] - t[0])
    v[-1] = (x[-1] - x[-2]) / (t[-1] - t[-2])
    return Demonstration(t.copy(), x.copy(), _moving_average(v, cfg.smoothing_window))


def resample_and_average(dset, cfg=None):
    """Pointwise average of all demonstrations on a common time grid.

    Every demonstration is linearly resampled to `resample_len` points
    spanning its own duration rescaled to the mean duration; velocities
    pick up the d(own time)/d(common time) factor so the resampled
    trajectory stays dynamically consistent.  The averaged trajectory ends
    exactly at the origin.
    """
    cfg = cfg or PreprocessConfig()
    cfg.validate()
    demos = dset.demos
    if not demos:
        raise DataError("no demonstrations to average")
    for d in demos:
        if d.velocities is None:
            raise DataError("all demonstrations need velocities before averaging")
        if d.length < 2:
            raise DataError("each demonstration needs at least 2 samples")
    mean_T = float(np.mean([d.duration for d in demos]))
    grid = np.linspace(0.0, mean_T, cfg.resample_len)
    pos = np.zeros((cfg.resample_len, dset.dim))
    vel = np.zeros_like(pos)
    for d in demos:
        scale = d.duration / mean_T
        s = d.times[0] + grid * scale
        for c in range(d.dim):
            pos[:, c] += np.interp(s, d.times, d.positions[:, c])
            vel[:, c] += np.interp(s, d.times, d.velocities[:, c]) * scale
    pos /= len(demos)
    vel /= len(demos)
    pos[-1] = 0.0
    return Demonstration(grid, pos, vel)


def subsample_constraint_points(demo, k):
    """k positions at uniform index stride, always including both ends.

    k >= length returns every sample; the result is sorted, duplicate-free
    and a subset of the demonstration's positions.
    """
    if k < 1:
        raise DataError("k must be at least 1")
    T = demo.length
    if k >= T:
        idx = np.arange(T)
    elif k == 1:
        idx = np.array([0])
    else:
        idx = np.unique(np.round(np.linspace(0, T - 1, k)).astype(int))
    return demo.positions[idx].copy()
