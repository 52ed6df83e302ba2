"""Ingestion and preprocessing of multichannel sensor time series.

Snapshot files are CSV with a ``time,<id1>,...,<idM>`` header, one row per
snapshot, time in seconds.  Layout files are CSV with an ``id,x,y[,z]``
header, coordinates in meters, and an optional first-line comment
``# grid rows=R cols=C dx=<m> dy=<m>`` declaring a rectangular lattice.

Timestamps are parsed with exact decimal arithmetic so that the sampling
period inferred from a file written by :func:`write_snapshots` is bit-exact,
and uniformity violations are detected independent of float rounding.
"""

from __future__ import annotations

import csv
import re
from dataclasses import dataclass
from decimal import Decimal, InvalidOperation, localcontext
from fractions import Fraction
from pathlib import Path

import numpy as np

from .errors import (
    DuplicateError,
    GeometryError,
    ParseError,
    TooShortError,
    UniformityError,
)

#: relative tolerance for timestamp uniformity, as a fraction of dt
UNIFORMITY_RTOL = Fraction(1, 10**6)

#: absolute tolerance (meters) for matching positions to a declared lattice
GRID_MATCH_TOL = 1e-9


@dataclass(frozen=True)
class SnapshotMatrix:
    """Uniformly sampled multichannel record: M channels by N snapshots.

    Attributes
    ----------
    values : ndarray, shape (M, N)
        One row per channel, one column per snapshot, float64.
    dt : float
        Sampling period in seconds, strictly positive.
    t0 : float
        Timestamp of the first snapshot in seconds (informational).
    channel_ids : tuple of str
        Unique channel labels, same order as the rows of ``values``.
    """

    values: np.ndarray
    dt: float
    t0: float
    channel_ids: tuple[str, ...]

    def __post_init__(self):
        values = np.asarray(self.values, dtype=float)
        if values.ndim != 2:
            raise ParseError("snapshot values must be a 2-D channels-by-snapshots array")
        object.__setattr__(self, "values", values)
        values.setflags(write=False)
        if values.shape[0] != len(self.channel_ids):
            raise ParseError(
                f"{values.shape[0]} value rows but {len(self.channel_ids)} channel ids"
            )
        if values.shape[1] < 3:
            raise TooShortError(
                f"need at least 3 snapshots, got {values.shape[1]}"
            )
        if not np.all(np.isfinite(values)):
            raise ParseError("snapshot values contain NaN or Inf")
        if not (isinstance(self.dt, (int, float)) and np.isfinite(self.dt) and self.dt > 0):
            raise ParseError(f"sampling period must be finite and positive, got {self.dt}")
        if len(set(self.channel_ids)) != len(self.channel_ids):
            raise DuplicateError("channel ids are not unique")
        object.__setattr__(self, "channel_ids", tuple(self.channel_ids))

    @property
    def n_channels(self) -> int:
        return self.values.shape[0]

    @property
    def n_snapshots(self) -> int:
        return self.values.shape[1]

    def with_values(self, values: np.ndarray) -> "SnapshotMatrix":
        """Copy of this record with the same clock and ids but new values."""
        return SnapshotMatrix(values, self.dt, self.t0, self.channel_ids)


@dataclass(frozen=True)
class GridSpec:
    """Declared rectangular lattice: ``rows`` lines along y, ``cols`` along x."""

    rows: int
    cols: int
    dx: float
    dy: float

    def __post_init__(self):
        if self.rows < 1 or self.cols < 1:
            raise GeometryError("grid declaration needs rows >= 1 and cols >= 1")
        if self.cols > 1 and not self.dx > 0:
            raise GeometryError("grid dx must be positive")
        if self.rows > 1 and not self.dy > 0:
            raise GeometryError("grid dy must be positive")


@dataclass(frozen=True)
class SensorLayout:
    """Channel-to-location map in room coordinates (meters).

    ``positions[i]`` is the coordinate of ``channel_ids[i]``; the spatial
    dimension ``d`` is the number of coordinate columns.  When ``grid`` is
    declared the positions must form the declared lattice to within
    ``GRID_MATCH_TOL``; the row/column index of each sensor is then exposed
    by :meth:`grid_indices`.
    """

    channel_ids: tuple[str, ...]
    positions: np.ndarray
    grid: GridSpec | None = None

    def __post_init__(self):
        pos = np.asarray(self.positions, dtype=float)
        if pos.ndim != 2 or pos.shape[1] not in (1, 2, 3):
            raise GeometryError("positions must be an (M, d) array with d in {1, 2, 3}")
        object.__setattr__(self, "positions", pos)
        pos.setflags(write=False)
        object.__setattr__(self, "channel_ids", tuple(self.channel_ids))
        if pos.shape[0] != len(self.channel_ids):
            raise GeometryError("number of positions does not match number of ids")
        if len(set(self.channel_ids)) != len(self.channel_ids):
            raise DuplicateError("duplicate sensor id in layout")
        if not np.all(np.isfinite(pos)):
            raise GeometryError("sensor coordinates contain NaN or Inf")
        seen: dict[tuple, str] = {}
        for cid, p in zip(self.channel_ids, pos):
            key = tuple(p.tolist())
            if key in seen:
                raise GeometryError(
                    f"sensors {seen[key]!r} and {cid!r} share coordinates {key}"
                )
            seen[key] = cid
        if self.grid is not None:
            self._check_grid()

    @property
    def d(self) -> int:
        return self.positions.shape[1]

    @property
    def n_sensors(self) -> int:
        return self.positions.shape[0]

    def _check_grid(self):
        g = self.grid
        if self.d != 2:
            raise GeometryError("grid declarations are only supported for d = 2")
        if g.rows * g.cols != self.n_sensors:
            raise GeometryError(
                f"grid declares {g.rows}x{g.cols} points but layout has {self.n_sensors}"
            )
        self.grid_indices()

    def grid_indices(self) -> np.ndarray:
        """Per-sensor (row, col) lattice indices for a declared grid.

        Raises GeometryError if positions deviate from the lattice by more
        than ``GRID_MATCH_TOL`` or do not fill it exactly once.
        """
        if self.grid is None:
            raise GeometryError("layout has no grid declaration")
        g = self.grid
        x0 = float(self.positions[:, 0].min())
        y0 = float(self.positions[:, 1].min())
        out = np.zeros((self.n_sensors, 2), dtype=int)
        filled = np.zeros((g.rows, g.cols), dtype=bool)
        for i, (x, y) in enumerate(self.positions):
            col = int(round((x - x0) / g.dx)) if g.cols > 1 else 0
            row = int(round((y - y0) / g.dy)) if g.rows > 1 else 0
            if not (0 <= row < g.rows and 0 <= col < g.cols):
                raise GeometryError(
                    f"sensor {self.channel_ids[i]!r} falls outside the declared grid"
                )
            ex = x0 + col * g.dx if g.cols > 1 else x0
            ey = y0 + row * g.dy if g.rows > 1 else y0
            if abs(x - ex) > GRID_MATCH_TOL or abs(y - ey) > GRID_MATCH_TOL:
                raise GeometryError(
                    f"sensor {self.channel_ids[i]!r} at ({x}, {y}) is off the "
                    f"declared lattice point ({ex}, {ey})"
                )
            if filled[row, col]:
                raise GeometryError(f"two sensors map to grid cell ({row}, {col})")
            filled[row, col] = True
            out[i] = (row, col)
        return out

    def positions_for(self, channel_ids) -> np.ndarray:
        """Positions reordered to match the given channel ids.

        Every requested id must be present in the layout exactly once.
        """
        index = {cid: i for i, cid in enumerate(self.channel_ids)}
        missing = [cid for cid in channel_ids if cid not in index]
        if missing:
            raise GeometryError(f"layout has no position for channels {missing}")
        return self.positions[[index[cid] for cid in channel_ids]]

    def reordered_to(self, channel_ids) -> "SensorLayout":
        """Layout restricted/reordered to the given channel ids."""
        return SensorLayout(tuple(channel_ids), self.positions_for(channel_ids), self.grid)


def _parse_time(cell: str, row: int) -> tuple[Fraction, float]:
    try:
        dec = Decimal(cell.strip())
    except InvalidOperation:
        raise ParseError(f"non-numeric timestamp {cell!r} at data row {row}") from None
    if not dec.is_finite():
        raise ParseError(f"non-finite timestamp {cell!r} at data row {row}")
    return Fraction(dec), float(dec)


def load_snapshots(path, dt_override: float | None = None) -> SnapshotMatrix:
    """Load and validate a snapshot CSV.

    The sampling period is inferred from the first two timestamps unless
    ``dt_override`` is given; all consecutive spacings must agree with the
    inferred spacing to within one part in 10^6.

    Raises
    ------
    UniformityError
        Non-uniform or non-increasing timestamps; names the first offending
        data row (1-based, header excluded).
    ParseError
        Missing or non-numeric cell.
    TooShortError
        Fewer than 3 data rows.
    """
    path = Path(path)
    with path.open(newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise TooShortError(f"{path}: empty file") from None
        if len(header) < 2 or header[0].strip() != "time":
            raise ParseError(f"{path}: header must be 'time,<id1>,...', got {header!r}")
        ids = tuple(h.strip() for h in header[1:])
        times: list[Fraction] = []
        t_floats: list[float] = []
        rows: list[list[float]] = []
        for r, rec in enumerate(reader, start=1):
            if len(rec) != len(header):
                raise ParseError(
                    f"{path}: data row {r} has {len(rec)} cells, expected {len(header)}"
                )
            t_frac, t_float = _parse_time(rec[0], r)
            vals = []
            for c, cell in enumerate(rec[1:], start=1):
                text = cell.strip()
                if not text:
                    raise ParseError(f"{path}: missing value at data row {r}, column {c + 1}")
                try:
                    v = float(text)
                except ValueError:
                    raise ParseError(
                        f"{path}: non-numeric value {cell!r} at data row {r}, column {c + 1}"
                    ) from None
                vals.append(v)
            times.append(t_frac)
            t_floats.append(t_float)
            rows.append(vals)
    if len(rows) < 3:
        raise TooShortError(f"{path}: need at least 3 data rows, got {len(rows)}")

    step = times[1] - times[0]
    if step <= 0:
        raise UniformityError(
            f"{path}: timestamps must be strictly increasing (row 2)", row=2
        )
    tol = step * UNIFORMITY_RTOL
    for r in range(2, len(times)):
        delta = times[r] - times[r - 1]
        if abs(delta - step) > tol:
            raise UniformityError(
                f"{path}: non-uniform timestamp at data row {r + 1}: spacing "
                f"{float(delta):g} s differs from {float(step):g} s",
                row=r + 1,
            )
    dt = float(dt_override) if dt_override is not None else float(step)
    values = np.array(rows, dtype=float).T  # (M, N)
    return SnapshotMatrix(values, dt, t_floats[0], ids)


def write_snapshots(s: SnapshotMatrix, path) -> None:
    """Write a snapshot CSV that :func:`load_snapshots` reads back bit-exactly.

    Timestamps are emitted as exact decimal expansions of t0 + k*dt computed
    in rational arithmetic, so the reader recovers dt without float rounding.
    """
    path = Path(path)
    t0 = Fraction(s.t0)
    dt = Fraction(s.dt)
    with path.open("w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["time", *s.channel_ids])
        # binary floats are dyadic rationals, so every t0 + k*dt has a finite
        # decimal expansion; a double's expansion can need ~1400 digits
        with localcontext() as ctx:
            ctx.prec = 1600
            for k in range(s.n_snapshots):
                t = t0 + k * dt
                cell = str(Decimal(t.numerator) / Decimal(t.denominator))
                writer.writerow([cell, *(repr(float(v)) for v in s.values[:, k])])


_GRID_RE = re.compile(
    r"^#\s*grid\s+rows=(\d+)\s+cols=(\d+)\s+dx=([0-9.eE+-]+)\s+dy=([0-9.eE+-]+)\s*$"
)


def load_layout(path) -> SensorLayout:
    """Load and validate a sensor layout CSV.

    The spatial dimension is inferred from the coordinate columns; an
    optional leading comment line declares a rectangular grid.
    """
    path = Path(path)
    with path.open(newline="", encoding="utf-8") as fh:
        first = fh.readline()
        grid = None
        m = _GRID_RE.match(first.strip())
        if m:
            grid = GridSpec(int(m.group(1)), int(m.group(2)),
                            float(m.group(3)), float(m.group(4)))
            header_line = fh.readline()
        elif first.startswith("#"):
            raise ParseError(f"{path}: unrecognized comment header {first.strip()!r}")
        else:
            header_line = first
        reader = csv.reader([header_line] + fh.readlines())
        header = [h.strip() for h in next(reader)]
        if header[:1] != ["id"] or header[1:] not in (["x", "y"], ["x", "y", "z"]):
            raise ParseError(f"{path}: header must be 'id,x,y[,z]', got {header!r}")
        ids: list[str] = []
        pts: list[list[float]] = []
        for r, rec in enumerate(reader, start=1):
            if len(rec) != len(header):
                raise ParseError(f"{path}: layout row {r} has {len(rec)} cells")
            ids.append(rec[0].strip())
            try:
                pts.append([float(c) for c in rec[1:]])
            except ValueError:
                raise ParseError(f"{path}: non-numeric coordinate at layout row {r}") from None
    if not ids:
        raise ParseError(f"{path}: layout file has no sensors")
    return SensorLayout(tuple(ids), np.array(pts, dtype=float), grid)


def write_layout(layout: SensorLayout, path) -> None:
    path = Path(path)
    with path.open("w", newline="", encoding="utf-8") as fh:
        if layout.grid is not None:
            g = layout.grid
            fh.write(f"# grid rows={g.rows} cols={g.cols} dx={g.dx!r} dy={g.dy!r}\n")
        writer = csv.writer(fh)
        writer.writerow(["id", "x", "y", "z"][: 1 + layout.d])
        for cid, p in zip(layout.channel_ids, layout.positions):
            writer.writerow([cid, *(repr(float(v)) for v in p)])


def remove_mean(s: SnapshotMatrix) -> SnapshotMatrix:
    """Subtract the per-channel time mean over the whole record."""
    return s.with_values(s.values - s.values.mean(axis=1, keepdims=True))
