"""Spatial differentiation of mode vectors over a sensor layout.

Two differentiation paths:

* declared grid: central differences on interior lattice points, one-sided
  differences on edges, per axis;
* scattered sensors: per-sensor weighted affine least squares through the
  k nearest neighbors.  The center value is interpolated exactly (its
  inverse-distance weight is infinite), so only the slope is fitted:

      minimize  sum_j w_j | f_i + g . (r_j - r_i) - f_j |^2,  w_j = 1/|r_j - r_i|.

Degenerate stencils (too few neighbors, or neighbor positions collinear
beyond the condition limit) yield an invalid flag rather than a regularized
guess: a fabricated gradient component would defeat the diagnostic.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ArgumentError, GeometryError
from .timeseries import SensorLayout

GRID_CENTRAL = "grid_central"
GRID_ONESIDED = "grid_onesided"
SCATTERED_LSQ = "scattered_lsq"
INVALID = "invalid"

SOURCE_PHASE_AVERAGE = "phase_average"
SOURCE_DMD_MODE = "dmd_mode"

#: default neighbor count for the scattered least-squares stencil
DEFAULT_NEIGHBORS = 6

#: stencils whose weighted position matrix exceeds this condition number
#: are flagged invalid (collinear in 2-D)
CONDITION_LIMIT = 1e8


@dataclass(frozen=True)
class GradientField:
    """Per-sensor gradient vectors with validity flags and method metadata.

    ``vectors`` is (M, d), complex when the differentiated mode was complex;
    rows where ``valid`` is False hold NaN.  ``methods`` records the stencil
    used at each sensor.  ``source`` names what the mode vector was
    (phase_average or dmd_mode) when the caller provides it.
    """

    vectors: np.ndarray
    valid: np.ndarray
    methods: tuple[str, ...]
    layout: SensorLayout
    source: str | None = None
    neighbor_count: int | None = None

    def __post_init__(self):
        vec = np.asarray(self.vectors)
        val = np.asarray(self.valid, dtype=bool)
        object.__setattr__(self, "vectors", vec)
        object.__setattr__(self, "valid", val)
        vec.setflags(write=False)
        val.setflags(write=False)
        if self.source is not None and self.source not in (
            SOURCE_PHASE_AVERAGE,
            SOURCE_DMD_MODE,
        ):
            raise ArgumentError(f"unknown gradient source {self.source!r}")
        if np.any(~np.isfinite(vec[val])):
            raise GeometryError("gradient produced non-finite values at valid sensors")


@dataclass(frozen=True)
class FluxSource:
    """A heating or cooling actuator location used for consistency scoring."""

    name: str
    position: tuple[float, ...]
    kind: str  # "cooling" | "heating"

    def __post_init__(self):
        if self.kind not in ("cooling", "heating"):
            raise ArgumentError(f"source kind must be cooling or heating, got {self.kind!r}")


def median_spacing(layout: SensorLayout) -> float:
    """Median over sensors of the distance to the nearest other sensor."""
    pos = layout.positions
    if len(pos) < 2:
        raise GeometryError("need at least 2 sensors to define a spacing")
    diff = pos[:, None, :] - pos[None, :, :]
    dist = np.sqrt((diff**2).sum(axis=2))
    np.fill_diagonal(dist, np.inf)
    return float(np.median(dist.min(axis=1)))


def gradient_field(
    mode: np.ndarray,
    layout: SensorLayout,
    source: str | None = None,
    neighbors: int = DEFAULT_NEIGHBORS,
    condition_limit: float = CONDITION_LIMIT,
) -> GradientField:
    """Differentiate a mode vector over the sensor layout.

    Uses grid stencils when the layout declares one, otherwise the weighted
    scattered least-squares fit.  Axes along which a declared grid has a
    single lattice line get a zero component (nothing to difference).

    Raises
    ------
    ArgumentError
        Mode length does not match the layout.
    GeometryError
        Every sensor's stencil is degenerate.
    """
    mode = np.asarray(mode)
    if mode.ndim != 1 or len(mode) != layout.n_sensors:
        raise ArgumentError(
            f"mode has length {mode.shape}, layout has {layout.n_sensors} sensors"
        )
    is_complex = np.iscomplexobj(mode)
    mode = mode.astype(complex if is_complex else float)

    if layout.grid is not None:
        vectors, valid, methods = _grid_gradient(mode, layout)
        used_neighbors = None
    else:
        vectors, valid, methods = _scattered_gradient(
            mode, layout, neighbors, condition_limit
        )
        used_neighbors = min(neighbors, layout.n_sensors - 1)
    if not np.any(valid):
        raise GeometryError("gradient stencil is degenerate at every sensor")
    vectors[~valid] = np.nan
    return GradientField(
        vectors=vectors,
        valid=valid,
        methods=tuple(methods),
        layout=layout,
        source=source,
        neighbor_count=used_neighbors,
    )


def _grid_gradient(mode, layout):
    g = layout.grid
    idx = layout.grid_indices()
    m = layout.n_sensors
    field = np.full((g.rows, g.cols), np.nan, dtype=mode.dtype)
    field[idx[:, 0], idx[:, 1]] = mode

    vectors = np.zeros((m, 2), dtype=mode.dtype)
    methods = []
    for i in range(m):
        row, col = idx[i]
        onesided = False
        if g.cols > 1:
            if 0 < col < g.cols - 1:
                gx = (field[row, col + 1] - field[row, col - 1]) / (2.0 * g.dx)
            elif col == 0:
                gx = (field[row, 1] - field[row, 0]) / g.dx
                onesided = True
            else:
                gx = (field[row, col] - field[row, col - 1]) / g.dx
                onesided = True
            vectors[i, 0] = gx
        if g.rows > 1:
            if 0 < row < g.rows - 1:
                gy = (field[row + 1, col] - field[row - 1, col]) / (2.0 * g.dy)
            elif row == 0:
                gy = (field[1, col] - field[0, col]) / g.dy
                onesided = True
            else:
                gy = (field[row, col] - field[row - 1, col]) / g.dy
                onesided = True
            vectors[i, 1] = gy
        methods.append(GRID_ONESIDED if onesided else GRID_CENTRAL)
    valid = np.ones(m, dtype=bool)
    return vectors, valid, methods


def _scattered_gradient(mode, layout, neighbors, condition_limit):
    pos = layout.positions
    m, d = pos.shape
    k = min(neighbors, m - 1)
    vectors = np.zeros((m, d), dtype=mode.dtype)
    valid = np.zeros(m, dtype=bool)
    methods = []
    for i in range(m):
        if k < d + 1:
            methods.append(INVALID)
            continue
        dist = np.sqrt(((pos - pos[i]) ** 2).sum(axis=1))
        order = np.argsort(dist, kind="stable")[1 : k + 1]
        dr = pos[order] - pos[i]
        w = 1.0 / dist[order]
        a = dr * w[:, None]
        sv = np.linalg.svd(a, compute_uv=False)
        if sv[-1] <= 0 or sv[0] / sv[-1] > condition_limit:
            methods.append(INVALID)
            continue
        b = (mode[order] - mode[i]) * w
        g, *_ = np.linalg.lstsq(a, b, rcond=None)
        vectors[i] = g
        valid[i] = True
        methods.append(SCATTERED_LSQ)
    return vectors, valid, methods


def rms_gradient(
    complex_mode: np.ndarray,
    layout: SensorLayout,
    **kwargs,
) -> np.ndarray:
    """Component-wise RMS of the oscillating gradient: sqrt(2) * |grad|.

    For a mode component 2 Re[A(r) exp(i w t)], the time RMS of each spatial
    derivative over one period is sqrt(2) times the modulus of the complex
    gradient component.  Rows of invalid sensors are NaN.
    """
    field = gradient_field(np.asarray(complex_mode, dtype=complex), layout, **kwargs)
    return np.sqrt(2.0) * np.abs(field.vectors)


def flux_consistency(
    field: GradientField,
    layout: SensorLayout,
    sources,
    radius_factor: float = 2.0,
) -> dict[str, float]:
    """Directional consistency of the gradient field around each source.

    For every source, takes the valid sensors within ``radius_factor`` times
    the median sensor spacing (excluding a sensor coincident with the
    source, which has no direction) and averages the cosine between the
    real gradient vector and the source-to-sensor direction; the mean is
    negated for heating sources.  Temperature rising away from a cooling
    source therefore scores near +1.  Zero gradient vectors contribute 0.

    Raises GeometryError when a source has no valid sensor in range.
    """
    spacing = median_spacing(layout)
    pos = layout.positions
    grads = np.real(field.vectors)
    scores: dict[str, float] = {}
    for src in sources:
        origin = np.asarray(src.position, dtype=float)
        if origin.shape != (layout.d,):
            raise ArgumentError(
                f"source {src.name!r} position has dimension {origin.shape}, layout d={layout.d}"
            )
        dist = np.sqrt(((pos - origin) ** 2).sum(axis=1))
        near = field.valid & (dist <= radius_factor * spacing) & (dist > 1e-12)
        if not np.any(near):
            raise GeometryError(
                f"no valid sensor within {radius_factor} median spacings of source {src.name!r}"
            )
        unit = (pos[near] - origin) / dist[near][:, None]
        g = grads[near]
        norms = np.sqrt((g**2).sum(axis=1))
        cosines = np.where(norms > 0, (g * unit).sum(axis=1) / np.where(norms > 0, norms, 1.0), 0.0)
        sign = -1.0 if src.kind == "heating" else 1.0
        scores[src.name] = float(sign * cosines.mean())
    return scores


# -- serialization ------------------------------------------------------------

def field_to_csv(field: GradientField) -> str:
    layout = field.layout
    is_complex = np.iscomplexobj(field.vectors)
    coord_cols = ["x", "y", "z"][: layout.d]
    grad_cols = [f"g{a}_re" for a in coord_cols]
    if is_complex:
        grad_cols += [f"g{a}_im" for a in coord_cols]
    lines = ["channel_id," + ",".join(coord_cols + grad_cols) + ",valid,method"]
    for i, cid in enumerate(layout.channel_ids):
        coords = [repr(float(v)) for v in layout.positions[i]]
        vec = field.vectors[i]
        parts = [repr(float(np.real(v))) for v in vec]
        if is_complex:
            parts += [repr(float(np.imag(v))) for v in vec]
        lines.append(
            f"{cid},{','.join(coords)},{','.join(parts)},"
            f"{str(bool(field.valid[i])).lower()},{field.methods[i]}"
        )
    return "\n".join(lines) + "\n"


def field_to_svg(field: GradientField, width_px: int = 720) -> str:
    """Quiver plot of the real gradient vectors.

    Arrows are scaled so the longest is 0.8 times the median sensor spacing;
    the scale appears in the legend.  The CSV is the canonical output; the
    SVG is for human inspection.
    """
    layout = field.layout
    if layout.d < 2:
        raise GeometryError("SVG export needs a 2-D layout")
    pos = layout.positions[:, :2]
    grads = np.real(field.vectors[:, :2])
    spacing = median_spacing(layout)
    finite = field.valid
    max_norm = float(np.sqrt((grads[finite] ** 2).sum(axis=1)).max()) if np.any(finite) else 0.0
    arrow_m = 0.8 * spacing
    scale = arrow_m / max_norm if max_norm > 0 else 0.0

    x0, y0 = pos.min(axis=0)
    x1, y1 = pos.max(axis=0)
    pad = max(spacing, 0.05 * max(x1 - x0, y1 - y0, 1.0))
    span_x = (x1 - x0) + 2 * pad
    span_y = (y1 - y0) + 2 * pad
    px_per_m = width_px / span_x
    height_px = span_y * px_per_m + 40  # room for the legend line

    def to_px(p):
        # svg y grows downward
        return (
            (p[0] - x0 + pad) * px_per_m,
            (y1 - p[1] + pad) * px_per_m,
        )

    parts = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{width_px:.0f}" '
        f'height="{height_px:.0f}" viewBox="0 0 {width_px:.0f} {height_px:.0f}">',
        '<rect x="0" y="0" width="100%" height="100%" fill="white"/>',
    ]
    bx0, by0 = to_px((x0, y1))
    bx1, by1 = to_px((x1, y0))
    parts.append(
        f'<rect x="{bx0:.1f}" y="{by0:.1f}" width="{bx1 - bx0:.1f}" '
        f'height="{by1 - by0:.1f}" fill="none" stroke="#999" stroke-width="1"/>'
    )
    for i, cid in enumerate(layout.channel_ids):
        cx, cy = to_px(pos[i])
        parts.append(f'<circle cx="{cx:.1f}" cy="{cy:.1f}" r="3" fill="#c22"/>')
        parts.append(
            f'<text x="{cx + 4:.1f}" y="{cy - 4:.1f}" font-size="9" fill="#555">{cid}</text>'
        )
        if not field.valid[i]:
            continue
        tip = pos[i] + scale * grads[i]
        tx, ty = to_px(tip)
        parts.append(
            f'<line x1="{cx:.1f}" y1="{cy:.1f}" x2="{tx:.1f}" y2="{ty:.1f}" '
            'stroke="#1648b0" stroke-width="1.5"/>'
        )
        # arrow head: two short back-strokes at the tip
        v = np.array([tx - cx, ty - cy])
        norm = np.sqrt((v**2).sum())
        if norm > 1e-9:
            u = v / norm
            n = np.array([-u[1], u[0]])
            head = 5.0
            for s in (+1, -1):
                hx, hy = np.array([tx, ty]) - head * u + s * 0.6 * head * n
                parts.append(
                    f'<line x1="{tx:.1f}" y1="{ty:.1f}" x2="{hx:.1f}" y2="{hy:.1f}" '
                    'stroke="#1648b0" stroke-width="1.5"/>'
                )
    legend = (
        f"longest arrow = {max_norm:.4g} units/m (drawn {arrow_m:.3g} m)"
        if max_norm > 0
        else "all gradients zero or invalid"
    )
    parts.append(
        f'<text x="8" y="{height_px - 12:.1f}" font-size="12" fill="#333">{legend}</text>'
    )
    parts.append("</svg>")
    return "\n".join(parts) + "\n"
