"""Uniform Cartesian grids and time-stamped scalar fields.

Node-centered grids include both endpoints: axis i has n[i] nodes at
``lo[i] + k*h[i]`` with ``h[i] = (hi[i] - lo[i]) / (n[i] - 1)``. Field
slices are stored row-major over the axes in their natural order
(x1 slowest, x2 fastest for 2D), so a flattened slice has index
``i1 * n2 + i2``.

Spatial queries use multilinear interpolation over the 2^d surrounding
nodes; queries exactly at a node return the stored value bit-for-bit.
Points outside the domain are clamped to the boundary and flagged rather
than rejected, because closed-loop rollouts may graze the edge by
integration error. Spatial gradients are central differences at interior
nodes and one-sided at boundary nodes, multilinearly interpolated in
between. Time derivatives difference the two stored slices bracketing the
query time (one-sided at the ladder ends).

Binary container (ValueField serialization), all little-endian:

    header:  uint32 axis count d
             d records of (float64 lo, float64 hi, uint32 n)
             uint32 time-stamp count nt
    payload: nt float64 time stamps,
             nt slices of prod(n) float64 node values, row-major

A JSON sidecar ``<path>.json`` carries grid/time metadata plus any
caller-supplied entries (config hash, solver diagnostics). The binary file
is authoritative; round-trips are bit-exact.
"""

from __future__ import annotations

import itertools
import json
import struct
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import ConfigError, GridQueryError

__all__ = [
    "GridSpec",
    "ValueField",
    "interpolate",
    "gradient",
    "time_derivative",
    "save_field",
    "load_field",
]


@dataclass(frozen=True)
class GridSpec:
    """Uniform node-centered Cartesian grid over a box [lo, hi]."""

    lo: tuple[float, ...]
    hi: tuple[float, ...]
    n: tuple[int, ...]

    def __post_init__(self):
        object.__setattr__(self, "lo", tuple(float(v) for v in self.lo))
        object.__setattr__(self, "hi", tuple(float(v) for v in self.hi))
        object.__setattr__(self, "n", tuple(int(v) for v in self.n))
        if not (len(self.lo) == len(self.hi) == len(self.n)):
            raise ConfigError("lo, hi, n must have equal lengths")
        for lo, hi, n in zip(self.lo, self.hi, self.n):
            if n < 2:
                raise ConfigError(f"need at least 2 nodes per axis, got {n}")
            if not hi > lo:
                raise ConfigError(f"need hi > lo per axis, got [{lo}, {hi}]")

    @property
    def ndim(self) -> int:
        return len(self.n)

    @property
    def shape(self) -> tuple[int, ...]:
        return self.n

    @property
    def num_nodes(self) -> int:
        return int(np.prod(self.n))

    @property
    def spacing(self) -> tuple[float, ...]:
        return tuple((hi - lo) / (n - 1) for lo, hi, n in zip(self.lo, self.hi, self.n))

    def axis_coords(self, axis: int) -> np.ndarray:
        lo, h, n = self.lo[axis], self.spacing[axis], self.n[axis]
        return lo + np.arange(n) * h

    def nodes(self) -> np.ndarray:
        """All node coordinates as an (num_nodes, ndim) array, row-major order."""
        mesh = np.meshgrid(*(self.axis_coords(i) for i in range(self.ndim)), indexing="ij")
        return np.column_stack([m.ravel() for m in mesh])

    def contains(self, point) -> bool:
        p = np.asarray(point, dtype=float)
        for x, lo, hi, last in zip(p, self.lo, self.hi, self._axis_tops()):
            if x < lo or x > max(hi, last):
                return False
        return True

    def _axis_tops(self) -> tuple[float, ...]:
        # last node coordinate may differ from hi by one ulp
        return tuple(lo + (n - 1) * h for lo, h, n in zip(self.lo, self.spacing, self.n))

    def locate(self, points: np.ndarray):
        """Cell indices and fractional offsets for a batch of query points.

        Returns (idx, frac, clamped): idx[i, a] is the lower cell node on
        axis a (in [0, n[a]-2]), frac in [0, 1], clamped marks points outside
        the domain. Queries exactly at node coordinates yield frac of exactly
        0.0 or 1.0 so interpolation reproduces stored values bitwise.
        """
        pts = np.asarray(points, dtype=float)
        if pts.ndim == 1:
            pts = pts[None, :]
        if pts.shape[1] != self.ndim:
            raise GridQueryError(f"expected {self.ndim}-dim points, got shape {pts.shape}")
        if not np.isfinite(pts).all():
            raise GridQueryError("non-finite query point")
        m = pts.shape[0]
        idx = np.empty((m, self.ndim), dtype=np.intp)
        frac = np.empty((m, self.ndim), dtype=float)
        clamped = np.zeros(m, dtype=bool)
        for a in range(self.ndim):
            lo, h, n = self.lo[a], self.spacing[a], self.n[a]
            x = pts[:, a]
            t = (x - lo) / h
            clamped |= (x < lo) | (x > max(self.hi[a], lo + (n - 1) * h))
            i = np.clip(np.floor(t).astype(np.intp), 0, n - 2)
            f = np.clip((x - (lo + i * h)) / h, 0.0, 1.0)
            # snap queries that hit node coordinates exactly
            j = np.rint(t)
            on_node = (x == lo + j * h) & (j >= 0) & (j <= n - 1)
            if on_node.any():
                ji = np.minimum(j[on_node].astype(np.intp), n - 2)
                i[on_node] = ji
                f[on_node] = j[on_node] - ji
            idx[:, a] = i
            frac[:, a] = f
        return idx, frac, clamped


def interpolate(grid: GridSpec, values: np.ndarray, point) -> float:
    """Multilinear interpolation of a field slice at a single point."""
    return interpolate_many(grid, values, np.asarray(point, dtype=float)[None, :])[0]


def interpolate_many(grid: GridSpec, values: np.ndarray, points: np.ndarray) -> np.ndarray:
    vals = np.asarray(values, dtype=float).reshape(grid.shape)
    idx, frac, _ = grid.locate(points)
    out = np.zeros(len(idx))
    for corner in itertools.product((0, 1), repeat=grid.ndim):
        w = np.ones(len(idx))
        for a, bit in enumerate(corner):
            w = w * (frac[:, a] if bit else 1.0 - frac[:, a])
        sel = tuple(idx[:, a] + bit for a, bit in enumerate(corner))
        out += w * vals[sel]
    return out


def node_gradient(grid: GridSpec, values: np.ndarray) -> np.ndarray:
    """Per-node finite-difference gradient, shape (ndim, *grid.shape).

    Central differences in the interior, one-sided at the boundary nodes.
    """
    vals = np.asarray(values, dtype=float).reshape(grid.shape)
    comps = np.gradient(vals, *grid.spacing, edge_order=1)
    if grid.ndim == 1:
        comps = [comps]
    return np.stack(comps, axis=0)


def gradient(grid: GridSpec, values: np.ndarray, point) -> np.ndarray:
    """Spatial gradient of a field slice at a point (nodal FD, interpolated)."""
    g = node_gradient(grid, values)
    pt = np.asarray(point, dtype=float)[None, :]
    return np.array([interpolate_many(grid, g[a], pt)[0] for a in range(grid.ndim)])


@dataclass
class ValueField:
    """A scalar field on a grid, sampled at a strictly increasing time ladder.

    slices has shape (len(times), *grid.shape). Immutable once constructed;
    per-slice gradient fields are cached lazily for fast repeated queries.
    """

    grid: GridSpec
    times: np.ndarray
    slices: np.ndarray
    _grad_cache: np.ndarray | None = field(default=None, repr=False, compare=False)

    def __post_init__(self):
        self.times = np.asarray(self.times, dtype=float)
        self.slices = np.asarray(self.slices, dtype=float).reshape(
            (len(self.times),) + self.grid.shape
        )
        if self.times.ndim != 1 or len(self.times) == 0:
            raise ConfigError("times must be a nonempty 1D array")
        if len(self.times) > 1 and not (np.diff(self.times) > 0).all():
            raise ConfigError("times must be strictly increasing")
        if not np.isfinite(self.slices).all():
            raise ConfigError("field slices contain non-finite values")

    @property
    def t0(self) -> float:
        return float(self.times[0])

    @property
    def t1(self) -> float:
        return float(self.times[-1])

    def _bracket(self, t: float) -> int:
        if not np.isfinite(t):
            raise GridQueryError("non-finite query time")
        if t < self.times[0] or t > self.times[-1]:
            raise GridQueryError(
                f"time {t} outside stored range [{self.times[0]}, {self.times[-1]}]"
            )
        k = int(np.searchsorted(self.times, t, side="right") - 1)
        return min(max(k, 0), len(self.times) - 2)

    def slice_at(self, t: float) -> np.ndarray:
        """Time-interpolated full slice at t (linear between stored stamps)."""
        if len(self.times) == 1:
            if t != self.times[0]:
                raise GridQueryError(f"single-slice field stores only t={self.times[0]}")
            return self.slices[0]
        k = self._bracket(t)
        th = (t - self.times[k]) / (self.times[k + 1] - self.times[k])
        if th == 0.0:
            return self.slices[k]
        return (1.0 - th) * self.slices[k] + th * self.slices[k + 1]

    def value(self, point, t: float) -> float:
        return float(interpolate(self.grid, self.slice_at(t), point))

    def value_many(self, points: np.ndarray, t: float) -> np.ndarray:
        return interpolate_many(self.grid, self.slice_at(t), points)

    def _gradients(self) -> np.ndarray:
        if self._grad_cache is None:
            g = np.stack([node_gradient(self.grid, s) for s in self.slices], axis=0)
            object.__setattr__(self, "_grad_cache", g)
        return self._grad_cache

    def node_gradients_at(self, t: float) -> np.ndarray:
        """Nodal gradient arrays at t, shape (ndim, *grid.shape)."""
        g = self._gradients()
        if len(self.times) == 1:
            if t != self.times[0]:
                raise GridQueryError(f"single-slice field stores only t={self.times[0]}")
            return g[0]
        k = self._bracket(t)
        th = (t - self.times[k]) / (self.times[k + 1] - self.times[k])
        if th == 0.0:
            return g[k]
        return (1.0 - th) * g[k] + th * g[k + 1]

    def gradient(self, point, t: float) -> np.ndarray:
        g = self.node_gradients_at(t)
        pt = np.asarray(point, dtype=float)[None, :]
        return np.array(
            [interpolate_many(self.grid, g[a], pt)[0] for a in range(self.grid.ndim)]
        )

    def node_time_derivative_at(self, t: float) -> np.ndarray:
        """Nodal d/dt array at t from the bracketing stored slices."""
        if len(self.times) == 1:
            raise GridQueryError("time derivative requires at least two stored slices")
        k = self._bracket(t)
        dt = self.times[k + 1] - self.times[k]
        return (self.slices[k + 1] - self.slices[k]) / dt

    def time_derivative(self, point, t: float) -> float:
        if len(self.times) == 1:
            raise GridQueryError("time derivative requires at least two stored slices")
        k = self._bracket(t)
        dt = self.times[k + 1] - self.times[k]
        va = interpolate(self.grid, self.slices[k], point)
        vb = interpolate(self.grid, self.slices[k + 1], point)
        return float((vb - va) / dt)


def time_derivative(fld: ValueField, point, t: float) -> float:
    """Finite difference of the stored slices bracketing t, evaluated at point."""
    return fld.time_derivative(point, t)


def save_field(fld: ValueField, path, metadata: dict | None = None) -> None:
    """Write the binary container and its JSON metadata sidecar."""
    path = Path(path)
    g = fld.grid
    parts = [struct.pack("<I", g.ndim)]
    for a in range(g.ndim):
        parts.append(struct.pack("<ddI", g.lo[a], g.hi[a], g.n[a]))
    parts.append(struct.pack("<I", len(fld.times)))
    parts.append(np.ascontiguousarray(fld.times, dtype="<f8").tobytes())
    parts.append(np.ascontiguousarray(fld.slices, dtype="<f8").tobytes())
    path.write_bytes(b"".join(parts))

    meta = {
        "axes": [
            {"lo": g.lo[a], "hi": g.hi[a], "n": g.n[a]} for a in range(g.ndim)
        ],
        "num_times": len(fld.times),
        "t_first": float(fld.times[0]),
        "t_last": float(fld.times[-1]),
    }
    if metadata:
        meta.update(metadata)
    sidecar = path.with_name(path.name + ".json")
    sidecar.write_text(json.dumps(meta, indent=2, sort_keys=True) + "\n")


def load_field(path) -> tuple[ValueField, dict]:
    """Read a binary container; returns (field, sidecar metadata or {})."""
    path = Path(path)
    buf = path.read_bytes()
    off = 0

    def take(fmt):
        nonlocal off
        size = struct.calcsize(fmt)
        vals = struct.unpack_from(fmt, buf, off)
        off += size
        return vals

    (ndim,) = take("<I")
    lo, hi, n = [], [], []
    for _ in range(ndim):
        l, h, k = take("<ddI")
        lo.append(l)
        hi.append(h)
        n.append(k)
    (nt,) = take("<I")
    grid = GridSpec(tuple(lo), tuple(hi), tuple(n))
    times = np.frombuffer(buf, dtype="<f8", count=nt, offset=off).copy()
    off += nt * 8
    count = nt * grid.num_nodes
    slices = np.frombuffer(buf, dtype="<f8", count=count, offset=off).copy()
    if off + count * 8 != len(buf):
        raise ConfigError(f"container size mismatch in {path}")
    fld = ValueField(grid, times, slices.reshape((nt,) + grid.shape))
    sidecar = path.with_name(path.name + ".json")
    meta = json.loads(sidecar.read_text()) if sidecar.exists() else {}
    return fld, meta
