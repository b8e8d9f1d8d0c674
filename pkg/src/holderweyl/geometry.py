"""Planar domains, their rasterisation and simple geometric measurements.

Domains are described in continuum coordinates and turned into a
:class:`GridMask` by the cell-centre rule: cell ``(i, j)`` belongs to the
mask iff its centre ``(x0 + (j + 1/2) h, y0 + (i + 1/2) h)`` lies in the open
domain.  Row index ``i`` runs along ``y``, column index ``j`` along ``x``.
"""
from __future__ import annotations

import math
import struct
import warnings
from dataclasses import dataclass, field
from typing import NamedTuple

import numpy as np
from scipy import ndimage

from .errors import InvalidArgument, ResolutionTooCoarse

__all__ = [
    "HolderFunction",
    "Domain2D",
    "Rectangle",
    "Disk",
    "GraphDomain",
    "RoomsAndPassages",
    "GridMask",
    "BoxCount",
    "build_rooms_and_passages",
    "build_graph_domain",
    "rasterize",
    "measure",
    "distance_to_boundary",
    "box_counting_dimension",
    "domain_from_dict",
]

# Number of rows rasterised per chunk; keeps the centre arrays small.
_RASTER_CHUNK = 1024


@dataclass(frozen=True)
class HolderFunction:
    """Truncated Weierstrass profile ``f(x) = h0 + c * sum_k b^(-gamma k) cos(b^k pi x)``.

    The sum runs over ``k = 0..terms``.  Every term is gamma-Hölder with
    constant ``pi + 2`` (it is ``pi``-Lipschitz below its wavelength and
    bounded by 2 above it), which gives the coarse certified constant
    :attr:`holder_constant`.
    """

    gamma: float
    amplitude: float
    base: int = 2
    terms: int = 12
    offset: float = 0.0

    def __post_init__(self):
        if not (0.0 < self.gamma <= 1.0):
            raise InvalidArgument(f"gamma must lie in (0, 1], got {self.gamma}")
        if self.amplitude < 0 or not math.isfinite(self.amplitude):
            raise InvalidArgument("amplitude must be a finite nonnegative number")
        if int(self.base) != self.base or self.base < 2:
            raise InvalidArgument("base must be an integer >= 2")
        if int(self.terms) != self.terms or self.terms < 0:
            raise InvalidArgument("terms must be a nonnegative integer")

    @classmethod
    def for_resolution(cls, gamma, amplitude, h, base=2, offset=0.0):
        """Profile whose finest term is resolved at grid spacing ``h``."""
        terms = math.ceil(math.log(1.0 / h, base)) + 2
        return cls(gamma, amplitude, base, max(terms, 0), offset)

    @classmethod
    def constant(cls, value):
        return cls(gamma=1.0, amplitude=0.0, base=2, terms=0, offset=value)

    def __call__(self, x):
        x = np.asarray(x, dtype=float)
        out = np.zeros_like(x)
        if self.amplitude != 0.0:
            for k in range(self.terms + 1):
                freq = float(self.base) ** k
                out += freq ** (-self.gamma) * np.cos(freq * math.pi * x)
            out *= self.amplitude
        return out + self.offset

    @property
    def holder_constant(self):
        return self.amplitude * (math.pi + 2.0) * (self.terms + 1)

    @property
    def deviation_bound(self):
        """Upper bound on ``|f(x) - h0|``."""
        return self.amplitude / (1.0 - float(self.base) ** (-self.gamma))

    def holder_ratio(self, interval, n_pairs=10_000, seed=0):
        """Largest sampled ``|f(x) - f(y)| / |x - y|^gamma`` over random pairs."""
        a, b = interval
        rng = np.random.default_rng(seed)
        x = rng.uniform(a, b, n_pairs)
        # mix of far pairs and very close pairs so that every scale is probed
        gaps = (b - a) * 10.0 ** rng.uniform(-8, 0, n_pairs)
        y = np.clip(x + gaps * rng.choice([-1.0, 1.0], n_pairs), a, b)
        keep = x != y
        x, y = x[keep], y[keep]
        return float(np.max(np.abs(self(x) - self(y)) / np.abs(x - y) ** self.gamma))

    def sample_count(self, length=1.0):
        """Sample count that resolves the finest term on an interval of ``length``."""
        finest = float(self.base) ** self.terms * length
        return int(min(max(4097, 16 * finest + 1), 2**22 + 1))

    def to_dict(self):
        return {
            "gamma": self.gamma,
            "amplitude": self.amplitude,
            "base": self.base,
            "terms": self.terms,
            "offset": self.offset,
        }

    @classmethod
    def from_dict(cls, data):
        return cls(
            gamma=float(data["gamma"]),
            amplitude=float(data["amplitude"]),
            base=int(data.get("base", 2)),
            terms=int(data.get("terms", 12)),
            offset=float(data.get("offset", 0.0)),
        )


class Domain2D:
    """Bounded open connected planar domain (abstract)."""

    kind = "abstract"

    def contains(self, x, y):
        raise NotImplementedError

    def bbox(self):
        """``(xmin, ymin, xmax, ymax)``."""
        raise NotImplementedError

    def grid_origin(self, h):
        xmin, ymin, _, _ = self.bbox()
        return (xmin, ymin)

    def exact_area(self):
        return None

    def to_dict(self):
        raise NotImplementedError


@dataclass(frozen=True)
class Rectangle(Domain2D):
    """``(0, width) x (0, height)``."""

    width: float = 1.0
    height: float = 1.0
    kind = "rectangle"

    def __post_init__(self):
        if not (self.width > 0 and self.height > 0):
            raise InvalidArgument("rectangle sides must be positive")

    def contains(self, x, y):
        return (x > 0) & (x < self.width) & (y > 0) & (y < self.height)

    def bbox(self):
        return (0.0, 0.0, self.width, self.height)

    def exact_area(self):
        return self.width * self.height

    def perimeter(self):
        return 2.0 * (self.width + self.height)

    def to_dict(self):
        return {"type": self.kind, "width": self.width, "height": self.height}


@dataclass(frozen=True)
class Disk(Domain2D):
    """Open disk of the given radius centred at the origin."""

    radius: float = 1.0
    kind = "disk"

    def __post_init__(self):
        if not self.radius > 0:
            raise InvalidArgument("disk radius must be positive")

    def contains(self, x, y):
        return x * x + y * y < self.radius * self.radius

    def bbox(self):
        r = self.radius
        return (-r, -r, r, r)

    def exact_area(self):
        return math.pi * self.radius**2

    def to_dict(self):
        return {"type": self.kind, "radius": self.radius}


@dataclass(frozen=True)
class GraphDomain(Domain2D):
    """``{(x, y): a < x < b, floor < y < f(x)}``."""

    profile: HolderFunction
    base: tuple = (0.0, 1.0)
    floor: float = 0.0
    kind = "graph"

    def contains(self, x, y):
        a, b = self.base
        inside = (x > a) & (x < b) & (y > self.floor)
        return inside & (y < self.profile(x))

    def bbox(self):
        a, b = self.base
        top = self.profile.offset + self.profile.deviation_bound
        return (a, self.floor, b, top)

    def exact_area(self):
        # midpoint quadrature at the profile's own resolution
        a, b = self.base
        n = self.profile.sample_count(b - a)
        x = a + (np.arange(n) + 0.5) * (b - a) / n
        return float(np.mean(self.profile(x) - self.floor) * (b - a))

    def to_dict(self):
        return {
            "type": self.kind,
            "profile": self.profile.to_dict(),
            "base": list(self.base),
            "floor": self.floor,
        }


@dataclass(frozen=True)
class RoomsAndPassages(Domain2D):
    """Chain of shrinking rooms joined by thin passages.

    Room ``i`` (1-based) occupies ``[x_i, x_i + r^i] x (-1/i, 1/i)`` and the
    passage to its right ``[x_i + r^i, x_i + 2 r^i] x (-q_i, q_i)`` with
    ``r = 4/5``, ``x_i = 2 (5 (1 - r^i) - 1)`` and ``q_i = r^(2i) / (5 i)``.
    The passage after the last room is omitted.
    """

    n_rooms: int
    extrapolated: bool = field(default=False, compare=False)
    kind = "rooms_and_passages"

    RATIO = 0.8
    DRAWN_ROOMS = 159

    @staticmethod
    def room_start(i):
        return 2.0 * (5.0 * (1.0 - 0.8**i) - 1.0)

    def rooms(self):
        """List of ``(x_left, x_right, half_height)`` per room."""
        out = []
        for i in range(1, self.n_rooms + 1):
            x = self.room_start(i)
            out.append((x, x + 0.8**i, 1.0 / i))
        return out

    def passages(self):
        out = []
        for i in range(1, self.n_rooms):
            x = self.room_start(i) + 0.8**i
            out.append((x, x + 0.8**i, 0.8 ** (2 * i) / (5.0 * i)))
        return out

    def pieces(self):
        return self.rooms() + self.passages()

    def contains(self, x, y):
        inside = np.zeros(np.broadcast(x, y).shape, dtype=bool)
        # pieces abut along vertical lines: half-open in x keeps the union open
        for x0, x1, half in self.pieces():
            inside |= (x >= x0) & (x < x1) & (np.abs(y) < half)
        return inside & (x > 0)

    def bbox(self):
        x_end = self.room_start(self.n_rooms) + 0.8**self.n_rooms
        return (0.0, -1.0, x_end, 1.0)

    def grid_origin(self, h):
        # put a row of cell centres on y = 0 so every passage meets the raster
        k = math.ceil(1.0 / h - 0.5)
        return (0.0, -(k + 0.5) * h)

    def exact_area(self):
        return sum(2.0 * half * (x1 - x0) for x0, x1, half in self.pieces())

    def to_dict(self):
        return {"type": self.kind, "n_rooms": self.n_rooms}


def build_rooms_and_passages(n_rooms):
    if int(n_rooms) != n_rooms or n_rooms < 1:
        raise InvalidArgument(f"n_rooms must be an integer >= 1, got {n_rooms}")
    n_rooms = int(n_rooms)
    extrapolated = n_rooms > RoomsAndPassages.DRAWN_ROOMS
    if extrapolated:
        warnings.warn(
            f"n_rooms={n_rooms} exceeds the {RoomsAndPassages.DRAWN_ROOMS} drawn rooms",
            stacklevel=2,
        )
    return RoomsAndPassages(n_rooms, extrapolated=extrapolated)


def build_graph_domain(f, base=(0.0, 1.0), floor=0.0):
    a, b = (float(v) for v in base)
    if not a < b:
        raise InvalidArgument("base interval must have positive length")
    x = np.linspace(a, b, f.sample_count(b - a))
    fmin = float(np.min(f(x)))
    if floor >= fmin:
        raise InvalidArgument(f"floor {floor} is not below min f = {fmin:.6g}")
    return GraphDomain(f, (a, b), float(floor))


def domain_from_dict(data):
    kind = data.get("type")
    if kind == "rectangle":
        return Rectangle(float(data.get("width", 1.0)), float(data.get("height", 1.0)))
    if kind == "unit_square":
        return Rectangle(1.0, 1.0)
    if kind == "disk":
        return Disk(float(data.get("radius", 1.0)))
    if kind == "graph":
        f = HolderFunction.from_dict(data["profile"])
        return build_graph_domain(f, tuple(data.get("base", (0.0, 1.0))), float(data.get("floor", 0.0)))
    if kind == "rooms_and_passages":
        return build_rooms_and_passages(int(data["n_rooms"]))
    raise InvalidArgument(f"unknown domain type {kind!r}")


_MASK_MAGIC = b"GRIDMSK1"
_MASK_HEADER = struct.Struct("<8sdddQQ")


@dataclass(frozen=True, eq=False)
class GridMask:
    """Boolean raster of a domain at spacing ``h``.

    ``origin`` is the lower-left corner of cell ``(0, 0)``.  Included cells
    are numbered in row-major order; that numbering is the unknown ordering
    used by the operator module.
    """

    h: float
    origin: tuple
    cells: np.ndarray

    def __post_init__(self):
        cells = np.array(self.cells, dtype=bool)
        if cells.ndim != 2:
            raise InvalidArgument("mask cells must be a 2-D array")
        cells.setflags(write=False)
        object.__setattr__(self, "cells", cells)
        object.__setattr__(self, "origin", (float(self.origin[0]), float(self.origin[1])))

    @property
    def shape(self):
        return self.cells.shape

    @property
    def n_cells(self):
        return int(np.count_nonzero(self.cells))

    def index_map(self):
        idx = np.full(self.cells.shape, -1, dtype=np.int64)
        idx[self.cells] = np.arange(self.n_cells)
        return idx

    def centers(self):
        """``(x, y)`` of included cell centres in unknown order."""
        i, j = np.nonzero(self.cells)
        return self.origin[0] + (j + 0.5) * self.h, self.origin[1] + (i + 0.5) * self.h

    def n_components(self):
        _, n = ndimage.label(self.cells)
        return int(n)

    def is_connected(self):
        return self.n_components() == 1

    def with_cells(self, cells):
        """Mask on the same grid with a different inclusion array."""
        return GridMask(self.h, self.origin, cells)

    def to_bytes(self):
        rows, cols = self.cells.shape
        header = _MASK_HEADER.pack(_MASK_MAGIC, self.h, self.origin[0], self.origin[1], rows, cols)
        return header + np.packbits(self.cells.ravel()).tobytes()

    @classmethod
    def from_bytes(cls, blob):
        magic, h, x0, y0, rows, cols = _MASK_HEADER.unpack_from(blob)
        if magic != _MASK_MAGIC:
            raise InvalidArgument("not a GridMask blob")
        bits = np.frombuffer(blob, dtype=np.uint8, offset=_MASK_HEADER.size)
        cells = np.unpackbits(bits, count=rows * cols).astype(bool).reshape(rows, cols)
        return cls(h, (x0, y0), cells)

    def to_pgm(self):
        """Binary PGM (P5); included cells white, top row = largest y."""
        rows, cols = self.cells.shape
        pixels = np.where(self.cells[::-1], 255, 0).astype(np.uint8)
        return f"P5\n{cols} {rows}\n255\n".encode("ascii") + pixels.tobytes()


def rasterize(domain, h, *, require_connected=True):
    """Cell-centre raster of ``domain`` at spacing ``h``.

    Raises :class:`ResolutionTooCoarse` when the raster is empty or, with
    ``require_connected``, when it splits into several components.
    """
    if not h > 0:
        raise InvalidArgument("h must be positive")
    x0, y0 = domain.grid_origin(h)
    _, _, xmax, ymax = domain.bbox()
    cols = max(int(math.ceil((xmax - x0) / h - 1e-9)), 1)
    rows = max(int(math.ceil((ymax - y0) / h - 1e-9)), 1)
    xc = x0 + (np.arange(cols) + 0.5) * h
    cells = np.zeros((rows, cols), dtype=bool)
    for start in range(0, rows, _RASTER_CHUNK):
        stop = min(start + _RASTER_CHUNK, rows)
        yc = y0 + (np.arange(start, stop) + 0.5) * h
        cells[start:stop] = domain.contains(xc[None, :], yc[:, None])
    mask = GridMask(h, (x0, y0), cells)
    if mask.n_cells == 0:
        raise ResolutionTooCoarse(f"raster of {domain.kind} at h={h} is empty")
    if require_connected:
        n = mask.n_components()
        if n != 1:
            raise ResolutionTooCoarse(f"raster of {domain.kind} at h={h} has {n} components")
    return mask


def measure(mask):
    """``(area, perimeter)`` from cell and boundary-edge counts.

    The perimeter is the length of the staircase boundary, so it is exact
    only for axis-aligned polygons on the grid; for curved boundaries it is
    biased upward (by 4/pi for a disk).
    """
    if mask.n_cells == 0:
        raise InvalidArgument("empty mask")
    padded = np.pad(mask.cells, 1).astype(np.int8)
    edges = np.count_nonzero(np.diff(padded, axis=0)) + np.count_nonzero(np.diff(padded, axis=1))
    return mask.n_cells * mask.h**2, edges * mask.h


def distance_to_boundary(mask):
    """Distance from every included centre to the nearest excluded centre.

    Cells just outside the array count as excluded.  Returned in unknown
    order; a lone cell gets distance ``h``.
    """
    if mask.n_cells == 0:
        raise InvalidArgument("empty mask")
    padded = np.pad(mask.cells, 1)
    dist = ndimage.distance_transform_edt(padded, sampling=mask.h)
    return dist[1:-1, 1:-1][mask.cells]


class BoxCount(NamedTuple):
    estimate: float
    residual: float
    scales: np.ndarray
    counts: np.ndarray


def box_counting_dimension(f, base, scales, samples=None):
    """Box-counting dimension of the graph of ``f`` over ``base``.

    For each scale ``eps`` the base is cut into columns of width ``eps`` and
    each column contributes the number of ``eps``-boxes its sampled range
    meets.  The estimate is the least-squares slope of ``log N`` against
    ``log(1/eps)``; ``residual`` is the RMS misfit of that line.
    """
    scales = np.asarray(sorted(scales, reverse=True), dtype=float)
    if len(scales) < 4:
        raise InvalidArgument("need at least four scales")
    if np.any(scales <= 0):
        raise InvalidArgument("scales must be positive")
    if np.ptp(np.log(scales)) == 0:
        raise InvalidArgument("scales have zero spread")
    if scales[0] / scales[-1] < 100.0 * (1 - 1e-12):
        raise InvalidArgument("scales must span at least two decades")
    a, b = base
    if samples is None:
        samples = int(min(max(64 * (b - a) / scales[-1], f.sample_count(b - a)), 2**22)) + 1
    x = np.linspace(a, b, samples)
    y = f(x)
    counts = []
    for eps in scales:
        col = np.minimum(((x - a) / eps).astype(np.int64), int(math.ceil((b - a) / eps - 1e-9)) - 1)
        starts = np.flatnonzero(np.r_[True, np.diff(col) != 0])
        lo = np.minimum.reduceat(y, starts)
        hi = np.maximum.reduceat(y, starts)
        counts.append(np.sum(np.floor(hi / eps) - np.floor(lo / eps) + 1))
    counts = np.asarray(counts, dtype=float)
    lx, ly = np.log(1.0 / scales), np.log(counts)
    slope, intercept = np.polyfit(lx, ly, 1)
    residual = float(np.sqrt(np.mean((ly - (slope * lx + intercept)) ** 2)))
    return BoxCount(float(slope), residual, scales, counts)
