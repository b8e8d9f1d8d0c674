"""Bulk/boundary covers of graph domains and the counting bounds they give.

The bulk is tiled by lattice squares of side ``ell = kappa_bulk / sqrt(lam)``.
Near the graph of ``f`` the base interval is split into maximal dyadic
intervals on which ``f`` oscillates by at most ``delta = kappa_bdry /
sqrt(lam)``; over each such interval cuboids of height ``delta`` are
stacked and the last piece, whose top is the graph itself, is a cap.  In
one base dimension dyadic intervals already overlap at most once, so no
Besicovitch-type selection is needed.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import InvalidArgument, InvalidPartition, InvalidPolicy, ResolutionTooCoarse
from .geometry import GraphDomain, HolderFunction, Rectangle, rasterize
from .operators import assemble_neumann
from .semiclassics import exponent_identity, hoelder_sum_bound
from .spectral import count_below_inertia

__all__ = [
    "BULK",
    "STACK",
    "CAP",
    "Boxes",
    "BasePartition",
    "BoundaryCover",
    "OscillatoryCover",
    "CapWeights",
    "dyadic_partition",
    "bulk_cover",
    "boundary_cover",
    "build_cover",
    "cover_count_bound",
    "bracketing_check",
    "assign_cap_weights",
    "power_policy",
    "probe_caps",
    "box_multiplicity",
]

BULK, STACK, CAP = 0, 1, 2
TAG_NAMES = {BULK: "bulk", STACK: "boundary_stack", CAP: "boundary_cap"}
DEFAULT_LEVEL = 20
M_MAX = 8


@dataclass(frozen=True, eq=False)
class Boxes:
    """Axis-aligned rectangles as parallel arrays."""

    x0: np.ndarray
    x1: np.ndarray
    y0: np.ndarray
    y1: np.ndarray
    tag: np.ndarray

    def __len__(self):
        return len(self.x0)

    @classmethod
    def empty(cls):
        z = np.zeros(0)
        return cls(z, z, z, z, np.zeros(0, dtype=np.int8))

    @classmethod
    def concat(cls, parts):
        parts = [p for p in parts if len(p)]
        if not parts:
            return cls.empty()
        return cls(*(np.concatenate([getattr(p, k) for p in parts]) for k in ("x0", "x1", "y0", "y1", "tag")))

    def select(self, sel):
        return Boxes(self.x0[sel], self.x1[sel], self.y0[sel], self.y1[sel], self.tag[sel])

    @property
    def largest_side(self):
        return np.maximum(self.x1 - self.x0, self.y1 - self.y0)

    def to_list(self):
        return [
            {"x0": float(a), "x1": float(b), "y0": float(c), "y1": float(d), "tag": TAG_NAMES[int(t)]}
            for a, b, c, d, t in zip(self.x0, self.x1, self.y0, self.y1, self.tag)
        ]


def box_multiplicity(boxes, px, py, *, closed=False, chunk=20000):
    """Number of boxes containing each point.

    Half-open boxes ``[x0, x1) x [y0, y1)`` by default so that shared edges
    are not double counted; ``closed=True`` for containment checks.
    """
    px = np.asarray(px, dtype=float)
    py = np.asarray(py, dtype=float)
    out = np.zeros(px.size, dtype=np.int64)
    if not len(boxes) or not px.size:
        return out
    # elementary x-slabs between consecutive box edges
    edges = np.unique(np.concatenate([boxes.x0, boxes.x1]))
    s0 = np.searchsorted(edges, boxes.x0)
    s1 = np.searchsorted(edges, boxes.x1)
    span = s1 - s0
    box_of = np.repeat(np.arange(len(boxes)), span)
    slab_of = np.repeat(s0, span) + (np.arange(box_of.size) - np.repeat(np.cumsum(span) - span, span))
    order = np.argsort(slab_of, kind="stable")
    box_of, slab_of = box_of[order], slab_of[order]
    ptr = np.searchsorted(slab_of, np.arange(edges.size + 1))
    for start in range(0, px.size, chunk):
        x = px[start : start + chunk]
        y = py[start : start + chunk]
        slab = np.searchsorted(edges, x, side="right") - 1
        if closed:
            # a point on a slab edge may belong to the slab on its left as well
            slabs = [slab, np.searchsorted(edges, x, side="left") - 1]
        else:
            slabs = [slab]
        hit_sets = []
        for sl in slabs:
            valid = (sl >= 0) & (sl < edges.size - 1)
            lo = np.where(valid, ptr[np.clip(sl, 0, edges.size)], 0)
            hi = np.where(valid, ptr[np.clip(sl + 1, 0, edges.size)], 0)
            n = hi - lo
            pt = np.repeat(np.arange(x.size), n)
            cand = box_of[np.repeat(lo, n) + (np.arange(pt.size) - np.repeat(np.cumsum(n) - n, n))]
            if closed:
                inside = (
                    (x[pt] >= boxes.x0[cand]) & (x[pt] <= boxes.x1[cand])
                    & (y[pt] >= boxes.y0[cand]) & (y[pt] <= boxes.y1[cand])
                )
            else:
                inside = (
                    (x[pt] >= boxes.x0[cand]) & (x[pt] < boxes.x1[cand])
                    & (y[pt] >= boxes.y0[cand]) & (y[pt] < boxes.y1[cand])
                )
            hit_sets.append((pt[inside], cand[inside]))
        pts = np.concatenate([h[0] for h in hit_sets])
        cands = np.concatenate([h[1] for h in hit_sets])
        if closed and len(slabs) > 1:
            pair = np.unique(pts.astype(np.int64) * len(boxes) + cands)
            pts = pair // len(boxes)
        out[start : start + chunk] = np.bincount(pts, minlength=x.size)
    return out


# -- base partition -----------------------------------------------------------


@dataclass(frozen=True, eq=False)
class BasePartition:
    """Dyadic base intervals ``[a_k, b_k]`` with sampled range of ``f``."""

    a: np.ndarray
    b: np.ndarray
    fmin: np.ndarray
    fmax: np.ndarray
    delta: float

    def __len__(self):
        return len(self.a)

    @property
    def oscillation(self):
        return self.fmax - self.fmin

    def to_list(self):
        return [
            {"a": float(a), "b": float(b), "osc": float(o)}
            for a, b, o in zip(self.a, self.b, self.oscillation)
        ]


class _Pyramid:
    """Min/max of the samples over every dyadic block of the base."""

    def __init__(self, f, base, level):
        a, b = base
        self.base = (float(a), float(b))
        self.level = level
        x = np.linspace(a, b, 2**level + 1)
        s = f(x)
        hi = np.maximum(s[:-1], s[1:])
        lo = np.minimum(s[:-1], s[1:])
        self.levels = [(lo, hi)]
        while hi.size > 1:
            hi = np.maximum(hi[0::2], hi[1::2])
            lo = np.minimum(lo[0::2], lo[1::2])
            self.levels.append((lo, hi))

    def partition(self, delta):
        top = len(self.levels) - 1
        active = np.zeros(1, dtype=np.int64)
        found = []
        for depth, lev in enumerate(range(top, -1, -1)):
            lo, hi = self.levels[lev]
            ok = hi[active] - lo[active] <= delta
            if ok.any():
                idx = active[ok]
                found.append((depth, idx, lo[idx], hi[idx]))
            bad = active[~ok]
            if not bad.size:
                break
            if lev == 0:
                raise ResolutionTooCoarse(
                    f"oscillation above delta={delta:.3g} at the sample resolution 2^-{self.level}"
                )
            active = np.sort(np.concatenate([2 * bad, 2 * bad + 1]))
        a0, b0 = self.base
        length = b0 - a0
        starts, stops, fmin, fmax = [], [], [], []
        for depth, idx, lo, hi in found:
            width = length / 2.0**depth
            starts.append(a0 + idx * width)
            stops.append(a0 + (idx + 1) * width)
            fmin.append(lo)
            fmax.append(hi)
        starts = np.concatenate(starts)
        order = np.argsort(starts, kind="stable")
        return BasePartition(
            starts[order],
            np.concatenate(stops)[order],
            np.concatenate(fmin)[order],
            np.concatenate(fmax)[order],
            float(delta),
        )


def dyadic_partition(f, base, delta, level=DEFAULT_LEVEL):
    """Maximal dyadic intervals of ``base`` with sampled oscillation ``<= delta``."""
    if not delta > 0:
        raise InvalidArgument("delta must be positive")
    return _Pyramid(f, base, level).partition(delta)


# -- covers -------------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class BulkCover:
    boxes: Boxes
    ell: float
    origin: tuple
    lattice: np.ndarray  # bool (n_cols, n_rows) of bulk squares

    def __len__(self):
        return len(self.boxes)

    def column_tops(self):
        """Top of the contiguous run of bulk squares resting on the lattice floor."""
        n_cols, n_rows = self.lattice.shape
        run = np.cumprod(self.lattice, axis=1).sum(axis=1) if n_rows else np.zeros(n_cols, dtype=int)
        return self.origin[1] + run * self.ell


def bulk_cover(mask, lam, kappa_bulk=1.0):
    """Lattice squares of side ``kappa_bulk / sqrt(lam)`` lying inside the raster.

    The lattice is anchored at the mask origin; a square is kept when every
    cell centre inside it is included and it does not stick out of the grid.
    Any cell farther than ``sqrt(2) * ell`` from the excluded cells is then
    covered.
    """
    if not lam > 0:
        raise InvalidArgument("lambda must be positive")
    ell = kappa_bulk / math.sqrt(lam)
    h = mask.h
    if ell < 2 * h:
        raise ResolutionTooCoarse(f"bulk side {ell:.3g} below 2h = {2 * h:.3g}")
    rows, cols = mask.shape
    n_cols = int(math.floor(cols * h / ell + 1e-9))
    n_rows = int(math.floor(rows * h / ell + 1e-9))
    lattice = np.zeros((n_cols, n_rows), dtype=bool)
    if n_cols and n_rows:
        ja = np.floor((np.arange(cols) + 0.5) * h / ell).astype(np.int64)
        ir = np.floor((np.arange(rows) + 0.5) * h / ell).astype(np.int64)
        keep_c = ja < n_cols
        keep_r = ir < n_rows
        sub = mask.cells[np.ix_(keep_r, keep_c)]
        a_idx = np.broadcast_to(ja[keep_c][None, :], sub.shape)
        r_idx = np.broadcast_to(ir[keep_r][:, None], sub.shape)
        flat = (a_idx * n_rows + r_idx).ravel()
        total = np.bincount(flat, minlength=n_cols * n_rows)
        inside = np.bincount(flat, weights=sub.ravel().astype(float), minlength=n_cols * n_rows)
        lattice = ((total > 0) & (inside == total)).reshape(n_cols, n_rows)
    a, r = np.nonzero(lattice)
    x0, y0 = mask.origin
    boxes = Boxes(
        x0 + a * ell, x0 + (a + 1) * ell, y0 + r * ell, y0 + (r + 1) * ell, np.full(a.size, BULK, dtype=np.int8)
    )
    return BulkCover(boxes, ell, (x0, y0), lattice)


@dataclass(frozen=True, eq=False)
class BoundaryCover:
    """Stacks over each base interval: ``n_full`` cuboids from ``start`` plus a cap."""

    partition: BasePartition
    start: np.ndarray
    n_full: np.ndarray
    delta: float

    @property
    def j3(self):
        return len(self.partition)

    @property
    def n_boxes(self):
        return int(self.n_full.sum()) + self.j3

    def caps(self):
        p = self.partition
        y0 = self.start + self.n_full * self.delta
        return Boxes(p.a, p.b, y0, np.maximum(p.fmax, y0), np.full(len(p), CAP, dtype=np.int8))

    def stacks(self):
        p = self.partition
        k = np.repeat(np.arange(len(p)), self.n_full)
        j = np.arange(k.size) - np.repeat(np.cumsum(self.n_full) - self.n_full, self.n_full)
        y0 = self.start[k] + j * self.delta
        return Boxes(p.a[k], p.b[k], y0, y0 + self.delta, np.full(k.size, STACK, dtype=np.int8))

    def boxes(self):
        return Boxes.concat([self.stacks(), self.caps()])


def boundary_cover(f, base, lam, kappa_bdry=1.0, *, floor=0.0, start=None, level=DEFAULT_LEVEL):
    """Stacked cuboids of height ``delta = kappa_bdry / sqrt(lam)`` under the graph.

    ``start`` (one value per base interval, or a callable of the partition)
    is where each stack begins; by default the floor.
    """
    if not lam > 0:
        raise InvalidArgument("lambda must be positive")
    delta = kappa_bdry / math.sqrt(lam)
    part = dyadic_partition(f, base, delta, level)
    if np.any(part.fmin <= floor):
        raise InvalidArgument("floor must lie below the graph")
    if start is None:
        y_start = np.full(len(part), float(floor))
    elif callable(start):
        y_start = np.asarray(start(part), dtype=float)
    else:
        y_start = np.broadcast_to(np.asarray(start, dtype=float), (len(part),)).copy()
    y_start = np.minimum(y_start, part.fmin)
    n_full = np.floor((part.fmin - y_start) / delta).astype(np.int64)
    return BoundaryCover(part, y_start, np.maximum(n_full, 0), delta)


@dataclass(frozen=True, eq=False)
class OscillatoryCover:
    bulk: BulkCover
    boundary: BoundaryCover
    lam: float
    overlap_multiplicity: int
    coverage_ok: bool

    @property
    def base_partition(self):
        return self.boundary.partition

    @property
    def j3(self):
        return self.boundary.j3

    def boxes(self):
        return Boxes.concat([self.bulk.boxes, self.boundary.boxes()])

    def count(self):
        return len(self.bulk) + self.boundary.n_boxes

    def to_dict(self):
        return {
            "lambda": self.lam,
            "ell": self.bulk.ell,
            "delta": self.boundary.delta,
            "overlap_multiplicity": self.overlap_multiplicity,
            "j3": self.j3,
            "count": self.count(),
            "base_partition": self.base_partition.to_list(),
            "boxes": self.boxes().to_list(),
        }

    def to_svg(self, width=800):
        boxes = self.boxes()
        xmin, xmax = float(boxes.x0.min()), float(boxes.x1.max())
        ymin, ymax = float(boxes.y0.min()), float(boxes.y1.max())
        scale = width / (xmax - xmin)
        height = (ymax - ymin) * scale
        colors = {BULK: "#9ecae1", STACK: "#fdae6b", CAP: "#e6550d"}
        parts = [
            f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height:.1f}" '
            f'viewBox="0 0 {width} {height:.3f}">'
        ]
        for x0, x1, y0, y1, t in zip(boxes.x0, boxes.x1, boxes.y0, boxes.y1, boxes.tag):
            parts.append(
                f'<rect x="{(x0 - xmin) * scale:.3f}" y="{(ymax - y1) * scale:.3f}" '
                f'width="{(x1 - x0) * scale:.3f}" height="{(y1 - y0) * scale:.3f}" '
                f'fill="{colors[int(t)]}" stroke="black" stroke-width="0.2"/>'
            )
        parts.append("</svg>")
        return "\n".join(parts)


def _as_graph_domain(domain):
    if isinstance(domain, GraphDomain):
        return domain
    if isinstance(domain, Rectangle):
        return GraphDomain(HolderFunction.constant(domain.height), (0.0, domain.width), 0.0)
    raise InvalidArgument("covers are built for graph domains (or rectangles)")


def build_cover(domain, h, lam, kappa_bulk=1.0, kappa_bdry=1.0, *, n_samples=100_000, seed=0,
                level=DEFAULT_LEVEL, max_multiplicity=M_MAX):
    """Bulk squares plus boundary stacks resting on top of the bulk columns.

    Stacks over a base interval start at the lowest bulk-column top under
    it, so every point is in a bulk square or in a stack; the two overlap
    at most once.
    """
    graph = _as_graph_domain(domain)
    mask = rasterize(graph, h)
    bulk = bulk_cover(mask, lam, kappa_bulk)
    tops = bulk.column_tops()
    ell = bulk.ell
    x_origin = mask.origin[0]
    n_cols = len(tops)

    def stack_start(part):
        a_lo = np.floor((part.a - x_origin) / ell + 1e-12).astype(np.int64)
        a_hi = np.ceil((part.b - x_origin) / ell - 1e-12).astype(np.int64) - 1
        out = np.empty(len(part))
        for k in range(len(part)):
            lo, hi = a_lo[k], a_hi[k]
            if lo < 0 or hi >= n_cols:
                out[k] = graph.floor
            else:
                out[k] = tops[lo : hi + 1].min()
        return out

    boundary = boundary_cover(graph.profile, graph.base, lam, kappa_bdry, floor=graph.floor,
                              start=stack_start, level=level)
    boxes = Boxes.concat([bulk.boxes, boundary.boxes()])
    cx, cy = mask.centers()
    coverage_ok = bool(np.all(box_multiplicity(boxes, cx, cy, closed=True) >= 1))
    rng = np.random.default_rng(seed)
    xmin, ymin, xmax, ymax = graph.bbox()
    px = rng.uniform(xmin, xmax, n_samples)
    py = rng.uniform(ymin, ymax, n_samples)
    multiplicity = int(box_multiplicity(boxes, px, py).max()) if len(boxes) else 0
    if multiplicity > max_multiplicity:
        raise InvalidArgument(f"overlap multiplicity {multiplicity} exceeds {max_multiplicity}")
    return OscillatoryCover(bulk, boundary, float(lam), multiplicity, coverage_ok)


def cover_count_bound(cover):
    """Number of covering pieces: the one-eigenvalue-per-piece upper proxy."""
    if isinstance(cover, OscillatoryCover):
        return cover.count()
    if isinstance(cover, BoundaryCover):
        return cover.n_boxes
    return len(cover)


# -- bracketing ---------------------------------------------------------------


def _restrict(mask, sub, V):
    if V is None:
        return None
    values = np.asarray(getattr(V, "values", V), dtype=float)
    idx = mask.index_map()
    return values[idx[sub.cells]]


def bracketing_check(mask, partition, lam, V=None):
    """Neumann bracketing ``N(mask) <= sum_j N(piece_j)`` at the matrix level.

    Edges between different pieces are dropped, which lowers the form.
    Returns ``(lhs, rhs)``.
    """
    total = np.zeros(mask.shape, dtype=np.int64)
    for sub in partition:
        if sub.shape != mask.shape or sub.h != mask.h or sub.origin != mask.origin:
            raise InvalidPartition("piece is not on the same grid as the mask")
        total += sub.cells
    if np.any(total > 1):
        raise InvalidPartition("pieces overlap")
    if np.any((total == 1) != mask.cells):
        raise InvalidPartition("pieces do not cover exactly the included cells")
    lhs = count_below_inertia(assemble_neumann(mask, V), lam).count
    rhs = 0
    for sub in partition:
        if sub.n_cells:
            rhs += count_below_inertia(assemble_neumann(sub, _restrict(mask, sub, V)), lam).count
    return lhs, rhs


# -- cap weights --------------------------------------------------------------


def power_policy(a=0.5, b=0.0):
    """``A_j = ell_j^a (t_j + ell_j)^b``."""

    def policy(ell, t):
        return ell**a * (t + ell) ** b

    policy.params = {"a": a, "b": b}
    return policy


@dataclass(frozen=True, eq=False)
class CapWeights:
    A: np.ndarray
    j3: int
    hoelder_bound: float
    sum_As: float
    weighted_integral: float
    C_fit: float
    per_cap_C: float
    empty_caps: int
    exponent: float
    details: dict = field(default_factory=dict)

    def to_dict(self):
        return {
            "j3": self.j3,
            "hoelder_bound": self.hoelder_bound,
            "sum_As": self.sum_As,
            "weighted_integral": self.weighted_integral,
            "C_fit": self.C_fit,
            "per_cap_C": self.per_cap_C,
            "empty_caps": self.empty_caps,
            "exponent": self.exponent,
        }


def assign_cap_weights(cover, V, mask, params, policy=None, w=None, profile=None):
    """Cap weights ``A_j = policy(ell_j, t_j)`` and the Hölder-sum count bound.

    ``ell_j`` is the largest side of cap ``j`` and ``t_j`` the vertical
    distance from its centre to the graph.  Reports the fitted constant in
    ``sum A_j^s <= C int w |V|^p_tilde`` (not asserted) and checks
    ``|J3| <= (sum A^-s')^(1/s') (sum A^s)^(1/s)``.
    """
    from .semiclassics import _weight_values

    policy = policy or power_policy()
    boundary = cover.boundary if isinstance(cover, OscillatoryCover) else cover
    caps = boundary.caps()
    ell = caps.largest_side
    xc = 0.5 * (caps.x0 + caps.x1)
    yc = 0.5 * (caps.y0 + caps.y1)
    if profile is not None:
        t = np.maximum(profile(xc) - yc, 0.0)
    else:
        t = np.maximum(caps.y1 - yc, 0.0)
    A = np.asarray(policy(ell, t), dtype=float)
    if A.shape != ell.shape or not np.all(np.isfinite(A)) or np.any(A <= 0):
        raise InvalidPolicy("policy must return one finite positive A_j per cap")
    s = params.s
    bound, j3 = hoelder_sum_bound(A, s)
    if j3 > bound * (1 + 1e-12):
        raise ArithmeticError(f"Hölder bound {bound} below |J3| = {j3}")
    values = np.abs(np.asarray(getattr(V, "values", V), dtype=float))
    density = _weight_values(w, mask, params) * values**params.p_tilde * mask.h**2
    cx, cy = mask.centers()
    integral = float(density.sum())
    # per-cap integrals from cell centres inside each (closed) cap box
    per_cap = np.zeros(len(caps))
    order = np.argsort(cx, kind="stable")
    sx = cx[order]
    lo = np.searchsorted(sx, caps.x0, side="left")
    hi = np.searchsorted(sx, caps.x1, side="right")
    for k in np.flatnonzero(hi > lo):
        cand = order[lo[k] : hi[k]]
        sel = cand[(cy[cand] >= caps.y0[k]) & (cy[cand] <= caps.y1[k])]
        per_cap[k] = density[sel].sum()
    As = A**s
    nonempty = per_cap > 0
    per_cap_C = float(np.max(As[nonempty] / per_cap[nonempty])) if nonempty.any() else float("nan")
    return CapWeights(
        A=A,
        j3=j3,
        hoelder_bound=bound,
        sum_As=float(As.sum()),
        weighted_integral=integral,
        C_fit=float(As.sum() / integral) if integral > 0 else float("inf"),
        per_cap_C=per_cap_C,
        empty_caps=int(np.count_nonzero(~nonempty)),
        exponent=exponent_identity(params),
        details={"policy": getattr(policy, "params", None)},
    )


def probe_caps(cover, mask, lam, max_caps=50, seed=0):
    """Count Neumann eigenvalues below ``lam`` on sampled caps.

    The one-eigenvalue property is not guaranteed by the construction; this
    only measures it.  Caps narrower than a cell contain no cell centres
    and are skipped.
    """
    boundary = cover.boundary if isinstance(cover, OscillatoryCover) else cover
    caps = boundary.caps()
    rng = np.random.default_rng(seed)
    picks = rng.permutation(len(caps))[:max_caps]
    rows, cols = mask.shape
    xs = mask.origin[0] + (np.arange(cols) + 0.5) * mask.h
    ys = mask.origin[1] + (np.arange(rows) + 0.5) * mask.h
    counts = []
    skipped = 0
    for k in picks:
        inside = np.outer((ys >= caps.y0[k]) & (ys <= caps.y1[k]), (xs >= caps.x0[k]) & (xs <= caps.x1[k]))
        sub = mask.with_cells(mask.cells & inside)
        if sub.n_cells == 0:
            skipped += 1
            continue
        counts.append(count_below_inertia(assemble_neumann(sub), lam).count)
    counts = np.asarray(counts, dtype=int)
    return {
        "probed": int(counts.size),
        "skipped": skipped,
        "max_count": int(counts.max()) if counts.size else 0,
        "violations": int(np.count_nonzero(counts > 1)),
    }
