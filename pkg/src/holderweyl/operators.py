"""Five-point discrete quadratic forms on a :class:`~holderweyl.geometry.GridMask`.

Unknowns are the included cells in row-major order.  With identity mass
scaling the matrix of the form ``q(u)`` is what gets counted: the number of
eigenvalues below ``lam`` of ``A`` equals ``N(-Delta + V - lam)`` for the
discretised operator.
"""
from __future__ import annotations

import io
import math
from dataclasses import dataclass, field

import numpy as np
import scipy.io
import scipy.sparse as sp

from .errors import InvalidArgument, SingularSample
from .geometry import distance_to_boundary

__all__ = [
    "PotentialField",
    "DiscreteForm",
    "NEUMANN",
    "DIRICHLET",
    "assemble_neumann",
    "assemble_dirichlet",
    "sample_potential",
    "potential_from_spec",
    "interior_edges",
]

NEUMANN = "neumann"
DIRICHLET = "dirichlet"


@dataclass(frozen=True, eq=False)
class PotentialField:
    """Nonpositive per-cell potential values (unknown order)."""

    values: np.ndarray
    provenance: str = "array"
    n_clipped: int = 0

    def __post_init__(self):
        v = np.array(self.values, dtype=float).ravel()
        if not np.all(np.isfinite(v)):
            raise SingularSample("potential has non-finite entries", int(np.flatnonzero(~np.isfinite(v))[0]))
        if np.any(v > 0):
            raise InvalidArgument("potential values must be <= 0; use sample_potential to clip")
        v.setflags(write=False)
        object.__setattr__(self, "values", v)

    def __len__(self):
        return self.values.size

    @classmethod
    def zeros(cls, n):
        return cls(np.zeros(n), "zero")

    def scaled(self, factor):
        if factor < 0:
            raise InvalidArgument("scaling factor must be nonnegative")
        return PotentialField(self.values * factor, f"{factor}*({self.provenance})")


def interior_edges(mask):
    """Index pairs ``(p, q)`` of 4-neighbour edges with both cells included."""
    idx = mask.index_map()
    cells = mask.cells
    horiz = cells[:, :-1] & cells[:, 1:]
    vert = cells[:-1, :] & cells[1:, :]
    p = np.concatenate([idx[:, :-1][horiz], idx[:-1, :][vert]])
    q = np.concatenate([idx[:, 1:][horiz], idx[1:, :][vert]])
    return p, q


@dataclass(frozen=True, eq=False)
class DiscreteForm:
    """Sparse symmetric matrix of a discrete quadratic form (units 1/length^2)."""

    matrix: sp.csr_matrix
    bc: str
    h: float
    potential: PotentialField | None = None
    _cache: dict = field(default_factory=dict, repr=False)

    @property
    def n(self):
        return self.matrix.shape[0]

    def with_potential(self, V):
        """Same kinetic part with the potential replaced by ``V``."""
        base = self.matrix
        if self.potential is not None:
            base = base - sp.diags(self.potential.values)
        return DiscreteForm(sp.csr_matrix(base + sp.diags(V.values)), self.bc, self.h, V)

    def scaled(self, factor):
        return DiscreteForm(sp.csr_matrix(self.matrix * factor), self.bc, self.h, None)

    def to_matrix_market(self):
        """Matrix Market coordinate text (symmetric, real)."""
        buf = io.BytesIO()
        scipy.io.mmwrite(buf, sp.coo_matrix(self.matrix), symmetry="symmetric", field="real")
        return buf.getvalue().decode("ascii")


def _check_potential(mask, V):
    n = mask.n_cells
    if V is None:
        return PotentialField.zeros(n)
    if not isinstance(V, PotentialField):
        V = PotentialField(np.broadcast_to(np.asarray(V, dtype=float), (n,)))
    if len(V) != n:
        raise InvalidArgument(f"potential has {len(V)} values for {n} cells")
    return V


def _stiffness(mask, diag_extra):
    n = mask.n_cells
    p, q = interior_edges(mask)
    inv_h2 = 1.0 / mask.h**2
    degree = np.bincount(p, minlength=n) + np.bincount(q, minlength=n)
    rows = np.concatenate([p, q, np.arange(n)])
    cols = np.concatenate([q, p, np.arange(n)])
    vals = np.concatenate([np.full(2 * p.size, -inv_h2), degree * inv_h2 + diag_extra])
    return sp.csr_matrix((vals, (rows, cols)), shape=(n, n))


def assemble_neumann(mask, V=None):
    """Form ``sum_edges (u_i - u_j)^2 / h^2 + sum_i V_i u_i^2`` over interior edges.

    No boundary edges appear, which is the discrete natural boundary
    condition.
    """
    V = _check_potential(mask, V)
    return DiscreteForm(_stiffness(mask, V.values), NEUMANN, mask.h, V)


def assemble_dirichlet(mask, V=None):
    """Five-point form with zero extension outside the mask.

    Every cell sees all four grid edges, so the diagonal is ``4 / h^2``.
    """
    V = _check_potential(mask, V)
    p, q = interior_edges(mask)
    n = mask.n_cells
    degree = np.bincount(p, minlength=n) + np.bincount(q, minlength=n)
    missing = (4 - degree) / mask.h**2
    return DiscreteForm(_stiffness(mask, V.values + missing), DIRICHLET, mask.h, V)


# -- potentials ---------------------------------------------------------------


def _constant(value):
    return lambda x, y, dist: np.full(x.shape, float(value))


def _distance_power(alpha, scale=1.0):
    return lambda x, y, dist: -scale * dist ** (-float(alpha))


def _half_plane(value, x_split, side="left"):
    def formula(x, y, dist):
        sel = x < x_split if side == "left" else x >= x_split
        return np.where(sel, float(value), 0.0)

    return formula


def _bump(center, radius, depth):
    cx, cy = center

    def formula(x, y, dist):
        r2 = ((x - cx) ** 2 + (y - cy) ** 2) / radius**2
        out = np.zeros(x.shape)
        inside = r2 < 1
        out[inside] = -depth * np.exp(1.0 - 1.0 / (1.0 - r2[inside]))
        return out

    return formula


def potential_from_spec(spec):
    """Turn a JSON potential description into a formula ``(x, y, dist) -> V``.

    Supported kinds: ``constant`` (value), ``distance_power`` (alpha, scale;
    ``-scale * dist^-alpha``), ``half`` (value, x_split, side) and ``bump``
    (center, radius, depth; smooth, compactly supported).
    """
    if callable(spec):
        return spec
    if isinstance(spec, (int, float)):
        return _constant(spec)
    kind = spec.get("kind")
    if kind == "constant":
        return _constant(spec["value"])
    if kind == "distance_power":
        return _distance_power(spec["alpha"], spec.get("scale", 1.0))
    if kind == "half":
        return _half_plane(spec["value"], spec["x_split"], spec.get("side", "left"))
    if kind == "bump":
        return _bump(tuple(spec["center"]), float(spec["radius"]), float(spec["depth"]))
    raise InvalidArgument(f"unknown potential kind {kind!r}")


def sample_potential(mask, formula):
    """Evaluate ``formula(x, y, dist)`` at included cell centres.

    Positive values are clipped to zero and counted in ``n_clipped``; a
    non-finite value raises :class:`SingularSample` naming the cell.
    """
    f = potential_from_spec(formula)
    x, y = mask.centers()
    dist = distance_to_boundary(mask)
    with np.errstate(divide="ignore", invalid="ignore", over="ignore"):
        values = np.asarray(f(x, y, dist), dtype=float)
    values = np.broadcast_to(values, x.shape).copy()
    bad = ~np.isfinite(values)
    if bad.any():
        i = int(np.flatnonzero(bad)[0])
        raise SingularSample(f"potential is not finite at cell {i} ({x[i]:.6g}, {y[i]:.6g})", i)
    positive = values > 0
    values[positive] = 0.0
    name = formula.get("kind", "formula") if isinstance(formula, dict) else getattr(formula, "__name__", "formula")
    return PotentialField(values, str(name), int(np.count_nonzero(positive)))


def spectral_radius_bound(form):
    """Gershgorin bound on ``max |eigenvalue|``."""
    return float(abs(form.matrix).sum(axis=1).max()) if form.n else 0.0


def wavelength_ok(lam, h, factor=4.0):
    """Resolution guard: the wavelength ``1/sqrt(lam)`` spans ``factor`` cells."""
    return lam <= 0 or 1.0 / math.sqrt(lam) >= factor * h
