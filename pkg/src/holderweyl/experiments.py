"""Scripted scans that combine geometry, operators, counting and semiclassics.

Every scan returns a :class:`ScanReport`: a table of rows, an echo of the
parameters, and a list of named pass/fail flags.  A flag never raises; a
failed flag is data.  Only broken preconditions raise.
"""
from __future__ import annotations

import csv
import io
import json
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp

from .errors import DecompositionNotExact, InvalidArgument, InvalidConfiguration, SingularWeight
from .geometry import (
    Domain2D,
    GridMask,
    HolderFunction,
    build_graph_domain,
    build_rooms_and_passages,
    distance_to_boundary,
    domain_from_dict,
    measure,
    rasterize,
)
from .operators import PotentialField, assemble_neumann, sample_potential, wavelength_ok
from .semiclassics import phase_space_count, solve_parameters, triple_norm
from .spectral import analyze, count_below_inertia, count_scan

__all__ = [
    "Flag",
    "ScanReport",
    "SplitResult",
    "weyl_scan",
    "schrodinger_weyl_scan",
    "splitting_check",
    "default_approximant",
    "clr_scan",
    "blowup_scan",
    "rooms_probe",
    "REPORT_SCHEMA",
]

REPORT_SCHEMA = 1
TREND_TOL = 0.05


@dataclass(frozen=True)
class Flag:
    """Outcome of one checked assertion; ``invariant`` says what was tested."""

    name: str
    invariant: str
    passed: bool
    detail: str = ""

    def to_dict(self):
        return {"name": self.name, "invariant": self.invariant, "passed": self.passed, "detail": self.detail}


@dataclass
class ScanReport:
    experiment: str
    columns: tuple
    rows: list
    params: dict = field(default_factory=dict)
    flags: list = field(default_factory=list)
    diagnostics: dict = field(default_factory=dict)
    exploratory: bool = False

    @property
    def passed(self):
        return all(f.passed for f in self.flags)

    def flag(self, name):
        for f in self.flags:
            if f.name == name:
                return f
        raise KeyError(name)

    def column(self, name):
        return [row[name] for row in self.rows]

    def to_csv(self):
        """RFC 4180 table with a header row; floats use ``repr`` so reruns match byte for byte."""
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\r\n")
        writer.writerow(self.columns)
        for row in self.rows:
            writer.writerow([_cell(row[c]) for c in self.columns])
        return buf.getvalue()

    def to_dict(self):
        return {
            "schema": REPORT_SCHEMA,
            "experiment": self.experiment,
            "exploratory": self.exploratory,
            "passed": self.passed,
            "columns": list(self.columns),
            "rows": [{c: _plain(row[c]) for c in self.columns} for row in self.rows],
            "params": _plain(self.params),
            "flags": [f.to_dict() for f in self.flags],
            "diagnostics": _plain(self.diagnostics),
        }

    def to_json(self):
        return json.dumps(self.to_dict(), indent=2, sort_keys=True, allow_nan=True)


def _cell(value):
    if isinstance(value, (float, np.floating)):
        return repr(float(value))
    if isinstance(value, np.integer):
        return str(int(value))
    return value


def _plain(obj):
    if isinstance(obj, dict):
        return {str(k): _plain(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_plain(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return [_plain(v) for v in obj.tolist()]
    if isinstance(obj, np.integer):
        return int(obj)
    if isinstance(obj, (np.floating, float)):
        return float(obj)
    if isinstance(obj, np.bool_):
        return bool(obj)
    return obj


# -- shared plumbing -------------------------------------------------------------


def _as_domain(domain):
    if isinstance(domain, Domain2D):
        return domain
    if isinstance(domain, dict):
        return domain_from_dict(domain)
    raise InvalidArgument(f"cannot interpret {type(domain).__name__} as a domain")


def _as_mask(domain, h):
    if isinstance(domain, GridMask):
        return domain
    if h is None or not h > 0:
        raise InvalidConfiguration("h must be positive")
    return rasterize(_as_domain(domain), h)


def _as_potential(mask, V):
    if isinstance(V, PotentialField):
        if len(V) != mask.n_cells:
            raise InvalidArgument(f"potential has {len(V)} values for {mask.n_cells} cells")
        return V
    if isinstance(V, np.ndarray):
        return PotentialField(V)
    return sample_potential(mask, V)


def _lambda_grid(lambdas, h, positive=True):
    lams = [float(v) for v in lambdas]
    if not lams:
        raise InvalidConfiguration("empty lambda grid")
    if any(b <= a for a, b in zip(lams, lams[1:])):
        raise InvalidConfiguration("lambda grid must be strictly increasing")
    if positive and lams[0] <= 0:
        raise InvalidConfiguration("lambda grid must be positive")
    if h is not None and not wavelength_ok(lams[-1], h):
        raise InvalidConfiguration(
            f"lambda_max={lams[-1]:g} is not resolved at h={h:g}: need 1/sqrt(lambda) >= 4h, "
            f"i.e. lambda <= {1.0 / (16.0 * h * h):g}"
        )
    return lams


def _map(fn, items, workers):
    if workers and workers > 1 and len(items) > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            return list(pool.map(fn, items))
    return [fn(x) for x in items]


def _schrodinger_counts(kinetic, V, lams, workers=1, kinetic_factor=1.0):
    """``N(kinetic_factor * K + lam V)`` for each ``lam``, sharing one ordering."""
    K = sp.csr_matrix(kinetic.matrix if hasattr(kinetic, "matrix") else kinetic) * kinetic_factor
    values = np.asarray(getattr(V, "values", V), dtype=float)
    perm = analyze(K).perm

    def one(lam):
        m = sp.csr_matrix(K + sp.diags(lam * values))
        return count_below_inertia(m, 0.0, analysis=analyze(m, ordering=perm)).count

    return _map(one, list(lams), workers)


def _trend_flag(ratios):
    """Ratio to one must not move away from 1 (beyond a tolerance) at the top of the grid."""
    if len(ratios) < 2:
        return Flag("ratio_approaches_one", "|ratio - 1| at the largest lambda <= value at the next one + 0.05",
                    True, "fewer than two rows")
    r1, r2 = ratios[-2], ratios[-1]
    ok = abs(r2 - 1.0) <= abs(r1 - 1.0) + TREND_TOL
    return Flag(
        "ratio_approaches_one",
        "|ratio - 1| at the largest lambda <= value at the next one + 0.05",
        bool(ok),
        f"ratios {r1:.6g} -> {r2:.6g}",
    )


# -- Weyl scans -------------------------------------------------------------------


def weyl_scan(domain, h, lambdas, *, workers=1):
    """Neumann counts ``N(-Delta - lam)`` against the leading Weyl term.

    ``ratio`` is ``count / prediction``; the area is that of the raster.
    The prediction goes through the phase-space quadrature with ``V = -1``
    so that it matches :func:`schrodinger_weyl_scan` bit for bit.
    """
    lams = _lambda_grid(lambdas, h)
    mask = _as_mask(domain, h)
    area, perimeter = measure(mask)
    records = count_scan(assemble_neumann(mask), lams, workers=workers)
    unit_well = PotentialField(-np.ones(mask.n_cells))
    rows = []
    for r in records:
        pred = phase_space_count(unit_well, mask, 2, r.lam)
        rows.append({"lambda": r.lam, "count": r.count, "prediction": pred, "ratio": r.count / pred})
    return ScanReport(
        "weyl_scan",
        ("lambda", "count", "prediction", "ratio"),
        rows,
        params={"h": h, "n_cells": mask.n_cells, "area": area, "perimeter": perimeter,
                "domain": _describe(domain)},
        flags=[_trend_flag([row["ratio"] for row in rows])],
        diagnostics={"shifts": [r.shift_applied for r in records]},
    )


def schrodinger_weyl_scan(domain, V, h, lambdas, *, workers=1):
    """``N(-Delta^N + lam V)`` against the phase-space count of ``lam V``."""
    lams = _lambda_grid(lambdas, h)
    mask = _as_mask(domain, h)
    Vf = _as_potential(mask, V)
    counts = _schrodinger_counts(assemble_neumann(mask), Vf, lams, workers)
    rows = []
    for lam, n in zip(lams, counts):
        pred = phase_space_count(Vf, mask, 2, lam)
        rows.append({"lambda": lam, "count": n, "prediction": pred, "ratio": n / pred if pred > 0 else math.inf})
    return ScanReport(
        "schrodinger_weyl_scan",
        ("lambda", "count", "prediction", "ratio"),
        rows,
        params={"h": h, "n_cells": mask.n_cells, "potential": Vf.provenance, "n_clipped": Vf.n_clipped,
                "domain": _describe(domain)},
        flags=[_trend_flag([row["ratio"] for row in rows])],
    )


# -- splitting ---------------------------------------------------------------------


@dataclass(frozen=True)
class SplitResult:
    """Counts of the split; unpacks as ``lhs, rhs1, rhs2``."""

    lhs: int
    rhs1: int
    rhs2: int
    n_clipped: int = 0

    def __iter__(self):
        return iter((self.lhs, self.rhs1, self.rhs2))

    @property
    def holds(self):
        return self.lhs <= self.rhs1 + self.rhs2


def default_approximant(V, mask, n):
    """``V`` truncated at ``-n`` and switched off within ``1/n`` of the boundary.

    The result is bounded, supported away from the boundary and satisfies
    ``V <= V_n <= 0``, so ``V - V_n`` needs no clipping.
    """
    if not n > 0:
        raise InvalidArgument("truncation level n must be positive")
    values = np.asarray(getattr(V, "values", V), dtype=float)
    keep = distance_to_boundary(mask) >= 1.0 / n
    return PotentialField(np.where(keep, np.maximum(values, -float(n)), 0.0), f"approximant(n={n})")


def splitting_check(domain, V, V_n, delta, lam, h=None, *, strict=False):
    """Integer check of ``N(K + lam V) <= N((1-delta) K + lam V_n) + N(delta K + lam (V - V_n))``.

    ``K`` is the Neumann kinetic form and ``N`` counts negative eigenvalues.
    ``V_n`` is a potential or a positive integer ``n`` selecting
    :func:`default_approximant`.  Positive entries of ``V - V_n`` are
    clipped to zero and counted; with ``strict=True`` that raises.
    """
    if not 0.0 < delta < 1.0:
        raise InvalidArgument("delta must lie in (0, 1)")
    mask = _as_mask(domain, h)
    Vf = _as_potential(mask, V)
    if isinstance(V_n, (int, np.integer)) and not isinstance(V_n, bool):
        Vn = default_approximant(Vf, mask, V_n)
    else:
        Vn = _as_potential(mask, V_n)
    diff = Vf.values - Vn.values
    positive = diff > 0
    n_clipped = int(np.count_nonzero(positive))
    if n_clipped and strict:
        raise DecompositionNotExact(f"V - V_n is positive on {n_clipped} cells")
    diff = np.where(positive, 0.0, diff)
    K = assemble_neumann(mask).matrix
    perm = analyze(K).perm

    def count(factor, values):
        m = sp.csr_matrix(factor * K + sp.diags(lam * values))
        return count_below_inertia(m, 0.0, analysis=analyze(m, ordering=perm)).count

    return SplitResult(count(1.0, Vf.values), count(1.0 - delta, Vn.values), count(delta, diff), n_clipped)


# -- CLR proxy -----------------------------------------------------------------------


def clr_scan(domain, V, params, h, lambdas, *, w=None, workers=1):
    """Ratios ``N(lam V) / lam^(d/2)`` and ``N(lam V) / lam^p_tilde`` over the grid.

    ``C_fit`` is the smallest constant with
    ``N(lam V) <= C_fit (1 + |||lam V|||^(d/2))`` on the grid and
    ``bound_proxy`` is that bound divided by ``lam^(d/2)``.  The flagged
    proxy is ``max ratio <= 3 * median ratio``.
    """
    lams = _lambda_grid(lambdas, h)
    mask = _as_mask(domain, h)
    Vf = _as_potential(mask, V)
    d = params.d
    try:
        norm = triple_norm(Vf, mask, params, w)
    except SingularWeight as err:
        raise InvalidConfiguration(f"triple norm is infinite at h={h}: {err}") from err
    if not math.isfinite(norm.total):
        raise InvalidConfiguration(
            f"triple norm is infinite at h={h}: L^(d/2) part {norm.lp_part}, weighted part {norm.weighted_part}"
        )
    counts = _schrodinger_counts(assemble_neumann(mask), Vf, lams, workers)
    # the norm is homogeneous: |||lam V||| = lam |||V|||
    envelope = [1.0 + (lam * norm.total) ** (d / 2.0) for lam in lams]
    c_fit = max(n / e for n, e in zip(counts, envelope))
    rows = []
    for lam, n, e in zip(lams, counts, envelope):
        rows.append({
            "lambda": lam,
            "count": n,
            "ratio": n / lam ** (d / 2.0),
            "ratio_ptilde": n / lam**params.p_tilde,
            "bound_proxy": c_fit * e / lam ** (d / 2.0),
        })
    ratios = np.array([row["ratio"] for row in rows])
    median = float(np.median(ratios))
    sup = float(ratios.max())
    dominated = all(row["ratio_ptilde"] <= row["ratio"] for row in rows if row["lambda"] >= 1.0)
    flags = [
        Flag("ratio_bounded", "max N/lambda^(d/2) <= 3 * median over the grid", sup <= 3.0 * median,
             f"max {sup:.6g}, median {median:.6g}"),
        Flag("ptilde_ratio_dominated", "N/lambda^p_tilde <= N/lambda^(d/2) for lambda >= 1", dominated),
    ]
    return ScanReport(
        "clr_scan",
        ("lambda", "count", "ratio", "ratio_ptilde", "bound_proxy"),
        rows,
        params={"h": h, "n_cells": mask.n_cells, "potential": Vf.provenance, "parameters": params.to_dict(),
                "domain": _describe(domain)},
        flags=flags,
        diagnostics={"sup_ratio": sup, "median_ratio": median, "C_fit": c_fit, "triple_norm": norm.to_dict()},
    )


# -- blow-up trend ---------------------------------------------------------------------


def blowup_scan(gamma, alpha, h_sequence, lambdas, *, amplitude=0.1, s=50.0, params=None,
                lp_tol=0.05, growth_min=1.5, workers=1):
    """Exploratory scan with ``V = -dist(x, boundary)^(-alpha)`` on a Weierstrass graph domain.

    Checks, between successive ``h``, that the ``L^(d/2)`` quadrature
    settles (relative change ``<= lp_tol``) while the weighted part of the
    triple norm grows by at least ``growth_min``; then reports
    ``N(lam V) / lam`` on the finest grid and flags whether it ends higher
    than it starts.  A settling failure is reported as ``alpha`` too large.
    """
    d = 2
    if not (d - 1) / d < gamma < 1:
        raise InvalidConfiguration(f"gamma must lie in ({(d - 1) / d}, 1), got {gamma}")
    if not alpha > 0:
        raise InvalidConfiguration("alpha must be positive")
    hs = [float(v) for v in h_sequence]
    if len(hs) < 2 or any(b >= a for a, b in zip(hs, hs[1:])) or hs[-1] <= 0:
        raise InvalidConfiguration("h_sequence needs at least two strictly decreasing positive values")
    lams = _lambda_grid(lambdas, hs[-1])
    params = params or solve_parameters(d, gamma, s)

    probe = HolderFunction.for_resolution(gamma, amplitude, hs[-1])
    f = HolderFunction.for_resolution(gamma, amplitude, hs[-1], offset=1.0 + probe.deviation_bound)
    domain = build_graph_domain(f, (0.0, 1.0), 0.0)
    potential = {"kind": "distance_power", "alpha": alpha}

    levels = []
    for h in hs:
        mask = rasterize(domain, h)
        norm = triple_norm(sample_potential(mask, potential), mask, params)
        levels.append({"h": h, "n_cells": mask.n_cells, "lp_part": norm.lp_part, "weighted_part": norm.weighted_part})
    lp_change = [abs(b["lp_part"] / a["lp_part"] - 1.0) for a, b in zip(levels, levels[1:])]
    growth = [b["weighted_part"] / a["weighted_part"] for a, b in zip(levels, levels[1:])]

    Vf = sample_potential(mask, potential)
    counts = _schrodinger_counts(assemble_neumann(mask), Vf, lams, workers)
    rows = [
        {"lambda": lam, "count": n, "ratio": n / lam ** (d / 2.0), "prediction": phase_space_count(Vf, mask, d, lam)}
        for lam, n in zip(lams, counts)
    ]
    certified = f.holder_ratio(domain.base) <= f.holder_constant
    lp_ok = max(lp_change) <= lp_tol
    flags = [
        Flag("holder_certificate", "sampled Hölder ratio <= certified constant", bool(certified),
             f"ratio {f.holder_ratio(domain.base):.6g}, constant {f.holder_constant:.6g}"),
        Flag("lp_part_stable", f"L^(d/2) quadrature changes by <= {lp_tol:g} under h-halving", bool(lp_ok),
             "" if lp_ok else f"alpha={alpha} looks too large: changes {lp_change}"),
        Flag("weighted_part_grows", f"weighted part grows by >= {growth_min:g} under h-halving",
             bool(min(growth) >= growth_min), f"growth factors {growth}"),
        Flag("ratio_increases", "ratio(lambda_max) > ratio(lambda_min)", rows[-1]["ratio"] > rows[0]["ratio"],
             f"{rows[0]['ratio']:.6g} -> {rows[-1]['ratio']:.6g}"),
    ]
    return ScanReport(
        "blowup_scan",
        ("lambda", "count", "ratio", "prediction"),
        rows,
        params={"gamma": gamma, "alpha": alpha, "amplitude": amplitude, "h_sequence": hs,
                "profile": f.to_dict(), "parameters": params.to_dict()},
        flags=flags,
        diagnostics={"levels": levels, "lp_change": lp_change, "weighted_growth": growth,
                     "label": "exploratory: trend only, not a reproduction of the limsup statement"},
        exploratory=True,
    )


# -- rooms and passages ------------------------------------------------------------------


def _passage_guard(domain, h):
    for i, (_, _, half) in enumerate(domain.passages(), start=1):
        if 2.0 * half < h:
            raise InvalidConfiguration(
                f"n_rooms={domain.n_rooms}: passage {i} has height {2 * half:.4g} < h={h:g}"
            )


def rooms_probe(n_rooms_list, lambda_small, h, *, workers=1):
    """``N(-Delta^N - lambda_small)`` along a growing chain of rooms."""
    ns = sorted({int(n) for n in n_rooms_list})
    if len(ns) != len(list(n_rooms_list)):
        raise InvalidConfiguration("n_rooms values must be distinct")
    if not h > 0:
        raise InvalidConfiguration("h must be positive")
    domains = [build_rooms_and_passages(n) for n in ns]
    for dom in domains:
        _passage_guard(dom, h)

    def one(dom):
        mask = rasterize(dom, h)
        return mask.n_cells, count_below_inertia(assemble_neumann(mask), lambda_small).count

    results = _map(one, domains, workers)
    rows = [{"n_rooms": n, "count": c, "n_cells": cells} for n, (cells, c) in zip(ns, results)]
    counts = [row["count"] for row in rows]
    monotone = all(b >= a for a, b in zip(counts, counts[1:]))
    return ScanReport(
        "rooms_probe",
        ("n_rooms", "count", "n_cells"),
        rows,
        params={"lambda_small": lambda_small, "h": h, "n_rooms": ns},
        flags=[Flag("count_nondecreasing", "N is nondecreasing in n_rooms", monotone, f"counts {counts}")],
    )


def _describe(domain):
    if isinstance(domain, dict):
        return domain
    if isinstance(domain, Domain2D):
        return domain.to_dict()
    return {"type": "mask"}
