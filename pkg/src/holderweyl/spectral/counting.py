"""Exact eigenvalue counting ``N(A - lam) = #{eigenvalues of A below lam}``.

The primary route is Sylvester's law of inertia: the number of negative
pivots of ``P^T (A - lam I) P = L D L^T`` equals the number of eigenvalues
below ``lam``.  The dense route diagonalises ``A`` and is kept as an
independent oracle.

Both routes treat a probe that (numerically) hits an eigenvalue the same
way: ``lam`` is moved up to ``lam + eps * (|lam| + scale)`` and retried, at
most three times, and the applied shift is recorded.  ``scale`` is the
magnitude of the matrix, so the move always clears the pivot tolerance.
"""
from __future__ import annotations

import csv
import io
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np
import scipy.linalg
import scipy.sparse as sp

from ..errors import InvalidArgument, NumericalBreakdown, OracleScaleExceeded
from . import _backend
from .ordering import nested_dissection

__all__ = [
    "CountRecord",
    "Analysis",
    "analyze",
    "count_below_inertia",
    "count_below_dense",
    "count_below",
    "count_negative",
    "count_scan",
    "records_to_csv",
    "PIVOT_RTOL",
    "SHIFT_EPS",
    "MAX_RETRIES",
    "DENSE_LIMIT",
]

PIVOT_RTOL = 1e-12
EIG_RTOL = 1e-10
SHIFT_EPS = 1e-8
MAX_RETRIES = 3
DENSE_LIMIT = 4000


@dataclass(frozen=True)
class CountRecord:
    lam: float
    count: int
    method: str
    shift_applied: float = 0.0

    def as_row(self):
        return {"lambda": self.lam, "count": self.count, "method": self.method, "shift_applied": self.shift_applied}


def _shifted(lam, scale):
    return lam + SHIFT_EPS * (abs(lam) + (scale or 1.0))


def _matrix_of(A):
    m = getattr(A, "matrix", A)
    if sp.issparse(m):
        return sp.csr_matrix(m)
    m = np.atleast_2d(np.asarray(m, dtype=float))
    if m.shape[0] != m.shape[1]:
        raise InvalidArgument("matrix must be square")
    return sp.csr_matrix(m)


@dataclass(frozen=True, eq=False)
class Analysis:
    """Ordering and symbolic factorisation, reusable for every shift."""

    perm: np.ndarray
    Ap: np.ndarray
    Ai: np.ndarray
    Ax: np.ndarray
    Lp: np.ndarray
    parent: np.ndarray
    diag: np.ndarray
    max_abs: float

    @property
    def n(self):
        return len(self.diag)

    @property
    def nnz_l(self):
        return int(self.Lp[-1])


def analyze(A, *, kernel=None, ordering="nested_dissection"):
    """Order ``A`` and run the symbolic phase of the factorisation.

    ``ordering`` is ``"nested_dissection"``, ``"natural"`` or an explicit
    permutation (e.g. one reused from a matrix with the same pattern).
    """
    kernel = kernel or _backend.kernel
    m = _matrix_of(A)
    n = m.shape[0]
    if n and abs(m - m.T).max() != 0:
        raise InvalidArgument("matrix is not symmetric")
    if isinstance(ordering, str):
        if ordering == "nested_dissection":
            perm = nested_dissection(m)
        elif ordering == "natural":
            perm = np.arange(n, dtype=np.int64)
        else:
            raise InvalidArgument(f"unknown ordering {ordering!r}")
    else:
        perm = np.asarray(ordering, dtype=np.int64)
        if perm.shape != (n,) or not np.array_equal(np.sort(perm), np.arange(n)):
            raise InvalidArgument("ordering is not a permutation of the unknowns")
    b = m[perm][:, perm]
    upper = sp.triu(b, format="csc")
    upper.sort_indices()
    Ap = upper.indptr.astype(np.int64)
    Ai = upper.indices.astype(np.int64)
    Ax = np.ascontiguousarray(upper.data, dtype=np.float64)
    Lp, parent = kernel.symbolic(Ap, Ai)
    max_abs = float(abs(m).max()) if m.nnz else 0.0
    return Analysis(perm, Ap, Ai, Ax, np.asarray(Lp), np.asarray(parent), b.diagonal().copy(), max_abs)


def _cached_analysis(A, kernel):
    cache = getattr(A, "_cache", None)
    if cache is None:
        return analyze(A, kernel=kernel)
    key = ("analysis", id(kernel))
    if key not in cache:
        cache[key] = analyze(A, kernel=kernel)
    return cache[key]


def _pivot_tol(analysis, lam):
    scale = float(np.max(np.abs(analysis.diag - lam))) if analysis.n else 0.0
    if scale == 0.0:
        scale = analysis.max_abs
    return PIVOT_RTOL * scale


def count_below_inertia(A, lam, *, analysis=None, kernel=None):
    """Number of eigenvalues of ``A`` strictly below ``lam`` via LDL^T inertia.

    ``A`` may be a :class:`~holderweyl.operators.DiscreteForm` (its ordering
    is cached on the form), a sparse matrix or a dense array.
    """
    kernel = kernel or _backend.kernel
    if analysis is None:
        analysis = _cached_analysis(A, kernel)
    lam = float(lam)
    probe = lam
    for _ in range(MAX_RETRIES + 1):
        tol = _pivot_tol(analysis, probe)
        n_neg, tiny, _ = kernel.numeric_inertia(
            analysis.Ap, analysis.Ai, analysis.Ax, analysis.Lp, analysis.parent, probe, tol
        )
        if tiny < 0:
            return CountRecord(lam, int(n_neg), "inertia", probe - lam)
        probe = _shifted(probe, analysis.max_abs)
    raise NumericalBreakdown(f"tiny pivot persists after {MAX_RETRIES} shifts at lambda={lam}")


def _eigenvalues(A):
    cache = getattr(A, "_cache", None)
    if cache is not None and "eigenvalues" in cache:
        return cache["eigenvalues"]
    m = _matrix_of(A)
    if m.shape[0] > DENSE_LIMIT:
        raise OracleScaleExceeded(f"dense oracle limited to n <= {DENSE_LIMIT}, got {m.shape[0]}")
    dense = m.toarray()
    if not np.array_equal(dense, dense.T):
        raise InvalidArgument("matrix is not symmetric")
    mu = scipy.linalg.eigvalsh(dense) if dense.size else np.zeros(0)
    if cache is not None:
        cache["eigenvalues"] = mu
    return mu


def count_below_dense(A, lam):
    """Oracle count from a full symmetric eigendecomposition (``n <= 4000``)."""
    mu = _eigenvalues(A)
    scale = float(np.max(np.abs(mu))) if mu.size else 0.0
    tol = EIG_RTOL * max(1.0, scale)
    lam = float(lam)
    probe = lam
    for _ in range(MAX_RETRIES + 1):
        if not np.any(np.abs(mu - probe) <= tol):
            return CountRecord(lam, int(np.count_nonzero(mu < probe)), "dense", probe - lam)
        probe = _shifted(probe, scale)
    raise NumericalBreakdown(f"eigenvalue coincidence persists at lambda={lam}")


def count_below(A, lam, method="inertia"):
    if method == "inertia":
        return count_below_inertia(A, lam)
    if method == "dense":
        return count_below_dense(A, lam)
    raise InvalidArgument(f"unknown counting method {method!r}")


def count_negative(A, *, analysis=None):
    """``N(A) = #{negative eigenvalues}``, the count used for Schrödinger forms."""
    return count_below_inertia(A, 0.0, analysis=analysis).count


def count_scan(A, lambdas, method="inertia", workers=1):
    """One :class:`CountRecord` per ``lam``; ``lambdas`` must increase strictly."""
    lambdas = [float(v) for v in lambdas]
    if any(b <= a for a, b in zip(lambdas, lambdas[1:])):
        raise InvalidArgument("lambdas must be strictly increasing")
    if method == "inertia":
        # build the shared analysis once before fanning out
        _cached_analysis(A, _backend.kernel)

    def one(lam):
        try:
            return count_below(A, lam, method)
        except Exception as err:
            err.lam = lam
            if err.args:
                err.args = (f"lambda={lam}: {err.args[0]}",) + err.args[1:]
            raise

    if workers and workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            records = list(pool.map(one, lambdas))
    else:
        records = [one(lam) for lam in lambdas]
    counts = [r.count for r in records]
    if any(b < a for a, b in zip(counts, counts[1:])):
        raise NumericalBreakdown(f"non-monotone counts {counts}")
    return records


def records_to_csv(records):
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(["lambda", "count", "method", "shift_applied"])
    for r in records:
        writer.writerow([repr(r.lam), r.count, r.method, repr(r.shift_applied)])
    return buf.getvalue()
