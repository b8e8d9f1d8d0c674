"""Closed-form semiclassical predictions, potential norms and exponent bookkeeping.

All integrals over a :class:`~holderweyl.geometry.GridMask` use midpoint
quadrature at the cell centres, the same points where the operator module
samples the potential.
"""
from __future__ import annotations

import math
from dataclasses import asdict, dataclass

import numpy as np

from .errors import InvalidArgument, SingularWeight
from .geometry import distance_to_boundary

__all__ = [
    "WeylPrediction",
    "ParameterSet",
    "NormReport",
    "unit_ball_volume",
    "weyl_leading",
    "ivrii_two_term",
    "phase_space_count",
    "lp_norm",
    "triple_norm",
    "solve_parameters",
    "default_beta",
    "exponent_identity",
    "hoelder_sum_bound",
]

RESIDUAL_TOL = 1e-12


def unit_ball_volume(d):
    """Volume of the unit ball in R^d."""
    if int(d) != d or d < 1:
        raise InvalidArgument("dimension must be a positive integer")
    return math.pi ** (d / 2.0) / math.gamma(d / 2.0 + 1.0)


def _weyl_constant(d):
    return unit_ball_volume(d) / (2.0 * math.pi) ** d


def weyl_leading(d, volume, lam):
    """Leading Weyl term ``|B_1^d| / (2 pi)^d * volume * lam^(d/2)``."""
    if volume < 0 or lam < 0:
        raise InvalidArgument("volume and lambda must be nonnegative")
    return _weyl_constant(d) * volume * lam ** (d / 2.0)


@dataclass(frozen=True)
class WeylPrediction:
    leading: float
    second_order: float
    d: int
    volume: float
    surface: float
    lam: float
    bc: str

    @property
    def total(self):
        return self.leading + self.second_order

    def to_dict(self):
        out = asdict(self)
        out["total"] = self.total
        return out


def ivrii_two_term(d, volume, surface, lam, bc="dirichlet"):
    """Two-term asymptotics with the boundary correction.

    ``second_order = -/+ (1/4) |B_1^(d-1)| / (2 pi)^(d-1) * surface * lam^((d-1)/2)``,
    minus for Dirichlet and plus for Neumann.  Only meaningful on smooth or
    Lipschitz domains.
    """
    if bc not in ("dirichlet", "neumann"):
        raise InvalidArgument(f"boundary condition must be 'dirichlet' or 'neumann', got {bc!r}")
    if surface < 0:
        raise InvalidArgument("surface must be nonnegative")
    leading = weyl_leading(d, volume, lam)
    correction = 0.25 * _weyl_constant(d - 1) * surface * lam ** ((d - 1) / 2.0)
    sign = -1.0 if bc == "dirichlet" else 1.0
    return WeylPrediction(leading, sign * correction, d, volume, surface, lam, bc)


def _cell_measure(mask, d):
    if d != 2:
        raise InvalidArgument("grid quadrature is only available for d = 2")
    return mask.h**2


def _abs_values(V):
    return np.abs(np.asarray(getattr(V, "values", V), dtype=float))


def phase_space_count(V, mask, d, lam):
    """Phase-space volume ``|B_1^d| / (2 pi)^d * lam^(d/2) * int |V|^(d/2)``."""
    if lam < 0:
        raise InvalidArgument("lambda must be nonnegative")
    integral = float(np.sum(_abs_values(V) ** (d / 2.0))) * _cell_measure(mask, d)
    return _weyl_constant(d) * lam ** (d / 2.0) * integral


def lp_norm(V, mask, p, d=2):
    if p < 1:
        raise InvalidArgument("p must be >= 1")
    return (float(np.sum(_abs_values(V) ** p)) * _cell_measure(mask, d)) ** (1.0 / p)


@dataclass(frozen=True)
class ParameterSet:
    """Exponents tying the weighted norm to the semiclassical power ``d/2``.

    ``1/s + 1/s' = 1`` and ``p_tilde / s - 1 / (2 s') = d / 2``.
    """

    d: int
    gamma: float
    p_tilde: float
    beta: float
    s: float
    s_prime: float

    def __post_init__(self):
        if int(self.d) != self.d or self.d < 2:
            raise InvalidArgument("d must be an integer >= 2")
        if not (0.0 < self.gamma < 1.0):
            raise InvalidArgument("gamma must lie in (0, 1)")
        if not (self.s > 1 and self.s_prime > 1 and self.beta > 0):
            raise InvalidArgument("need s > 1, s' > 1 and beta > 0")
        if not self.p_tilde > self.d / 2.0:
            raise InvalidArgument("p_tilde must exceed d/2")
        if abs(1.0 / self.s + 1.0 / self.s_prime - 1.0) > RESIDUAL_TOL:
            raise InvalidArgument("s and s' are not conjugate")
        if abs(self.constraint_residual) > RESIDUAL_TOL:
            raise InvalidArgument("p_tilde / s - 1/(2 s') != d/2")

    @property
    def constraint_residual(self):
        return exponent_identity(self) - self.d / 2.0

    def to_dict(self):
        return asdict(self)


def default_beta(d, gamma, p_tilde):
    """Placeholder weight exponent ``p_tilde (1/gamma - 1) (d - 1) / 2``."""
    return p_tilde * (1.0 / gamma - 1.0) * (d - 1) / 2.0


def exponent_identity(params):
    """``-1/(2 s') + p_tilde / s``; equals ``d/2`` for a consistent set."""
    return -1.0 / (2.0 * params.s_prime) + params.p_tilde / params.s


def solve_parameters(d, gamma, s, beta=None):
    """Conjugate pair ``(s, s')`` and ``p_tilde = s (d/2 + 1/(2 s'))``.

    ``beta`` defaults to :func:`default_beta`.
    """
    if not s > 1:
        raise InvalidArgument("s must exceed 1")
    if int(d) != d or d < 2:
        raise InvalidArgument("d must be an integer >= 2")
    s_prime = s / (s - 1.0)
    p_tilde = s * (d / 2.0 + 1.0 / (2.0 * s_prime))
    if beta is None:
        beta = default_beta(d, gamma, p_tilde)
    return ParameterSet(int(d), float(gamma), p_tilde, float(beta), float(s), s_prime)


@dataclass(frozen=True)
class NormReport:
    lp_part: float
    weighted_part: float
    params: ParameterSet

    @property
    def total(self):
        return self.lp_part + self.weighted_part

    def to_dict(self):
        return {
            "lp_part": self.lp_part,
            "weighted_part": self.weighted_part,
            "total": self.total,
            "params": self.params.to_dict(),
        }


def _weight_values(w, mask, params):
    if w is None:
        return distance_to_boundary(mask) ** (-params.beta)
    if callable(w):
        return np.asarray(w(distance_to_boundary(mask)), dtype=float)
    return np.broadcast_to(np.asarray(w, dtype=float), (mask.n_cells,))


def triple_norm(V, mask, params, w=None):
    """``(int |V|^(d/2))^(2/d) + (int w |V|^p_tilde)^(1/p_tilde)``.

    ``w`` is a constant, an array over the cells, a callable of the
    distance field, or ``None`` for ``dist^(-beta)``.
    """
    d = params.d
    weights = _weight_values(w, mask, params)
    if not np.all(np.isfinite(weights)):
        raise SingularWeight("weight is not finite on every included cell")
    absv = _abs_values(V)
    cell = _cell_measure(mask, d)
    lp_part = (float(np.sum(absv ** (d / 2.0))) * cell) ** (2.0 / d)
    weighted = (float(np.sum(weights * absv**params.p_tilde)) * cell) ** (1.0 / params.p_tilde)
    return NormReport(lp_part, weighted, params)


def hoelder_sum_bound(A_values, s):
    """``(sum A^-s')^(1/s') (sum A^s)^(1/s)``, which dominates ``len(A)``."""
    a = np.asarray(A_values, dtype=float)
    if not s > 1:
        raise InvalidArgument("s must exceed 1")
    if a.size and not np.all(a > 0):
        raise InvalidArgument("all A_j must be positive")
    if not a.size:
        return 0.0, 0
    s_prime = s / (s - 1.0)
    bound = _scaled_norm(1.0 / a, s_prime) * _scaled_norm(a, s)
    return float(bound), int(a.size)


def _scaled_norm(x, p):
    # factor out the max so large exponents cannot overflow
    top = x.max()
    return top * np.sum((x / top) ** p) ** (1.0 / p)
