"""M-spline and I-spline bases for the baseline hazard.

M-splines are nonnegative piecewise polynomials, each normalized to
integrate to one over its support; I-splines are their running integrals
and increase from 0 to 1 across the knot span.  Both are evaluated with
the classical B-spline recursion: an order-k M-spline is a rescaled
order-k B-spline, and an I-spline is a tail sum of order-(k+1) B-splines
on a knot vector with one extra boundary knot at each end.
"""

from dataclasses import dataclass

import numpy as np

from .errors import DomainError, SchemaError


@dataclass(frozen=True)
class SplineBasis:
    """Knot vector and degree describing an M-/I-spline family.

    ``knots`` is the full vector, with each boundary knot repeated
    ``degree + 1`` times.  The number of basis functions is
    ``len(knots) - degree - 1``.
    """

    knots: np.ndarray
    degree: int

    def __post_init__(self):
        knots = np.asarray(self.knots, dtype=float)
        object.__setattr__(self, "knots", knots)
        if self.degree < 0:
            raise SchemaError("spline degree must be nonnegative")
        if knots.ndim != 1 or knots.size < 2 * self.order:
            raise SchemaError("knot vector too short for the requested degree")
        if np.any(np.diff(knots) < 0):
            raise SchemaError("knot vector must be nondecreasing")
        k = self.order
        if not (np.all(knots[:k] == knots[0]) and np.all(knots[-k:] == knots[-1])):
            raise SchemaError("boundary knots must be repeated to the spline order")
        if knots[0] >= knots[-1]:
            raise SchemaError("knot span must have positive length")

    @property
    def order(self) -> int:
        return self.degree + 1

    @property
    def n_basis(self) -> int:
        return len(self.knots) - self.order

    @property
    def lower(self) -> float:
        return float(self.knots[0])

    @property
    def upper(self) -> float:
        return float(self.knots[-1])

    @property
    def interior_knots(self) -> np.ndarray:
        return self.knots[self.order:-self.order]


def make_knots(event_times, n_interior: int, degree: int, bounds) -> SplineBasis:
    """Place interior knots at evenly spaced quantiles of the event times.

    Boundary knots sit at ``bounds`` and are repeated to the spline order.
    Quantiles falling on a boundary are nudged strictly inside.
    """
    lo, hi = float(bounds[0]), float(bounds[1])
    if not lo < hi:
        raise SchemaError("bounds must satisfy low < high")
    if n_interior < 0:
        raise SchemaError("n_interior must be nonnegative")
    order = degree + 1
    if n_interior == 0:
        interior = np.empty(0)
    else:
        times = np.asarray(list(event_times), dtype=float)
        if times.size == 0:
            raise SchemaError("event times required to place interior knots")
        if np.unique(times).size < n_interior:
            raise SchemaError(
                f"degenerate knots: {np.unique(times).size} distinct event times "
                f"cannot support {n_interior} interior knots"
            )
        levels = np.arange(1, n_interior + 1) / (n_interior + 1)
        interior = np.quantile(times, levels)
        inner_lo = np.nextafter(lo, hi)
        inner_hi = np.nextafter(hi, lo)
        interior = np.clip(interior, inner_lo, inner_hi)
    knots = np.concatenate([np.full(order, lo), interior, np.full(order, hi)])
    return SplineBasis(knots=knots, degree=degree)


def _check_domain(basis: SplineBasis, t: np.ndarray) -> None:
    if np.any(t < basis.lower) or np.any(t > basis.upper):
        raise DomainError(
            f"evaluation point outside spline domain [{basis.lower}, {basis.upper}]"
        )


def _bspline_design(knots: np.ndarray, order: int, t: np.ndarray) -> np.ndarray:
    """All order-``order`` B-spline basis values at each point of ``t``.

    Uses half-open support intervals with the left-limit convention at the
    right boundary, so evaluation exactly at the last knot is well defined.
    Returns an array of shape ``(len(t), len(knots) - order)``.
    """
    T = knots
    t = np.atleast_1d(np.asarray(t, dtype=float))
    n1 = len(T) - 1
    N = np.zeros((t.size, n1))
    for i in range(n1):
        if T[i] < T[i + 1]:
            N[:, i] = (t >= T[i]) & (t < T[i + 1])
    at_end = t == T[-1]
    if at_end.any():
        last = int(np.max(np.nonzero(np.diff(T) > 0)))
        N[at_end, :] = 0.0
        N[at_end, last] = 1.0
    for k in range(2, order + 1):
        Nk = np.zeros((t.size, len(T) - k))
        for i in range(len(T) - k):
            d1 = T[i + k - 1] - T[i]
            if d1 > 0:
                Nk[:, i] += (t - T[i]) / d1 * N[:, i]
            d2 = T[i + k] - T[i + 1]
            if d2 > 0:
                Nk[:, i] += (T[i + k] - t) / d2 * N[:, i + 1]
        N = Nk
    return N


def mspline_matrix(basis: SplineBasis, t) -> np.ndarray:
    """M-spline design matrix, shape ``(len(t), n_basis)``; rows are M_l(t)."""
    t_arr = np.atleast_1d(np.asarray(t, dtype=float))
    _check_domain(basis, t_arr)
    k = basis.order
    N = _bspline_design(basis.knots, k, t_arr)
    width = basis.knots[k:] - basis.knots[:-k]
    scale = np.where(width > 0, k / np.where(width > 0, width, 1.0), 0.0)
    return N * scale


def ispline_matrix(basis: SplineBasis, t) -> np.ndarray:
    """I-spline design matrix: running integrals of each M-spline from the left knot."""
    t_arr = np.atleast_1d(np.asarray(t, dtype=float))
    _check_domain(basis, t_arr)
    k = basis.order
    padded = np.concatenate([basis.knots[:1], basis.knots, basis.knots[-1:]])
    N = _bspline_design(padded, k + 1, t_arr)
    # I_l(t) telescopes into the tail sum of the order-(k+1) basis, skipping
    # the leftmost function which carries the mass below t.
    tail = np.cumsum(N[:, ::-1], axis=1)[:, ::-1]
    return np.clip(tail[:, 1:], 0.0, 1.0)


def mspline_eval(basis: SplineBasis, t: float) -> np.ndarray:
    """Values of every M-spline basis function at a single age."""
    return mspline_matrix(basis, [t])[0]


def ispline_eval(basis: SplineBasis, t: float) -> np.ndarray:
    """Values of every I-spline basis function at a single age."""
    return ispline_matrix(basis, [t])[0]
