"""B-spline bases on [0, 1] and the grouped design matrix for
varying-coefficient regression.

The basis uses an open (clamped) knot vector: boundary knots repeated with
multiplicity equal to the spline order, internal knots equally spaced. With
this construction a spline sum_k a_k B_k(t) is a constant a on [0, 1] exactly
when a_1 = ... = a_K = a, which is what makes constant coefficients
identifiable downstream.
"""

from dataclasses import dataclass

import numpy as np


@dataclass(frozen=True)
class BasisSpec:
    """Clamped B-spline basis of given order on [0, 1].

    Attributes
    ----------
    order : int
        Spline order (polynomial degree + 1).
    n_internal : int
        Number of internal knots.
    knots : np.ndarray
        Full nondecreasing knot vector of length ``n_internal + 2 * order``.
    K : int
        Number of basis functions, ``n_internal + order``.
    """

    order: int
    n_internal: int
    knots: np.ndarray
    K: int

    def __post_init__(self):
        d, ki = self.order, self.n_internal
        if d < 1:
            raise ValueError(f"spline order must be >= 1, got {d}")
        if ki < 0:
            raise ValueError(f"number of internal knots must be >= 0, got {ki}")
        knots = np.asarray(self.knots, dtype=float)
        if knots.shape != (ki + 2 * d,):
            raise ValueError("knot vector has wrong length")
        if self.K != ki + d:
            raise ValueError("K must equal n_internal + order")
        if np.any(knots[:d] != 0.0) or np.any(knots[-d:] != 1.0):
            raise ValueError("boundary knots must be 0 and 1 with multiplicity order")
        inner = knots[d:-d]
        if inner.size and (np.any(np.diff(inner) <= 0)
                           or inner[0] <= 0.0 or inner[-1] >= 1.0):
            raise ValueError("internal knots must be strictly increasing inside (0, 1)")
        knots.flags.writeable = False
        object.__setattr__(self, "knots", knots)


def make_knots(n_internal: int, order: int) -> BasisSpec:
    """Equally spaced clamped knot vector; internal knot k sits at k/(n_internal+1)."""
    if order < 1:
        raise ValueError(f"spline order must be >= 1, got {order}")
    if n_internal < 0:
        raise ValueError(f"number of internal knots must be >= 0, got {n_internal}")
    inner = np.arange(1, n_internal + 1) / (n_internal + 1)
    knots = np.concatenate([np.zeros(order), inner, np.ones(order)])
    return BasisSpec(order=order, n_internal=n_internal, knots=knots,
                     K=n_internal + order)


def basis_matrix(spec: BasisSpec, t: np.ndarray) -> np.ndarray:
    """Evaluate all K basis functions at each point of `t`.

    Returns an (len(t), K) matrix. Uses the iterative de Boor triangle over
    the single nonempty knot interval containing each point, so at most
    `order` entries per row are nonzero. t = 1 is evaluated on the last
    nonempty interval (limit from the left), giving B_K(1) = 1.
    """
    t = np.atleast_1d(np.asarray(t, dtype=float))
    if t.ndim != 1:
        raise ValueError("t must be one-dimensional")
    if np.any(~np.isfinite(t)) or np.any(t < 0.0) or np.any(t > 1.0):
        raise ValueError("index values must lie in [0, 1]")
    T, d, K = spec.knots, spec.order, spec.K
    m = t.size
    # interval index mu: T[mu] <= t < T[mu+1], clamped to nonempty intervals
    mu = np.searchsorted(T, t, side="right") - 1
    mu = np.clip(mu, d - 1, K - 1)
    vals = np.zeros((m, d))
    vals[:, 0] = 1.0
    for j in range(1, d):
        right = T[mu[:, None] + np.arange(1, j + 1)] - t[:, None]   # (m, j)
        left = t[:, None] - T[mu[:, None] + 1 - np.arange(1, j + 1)]
        saved = np.zeros(m)
        for i in range(j):
            term = vals[:, i] / (right[:, i] + left[:, j - 1 - i])
            vals[:, i] = saved + right[:, i] * term
            saved = left[:, j - 1 - i] * term
        vals[:, j] = saved
    B = np.zeros((m, K))
    cols = mu[:, None] - (d - 1) + np.arange(d)
    np.put_along_axis(B, cols, vals, axis=1)
    return B


def eval_basis(spec: BasisSpec, t: float) -> np.ndarray:
    """Basis values at a single point, as a length-K vector."""
    return basis_matrix(spec, np.array([float(t)]))[0]


@dataclass(frozen=True)
class GroupedDesign:
    """Design matrix Z = (Z_1, ..., Z_p) with Z_j[i, k] = X[i, j] * B_k(t_i).

    `Z` is stored as a single (n, p*K) array; `block(j)` views group j's
    n x K slab. Because the basis sums to one, Z_j @ 1 reproduces column j
    of `raw_x` (used to collapse a group to a single constant column).
    """

    n: int
    p: int
    K: int
    Z: np.ndarray
    raw_x: np.ndarray
    index: np.ndarray
    spec: BasisSpec

    def __post_init__(self):
        for name in ("Z", "raw_x", "index"):
            arr = getattr(self, name)
            arr.flags.writeable = False

    def block(self, j: int) -> np.ndarray:
        """View of Z_j, shape (n, K). Groups are 0-indexed."""
        return self.Z[:, j * self.K:(j + 1) * self.K]


def build_design(x: np.ndarray, t: np.ndarray, spec: BasisSpec) -> GroupedDesign:
    """Assemble the grouped design from covariates, index values and a basis."""
    x = np.asarray(x, dtype=float)
    t = np.asarray(t, dtype=float)
    if x.ndim != 2:
        raise ValueError("x must be an n x p matrix")
    n, p = x.shape
    if t.shape != (n,):
        raise ValueError(f"index vector has length {t.shape}, expected ({n},)")
    B = basis_matrix(spec, t)                      # (n, K), validates range
    K = spec.K
    Z = (x[:, :, None] * B[:, None, :]).reshape(n, p * K)
    return GroupedDesign(n=n, p=p, K=K, Z=Z, raw_x=x.copy(), index=t.copy(),
                         spec=spec)


def eval_coef_function(group: np.ndarray, spec: BasisSpec,
                       grid: np.ndarray) -> np.ndarray:
    """Evaluate sum_k b_k B_k(t) on a grid of index values."""
    group = np.asarray(group, dtype=float)
    if group.shape != (spec.K,):
        raise ValueError(f"coefficient group has shape {group.shape}, expected ({spec.K},)")
    return basis_matrix(spec, np.asarray(grid, dtype=float)) @ group
