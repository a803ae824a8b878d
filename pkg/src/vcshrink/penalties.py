"""Group-norm primitives, the double-penalty objective, and KKT residuals.

The fitted criterion is

    0.5 ||y - Z b||^2 + n lam1 sum_j w1_j ||b_j|| + n lam2 sum_j w2_j ||b_j||_c

where ||a||_c is the Euclidean distance from a to the span of the all-ones
vector: the second penalty vanishes exactly on groups whose entries are all
equal, i.e. on constant coefficient functions. Both penalties are convex, so
a zero KKT residual certifies global optimality.
"""

import enum
from dataclasses import dataclass, field

import numpy as np

from .splines import GroupedDesign


class GroupKind(enum.IntEnum):
    ZERO = 0
    CONSTANT = 1
    VARYING = 2


def group_norm(a: np.ndarray) -> float:
    """Euclidean norm of a coefficient group."""
    return float(np.linalg.norm(np.asarray(a, dtype=float)))


def centered_norm(a: np.ndarray) -> float:
    """Euclidean distance from `a` to the constant vectors: ||a - mean(a) 1||.

    Applied as a - mean rather than through the K x K projection matrix;
    the result is identical and O(K).
    """
    a = np.asarray(a, dtype=float)
    if a.size < 1:
        raise ValueError("centered norm needs at least one entry")
    return float(np.linalg.norm(a - a.mean()))


@dataclass(frozen=True)
class PenaltyWeights:
    """Per-group weights for the two penalties.

    A group flagged `forced_zero` is excluded from the fit and pinned at 0;
    `forced_constant` restricts the group to equal entries. Weight entries
    are only meaningful where the corresponding flag is off (they are +inf
    at forced positions).
    """

    w1: np.ndarray
    w2: np.ndarray
    forced_zero: np.ndarray = None
    forced_constant: np.ndarray = None

    def __post_init__(self):
        w1 = np.asarray(self.w1, dtype=float)
        w2 = np.asarray(self.w2, dtype=float)
        p = w1.size
        if w2.shape != (p,):
            raise ValueError("w1 and w2 must have the same length")
        fz = (np.zeros(p, dtype=bool) if self.forced_zero is None
              else np.asarray(self.forced_zero, dtype=bool))
        fc = (np.zeros(p, dtype=bool) if self.forced_constant is None
              else np.asarray(self.forced_constant, dtype=bool))
        if fz.shape != (p,) or fc.shape != (p,):
            raise ValueError("forced flags must have length p")
        fc = fc & ~fz  # forced_zero dominates
        if np.any(~fz & ~(w1 > 0)) or np.any(~fz & ~np.isfinite(w1)):
            raise ValueError("w1 must be finite and positive on non-forced groups")
        free2 = ~fz & ~fc
        if np.any(free2 & ~(w2 > 0)) or np.any(free2 & ~np.isfinite(w2)):
            raise ValueError("w2 must be finite and positive on non-forced groups")
        for arr in (w1, w2, fz, fc):
            arr.flags.writeable = False
        object.__setattr__(self, "w1", w1)
        object.__setattr__(self, "w2", w2)
        object.__setattr__(self, "forced_zero", fz)
        object.__setattr__(self, "forced_constant", fc)

    @property
    def p(self) -> int:
        return self.w1.size

    @classmethod
    def unit(cls, p: int) -> "PenaltyWeights":
        return cls(w1=np.ones(p), w2=np.ones(p))


@dataclass(frozen=True)
class CoefState:
    """p coefficient groups of length K plus a per-group classification.

    Invariants: a ZERO group holds exact zeros; a CONSTANT group holds K
    copies of its constant value.
    """

    groups: np.ndarray             # (p, K)
    kinds: np.ndarray = None       # (p,) of GroupKind, default all VARYING

    def __post_init__(self):
        groups = np.asarray(self.groups, dtype=float)
        if groups.ndim != 2:
            raise ValueError("groups must be a (p, K) array")
        p = groups.shape[0]
        kinds = (np.full(p, GroupKind.VARYING, dtype=np.int8) if self.kinds is None
                 else np.asarray(self.kinds, dtype=np.int8))
        if kinds.shape != (p,):
            raise ValueError("kinds must have length p")
        zmask = kinds == GroupKind.ZERO
        if np.any(groups[zmask] != 0.0):
            raise ValueError("a group classified Zero has nonzero entries")
        cmask = kinds == GroupKind.CONSTANT
        if np.any(groups[cmask] != groups[cmask, :1]):
            raise ValueError("a group classified Constant has unequal entries")
        groups.flags.writeable = False
        kinds.flags.writeable = False
        object.__setattr__(self, "groups", groups)
        object.__setattr__(self, "kinds", kinds)

    @property
    def p(self) -> int:
        return self.groups.shape[0]

    @property
    def K(self) -> int:
        return self.groups.shape[1]

    def flat(self) -> np.ndarray:
        """Coefficients as a single (p*K,) vector."""
        return self.groups.reshape(-1)

    def constant_value(self, j: int) -> float:
        if self.kinds[j] != GroupKind.CONSTANT:
            raise ValueError(f"group {j} is not classified Constant")
        return float(self.groups[j, 0])


def _penalty_value(state: CoefState, lam1: float, lam2: float,
                   w: PenaltyWeights, n: int) -> float:
    pen = 0.0
    for j in range(state.p):
        if state.kinds[j] == GroupKind.ZERO:
            continue
        bj = state.groups[j]
        if not w.forced_zero[j]:
            pen += n * lam1 * w.w1[j] * np.linalg.norm(bj)
        nc = np.linalg.norm(bj - bj.mean())
        if nc > 0.0 and not (w.forced_zero[j] or w.forced_constant[j]):
            pen += n * lam2 * w.w2[j] * nc
    return pen


def objective(y: np.ndarray, design: GroupedDesign, b: CoefState,
              lam1: float, lam2: float, w: PenaltyWeights) -> float:
    """Exact value of the penalized least-squares criterion."""
    y = np.asarray(y, dtype=float)
    if y.shape != (design.n,):
        raise ValueError(f"y has shape {y.shape}, expected ({design.n},)")
    if b.p != design.p or b.K != design.K or w.p != design.p:
        raise ValueError("coefficient state / weights do not match the design")
    r = y - design.Z @ b.flat()
    return 0.5 * float(r @ r) + _penalty_value(b, lam1, lam2, w, design.n)


def kkt_residual(y: np.ndarray, design: GroupedDesign, b: CoefState,
                 lam1: float, lam2: float, w: PenaltyWeights) -> float:
    """Largest scaled violation of the subgradient stationarity conditions.

    Per group (with r = y - Zb, all residuals divided by n so the scale is
    sample-size free):

    * varying:  || Z_j' r - n lam1 w1_j b_j/||b_j|| - n lam2 w2_j Q b_j/||b_j||_c ||
    * zero:     max(0, ||Z_j' r|| - n lam1 w1_j - n lam2 w2_j)
    * constant: the scalar stationarity |1'(Z_j' r) - n lam1 w1_j sqrt(K) sign(c)|
      together with max(0, ||Q Z_j' r|| - n lam2 w2_j), where Q centers a
      vector. A Constant(0) group is assessed under the zero branch.

    Zero residual at a point certifies it as the global minimizer.
    """
    y = np.asarray(y, dtype=float)
    if b.p != design.p or b.K != design.K or w.p != design.p:
        raise ValueError("coefficient state / weights do not match the design")
    n, K, p = design.n, design.K, design.p
    rtK = np.sqrt(K)
    r = y - design.Z @ b.flat()
    grad = (design.Z.T @ r).reshape(p, K)
    worst = 0.0
    for j in range(p):
        g = grad[j]
        kind = b.kinds[j]
        if kind == GroupKind.CONSTANT and b.groups[j, 0] == 0.0:
            kind = GroupKind.ZERO
        if w.forced_zero[j]:
            continue
        if kind == GroupKind.VARYING:
            bj = b.groups[j]
            nb = np.linalg.norm(bj)
            ncn = np.linalg.norm(bj - bj.mean())
            v = g - n * lam1 * w.w1[j] * bj / nb
            if not w.forced_constant[j]:
                v = v - n * lam2 * w.w2[j] * (bj - bj.mean()) / ncn
            worst = max(worst, np.linalg.norm(v) / n)
        elif kind == GroupKind.CONSTANT:
            c = b.groups[j, 0]
            res_a = abs(g.sum() - n * lam1 * w.w1[j] * rtK * np.sign(c)) / n
            worst = max(worst, res_a)
            if not w.forced_constant[j]:
                res_b = max(0.0, np.linalg.norm(g - g.mean()) - n * lam2 * w.w2[j]) / n
                worst = max(worst, res_b)
        else:
            if w.forced_constant[j]:
                # group restricted to a constant, pinned at zero
                worst = max(worst, max(0.0, abs(g.sum()) - n * lam1 * w.w1[j] * rtK) / n)
            else:
                slack = n * lam1 * w.w1[j] + n * lam2 * w.w2[j]
                worst = max(worst, max(0.0, np.linalg.norm(g) - slack) / n)
    return worst
