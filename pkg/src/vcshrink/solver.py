"""Locally quadratic approximation solver for the double group penalty.

The criterion is convex, so the solver certifies its output against the
subgradient stationarity conditions. Each norm penalty is majorized by a
quadratic tangent at the current iterate (curvature 1/(2 ||b^(0)||)), which
turns every pass into a block-ridge least-squares solve whose fixed points
satisfy the exact stationarity conditions of the original criterion.

Groups are tracked through an irreversible active set: once a group is
classified Zero it stays out, once Constant it keeps equal entries (it may
still drop to Zero). Classification happens through small-norm thresholds,
each guarded by an exact objective-change computation so the objective trace
stays nonincreasing. If the iterate stalls before passing the KKT
certificate, a polishing stage of exact block-coordinate sweeps follows; the
penalty is separable across groups, so these sweeps both tighten the
residual and decide borderline zero/constant groups exactly.
"""

import logging
from dataclasses import dataclass

import numpy as np
import scipy.linalg as sla

from .penalties import CoefState, GroupKind, PenaltyWeights, kkt_residual
from .splines import BasisSpec, GroupedDesign

log = logging.getLogger(__name__)

# plain ints for hot loops; GroupKind carries the same values
ZERO = int(GroupKind.ZERO)
CONST = int(GroupKind.CONSTANT)
VARY = int(GroupKind.VARYING)

# joint LQA passes run in segments with exact block-coordinate polish sweeps
# in between; total joint passes are bounded by cfg.max_iter
_SEGMENT = 25
_SWEEPS_PER_ROUND = 4
_MAX_POLISH_SWEEPS = 60
_BLOCK_INNER_ITER = 60
_NORM_FLOOR = 1e-300


@dataclass(frozen=True)
class SolverConfig:
    max_iter: int = 200
    tol: float = 1e-7                 # relative coefficient-change stop
    zero_threshold: float = 1e-4      # tau_z, relative group-norm drop level
    constant_threshold: float = 1e-4  # tau_c, centered-to-full norm ratio
    ridge_init: float = 1e-6          # relative ridge for the initial solve
    kkt_tol: float = 1e-5             # scaled residual certifying convergence

    def __post_init__(self):
        if self.max_iter < 1:
            raise ValueError("max_iter must be positive")
        for name in ("tol", "zero_threshold", "constant_threshold", "ridge_init",
                     "kkt_tol"):
            if getattr(self, name) <= 0.0:
                raise ValueError(f"{name} must be positive")
        if self.tol >= 1.0 or self.zero_threshold >= 1.0 or self.constant_threshold >= 1.0:
            raise ValueError("tolerances must be below 1")


@dataclass(frozen=True)
class FitResult:
    coef: CoefState
    lambda1: float
    lambda2: float
    weights: PenaltyWeights
    rss: float
    n_iter: int
    converged: bool
    kkt: float
    objective_trace: np.ndarray

    @property
    def n_active_groups(self) -> int:
        return int(np.sum(self.coef.kinds != ZERO))


class DesignOps:
    """Gram-matrix cache for one (y, design) pair.

    Precomputes Z'Z, Z'y and their block-collapsed versions so that active-set
    systems for any classification assemble by indexing. Building the cache
    once and reusing it across an entire tuning path is what makes grid
    searches affordable.
    """

    def __init__(self, y: np.ndarray, design: GroupedDesign):
        y = np.asarray(y, dtype=float)
        if y.shape != (design.n,):
            raise ValueError(f"y has shape {y.shape}, expected ({design.n},)")
        if not np.all(np.isfinite(y)):
            raise ValueError("y contains non-finite values")
        self.y = y
        self.design = design
        self.n, self.p, self.K = design.n, design.p, design.K
        Z = design.Z
        self.G = Z.T @ Z                                   # (pK, pK)
        self.cv = Z.T @ y                                  # (pK,)
        # exact block-collapsed products: column sums over each K-block
        pK = self.p * self.K
        self.Gvc = self.G.reshape(pK, self.p, self.K).sum(axis=2)      # (pK, p)
        self.Gcc = self.Gvc.reshape(self.p, self.K, self.p).sum(axis=1)  # (p, p)
        self.cc = self.cv.reshape(self.p, self.K).sum(axis=1)          # (p,)
        self.yty = float(y @ y)
        self.mean_diag = float(np.mean(np.diag(self.G)))

    def residual(self, bflat: np.ndarray) -> np.ndarray:
        return self.y - self.design.Z @ bflat

    def lambda1_max(self, w1: np.ndarray, skip: np.ndarray) -> float:
        """Smallest lam1 whose all-zero KKT certificate covers every free group."""
        g = self.cv.reshape(self.p, self.K)
        vals = np.linalg.norm(g, axis=1) / (self.n * w1)
        vals = np.where(skip, 0.0, vals)
        return float(np.max(vals)) if vals.size else 0.0

    def lambda2_max(self, w2: np.ndarray, skip: np.ndarray) -> float:
        g = self.cv.reshape(self.p, self.K)
        gc = g - g.mean(axis=1, keepdims=True)
        vals = np.linalg.norm(gc, axis=1) / (self.n * w2)
        vals = np.where(skip, 0.0, vals)
        return float(np.max(vals)) if vals.size else 0.0


def _state_from_flat(bflat: np.ndarray, kinds: np.ndarray, p: int, K: int) -> CoefState:
    groups = bflat.reshape(p, K).copy()
    kinds = kinds.copy()
    const0 = (kinds == CONST) & (groups[:, 0] == 0.0)
    kinds[const0] = ZERO  # Constant(0) normalizes to Zero
    groups[kinds == ZERO] = 0.0
    cmask = kinds == CONST
    groups[cmask] = groups[cmask, :1]
    return CoefState(groups=groups, kinds=kinds)


class _ActiveSetFit:
    """One solver run: mutable classification + coefficient vector."""

    def __init__(self, ops: DesignOps, lam1: float, lam2: float,
                 w: PenaltyWeights, cfg: SolverConfig, collapse: bool):
        self.ops = ops
        self.lam1, self.lam2 = float(lam1), float(lam2)
        self.w = w
        self.cfg = cfg
        self.collapse = collapse
        self.n, self.p, self.K = ops.n, ops.p, ops.K
        self.rtK = np.sqrt(self.K)
        self.kinds = np.full(self.p, VARY, dtype=np.int8)
        self.kinds[w.forced_constant] = CONST
        self.kinds[w.forced_zero] = ZERO
        self.b = np.zeros(self.p * self.K)
        # scaled penalty levels; forced groups never enter penalized terms
        self.a1 = self.n * self.lam1 * np.where(w.forced_zero, 0.0, w.w1)
        free2 = ~(w.forced_zero | w.forced_constant)
        self.a2 = self.n * self.lam2 * np.where(free2, w.w2, 0.0)
        self._sys_cache = {}

    # -- vectorized group geometry ------------------------------------------

    def _group_norms(self):
        bm = self.b.reshape(self.p, self.K)
        nb = np.linalg.norm(bm, axis=1)
        nc = np.linalg.norm(bm - bm.mean(axis=1, keepdims=True), axis=1)
        return nb, nc

    def objective(self) -> float:
        r = self.ops.residual(self.b)
        nb, nc = self._group_norms()
        act = self.kinds != ZERO
        pen = float(np.sum(self.a1[act] * nb[act]))
        cent = act & (self.kinds == VARY)
        pen += float(np.sum(self.a2[cent] * nc[cent]))
        return 0.5 * float(r @ r) + pen

    # -- initialization ----------------------------------------------------

    def init_from_warm(self, warm: CoefState):
        wk = np.asarray(warm.kinds, dtype=np.int8)
        self.kinds = np.minimum(self.kinds, wk)  # ZERO < CONST < VARY
        self.b = warm.flat().copy()
        self.b[np.repeat(self.kinds == ZERO, self.K)] = 0.0

    def init_ridge(self):
        ridge = self.cfg.ridge_init * self.ops.mean_diag
        A, rhs, vidx, cidx, nv = self._reduced_system()
        if A.shape[0] == 0:
            return
        A = A.copy()
        A[np.diag_indices_from(A)] += ridge
        sol = np.linalg.solve(A, rhs)
        self._scatter(sol, vidx, cidx, nv)

    # -- reduced-system assembly -------------------------------------------

    def _reduced_system(self):
        """Base normal-equations matrix for the current classification.

        Cached per classification signature; callers must not mutate the
        returned matrix (joint_step copies before adding penalty blocks).
        """
        key = self.kinds.tobytes()
        hit = self._sys_cache.get(key)
        if hit is not None:
            return hit
        K, ops = self.K, self.ops
        vidx = np.flatnonzero(self.kinds == VARY)
        cidx = np.flatnonzero(self.kinds == CONST)
        nv = vidx.size * K
        m = nv + cidx.size
        vcols = (vidx[:, None] * K + np.arange(K)).reshape(-1)
        A = np.empty((m, m))
        A[:nv, :nv] = ops.G[np.ix_(vcols, vcols)]
        A[:nv, nv:] = ops.Gvc[np.ix_(vcols, cidx)]
        A[nv:, :nv] = A[:nv, nv:].T
        A[nv:, nv:] = ops.Gcc[np.ix_(cidx, cidx)]
        rhs = np.concatenate([ops.cv[vcols], ops.cc[cidx]])
        out = (A, rhs, vidx, cidx, nv)
        self._sys_cache = {key: out}   # keep only the latest active set
        return out

    def _scatter(self, sol, vidx, cidx, nv):
        K = self.K
        bm = self.b.reshape(self.p, self.K)
        if vidx.size:
            bm[vidx] = sol[:nv].reshape(vidx.size, K)
        if cidx.size:
            bm[cidx] = sol[nv:, None]

    def joint_step(self):
        """One majorize-minimize pass: solve the block-ridge normal equations."""
        A0, rhs, vidx, cidx, nv = self._reduced_system()
        if A0.shape[0] == 0:
            return
        A = A0.copy()
        K = self.K
        if vidx.size:
            bm = self.b.reshape(self.p, K)[vidx]
            s1 = np.maximum(np.linalg.norm(bm, axis=1), _NORM_FLOOR)
            s2 = np.maximum(
                np.linalg.norm(bm - bm.mean(axis=1, keepdims=True), axis=1),
                _NORM_FLOOR)
            c1 = self.a1[vidx] / s1
            c2 = self.a2[vidx] / s2
            # block penalty c1 I + c2 (I - 11'/K): diagonal c1 + c2, then
            # subtract c2/K over the whole K x K block
            idx = np.arange(nv)
            A[idx, idx] += np.repeat(c1 + c2, K)
            for a in np.flatnonzero(c2):
                s = slice(a * K, (a + 1) * K)
                A[s, s] -= c2[a] / K
        for a, j in enumerate(cidx):
            c0 = max(abs(self.b[j * K]), _NORM_FLOOR)
            A[nv + a, nv + a] += self.a1[j] * self.rtK / c0
        try:
            sol = sla.cho_solve(sla.cho_factor(A, lower=True, check_finite=False),
                                rhs, check_finite=False)
        except (np.linalg.LinAlgError, sla.LinAlgError):
            jitter = 1e-10 * np.trace(A)
            log.debug("normal equations not positive definite; adding jitter %.3e",
                      jitter)
            A[np.diag_indices_from(A)] += jitter
            sol = np.linalg.solve(A, rhs)
        self._scatter(sol, vidx, cidx, nv)

    # -- classification -----------------------------------------------------

    def threshold_pass(self, scale_z: float):
        """Spec small-norm drop/collapse rules, each applied only when the
        exact objective change is nonpositive."""
        lam1, lam2 = self.lam1, self.lam2
        if lam1 <= 0 and not (self.collapse and lam2 > 0):
            return
        tau_z, tau_c = self.cfg.zero_threshold, self.cfg.constant_threshold
        K = self.K
        nb, nc = self._group_norms()
        drop_cand = np.zeros(self.p, dtype=bool)
        col_cand = np.zeros(self.p, dtype=bool)
        if lam1 > 0:
            drop_cand = (self.kinds != ZERO) & (nb < tau_z * scale_z)
        if self.collapse and lam2 > 0:
            col_cand = ((self.kinds == VARY) & ~self.w.forced_constant
                        & (nb > 0) & (nc < tau_c * nb))
        if not (np.any(drop_cand) or np.any(col_cand)):
            return
        r = self.ops.residual(self.b)
        for j in np.flatnonzero(drop_cand | col_cand):
            blk = slice(j * K, (j + 1) * K)
            bj = self.b[blk]
            if drop_cand[j]:
                zj = self.ops.design.Z[:, blk] @ bj
                d = (r @ zj) + 0.5 * (zj @ zj) - self.a1[j] * nb[j]
                if self.kinds[j] == VARY:
                    d -= self.a2[j] * nc[j]
                if d <= 0.0:
                    self.kinds[j] = ZERO
                    r = r + zj
                    self.b[blk] = 0.0
                    continue
            if col_cand[j]:
                c = bj.mean()
                zj = self.ops.design.Z[:, blk] @ (bj - c)
                d = ((r @ zj) + 0.5 * (zj @ zj)
                     - self.a1[j] * (nb[j] - self.rtK * abs(c))
                     - self.a2[j] * nc[j])
                if d <= 0.0:
                    self.kinds[j] = CONST
                    r = r + zj
                    self.b[blk] = c

    # -- exact block-coordinate polish ---------------------------------------

    def polish_sweep(self) -> bool:
        """One exact block-minimization pass over active groups.

        Zero and constant decisions here come from the exact subgradient
        conditions of the group subproblem, so every move is a descent step.
        Returns True if any classification changed.
        """
        K = self.K
        G, cv = self.ops.G, self.ops.cv
        changed = False
        Gb = G @ self.b
        for j in range(self.p):
            if self.kinds[j] == ZERO:
                continue
            blk = slice(j * K, (j + 1) * K)
            bj = self.b[blk].copy()
            Gjj = G[blk, blk]
            g = cv[blk] - Gb[blk] + Gjj @ bj        # Z_j'(r + Z_j b_j)
            if self.kinds[j] == VARY:
                bn, kind = self._solve_block(Gjj, g, self.a1[j], self.a2[j], bj)
            else:
                bn, kind = self._solve_collapsed(Gjj, g, self.a1[j])
            if kind != self.kinds[j]:
                self.kinds[j] = kind
                changed = True
            if not np.array_equal(bn, bj):
                Gb += G[:, blk] @ (bn - bj)
                self.b[blk] = bn
        return changed

    def _solve_collapsed(self, Gjj, g, a1):
        """Exact scalar soft-threshold step for a constant-restricted group."""
        xx = Gjj.sum()
        s = g.sum()
        if a1 > 0:
            cstar = np.sign(s) * max(0.0, abs(s) - a1 * self.rtK) / xx
            if cstar == 0.0:
                return np.zeros(self.K), ZERO
        else:
            cstar = s / xx
        return np.full(self.K, cstar), CONST

    def _solve_block(self, Gjj, g, a1, a2, b0):
        """Exactly minimize one varying group's subproblem.

        Returns the new block and its classification: the zero and constant
        subgradient conditions are checked first, otherwise the interior
        solution comes from an inner quadratic-majorization loop on the
        K x K system.
        """
        K, rtK = self.K, self.rtK
        if a1 > 0:
            mean_sq = (g.sum() ** 2) / K
            gc = np.linalg.norm(g - g.mean())
            if mean_sq + max(0.0, gc - a2) ** 2 <= a1 ** 2:
                return np.zeros(K), ZERO
        if self.collapse and a2 > 0:
            gj1 = Gjj.sum(axis=1)
            s = g.sum()
            if a1 > 0:
                cstar = np.sign(s) * max(0.0, abs(s) - a1 * rtK) / gj1.sum()
            else:
                cstar = s / gj1.sum()
            resid = g - cstar * gj1
            if cstar != 0.0 and np.linalg.norm(resid - resid.mean()) <= a2:
                return np.full(K, cstar), CONST
        b = b0.copy()
        if not np.any(b):
            b = np.linalg.solve(Gjj + np.eye(K) * (1e-8 * max(np.trace(Gjj), 1.0)), g)
        eyeK = np.eye(K)
        QK = eyeK - np.ones((K, K)) / K
        for _ in range(_BLOCK_INNER_ITER):
            A = Gjj.copy()
            if a1 > 0:
                A += (a1 / max(np.linalg.norm(b), _NORM_FLOOR)) * eyeK
            if a2 > 0:
                A += (a2 / max(np.linalg.norm(b - b.mean()), _NORM_FLOOR)) * QK
            bn = np.linalg.solve(A, g)
            if np.linalg.norm(bn - b) <= 1e-12 * max(1.0, np.linalg.norm(b)):
                b = bn
                break
            b = bn
        return b, VARY

    # -- certification -------------------------------------------------------

    def state(self) -> CoefState:
        return _state_from_flat(self.b, self.kinds, self.p, self.K)

    def kkt_fast(self) -> float:
        """Scaled stationarity residual from gram products (vectorized)."""
        n, K, p = self.n, self.K, self.p
        grad = (self.ops.cv - self.ops.G @ self.b).reshape(p, K)
        gsum = grad.sum(axis=1)
        gcnorm = np.linalg.norm(grad - grad.mean(axis=1, keepdims=True), axis=1)
        gnorm = np.linalg.norm(grad, axis=1)
        bm = self.b.reshape(p, K)
        kinds = self.kinds.copy()
        kinds[(kinds == CONST) & (bm[:, 0] == 0.0)] = ZERO
        free = ~self.w.forced_zero
        res = np.zeros(p)

        mv = free & (kinds == VARY)
        if np.any(mv):
            bv = bm[mv]
            nb = np.maximum(np.linalg.norm(bv, axis=1), _NORM_FLOOR)[:, None]
            centered = bv - bv.mean(axis=1, keepdims=True)
            ncn = np.maximum(np.linalg.norm(centered, axis=1), _NORM_FLOOR)[:, None]
            v = (grad[mv] - self.a1[mv, None] * bv / nb
                 - self.a2[mv, None] * centered / ncn)
            res[mv] = np.linalg.norm(v, axis=1)

        mc = free & (kinds == CONST)
        if np.any(mc):
            res[mc] = np.abs(gsum[mc] - self.a1[mc] * self.rtK * np.sign(bm[mc, 0]))
            res_b = np.where(self.w.forced_constant[mc], 0.0,
                             np.maximum(0.0, gcnorm[mc] - self.a2[mc]))
            res[mc] = np.maximum(res[mc], res_b)

        mz = free & (kinds == ZERO)
        if np.any(mz):
            zres = np.where(self.w.forced_constant[mz],
                            np.abs(gsum[mz]) - self.a1[mz] * self.rtK,
                            gnorm[mz] - self.a1[mz] - self.a2[mz])
            res[mz] = np.maximum(0.0, zres)
        return float(res.max() / n) if p else 0.0


def _run(ops: DesignOps, lam1: float, lam2: float, w: PenaltyWeights,
         cfg: SolverConfig, warm: CoefState | None, collapse: bool) -> FitResult:
    if not (np.isfinite(lam1) and np.isfinite(lam2) and lam1 >= 0 and lam2 >= 0):
        raise ValueError("penalty parameters must be finite and nonnegative")
    fit = _ActiveSetFit(ops, lam1, lam2, w, cfg, collapse)
    if warm is not None:
        if warm.p != ops.p or warm.K != ops.K:
            raise ValueError("warm start does not match the design")
        fit.init_from_warm(warm)
    else:
        fit.init_ridge()
    scale_z = max(1.0, np.linalg.norm(fit.b) / np.sqrt(ops.p))
    trace = [fit.objective()]
    n_iter = 0
    sweeps = 0
    converged = False
    while True:
        stalled = False
        for _ in range(_SEGMENT):
            if n_iter >= cfg.max_iter:
                break
            fit.threshold_pass(scale_z)
            prev = fit.b.copy()
            fit.joint_step()
            n_iter += 1
            trace.append(fit.objective())
            if fit.kkt_fast() <= cfg.kkt_tol:
                converged = True
                break
            dc = np.linalg.norm(fit.b - prev) / max(1.0, np.linalg.norm(prev))
            dobj = abs(trace[-1] - trace[-2]) / max(1.0, abs(trace[-2]))
            if dc < cfg.tol or dobj < 1e-10:
                stalled = True
                break
        if converged:
            break
        # polish interlude: exact block steps settle borderline groups
        for _ in range(_SWEEPS_PER_ROUND):
            if sweeps >= _MAX_POLISH_SWEEPS:
                break
            fit.polish_sweep()
            sweeps += 1
            trace.append(fit.objective())
            if fit.kkt_fast() <= cfg.kkt_tol:
                converged = True
                break
        if converged:
            break
        if n_iter >= cfg.max_iter or (stalled and sweeps >= _MAX_POLISH_SWEEPS):
            break
    state = fit.state()
    r = ops.residual(state.flat())
    rss = float(r @ r)
    kkt = kkt_residual(ops.y, ops.design, state, lam1, lam2, w)
    converged = kkt <= cfg.kkt_tol
    if not converged:
        log.debug("fit(lam1=%.3e, lam2=%.3e) not certified: kkt=%.3e after %d passes",
                  lam1, lam2, kkt, n_iter)
    return FitResult(coef=state, lambda1=lam1, lambda2=lam2, weights=w, rss=rss,
                     n_iter=n_iter, converged=converged, kkt=kkt,
                     objective_trace=np.asarray(trace))


def fit_double_penalty(y: np.ndarray, design: GroupedDesign, lam1: float,
                       lam2: float, w: PenaltyWeights, cfg: SolverConfig,
                       warm: CoefState | None = None, *,
                       collapse: bool = True,
                       ops: DesignOps | None = None) -> FitResult:
    """Minimize the double-penalty criterion at fixed (lam1, lam2).

    A warm start supplies initial values; its Zero groups stay out of the fit
    (the quadratic approximation cannot revive an exactly-zero group) and its
    Constant groups stay collapsed, though they may still drop to Zero.
    Without a warm start, a ridge-stabilized least-squares solution
    initializes the iteration.
    """
    if ops is None:
        ops = DesignOps(y, design)
    if w.p != design.p:
        raise ValueError("weights do not match the design")
    return _run(ops, lam1, lam2, w, cfg, warm, collapse)


def fit_group_lasso(y: np.ndarray, design: GroupedDesign, lam0: float,
                    cfg: SolverConfig, warm: CoefState | None = None, *,
                    ops: DesignOps | None = None) -> FitResult:
    """Single-penalty group-lasso fit (unit weights, no constant collapsing).

    Used as the pilot estimator that supplies adaptive weights.
    """
    if ops is None:
        ops = DesignOps(y, design)
    return _run(ops, lam0, 0.0, PenaltyWeights.unit(design.p), cfg, warm,
                collapse=False)


def lqa_step(y: np.ndarray, design: GroupedDesign, current: CoefState,
             lam1: float, lam2: float, w: PenaltyWeights, cfg: SolverConfig, *,
             ops: DesignOps | None = None) -> CoefState:
    """One majorize-minimize pass from `current` (classification unchanged).

    Assumes groups below the drop/collapse thresholds were already
    reclassified; each varying group contributes its quadratic-majorizer
    ridge block, each constant group a single collapsed column.
    """
    if ops is None:
        ops = DesignOps(y, design)
    fit = _ActiveSetFit(ops, lam1, lam2, w, cfg, collapse=True)
    fit.kinds = np.asarray(current.kinds, dtype=np.int8).copy()
    fit.b = current.flat().copy()
    fit.joint_step()
    return fit.state()


def compute_adaptive_weights(initial: FitResult, floor: float = 1e-10) -> PenaltyWeights:
    """Adaptive weights 1/||b_j|| and 1/||b_j||_c from a pilot fit.

    Groups whose pilot norm is below `floor` are forced to zero; groups with
    positive norm but centered norm below `floor` are forced to constants
    (a zero force takes precedence).
    """
    if floor <= 0:
        raise ValueError("floor must be positive")
    groups = initial.coef.groups
    nb = np.linalg.norm(groups, axis=1)
    nc = np.linalg.norm(groups - groups.mean(axis=1, keepdims=True), axis=1)
    forced_zero = nb <= floor
    forced_constant = ~forced_zero & (nc <= floor)
    w1 = np.where(forced_zero, np.inf, 1.0 / np.where(forced_zero, 1.0, nb))
    w2 = np.where(forced_zero | forced_constant, np.inf,
                  1.0 / np.where(forced_zero | forced_constant, 1.0, nc))
    return PenaltyWeights(w1=w1, w2=w2, forced_zero=forced_zero,
                          forced_constant=forced_constant)


def fit_constrained_ls(y: np.ndarray, design: GroupedDesign,
                       structure: np.ndarray, spec: BasisSpec | None = None, *,
                       ops: DesignOps | None = None,
                       cfg: SolverConfig | None = None) -> FitResult:
    """Unpenalized least squares with a known zero/constant/varying structure.

    Varying groups keep their K columns, constant groups are collapsed onto
    the raw covariate column, zero groups are removed. This is the oracle
    baseline; a rank-deficient reduced design is ridge-stabilized and the
    fit reported as uncertified.
    """
    if spec is not None and spec.K != design.K:
        raise ValueError("basis spec does not match the design")
    if ops is None:
        ops = DesignOps(y, design)
    if cfg is None:
        cfg = SolverConfig()
    structure = np.asarray(structure, dtype=np.int8)
    if structure.shape != (design.p,):
        raise ValueError("structure must give one class per group")
    w = PenaltyWeights(w1=np.where(structure == ZERO, np.inf, 1.0),
                       w2=np.where(structure == VARY, 1.0, np.inf),
                       forced_zero=structure == ZERO,
                       forced_constant=structure == CONST)
    fit = _ActiveSetFit(ops, 0.0, 0.0, w, cfg, collapse=False)
    stabilized = False
    A0, rhs, vidx, cidx, nv = fit._reduced_system()
    if A0.shape[0]:
        A = A0.copy()
        try:
            sol = sla.cho_solve(sla.cho_factor(A, lower=True, check_finite=False),
                                rhs, check_finite=False)
        except (np.linalg.LinAlgError, sla.LinAlgError):
            stabilized = True
            jitter = 1e-10 * max(np.trace(A), 1.0)
            log.warning("reduced design is rank deficient; ridge-stabilizing")
            A[np.diag_indices_from(A)] += jitter
            sol = np.linalg.solve(A, rhs)
        fit._scatter(sol, vidx, cidx, nv)
    state = fit.state()
    r = ops.residual(state.flat())
    rss = float(r @ r)
    kkt = kkt_residual(ops.y, ops.design, state, 0.0, 0.0, w)
    converged = (not stabilized) and kkt <= cfg.kkt_tol
    obj0 = 0.5 * ops.yty
    return FitResult(coef=state, lambda1=0.0, lambda2=0.0, weights=w, rss=rss,
                     n_iter=1, converged=converged, kkt=kkt,
                     objective_trace=np.array([obj0, 0.5 * rss]))
