"""Dense two-phase tableau simplex.

Small and deterministic rather than fast: the LPs solved here have at most a
few hundred columns. Bland's rule is the default pivoting rule, so no cycling
and identical pivots on identical input. ``rule="hybrid"`` prices with
Dantzig's most-negative reduced cost and drops to Bland's rule after a run of
degenerate pivots until the objective moves again; it is just as
deterministic and usually needs far fewer pivots.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

PIVOT_TOL = 1e-9
BREAKDOWN_TOL = 1e-12
FEAS_TOL = 1e-9
DEGENERATE_RUN = 8
REINVERT_EVERY = 50
RULES = ("bland", "dantzig", "hybrid")


class SimplexError(RuntimeError):
    """Numerical breakdown or iteration limit inside the simplex."""


@dataclass
class LinearProgram:
    """minimize c.x  s.t.  A_ub x <= b_ub,  A_eq x = b_eq,  lower <= x <= upper."""

    c: np.ndarray
    A_ub: np.ndarray | None = None
    b_ub: np.ndarray | None = None
    A_eq: np.ndarray | None = None
    b_eq: np.ndarray | None = None
    lower: np.ndarray | None = None
    upper: np.ndarray | None = None

    def __post_init__(self):
        self.c = np.asarray(self.c, dtype=float).ravel()
        n = self.c.size
        self.A_ub, self.b_ub = _block(self.A_ub, self.b_ub, n, "inequality")
        self.A_eq, self.b_eq = _block(self.A_eq, self.b_eq, n, "equality")
        self.lower = np.zeros(n) if self.lower is None else np.asarray(self.lower, dtype=float).ravel()
        self.upper = np.full(n, np.inf) if self.upper is None else np.asarray(self.upper, dtype=float).ravel()
        if self.lower.shape != (n,) or self.upper.shape != (n,):
            raise ValueError("bounds must have one entry per variable")
        for name in ("c", "A_ub", "b_ub", "A_eq", "b_eq"):
            if not np.isfinite(getattr(self, name)).all():
                raise ValueError(f"{name} has non-finite entries")
        if np.isnan(self.lower).any() or np.isnan(self.upper).any() or (self.lower > self.upper).any():
            raise ValueError("inconsistent bounds")

    @property
    def n_vars(self) -> int:
        return self.c.size


def _block(A, b, n, what):
    if A is None:
        return np.zeros((0, n)), np.zeros(0)
    A = np.atleast_2d(np.asarray(A, dtype=float))
    b = np.asarray(b, dtype=float).ravel()
    if A.shape[1] != n or A.shape[0] != b.size:
        raise ValueError(f"{what} block has shape {A.shape} with {b.size} bounds for {n} variables")
    return A, b


@dataclass
class LPResult:
    status: str  # "optimal" | "infeasible" | "unbounded"
    x: np.ndarray | None = None
    value: float = np.nan
    iterations: int = 0
    duals: np.ndarray | None = field(default=None, repr=False)

    @property
    def ok(self) -> bool:
        return self.status == "optimal"


class _Tableau:
    def __init__(self, A, b, basis, rule, max_iter):
        m, N = A.shape
        self.rows = list(range(m))  # original row of each tableau row
        self.A, self.b = A, b
        self.c = np.zeros(N)
        self.allowed = np.ones(N, dtype=bool)
        self.T = np.zeros((m + 1, N + 1))
        self.T[:m, :N] = A
        self.T[:m, N] = b
        self.basis = list(basis)
        self.rule = rule
        self.max_iter = max_iter
        self.iterations = 0
        self.stalled = 0

    @property
    def m(self):
        return self.T.shape[0] - 1

    def set_objective(self, c):
        self.c = c
        N = self.T.shape[1] - 1
        self.T[-1, :N] = c
        self.T[-1, N] = 0.0
        for r, j in enumerate(self.basis):
            if self.T[-1, j] != 0.0:
                self.T[-1] -= self.T[-1, j] * self.T[r]
        self.T[-1, self.basis] = 0.0

    def reinvert(self):
        """Rebuild the tableau from the original rows and the current basis.

        Pivoting in place accumulates round-off; doing this every few dozen
        pivots keeps the basic solution honest on long runs.
        """
        rows, basis = self.rows, self.basis
        try:
            lu = np.linalg.inv(self.A[np.ix_(rows, basis)])
        except np.linalg.LinAlgError as exc:
            raise SimplexError("basis became singular") from exc
        self.T[:-1, :-1] = lu @ self.A[rows]
        self.T[:-1, -1] = lu @ self.b[rows]
        self.T[:-1, :-1][:, ~self.allowed] = 0.0
        self.T[:-1, basis] = np.eye(len(basis))
        self.set_objective(self.c)

    def pivot(self, r, j):
        T = self.T
        piv = T[r, j]
        if abs(piv) < BREAKDOWN_TOL:
            raise SimplexError(f"pivot {piv:.3g} below {BREAKDOWN_TOL:g} at row {r}, column {j}")
        T[r] /= piv
        col = T[:, j].copy()
        col[r] = 0.0
        T -= np.outer(col, T[r])
        T[:, j] = 0.0
        T[r, j] = 1.0
        self.basis[r] = j
        self.iterations += 1

    def _bland(self):
        return self.rule == "bland" or (self.rule == "hybrid" and self.stalled >= DEGENERATE_RUN)

    def entering(self, allowed):
        d = self.T[-1, :-1]
        cand = np.flatnonzero((d < -PIVOT_TOL) & allowed)
        if cand.size == 0:
            return None
        if self._bland():
            return int(cand[0])
        return int(cand[np.argmin(d[cand])])

    def leaving(self, j):
        col = self.T[:-1, j]
        rhs = np.maximum(self.T[:-1, -1], 0.0)
        rows = np.flatnonzero(col > PIVOT_TOL * max(1.0, np.abs(col).max(initial=0.0)))
        if rows.size == 0:
            tiny = np.flatnonzero(col > BREAKDOWN_TOL)
            if tiny.size:
                raise SimplexError(f"column {j} has only near-zero positive entries")
            return None
        ratios = rhs[rows] / col[rows]
        if self._bland():
            best = ratios.min()
            tied = rows[ratios <= best + 1e-12 * max(1.0, abs(best))]
            # among tied rows, the one whose basic variable has the smallest index
            return int(min(tied, key=lambda r: self.basis[r]))
        # two-pass ratio test: allow a FEAS_TOL overshoot and take the
        # largest pivot among the rows that qualify
        bound = ((rhs[rows] + FEAS_TOL) / col[rows]).min()
        cand = rows[ratios <= bound]
        return int(min(cand, key=lambda r: (-col[r], self.basis[r])))

    def run(self, allowed):
        while True:
            if self.iterations >= self.max_iter:
                raise SimplexError(f"iteration limit {self.max_iter} reached")
            j = self.entering(allowed)
            if j is None:
                return "optimal"
            r = self.leaving(j)
            if r is None:
                return "unbounded"
            step = self.T[r, -1]
            self.pivot(r, j)
            if self.iterations % REINVERT_EVERY == 0:
                self.reinvert()
            self.stalled = self.stalled + 1 if step <= PIVOT_TOL else 0


def _refine(A, b, tab):
    """Recompute the basic solution from the original rows and check it.

    The tableau accumulates round-off over many pivots; solving B x_B = b
    once at the end removes it. A singular basis or a residual above 1e-7
    means the pivots went numerically wrong, which is reported.
    """
    rows, basis = tab.rows, tab.basis
    B = A[np.ix_(rows, basis)]
    try:
        xB = np.linalg.solve(B, b[rows])
    except np.linalg.LinAlgError as exc:
        raise SimplexError("final basis is singular") from exc
    z = np.zeros(A.shape[1])
    z[basis] = xB
    scale = 1.0 + np.abs(b).max(initial=0.0)
    if z.min(initial=0.0) < -1e-7 * scale or np.abs(A @ z - b).max(initial=0.0) > 1e-7 * scale:
        raise SimplexError("basic solution fails its residual check")
    return np.maximum(z, 0.0)


def _standardize(lp: LinearProgram):
    """Rewrite as min c'.z, A z {<=,=} b, z >= 0 and return the back-map."""
    n = lp.n_vars
    lo, hi = lp.lower, lp.upper
    cols = []  # (orig index, sign) per standardized variable
    offset = np.zeros(n)
    for k in range(n):
        if np.isfinite(lo[k]):
            cols.append((k, 1.0))
            offset[k] = lo[k]
        elif np.isfinite(hi[k]):
            cols.append((k, -1.0))
            offset[k] = hi[k]
        else:
            cols.append((k, 1.0))
            cols.append((k, -1.0))
    S = np.zeros((n, len(cols)))
    for t, (k, sgn) in enumerate(cols):
        S[k, t] = sgn
    # x = offset + S z
    c = lp.c @ S
    const = float(lp.c @ offset)
    A_ub = lp.A_ub @ S
    b_ub = lp.b_ub - lp.A_ub @ offset
    extra = [(k, t) for t, (k, sgn) in enumerate(cols)
             if sgn > 0 and np.isfinite(lo[k]) and np.isfinite(hi[k])]
    if extra:
        U = np.zeros((len(extra), len(cols)))
        for r, (k, t) in enumerate(extra):
            U[r, t] = 1.0
        A_ub = np.vstack([A_ub, U])
        b_ub = np.concatenate([b_ub, [hi[k] - lo[k] for k, _ in extra]])
    A_eq = lp.A_eq @ S
    b_eq = lp.b_eq - lp.A_eq @ offset
    return c, const, A_ub, b_ub, A_eq, b_eq, S, offset


def simplex_solve(lp: LinearProgram, rule: str = "bland", max_iter: int = 100_000) -> LPResult:
    """Solve ``lp`` to a vertex optimum, or report infeasible / unbounded.

    Raises :class:`SimplexError` on a pivot smaller than 1e-12 or when the
    iteration limit is hit; those are never folded into a status.
    """
    if rule not in RULES:
        raise ValueError(f"unknown pivot rule {rule!r}")
    c, const, A_ub, b_ub, A_eq, b_eq, S, offset = _standardize(lp)
    nz = c.size
    m_ub, m_eq = A_ub.shape[0], A_eq.shape[0]
    m = m_ub + m_eq
    # columns: z (nz) | slacks (m_ub) | artificials (as needed)
    A = np.zeros((m, nz + m_ub))
    b = np.concatenate([b_ub, b_eq])
    A[:m_ub, :nz] = A_ub
    A[:m_ub, nz:] = np.eye(m_ub)
    A[m_ub:, :nz] = A_eq
    flip = b < 0
    A[flip] *= -1
    b = np.abs(b)
    need_art = [r for r in range(m) if r >= m_ub or flip[r]]
    art0 = A.shape[1]
    if need_art:
        Art = np.zeros((m, len(need_art)))
        for t, r in enumerate(need_art):
            Art[r, t] = 1.0
        A = np.hstack([A, Art])
    basis = [nz + r for r in range(m_ub)] + [0] * m_eq
    for t, r in enumerate(need_art):
        basis[r] = art0 + t
    tab = _Tableau(A, b, basis, rule, max_iter)
    N = A.shape[1]
    allowed = tab.allowed

    if need_art:
        c1 = np.zeros(N)
        c1[art0:] = 1.0
        tab.set_objective(c1)
        tab.run(allowed)
        if -tab.T[-1, -1] > FEAS_TOL * max(1.0, np.abs(b).max(initial=0.0)):
            return LPResult("infeasible", iterations=tab.iterations)
        # drive remaining artificials out of the basis; drop redundant rows
        r = 0
        while r < tab.m:
            if tab.basis[r] >= art0:
                row = tab.T[r, :art0]
                cand = np.flatnonzero(np.abs(row) > PIVOT_TOL)
                if cand.size:
                    tab.pivot(r, int(cand[0]))
                else:
                    tab.T = np.delete(tab.T, r, axis=0)
                    del tab.basis[r]
                    del tab.rows[r]
                    continue
            r += 1
        allowed[art0:] = False
        tab.T[:, art0:-1] = 0.0
        tab.reinvert()

    c2 = np.zeros(N)
    c2[:nz] = c
    tab.set_objective(c2)
    status = tab.run(allowed)
    if status == "unbounded":
        return LPResult("unbounded", iterations=tab.iterations)
    z = _refine(A, b, tab)[:nz]
    x = offset + S @ z
    return LPResult("optimal", x, float(lp.c @ x), tab.iterations)
