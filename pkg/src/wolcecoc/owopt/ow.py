"""Optimized decoding weights by linear programming.

The training risk of a weight matrix W is

    J(W) = sum_i max_p max(0, w_{y_i} . u_{i,y_i} - w_p . u_{i,p})

and the optimal W minimizes it over the feasible set (zero where the code is
zero, nonnegative, rows summing to one). :func:`solve_ow_full` writes this as
one LP with a slack per example. :func:`solve_ow_cpa` solves the single-slack
form with a cutting-plane loop: every selector G (one rival class per
example) yields one aggregated constraint whose size is P x Q whatever n is.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from ..decoding import LossTensor, check_weights, uniform_weights
from .simplex import LinearProgram, simplex_solve


class OwError(RuntimeError):
    pass


class CpaIterationLimit(OwError):
    """Cutting-plane loop hit its cap; ``best`` holds the last solution."""

    def __init__(self, message, best):
        super().__init__(message)
        self.best = best


@dataclass(frozen=True)
class ConstraintSelector:
    """Rival class chosen for each example, stored 0-based as a length-n vector.

    ``matrix`` gives the equivalent n x P one-hot form.
    """

    choice: np.ndarray
    class_count: int

    @property
    def matrix(self) -> np.ndarray:
        G = np.zeros((self.choice.size, self.class_count))
        G[np.arange(self.choice.size), self.choice] = 1.0
        return G

    def key(self) -> bytes:
        return np.asarray(self.choice, dtype=np.int64).tobytes()


@dataclass
class OwSolution:
    W: np.ndarray
    objective: float
    slacks: np.ndarray
    iterations: int = 0
    working_set_size: int = 0
    reduced_objective: float = 0.0
    trace: list = field(default_factory=list, repr=False)


def _scores(tensor, W):
    u = tensor.u if isinstance(tensor, LossTensor) else np.asarray(tensor, dtype=float)
    return np.einsum("ipq,pq->ip", u, np.asarray(W, dtype=float)), u


def example_risks(W, tensor, labels) -> np.ndarray:
    """Per-example hinge max_p max(0, s_{i,y_i} - s_{i,p})."""
    S, _ = _scores(tensor, W)
    labels = np.asarray(labels, dtype=int)
    own = S[np.arange(S.shape[0]), labels - 1]
    return np.maximum(0.0, (own[:, None] - S).max(axis=1))


def risk_of(W, tensor, labels) -> float:
    return float(example_risks(W, tensor, labels).sum())


def most_violated_selector(tensor, labels, W) -> tuple[ConstraintSelector, float]:
    """Selector maximizing the aggregated violation, and that violation.

    The p = y_i term is always 0, so the violation equals risk_of(W).
    Ties pick the smallest class index.
    """
    S, _ = _scores(tensor, W)
    labels = np.asarray(labels, dtype=int)
    own = S[np.arange(S.shape[0]), labels - 1]
    gaps = own[:, None] - S
    choice = np.argmax(gaps, axis=1)
    value = float(gaps[np.arange(S.shape[0]), choice].sum())
    return ConstraintSelector(choice, S.shape[1]), value


def selector_coefficients(u, labels, sel: ConstraintSelector) -> np.ndarray:
    """P x Q matrix C with <C, W> = sum_i (w_{y_i}.u_{i,y_i} - w_{g_i}.u_{i,g_i})."""
    n, P, Q = u.shape
    rows = np.arange(n)
    y = np.asarray(labels, dtype=int) - 1
    C = np.zeros((P, Q))
    np.add.at(C, y, u[rows, y])
    np.subtract.at(C, sel.choice, u[rows, sel.choice])
    return C


class _Layout:
    """Maps the free weights (nonzero code entries) to LP variable indices."""

    def __init__(self, M):
        m = np.asarray(M)
        self.shape = m.shape
        self.mask = m != 0
        self.cells = np.argwhere(self.mask)
        self.k = len(self.cells)

    def flatten(self, C):
        return C[self.mask]

    def weights(self, x):
        W = np.zeros(self.shape)
        W[self.mask] = x[: self.k]
        # clean round-off so rows sum to 1 exactly up to float
        W = np.maximum(W, 0.0)
        W /= W.sum(axis=1, keepdims=True)
        return W

    def row_sum_block(self):
        P = self.shape[0]
        A = np.zeros((P, self.k))
        A[self.cells[:, 0], np.arange(self.k)] = 1.0
        return A, np.ones(P)


def _check_inputs(tensor, labels, M):
    u = tensor.u
    m = np.asarray(M)
    labels = np.asarray(labels, dtype=int)
    if u.shape[1:] != m.shape:
        raise OwError(f"tensor classes/columns {u.shape[1:]} do not match the code {m.shape}")
    if u.shape[0] < 1 or labels.shape != (u.shape[0],):
        raise OwError("need one label per example and at least one example")
    if labels.min() < 1 or labels.max() > m.shape[0]:
        raise OwError("labels outside 1..P")
    if (~(m != 0).any(axis=1)).any():
        raise OwError("coding matrix has an all-zero row")
    return u, m, labels


def _finish(W, tensor, labels, **kw) -> OwSolution:
    slacks = example_risks(W, tensor, labels)
    return OwSolution(W, float(slacks.sum()), slacks, **kw)


def solve_ow_full(tensor: LossTensor, labels, M, rule="bland") -> OwSolution:
    """Minimize sum_i xi_i over feasible W with one hinge constraint per (i, p != y_i)."""
    u, m, labels = _check_inputs(tensor, labels, M)
    n, P, Q = u.shape
    lay = _Layout(m)
    nv = lay.k + n
    rows = []
    for i in range(n):
        y = labels[i] - 1
        for p in range(P):
            if p == y:
                continue
            C = np.zeros((P, Q))
            C[y] += u[i, y]
            C[p] -= u[i, p]
            row = np.zeros(nv)
            row[: lay.k] = lay.flatten(C)
            row[lay.k + i] = -1.0
            rows.append(row)
    A_eq, b_eq = lay.row_sum_block()
    A_eq = np.hstack([A_eq, np.zeros((P, n))])
    c = np.concatenate([np.zeros(lay.k), np.ones(n)])
    lp = LinearProgram(c, np.array(rows).reshape(-1, nv), np.zeros(len(rows)), A_eq, b_eq)
    res = simplex_solve(lp, rule=rule)
    if not res.ok:
        raise OwError(f"full OW linear program reported {res.status}; this is a bug")
    W = lay.weights(res.x)
    return _finish(W, tensor, labels, iterations=res.iterations, reduced_objective=res.value)


def _reduced_lp(lay, coeffs):
    nv = lay.k + 1
    A_ub = np.zeros((len(coeffs), nv))
    for r, C in enumerate(coeffs):
        A_ub[r, : lay.k] = lay.flatten(C)
        A_ub[r, lay.k] = -1.0
    A_eq, b_eq = lay.row_sum_block()
    A_eq = np.hstack([A_eq, np.zeros((A_eq.shape[0], 1))])
    c = np.zeros(nv)
    c[-1] = 1.0
    return LinearProgram(c, A_ub, np.zeros(len(coeffs)), A_eq, b_eq)


def _nearest_optimum_lp(lay, coeffs, level, w0):
    """Among W with <C_G, W> <= level for all G, the one closest to w0 in L1.

    Variables are the split deviation W = w0 + a - b with a >= 0 and
    0 <= b <= w0; the objective sum(a + b) is the L1 distance.
    """
    k = lay.k
    G = np.array([lay.flatten(C) for C in coeffs])
    A_ub = np.hstack([G, -G])
    b_ub = np.full(len(coeffs), level) - G @ w0
    R, _ = lay.row_sum_block()
    A_eq = np.hstack([R, -R])
    upper = np.concatenate([np.full(k, np.inf), w0])
    return LinearProgram(np.ones(2 * k), A_ub, b_ub, A_eq, np.zeros(R.shape[0]),
                         np.zeros(2 * k), upper)


LEVEL_SLACK = 1e-10


def solve_ow_cpa(tensor: LossTensor, labels, M, epsilon: float = 1e-4,
                 max_iter: int = 1000, rule="hybrid", select="nearest", W0=None,
                 trace=None) -> OwSolution:
    """Cutting-plane solve of the single-slack problem.

    Starts from ``W0`` (uniform over the nonzero code entries by default) and
    an empty working set. Each round adds the most violated selector and
    re-solves the reduced LP  min xi s.t. <C_G, W> <= xi for G in the working
    set. Stops once the new selector's violation is within ``epsilon`` of xi,
    or when it is already in the working set. The returned objective is
    risk_of(W), which is at most the optimum plus ``epsilon``.

    The reduced LP usually has a whole face of optimal W. With
    ``select="nearest"`` the next iterate is the optimal W closest to ``W0``
    in L1 (a second, exact LP); ``select="vertex"`` keeps whatever vertex the
    simplex lands on. Both are exact optima of the reduced problem, so the
    stopping guarantee is the same, but vertices of the weight simplex put
    all of a row's mass on one column, which makes many classes tie and the
    loop crawl.

    ``trace`` may be a list or a writable text stream; one line per round
    records the working-set size, xi and the incoming violation.
    """
    if epsilon <= 0:
        raise OwError("epsilon must be positive")
    if select not in ("nearest", "vertex"):
        raise OwError(f"unknown selection rule {select!r}")
    u, m, labels = _check_inputs(tensor, labels, M)
    W = uniform_weights(m) if W0 is None else np.asarray(W0, dtype=float)
    if W0 is not None:
        check_weights(W, m)
    if not u.any():
        return _finish(W, tensor, labels)
    lay = _Layout(m)
    w0 = lay.flatten(W)
    coeffs, seen, log = [], set(), []
    xi = 0.0
    for it in range(1, max_iter + 1):
        sel, viol = most_violated_selector(tensor, labels, W)
        log.append((len(coeffs), xi, viol))
        _emit(trace, f"iter={it} omega={len(coeffs)} xi={xi:.12g} violation={viol:.12g}")
        if viol <= xi + epsilon or sel.key() in seen:
            return _finish(W, tensor, labels, iterations=it, working_set_size=len(coeffs),
                           reduced_objective=xi, trace=log)
        seen.add(sel.key())
        coeffs.append(selector_coefficients(u, labels, sel))
        res = simplex_solve(_reduced_lp(lay, coeffs), rule=rule)
        if not res.ok:
            raise OwError(f"reduced OW linear program reported {res.status}; this is a bug")
        xi = max(float(res.x[-1]), 0.0)
        if select == "vertex":
            W = lay.weights(res.x)
            continue
        near = simplex_solve(_nearest_optimum_lp(lay, coeffs, xi + LEVEL_SLACK, w0), rule=rule)
        if not near.ok:
            raise OwError(f"nearest-optimum linear program reported {near.status}; this is a bug")
        k = lay.k
        W = lay.weights(np.concatenate([w0 + near.x[:k] - near.x[k:], [0.0]]))
    best = _finish(W, tensor, labels, iterations=max_iter, working_set_size=len(coeffs),
                   reduced_objective=xi, trace=log)
    raise CpaIterationLimit(f"cutting-plane loop did not converge in {max_iter} rounds", best)


def _emit(trace, line):
    if trace is None:
        return
    if isinstance(trace, list):
        trace.append(line)
    else:
        trace.write(line + "\n")
