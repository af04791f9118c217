"""Hand-built instances shared by the unit and acceptance tests."""

import itertools

import numpy as np

from wolcecoc.coding import make_random_ternary
from wolcecoc.dataset import Dataset
from wolcecoc.decoding import LossTensor, build_loss_tensor
from wolcecoc.owopt import risk_of


def pair_selection_fixture():
    """Three classes, 100 examples each, scores fed straight in as losses.

    Every example's loss vector for class p is the constant score s_p across
    columns, so with uniform weights the class score is s_p itself. Correct
    examples score -1 on their own class and +1 elsewhere. The misclassified
    ones are:

    * 10 class-1 examples with scores (1, 0, -1): decoded as 3, gap 2 each
    * 10 class-2 examples with scores (0.5, 0.2, -0.2): decoded as 3, gap 0.4
    * 5 class-3 examples with scores (0.9, -0.6, 0.6): decoded as 2, gap 1.2

    Confusion counts put the (2,3) pair on top with 10 + 5 = 15 against
    (1,3) with 10. Weighted-loss risk flips the choice: (1,3) collects
    10 * 2 = 20 while (2,3) collects 4 + 6 = 10. The 20 sits in eps[1,3]
    here (class-1 examples pulled to 3) rather than eps[3,1].
    """
    Q = 3
    rows, labels = [], []
    wrong = {1: (10, (1.0, 0.0, -1.0)), 2: (10, (0.5, 0.2, -0.2)), 3: (5, (0.9, -0.6, 0.6))}
    for c in (1, 2, 3):
        k, bad = wrong[c]
        good = tuple(-1.0 if p == c else 1.0 for p in (1, 2, 3))
        rows += [bad] * k + [good] * (100 - k)
        labels += [c] * 100
    S = np.array(rows)
    u = np.repeat(S[:, :, None], Q, axis=2)
    return LossTensor(u, "linear", 1.0), np.array(labels), np.full((3, Q), 1.0 / Q)


def stubborn_pair_dataset(seed):
    """Three classes where classes 1 and 2 stay confused after the first round.

    Class 1 shares duplicated points with class 3 and, fewer of them, with
    class 2. The shared 1/3 points make the one-vs-all columns imperfect,
    and the remaining weighted-loss mass lands on the (1,2) pair again once
    its column already exists, which forces the layered learner.
    """
    rng = np.random.default_rng(seed)
    parts, labels = [], []

    def add(points, classes):
        for c in classes:
            parts.append(points)
            labels.extend([c] * len(points))

    add(rng.uniform(0, 1, (10, 2)), (1, 3))
    add(rng.uniform(0, 1, (3, 2)), (1, 2))
    for c, centre in zip((1, 2, 3), ((0, 0), (0.5, 1), (1, 0))):
        add(rng.normal(centre, 0.15, (40, 2)), (c,))
    return Dataset(np.vstack(parts), np.array(labels), 3, name=f"stubborn-{seed}")


def random_instance(seed, n=None, P=None, Q=None):
    """Random margins in [-1, 1] under a random ternary code; every class appears."""
    rng = np.random.default_rng(seed)
    P = P or int(rng.integers(2, 5))
    Q = Q or int(rng.integers(P if P > 2 else 1, 6))
    n = n or int(rng.integers(P, 31))
    M = make_random_ternary(P, Q, seed=seed, allow_duplicate_columns=True)
    labels = np.concatenate([np.arange(1, P + 1), rng.integers(1, P + 1, n - P)])
    X = rng.uniform(-1, 1, (n, Q))
    return build_loss_tensor(X, labels, M), labels, M


def grid_risk(tensor, labels, M, step=0.01):
    """Exhaustive risk minimum for P = Q = 2 over a grid on each row's simplex."""
    m = M.entries
    rows = []
    for p in range(2):
        nz = np.flatnonzero(m[p])
        if nz.size == 1:
            w = np.zeros(2)
            w[nz] = 1
            rows.append([w])
        else:
            t = np.arange(0, 1 + step / 2, step)
            rows.append([np.array([a, 1 - a]) for a in t])
    return min(risk_of(np.vstack([a, b]), tensor, labels)
               for a, b in itertools.product(*rows))
