"""Watch the training loop return to the same class pair.

Classes 1 and 2 share a few identical points, so no dichotomizer can split
them cleanly. The first time the pair is picked a plain boosted column is
added. When it is picked again the column already exists, so the loop trains
a layered clustering dichotomizer for the same bipartition instead.

    python demos/stubborn_pair.py [seed]
"""

import sys
from pathlib import Path

sys.path.insert(0, str(Path(__file__).resolve().parents[1] / "tests"))
from fixtures import stubborn_pair_dataset  # noqa: E402

from wolcecoc.learners import ClusteringDichotomizer  # noqa: E402
from wolcecoc.wolc import WolcConfig, train_wolc  # noqa: E402


def main(seed=0):
    ds = stubborn_pair_dataset(seed)
    print(f"{ds.n} examples, class sizes {ds.class_counts().tolist()}")
    rounds = []
    model = train_wolc(ds, WolcConfig(s=1), trace=rounds)
    for line in rounds:
        print(" ", line)
    print("\nfinal code (columns left to right):")
    print(model.M.entries)
    for q, d in enumerate(model.dichotomizers):
        if isinstance(d, ClusteringDichotomizer):
            kinds = ["boosted" if not isinstance(r.payload, int) else f"fixed {r.payload:+d}"
                     for r in d.regions]
            print(f"column {q + 1} is layered: regions {kinds}")
    acc = (model.predict(ds.features) == ds.labels).mean()
    print(f"training accuracy {100 * acc:.1f}%, training risk {model.train_risk:.4f}")


if __name__ == "__main__":
    main(int(sys.argv[1]) if len(sys.argv) > 1 else 0)
