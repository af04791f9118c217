"""Compare the four decoders on one Glass split, with the same dichotomizers.

Trains the grow-and-reweight model on 90% of Glass and decodes the held-out
10% with Hamming, loss-based, loss-weighted and optimized weights.

    python demos/decoders_on_glass.py
"""

import numpy as np

from wolcecoc.dataset import load_builtin, normalize_split, stratified_folds, Dataset
from wolcecoc.wolc import train_wolc


def main(seed=0):
    ds = load_builtin("glass")
    train, test = next(stratified_folds(ds, 10, seed).splits())
    Xtr, Xte = normalize_split(ds.features[train], ds.features[test])
    model = train_wolc(Dataset(Xtr, ds.labels[train], ds.class_count))
    print(f"code length {model.Q}, rounds {len(model.history)}")
    preds = {}
    for dec in ("hd", "lb", "lw", "ow"):
        preds[dec] = model.predict(Xte, dec)
        acc = np.mean(preds[dec] == ds.labels[test])
        print(f"{dec}: {100 * acc:5.1f}% on {len(test)} held-out examples")
    diff = np.flatnonzero(preds["hd"] != preds["ow"])
    print(f"hd and ow disagree on {diff.size} examples")


if __name__ == "__main__":
    main()
