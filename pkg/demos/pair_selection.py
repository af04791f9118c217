"""Why weighted-loss risk and confusion counts pick different class pairs.

Three classes, 100 examples each, with a handful of misclassified examples
whose margins differ a lot. Counting mistakes favours the pair with the most
errors; summing the weighted-loss gaps favours the pair with the worst ones.

    python demos/pair_selection.py
"""

import sys
from pathlib import Path

import numpy as np

sys.path.insert(0, str(Path(__file__).resolve().parents[1] / "tests"))
from fixtures import pair_selection_fixture  # noqa: E402

from wolcecoc.decoding import pair_risk_matrix, top_confusing_pairs  # noqa: E402


def main():
    tensor, labels, W = pair_selection_fixture()
    pred = np.argmin(tensor.class_scores(W), axis=1) + 1
    print(f"{np.sum(pred != labels)} of {labels.size} training examples are misclassified\n")
    for kind in ("confusion", "training-risk"):
        eps = pair_risk_matrix(tensor, labels, W, kind)
        print(eps.to_text())
        (pair, risk), = top_confusing_pairs(eps, 1)
        print(f"{kind}: most confusing pair {pair} with {risk:g}\n")


if __name__ == "__main__":
    main()
