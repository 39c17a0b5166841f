"""Label-agreement metrics.

Overlap rescales accuracy (maximized over global label permutations) so that
chance level maps to 0 and perfect recovery to 1:
(max_sigma accuracy - 1/k) / (1 - 1/k).
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass

import numpy as np
from scipy.optimize import linear_sum_assignment

EXACT_PERMUTATION_LIMIT = 6


@dataclass
class OverlapResult:
    overlap: float
    best_permutation: tuple   # maps true class -> predicted class
    accuracy: float


def overlap(truth, pred, k: int) -> OverlapResult:
    """Permutation-maximized overlap between two labelings with labels < k.

    Enumerates all k! permutations for k <= 6; larger k uses the Hungarian
    assignment on the confusion matrix, which is equivalent.
    """
    truth = np.asarray(truth, dtype=np.int64)
    pred = np.asarray(pred, dtype=np.int64)
    if truth.shape != pred.shape:
        raise ValueError("labelings must have equal length")
    n = len(truth)
    if n == 0:
        raise ValueError("empty labelings")
    if truth.min() < 0 or pred.min() < 0 or max(truth.max(), pred.max()) >= k:
        raise ValueError("labels must lie in [0, k)")
    confusion = np.zeros((k, k), dtype=np.int64)
    np.add.at(confusion, (truth, pred), 1)
    if k <= EXACT_PERMUTATION_LIMIT:
        best_perm, best_hits = None, -1
        for perm in itertools.permutations(range(k)):
            hits = sum(confusion[c, perm[c]] for c in range(k))
            if hits > best_hits:
                best_perm, best_hits = perm, hits
    else:
        rows, cols = linear_sum_assignment(-confusion)
        best_perm = tuple(int(cols[np.argwhere(rows == c)[0, 0]])
                          for c in range(k))
        best_hits = int(confusion[rows, cols].sum())
    accuracy = best_hits / n
    return OverlapResult(
        overlap=(accuracy - 1.0 / k) / (1.0 - 1.0 / k),
        best_permutation=best_perm,
        accuracy=accuracy,
    )
