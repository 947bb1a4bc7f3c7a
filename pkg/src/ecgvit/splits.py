"""Seeded k-fold and holdout splits, optionally stratified and grouped by report."""
from __future__ import annotations

import logging
import math
from collections import Counter
from dataclasses import dataclass
from fractions import Fraction
from typing import Hashable, Sequence

import numpy as np

logger = logging.getLogger(__name__)


@dataclass
class FoldSplit:
    folds: list[list]
    grouped: bool = False

    @property
    def k(self) -> int:
        return len(self.folds)

    def train_test(self, i: int) -> tuple[list, list]:
        train = [x for j, f in enumerate(self.folds) if j != i for x in f]
        return sorted(train), list(self.folds[i])


def _units(ids: Sequence, labels: Sequence[int], groups: Sequence[Hashable] | None):
    """Split into units (single ids, or whole groups) each carrying one label."""
    ids = list(ids)
    labels = [int(x) for x in labels]
    if len(ids) != len(labels):
        raise ValueError("ids and labels must have equal length")
    if groups is None:
        return [[i] for i in ids], labels
    if len(groups) != len(ids):
        raise ValueError("groups must match ids in length")
    members: dict[Hashable, list] = {}
    votes: dict[Hashable, Counter] = {}
    for i, lab, g in zip(ids, labels, groups):
        members.setdefault(g, []).append(i)
        votes.setdefault(g, Counter())[lab] += 1
    unit_labels = []
    for g, c in votes.items():
        if len(c) > 1:
            logger.warning("group %r mixes labels %s; using the most common", g, dict(c))
        unit_labels.append(min(c, key=lambda lab: (-c[lab], lab)))
    return list(members.values()), unit_labels


def _stratified_order(perm: np.ndarray, unit_labels: list[int]) -> list[int]:
    """Shuffled units grouped by class, class blocks in ascending label order."""
    return sorted(perm.tolist(), key=lambda u: unit_labels[u])


def kfold_split(
    ids: Sequence,
    labels: Sequence[int],
    k: int = 5,
    seed: int = 0,
    stratified: bool = True,
    groups: Sequence[Hashable] | None = None,
) -> FoldSplit:
    """Partition ``ids`` into ``k`` folds.

    Units are shuffled, ordered by class when stratified, then dealt to folds
    round-robin, so fold sizes differ by at most one unit and every class is
    spread within one unit of proportional. With ``groups``, all ids of one
    group stay together.
    """
    if k < 2:
        raise ValueError("k must be >= 2")
    units, unit_labels = _units(ids, labels, groups)
    if not units:
        raise ValueError("ids must be nonempty")
    if k > len(units):
        raise ValueError(f"k={k} exceeds the number of {'groups' if groups is not None else 'ids'} ({len(units)})")
    perm = np.random.default_rng(seed).permutation(len(units))
    if stratified:
        small = {c: n for c, n in Counter(unit_labels).items() if n < k}
        if small:
            logger.warning("classes %s have fewer than k=%d units; stratification is best-effort", small, k)
        order = _stratified_order(perm, unit_labels)
    else:
        order = perm.tolist()
    folds: list[list] = [[] for _ in range(k)]
    for pos, u in enumerate(order):
        folds[pos % k].extend(units[u])
    index = {x: i for i, x in enumerate(ids)}
    return FoldSplit([sorted(f, key=index.__getitem__) for f in folds], grouped=groups is not None)


def _count(ratio: float, n: int) -> int:
    # decimal-exact so that e.g. 0.29 * 100 gives 29, not 28
    return math.floor(Fraction(repr(float(ratio))) * n)


def holdout_split(
    ids: Sequence,
    labels: Sequence[int],
    ratios: tuple[float, float, float] = (0.8, 0.0, 0.2),
    seed: int = 0,
    stratified: bool = True,
    groups: Sequence[Hashable] | None = None,
) -> tuple[list, list, list]:
    """(train, val, test) with val/test sized ``floor(ratio * n)`` and the rest in train.

    ``n`` counts units (groups when given). Stratified splits interleave the
    classes so that every prefix of the ordering is near-proportional.
    """
    if len(ratios) != 3 or any(r < 0 for r in ratios) or not math.isclose(sum(ratios), 1.0, abs_tol=1e-9):
        raise ValueError(f"ratios must be three nonnegative numbers summing to 1, got {ratios}")
    units, unit_labels = _units(ids, labels, groups)
    n = len(units)
    if n == 0:
        raise ValueError("ids must be nonempty")
    n_val, n_test = _count(ratios[1], n), _count(ratios[2], n)
    if ratios[2] > 0 and n_test == 0:
        raise ValueError(f"test ratio {ratios[2]} leaves an empty test set for n={n}")
    if ratios[1] > 0 and n_val == 0:
        raise ValueError(f"validation ratio {ratios[1]} leaves an empty validation set for n={n}")
    perm = np.random.default_rng(seed).permutation(n)
    if stratified:
        by_class: dict[int, list[int]] = {}
        for u in perm.tolist():
            by_class.setdefault(unit_labels[u], []).append(u)
        keyed = [((j + 0.5) / len(members), c, u) for c, members in by_class.items() for j, u in enumerate(members)]
        order = [u for _, _, u in sorted(keyed)]
    else:
        order = perm.tolist()
    index = {x: i for i, x in enumerate(ids)}

    def expand(us):
        return sorted((x for u in us for x in units[u]), key=index.__getitem__)

    test = expand(order[:n_test])
    val = expand(order[n_test : n_test + n_val])
    train = expand(order[n_test + n_val :])
    return train, val, test
