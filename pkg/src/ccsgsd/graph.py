"""Graphical weighting of elementary hypotheses."""

from dataclasses import dataclass
from typing import Tuple

import numpy as np

from .exceptions import InputError

__all__ = ["MultiplicityGraph", "MAX_HYPOTHESES"]

MAX_HYPOTHESES = 12
_EPS = 1e-12


@dataclass(frozen=True, eq=False)
class MultiplicityGraph:
    """Initial weights and transition matrix over labelled hypotheses.

    Labels default to ``0 .. m-1``. Instances are immutable; updates return
    new graphs.
    """

    weights: np.ndarray
    transitions: np.ndarray
    labels: Tuple[int, ...] = None
    max_hypotheses: int = MAX_HYPOTHESES

    def __post_init__(self):
        w = np.array(self.weights, dtype=float, copy=True).ravel()
        g = np.array(self.transitions, dtype=float, copy=True)
        m = w.size
        if m == 0:
            g = g.reshape(0, 0)
        if g.shape != (m, m):
            raise InputError(f"transition matrix must be {m}x{m}, got {g.shape}")
        if m > self.max_hypotheses:
            raise InputError(f"{m} hypotheses exceeds the configured maximum {self.max_hypotheses}")
        if np.any(~np.isfinite(w)) or np.any(w < 0) or w.sum() > 1 + _EPS:
            raise InputError(f"weights must be nonnegative and sum to at most 1, got {list(w)}")
        if np.any(~np.isfinite(g)) or np.any(g < 0):
            raise InputError("transition weights must be nonnegative")
        if m and np.any(np.abs(np.diag(g)) > 0):
            raise InputError("transition matrix must have a zero diagonal")
        if m and np.any(g.sum(axis=1) > 1 + _EPS):
            raise InputError("each transition row must sum to at most 1")
        labels = tuple(range(m)) if self.labels is None else tuple(int(x) for x in self.labels)
        if len(labels) != m or len(set(labels)) != m:
            raise InputError("labels must be unique, one per hypothesis")
        w.setflags(write=False)
        g.setflags(write=False)
        object.__setattr__(self, "weights", w)
        object.__setattr__(self, "transitions", g)
        object.__setattr__(self, "labels", labels)

    @classmethod
    def equal(cls, m):
        """Equal weights with equal transfer to every other hypothesis."""
        g = np.full((m, m), 1.0 / (m - 1)) if m > 1 else np.zeros((1, 1))
        np.fill_diagonal(g, 0.0)
        return cls(np.full(m, 1.0 / m), g)

    def __len__(self):
        return len(self.labels)

    @property
    def is_empty(self):
        return len(self.labels) == 0

    def weight_of(self, label):
        return float(self.weights[self.labels.index(label)])

    def as_dict(self):
        return dict(zip(self.labels, self.weights.tolist()))

    def remove_rejected(self, label):
        """Remove ``label`` and pass its weight along its outgoing edges."""
        if label not in self.labels:
            raise InputError(f"hypothesis {label!r} is not in the graph")
        j = self.labels.index(label)
        w, g = self.weights, self.transitions
        keep = [i for i in range(len(w)) if i != j]
        new_w = w[keep] + w[j] * g[j, keep]
        new_g = np.zeros((len(keep), len(keep)))
        for a, i in enumerate(keep):
            for b, k in enumerate(keep):
                if i == k:
                    continue
                denom = 1.0 - g[i, j] * g[j, i]
                if denom > _EPS:
                    new_g[a, b] = (g[i, k] + g[i, j] * g[j, k]) / denom
        # guard rounding so rows stay valid
        new_w = np.clip(new_w, 0.0, None)
        if new_w.sum() > 1:
            new_w = new_w / new_w.sum()
        rows = new_g.sum(axis=1, keepdims=True)
        new_g = np.where(rows > 1, new_g / np.where(rows > 0, rows, 1), new_g)
        return MultiplicityGraph(new_w, new_g, tuple(self.labels[i] for i in keep), self.max_hypotheses)

    def subset_weights(self, subset):
        """Weights ``w_i(J)`` for the intersection hypothesis over ``subset``.

        Obtained by removing every hypothesis outside ``subset`` in turn; the
        result does not depend on the removal order.
        """
        J = tuple(subset)
        if not J:
            raise InputError("subset must be nonempty")
        unknown = set(J) - set(self.labels)
        if unknown:
            raise InputError(f"hypotheses {sorted(unknown)} are not in the graph")
        graph = self
        for label in self.labels:
            if label not in J:
                graph = graph.remove_rejected(label)
        return {label: graph.weight_of(label) for label in J}
