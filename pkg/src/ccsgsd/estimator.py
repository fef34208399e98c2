"""Estimator-style wrapper around planning, updating and closed testing."""

import numpy as np
from sklearn.base import BaseEstimator
from sklearn.utils.validation import check_is_fitted

from .closed_test import AnalysisData, closed_test_batch, plan, update
from .correlation import InformationTable
from .gs import bounds_from_spending
from .graph import MultiplicityGraph
from .spending import SpendingSpec
from .validation import check_prevalence, check_probability, check_square, check_statistics

__all__ = ["CCSGroupSequentialDesign"]


class CCSGroupSequentialDesign(BaseEstimator):
    """Closed-test group sequential design over nested populations.

    ``fit`` plans the intersection bounds, ``partial_fit`` finalizes the
    next analysis with observed information and ``predict`` runs the closed
    test on statistics, returning one boolean per population.

    Parameters
    ----------
    prevalence : sequence of float
        Subgroup prevalences, smallest first; the overall population (1.0)
        is appended if missing.
    timings : sequence of float
        Planned information fractions, ending at 1.
    weights, transitions : array_like, optional
        Graph over populations. Default: equal weights, full mutual transfer.
    alpha : float
        One-sided family-wise level.
    spending : str
        Spending family for every population.
    spending_parameter : float, optional
        Family parameter (HSD gamma or Kim-DeMets rho).
    algorithm : {1, 2, 3}
        Re-planning rule used by ``partial_fit``.
    n_jobs : int, optional
        Threads used to solve subsets.

    Examples
    --------
    >>> est = CCSGroupSequentialDesign(prevalence=[0.6], timings=[0.5, 1.0]).fit()
    >>> est.predict(np.full((2, 2), 5.0)).tolist()
    [[True, True]]
    """

    def __init__(self, prevalence=(0.6,), timings=(0.5, 0.75, 1.0), weights=None, transitions=None,
                 alpha=0.025, spending="ldof", spending_parameter=None, algorithm=1, n_jobs=None):
        self.prevalence = prevalence
        self.timings = timings
        self.weights = weights
        self.transitions = transitions
        self.alpha = alpha
        self.spending = spending
        self.spending_parameter = spending_parameter
        self.algorithm = algorithm
        self.n_jobs = n_jobs

    def _graph(self, m):
        w = np.full(m, 1.0 / m) if self.weights is None else np.asarray(self.weights, dtype=float)
        if self.transitions is None:
            g = MultiplicityGraph.equal(m).transitions
        else:
            g = check_square(self.transitions, m, "transitions")
        return MultiplicityGraph(w, g)

    def fit(self, X=None, y=None):
        """Plan the bounds.

        ``X`` may give planned information (populations x analyses); by
        default it is ``prevalence x timings``. ``y`` is ignored.
        """
        alpha = check_probability(self.alpha, "alpha", 0.0, 0.5)
        p = check_prevalence(self.prevalence)
        info = InformationTable.planned(p, self.timings) if X is None else InformationTable(X)
        m = info.n_populations
        spec = SpendingSpec(self.spending, alpha, self.spending_parameter)
        graph = self._graph(m)
        self.table_ = plan(info, graph, spec, alpha, algorithm=self.algorithm, n_jobs=self.n_jobs)
        w = graph.subset_weights(tuple(range(m)))
        t = info.fractions
        self.bonferroni_bounds_ = np.array([
            bounds_from_spending(t[i], spec.with_level(w[i] * alpha)).bounds if w[i] > 0
            else np.full(info.n_analyses, np.inf)
            for i in range(m)
        ])
        self.bounds_ = np.array(self.table_.full().bounds)
        self.nominal_alpha_ = np.array(self.table_.nominal_levels())
        self.n_populations_ = m
        self.n_analyses_ = info.n_analyses
        return self

    def partial_fit(self, data, y=None):
        """Finalize the next analysis; ``data`` is an ``AnalysisData`` or its fields as a dict."""
        check_is_fitted(self, "table_")
        if isinstance(data, dict):
            data = AnalysisData(**data)
        self.table_ = update(self.table_, data, algorithm=self.algorithm, n_jobs=self.n_jobs)
        self.bounds_ = np.array(self.table_.full().bounds)
        self.nominal_alpha_ = np.array(self.table_.nominal_levels())
        return self

    def predict(self, X, through=None):
        """Closed-test rejections, shape ``(n, populations)``."""
        check_is_fitted(self, "table_")
        z = check_statistics(X, self.n_populations_, self.n_analyses_)
        return closed_test_batch(self.table_, z, through=through)
