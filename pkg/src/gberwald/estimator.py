"""Estimator-style wrapper around the grid classification pipeline."""

from __future__ import annotations

import numpy as np
from sklearn.base import BaseEstimator
from sklearn.utils.validation import check_array, check_is_fitted

from .averaging import unit_sphere_quadrature
from .tester import PoolSizes, decide
from .torsion import Tolerances


class GeneralizedBerwaldTester(BaseEstimator):
    """Classify the tangent spaces of a Finsler metric over sample points.

    fit(X) treats the rows of X as chart base points, solves the extremal
    compatible torsion at each, and stores the classification report;
    predict(X) returns the per-point verdict labels and transform(X) the
    solved torsion fields (chart components), both from fresh solves with
    the fitted configuration.

    Parameters mirror the pipeline: ``family`` is the metric under test,
    the ``tol_*`` values feed the solver thresholds, the ``n_*`` values the
    direction pool sizes, and ``quad_nodes`` the sphere quadrature
    resolution (None picks the dimension default).
    """

    def __init__(
        self,
        family=None,
        *,
        quad_nodes=None,
        tol_contact: float = 1e-9,
        tol_residual: float = 1e-7,
        tol_trigger: float = 1e-3,
        tol_agree: float = 1e-6,
        n_equispaced: int = 720,
        n_random: int = 64,
        n_validation: int = 64,
        seed: int = 0,
        method: str = "auto",
        scale: float = 1.0,
        n_jobs: int = 1,
    ):
        self.family = family
        self.quad_nodes = quad_nodes
        self.tol_contact = tol_contact
        self.tol_residual = tol_residual
        self.tol_trigger = tol_trigger
        self.tol_agree = tol_agree
        self.n_equispaced = n_equispaced
        self.n_random = n_random
        self.n_validation = n_validation
        self.seed = seed
        self.method = method
        self.scale = scale
        self.n_jobs = n_jobs

    def _decide(self, X):
        if self.family is None:
            raise ValueError("family must be set before fitting")
        X = check_array(X, dtype=float, ensure_min_samples=1)
        if X.shape[1] != self.family.dim:
            raise ValueError(
                f"X has {X.shape[1]} columns, the family lives in dimension {self.family.dim}"
            )
        tols = Tolerances(
            contact=self.tol_contact,
            residual=self.tol_residual,
            trigger=self.tol_trigger,
            agree=self.tol_agree,
        )
        sizes = PoolSizes(self.n_equispaced, self.n_random, self.n_validation)
        quad = unit_sphere_quadrature(self.family.dim, self.quad_nodes)
        return decide(
            self.family,
            X,
            quad=quad,
            tols=tols,
            seed=self.seed,
            sizes=sizes,
            method=self.method,
            scale=self.scale,
            n_jobs=self.n_jobs,
        )

    def fit(self, X, y=None):
        report = self._decide(X)
        self.report_ = report
        self.global_verdict_ = report.global_verdict
        self.verdicts_ = np.array([v.verdict for v in report.verdicts], dtype=object)
        self.routes_ = np.array([v.route for v in report.verdicts], dtype=object)
        self.torsions_ = np.stack([v.torsion_chart.comps for v in report.verdicts])
        self.residuals_ = np.array([v.residual_max for v in report.verdicts])
        self.n_features_in_ = report.points.shape[1]
        return self

    def predict(self, X):
        """Per-point verdict labels at the given base points."""
        check_is_fitted(self, "report_")
        report = self._decide(X)
        return np.array([v.verdict for v in report.verdicts], dtype=object)

    def transform(self, X):
        """Extremal torsion fields (chart components) at the given points."""
        check_is_fitted(self, "report_")
        report = self._decide(X)
        return np.stack([v.torsion_chart.comps for v in report.verdicts])

    def fit_predict(self, X, y=None):
        self.fit(X)
        return self.verdicts_.copy()

    def fit_transform(self, X, y=None):
        self.fit(X)
        return self.torsions_.copy()
