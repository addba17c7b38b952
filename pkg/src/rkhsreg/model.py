"""Estimator-style front end for the kernel ridge regressor.

KernelRidge follows the scikit-learn parameter protocol (get_params,
set_params, fit, predict, score) without depending on scikit-learn, so
it drops into pipelines and model-selection loops that only rely on
that protocol.
"""

from __future__ import annotations

import numpy as np
from numpy.typing import NDArray

from .estimator import Dataset, KernelExpansion, evaluate_batch, fit_ridge, gp_posterior_band
from .kernels import KernelSpec


class KernelRidge:
    """Kernel ridge regression with RKHS-norm regularization.

    Minimizes (1/n) sum_i (y_i - f(x_i))^2 + alpha * ||f||_k^2 over the
    RKHS of the chosen kernel. Note alpha multiplies the squared RKHS
    norm of the penalized mean risk, which matches a Gaussian-process
    posterior with noise variance n * alpha.

    Attributes set by fit:
        expansion_: The fitted KernelExpansion.
        n_features_in_: Input dimension seen during fit.
    """

    def __init__(self, family: str = "gaussian", bandwidth: float = 1.0, alpha: float = 0.1):
        self.family = family
        self.bandwidth = bandwidth
        self.alpha = alpha

    def get_params(self, deep: bool = True) -> dict:
        return {"family": self.family, "bandwidth": self.bandwidth, "alpha": self.alpha}

    def set_params(self, **params) -> "KernelRidge":
        for key, value in params.items():
            if key not in ("family", "bandwidth", "alpha"):
                raise ValueError(f"invalid parameter {key!r} for KernelRidge")
            setattr(self, key, value)
        return self

    def _as_2d(self, X: object) -> NDArray[np.float64]:
        arr = np.asarray(X, dtype=np.float64)
        return arr.reshape(-1, 1) if arr.ndim == 1 else arr

    def fit(self, X: object, y: object) -> "KernelRidge":
        """Fits the regressor; returns self."""
        X = self._as_2d(X)
        if self.alpha < 0:
            raise ValueError("alpha must be nonnegative")
        kernel = KernelSpec(self.family, self.bandwidth, X.shape[1])
        data = Dataset(X, np.asarray(y, dtype=np.float64))
        self.expansion_: KernelExpansion = fit_ridge(kernel, data, self.alpha)
        self._data = data
        self.n_features_in_ = X.shape[1]
        return self

    def predict(
        self, X: object, return_std: bool = False
    ) -> NDArray[np.float64] | tuple[NDArray[np.float64], NDArray[np.float64]]:
        """Predicts at X; optionally returns the posterior standard deviation."""
        if not hasattr(self, "expansion_"):
            raise RuntimeError("this KernelRidge instance is not fitted yet")
        X = self._as_2d(X)
        preds = evaluate_batch(self.expansion_, X)
        if not return_std:
            return preds
        lam_gp = self._data.n * self.alpha
        if lam_gp <= 0:
            # Interpolation limit: no noise, zero posterior width.
            return preds, np.zeros(X.shape[0])
        _, var = gp_posterior_band(self.expansion_.kernel, self._data, lam_gp, X)
        return preds, np.sqrt(var)

    def score(self, X: object, y: object) -> float:
        """Coefficient of determination R^2."""
        y = np.asarray(y, dtype=np.float64).reshape(-1)
        preds = self.predict(X)
        ss_res = float(np.sum((y - preds) ** 2))
        ss_tot = float(np.sum((y - np.mean(y)) ** 2))
        return 1.0 - ss_res / ss_tot if ss_tot > 0 else 0.0
