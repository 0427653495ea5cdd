"""scikit-learn style wrappers.

These follow the usual convention of samples as rows, ``X.shape ==
(n_samples, n_features)``; the functional API elsewhere in the package works
on :class:`~infoloss.dist.SampleBatch` objects whose columns are samples.
"""

from __future__ import annotations

import numpy as np
from sklearn.base import BaseEstimator, TransformerMixin
from sklearn.utils.validation import check_array, check_is_fitted

from . import blocks as _blocks
from . import pca as _pca
from .dist import SampleBatch
from .loss import estimate_relative_loss
from .quant import estimate_dimension


def _batch(X, ensure_min_samples=1) -> SampleBatch:
    X = check_array(X, ensure_2d=False, ensure_min_samples=ensure_min_samples)
    if X.ndim == 1:
        X = X[:, None]
    return SampleBatch.from_samples(X)


class InformationDimension(BaseEstimator):
    """Quantized-entropy estimate of the information dimension of ``X``.

    Attributes after ``fit``: ``dimension_``, ``stderr_``, ``estimate_``
    (the full :class:`~infoloss.quant.DimensionEstimate`) and
    ``undersampled_``.
    """

    def __init__(self, resolutions="auto", correction="miller_madow"):
        self.resolutions = resolutions
        self.correction = correction

    def fit(self, X, y=None):
        batch = _batch(X)
        est = estimate_dimension(batch, self.resolutions, self.correction)
        self.estimate_ = est
        self.dimension_ = est.value
        self.stderr_ = est.slope_stderr
        self.undersampled_ = est.undersampled
        self.n_features_in_ = batch.dims
        return self


class BlockTransformer(TransformerMixin, BaseEstimator):
    """Apply a deterministic block (or catalogue name) as a transformer."""

    def __init__(self, block="adder"):
        self.block = block

    def _resolve(self, n_features):
        if isinstance(self.block, _blocks.Block):
            return self.block
        return _blocks.make_block(self.block, n_features)

    def fit(self, X, y=None):
        batch = _batch(X)
        self.block_ = self._resolve(batch.dims)
        if self.block_.in_dim != batch.dims:
            raise ValueError(f"{self.block_.name} expects {self.block_.in_dim} features, got {batch.dims}")
        self.n_features_in_ = batch.dims
        return self

    def transform(self, X):
        check_is_fitted(self, "block_")
        return self.block_.apply(_batch(X)).samples


class RelativeLossEstimator(BaseEstimator):
    """Fit on input samples; ``loss_`` is the estimated relative loss of ``block``."""

    def __init__(self, block="adder", method="global", resolutions="auto", correction="miller_madow"):
        self.block = block
        self.method = method
        self.resolutions = resolutions
        self.correction = correction

    def fit(self, X, y=None):
        batch = _batch(X)
        block = self.block if isinstance(self.block, _blocks.Block) else _blocks.make_block(self.block, batch.dims)
        result = estimate_relative_loss(block, batch, self.method, self.resolutions, self.correction)
        self.block_ = block
        self.result_ = result
        self.loss_ = result.loss.value
        self.stderr_ = result.loss.stderr
        self.n_features_in_ = batch.dims
        return self

    def score(self, X, y=None):
        """Negative distance between the estimated and the closed-form loss,
        the latter computed from the block's declared partition with Monte
        Carlo piece probabilities on ``X``."""
        check_is_fitted(self, "loss_")
        batch = _batch(X)
        labels = self.block_.piece_labels(batch.values)
        N = self.block_.in_dim
        lost = np.array([(N - p.out_dim) / N for p in self.block_.partition])
        return -abs(self.loss_ - float(np.mean(lost[labels])))


class PopulationPCA(TransformerMixin, BaseEstimator):
    """PCA with a known covariance matrix; keeps ``n_components`` coordinates."""

    def __init__(self, covariance=None, n_components=None):
        self.covariance = covariance
        self.n_components = n_components

    def fit(self, X=None, y=None):
        cov = np.asarray(self.covariance, dtype=float)
        self.model_ = _pca.population_pca(cov)
        N = self.model_.dims
        self.n_components_ = N if self.n_components is None else int(self.n_components)
        self.components_ = self.model_.rotation[:, : self.n_components_].T
        self.explained_variance_ = self.model_.eigenvalues[: self.n_components_]
        self.loss_ = _pca.truncation_loss(N, self.n_components_)
        self.n_features_in_ = N
        return self

    def transform(self, X):
        check_is_fitted(self, "model_")
        Y = _pca.pca_transform(self.model_, _batch(X))
        return _pca.truncate(Y, self.n_components_).samples

    def inverse_transform(self, Y):
        check_is_fitted(self, "model_")
        return _pca.reconstruct(self.model_, _batch(Y)).samples


class SamplePCA(TransformerMixin, BaseEstimator):
    """PCA whose rotation is estimated from the data it is fitted on.

    The covariance is ``X^T X / n_samples`` (no centering unless ``center``).
    """

    def __init__(self, n_components=None, center=False):
        self.n_components = n_components
        self.center = center

    def fit(self, X, y=None):
        batch = _batch(X)
        data = batch.values
        if self.center:
            self.mean_ = data.mean(axis=1)
            data = data - self.mean_[:, None]
        else:
            self.mean_ = np.zeros(batch.dims)
        _, self.model_ = _pca.sample_pca(data)
        N, n = batch.dims, batch.count
        self.n_components_ = N if self.n_components is None else int(self.n_components)
        self.components_ = self.model_.rotation[:, : self.n_components_].T
        self.explained_variance_ = self.model_.eigenvalues[: self.n_components_]
        self.loss_ = _pca.sample_pca_loss(N, n)
        self.n_features_in_ = N
        return self

    def transform(self, X):
        check_is_fitted(self, "model_")
        batch = _batch(X)
        Y = _pca.pca_transform(self.model_, batch.values - self.mean_[:, None])
        return _pca.truncate(Y, self.n_components_).samples

    def inverse_transform(self, Y):
        check_is_fitted(self, "model_")
        return _pca.reconstruct(self.model_, _batch(Y)).samples + self.mean_
