"""Relative information loss of deterministic systems."""

__version__ = "0.1.0"

from .dist import (  # noqa: E402
    DiscreteFinite,
    DyadicTail,
    GaussianVec,
    SampleBatch,
    UniformBox,
    probability_mass,
    sample,
)
from .quant import DimensionEstimate, estimate_dimension  # noqa: E402
from .loss import (  # noqa: E402
    LossValue,
    Status,
    cascade_compose,
    loss_from_dims,
    loss_from_output_dim,
)
from .blocks import Block, analytic_relative_loss, make_block  # noqa: E402
from .pca import PcaModel, sample_pca, sample_pca_loss  # noqa: E402
from .estimators import (  # noqa: E402
    BlockTransformer,
    InformationDimension,
    PopulationPCA,
    RelativeLossEstimator,
    SamplePCA,
)
