"""Deterministic systems with declared partitions.

Each :class:`Block` carries a partition of its input space into pieces, and
for every piece the dimension of the manifold the piece is mapped onto.  That
metadata is what the closed-form loss needs; :func:`validate_block` checks it
against the map numerically.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from .dist import (
    DYADIC_CAP,
    DiscreteFinite,
    DistributionSpec,
    SampleBatch,
    derive_seed,
    probability_mass,
    sample,
)
from .loss import LossValue, Status
from .pca import sample_pca_loss, sample_pca_output_dim, sample_pca_stack

RANK_TOL = 1e-10
FD_STEP = 1e-6
JAC_RTOL = 1e-6
DEFAULT_MC_SAMPLES = 10**6

Interval = tuple[float, float]


@dataclass(frozen=True)
class PartitionPiece:
    label: str
    out_dim: int
    membership: Callable[[np.ndarray], np.ndarray]
    box: tuple[Interval, ...] | None = None


@dataclass(frozen=True)
class Block:
    name: str
    in_dim: int
    out_dim_ambient: int
    map: Callable[[np.ndarray], np.ndarray]
    partition: tuple[PartitionPiece, ...]
    status: Status = Status.PROVED
    refine: Callable[[np.ndarray], np.ndarray] | None = None
    domain: Callable[[np.ndarray], np.ndarray] | None = None

    def __post_init__(self):
        for piece in self.partition:
            if not 0 <= piece.out_dim <= self.in_dim:
                raise ValueError(f"piece {piece.label!r}: out_dim {piece.out_dim} exceeds input dimension")

    def apply(self, batch: SampleBatch) -> SampleBatch:
        return apply(self, batch)

    def piece_labels(self, values: np.ndarray) -> np.ndarray:
        """Index of the (first) piece each column belongs to, -1 if none."""
        labels = np.full(values.shape[1], -1)
        for i, piece in reversed(list(enumerate(self.partition))):
            labels[piece.membership(values)] = i
        return labels

    def estimation_labels(self, batch: SampleBatch) -> np.ndarray:
        """Cells used by piecewise estimation: the refinement if the block
        declares one, else the partition itself."""
        if self.refine is not None:
            return self.refine(batch.values)
        return self.piece_labels(batch.values)


def _values(batch) -> np.ndarray:
    return batch.values if isinstance(batch, SampleBatch) else np.atleast_2d(np.asarray(batch, dtype=float))


def apply(block: Block, batch) -> SampleBatch:
    """Apply the block column-wise."""
    X = _values(batch)
    if X.shape[0] != block.in_dim:
        raise ValueError(f"{block.name} expects {block.in_dim}-dimensional input, got {X.shape[0]}")
    if block.domain is not None and not np.all(block.domain(X)):
        raise ValueError(f"input outside the domain of {block.name}")
    return SampleBatch(np.atleast_2d(block.map(X)))


def _everywhere(X: np.ndarray) -> np.ndarray:
    return np.ones(X.shape[1], dtype=bool)


# --------------------------------------------------------------------------
# constructors
# --------------------------------------------------------------------------

def make_linear(matrix, name: str | None = None) -> Block:
    """``y = A x`` for a full-row-rank ``M x N`` matrix."""
    A = np.atleast_2d(np.asarray(matrix, dtype=float))
    M, N = A.shape
    sv = np.linalg.svd(A, compute_uv=False)
    if M > N or sv.size < M or sv.min() <= RANK_TOL:
        raise ValueError("matrix must have full row rank; compose a projection with an invertible map instead")
    piece = PartitionPiece("linear", M, _everywhere, tuple((-math.inf, math.inf) for _ in range(N)))
    return Block(name or f"linear{M}x{N}", N, M, lambda X: A @ X, (piece,))


def make_adder() -> Block:
    return make_linear([[1.0, 1.0]], name="adder")


def make_projection(M: int, N: int) -> Block:
    """Keep the first ``M`` of ``N`` coordinates."""
    if not 1 <= M <= N:
        raise ValueError(f"need 1 <= M <= N, got M={M}, N={N}")
    return make_linear(np.eye(M, N), name=f"project:{M}")


def make_center_clipper(c: float) -> Block:
    """``x`` if ``|x| > c``, else 0.  The dead zone is the closed ``[-c, c]``."""
    c = float(c)
    if not c > 0:
        raise ValueError("clipping level must be positive")
    inf = math.inf
    pieces = (
        PartitionPiece("left-identity", 1, lambda X: X[0] < -c, ((-inf, -c),)),
        PartitionPiece("dead-zone", 0, lambda X: np.abs(X[0]) <= c, ((-c, c),)),
        PartitionPiece("right-identity", 1, lambda X: X[0] > c, ((c, inf),)),
    )
    return Block(f"clipper:{c:g}", 1, 1, lambda X: np.where(np.abs(X) > c, X, 0.0), pieces)


def dyadic_branch(x: np.ndarray) -> np.ndarray:
    """Branch ``n`` with ``x`` in ``(2^-n, 2^-n+1]``."""
    m, e = np.frexp(x)
    return np.where(m == 0.5, 2 - e, 1 - e)


def make_dyadic_folder() -> Block:
    """Folds every ``(2^-n, 2^-n+1]`` onto ``(0, 1]`` by ``2^n (x - 2^-n)``."""

    def fold(X):
        n = dyadic_branch(X)
        return np.ldexp(X, n) - 1.0

    def branches(X):
        return np.minimum(dyadic_branch(X[0]), DYADIC_CAP)

    piece = PartitionPiece("branches", 1, _everywhere, ((0.0, 1.0),))
    return Block(
        "dyadic-folder", 1, 1, fold, (piece,),
        refine=branches,
        domain=lambda X: (X[0] > 0) & (X[0] <= 1),
    )


def make_pca_sample(N: int = 2, n: int = 2) -> Block:
    """Sample-covariance PCA of an ``N x n`` data matrix, flattened column by column."""
    if N < 1 or n < 1:
        raise ValueError("N and n must be positive")

    def rotate(X):
        stack = X.T.reshape(-1, n, N).transpose(0, 2, 1)
        Y, _, _ = sample_pca_stack(stack)
        return Y.transpose(0, 2, 1).reshape(-1, n * N).T

    piece = PartitionPiece("rotated-data", sample_pca_output_dim(N, n), _everywhere,
                           tuple((-math.inf, math.inf) for _ in range(n * N)))
    return Block(f"pca-sample:{N},{n}", n * N, n * N, rotate, (piece,), status=sample_pca_loss(N, n).status)


def read_matrix_csv(path) -> np.ndarray:
    return np.atleast_2d(np.loadtxt(path, delimiter=",", dtype=float))


def make_block(name: str, in_dim: int | None = None) -> Block:
    """Catalogue lookup: ``adder``, ``clipper:<c>``, ``project:<M>``,
    ``linear:<csv>``, ``dyadic-folder``, ``pca-sample[:<N>,<n>]``."""
    head, _, arg = name.partition(":")
    if head == "adder":
        return make_adder()
    if head == "clipper":
        return make_center_clipper(float(arg))
    if head == "project":
        if in_dim is None:
            raise ValueError("project:<M> needs the input dimension")
        return make_projection(int(arg), in_dim)
    if head == "linear":
        return make_linear(read_matrix_csv(arg), name=name)
    if head == "dyadic-folder":
        return make_dyadic_folder()
    if head == "pca-sample":
        if arg:
            N, n = (int(v) for v in arg.split(","))
            return make_pca_sample(N, n)
        return make_pca_sample()
    raise ValueError(f"unknown block {name!r}")


# --------------------------------------------------------------------------
# closed-form loss
# --------------------------------------------------------------------------

@dataclass
class PieceProbability:
    label: str
    out_dim: int
    probability: float
    mode: str
    stderr: float = 0.0


def piece_probabilities(
    block: Block,
    spec: DistributionSpec,
    mode: str = "analytic",
    samples: int = DEFAULT_MC_SAMPLES,
    seed: int = 0,
) -> list[PieceProbability]:
    """Probability of every partition piece.

    ``analytic`` uses box masses where the pieces are boxes and the spec
    supports it, and falls back to Monte Carlo otherwise.  ``monte_carlo``
    always counts membership in ``samples`` draws.
    """
    if mode not in ("analytic", "monte_carlo"):
        raise ValueError(f"unknown piece probability mode {mode!r}")
    pieces = block.partition
    if mode == "analytic":
        if len(pieces) == 1:
            return [PieceProbability(pieces[0].label, pieces[0].out_dim, 1.0, "trivial")]
        try:
            if all(p.box is not None for p in pieces):
                return [PieceProbability(p.label, p.out_dim, probability_mass(spec, p.box), "analytic")
                        for p in pieces]
        except ValueError:
            pass
    batch = sample(spec, samples, derive_seed(seed, 1))
    labels = block.piece_labels(batch.values)
    if np.any(labels < 0):
        raise ValueError(f"{np.count_nonzero(labels < 0)} samples fall outside every piece of {block.name}")
    out = []
    for i, p in enumerate(pieces):
        prob = float(np.mean(labels == i))
        out.append(PieceProbability(p.label, p.out_dim, prob, "monte_carlo",
                                    math.sqrt(prob * (1 - prob) / samples)))
    return out


def analytic_relative_loss_detail(
    block: Block,
    spec: DistributionSpec,
    piece_prob_mode: str = "analytic",
    samples: int = DEFAULT_MC_SAMPLES,
    seed: int = 0,
) -> tuple[LossValue, list[PieceProbability]]:
    """Closed-form loss ``sum_i P(X_i) (N - n_i) / N`` and the piece probabilities used."""
    if isinstance(spec, DiscreteFinite):
        raise ValueError("closed-form loss needs an absolutely continuous input; use discrete_relative_loss")
    if spec.dims != block.in_dim:
        raise ValueError(f"{block.name} expects {block.in_dim}-dimensional input, spec has {spec.dims}")
    probs = piece_probabilities(block, spec, piece_prob_mode, samples, seed)
    N = block.in_dim
    weights = [(N - p.out_dim) / N for p in probs]
    value = math.fsum(w * p.probability for w, p in zip(weights, probs))
    if any(p.mode == "monte_carlo" for p in probs):
        mean_sq = math.fsum(w * w * p.probability for w, p in zip(weights, probs))
        stderr = math.sqrt(max(mean_sq - value**2, 0.0) / samples)
        return LossValue(value, Status.ESTIMATED, stderr), probs
    return LossValue(value, block.status), probs


def analytic_relative_loss(block: Block, spec: DistributionSpec, piece_prob_mode: str = "analytic",
                           samples: int = DEFAULT_MC_SAMPLES, seed: int = 0) -> LossValue:
    return analytic_relative_loss_detail(block, spec, piece_prob_mode, samples, seed)[0]


# --------------------------------------------------------------------------
# validation
# --------------------------------------------------------------------------

def jacobian_rank(block: Block, x: np.ndarray, step: float = FD_STEP) -> int:
    """Numerical rank of the central-difference Jacobian at ``x``."""
    x = np.asarray(x, dtype=float)
    E = np.eye(x.size) * step
    plus = block.map(x[:, None] + E)
    minus = block.map(x[:, None] - E)
    J = (np.atleast_2d(plus) - np.atleast_2d(minus)) / (2 * step)
    sv = np.linalg.svd(J, compute_uv=False)
    if sv.size == 0 or sv[0] == 0:
        return 0
    return int(np.count_nonzero(sv > JAC_RTOL * sv[0]))


@dataclass
class BlockValidation:
    covered: bool
    overlaps: int
    uncovered: int
    ranks: dict[str, list[int]] = field(default_factory=dict)
    expected: dict[str, int] = field(default_factory=dict)

    @property
    def ok(self) -> bool:
        return self.covered and all(
            r == self.expected[label] for label, found in self.ranks.items() for r in found
        )


def validate_block(block: Block, batch: SampleBatch, points_per_piece: int = 10,
                   step: float = FD_STEP) -> BlockValidation:
    """Check that the pieces tile the sampled support and that the
    Jacobian rank on each piece equals its declared output dimension."""
    X = batch.values
    hits = np.zeros(X.shape[1], dtype=int)
    for piece in block.partition:
        hits += piece.membership(X).astype(int)
    overlaps = int(np.count_nonzero(hits > 1))
    uncovered = int(np.count_nonzero(hits == 0))

    ranks: dict[str, list[int]] = {}
    offsets = np.eye(X.shape[0]) * step
    for piece in block.partition:
        inside = piece.membership(X)
        # keep points whose whole stencil stays inside the piece
        for sgn in (1, -1):
            for j in range(X.shape[0]):
                inside &= piece.membership(X + sgn * offsets[:, [j]])
        cols = np.flatnonzero(inside)[:points_per_piece]
        ranks[piece.label] = [jacobian_rank(block, X[:, k], step) for k in cols]
    expected = {piece.label: piece.out_dim for piece in block.partition}
    return BlockValidation(uncovered == 0 and overlaps == 0, overlaps, uncovered, ranks, expected)
