"""Relative information loss: closed forms, cascades, transfer graphs and
sample-based estimates."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from enum import Enum
from fractions import Fraction
from typing import Callable, Hashable, Sequence

import numpy as np

from .dist import DiscreteFinite, SampleBatch, dyadic_piece_probs, dyadic_tail_mass
from .quant import DimensionEstimate, estimate_dimension

RANGE_TOL = 1e-12


class Status(str, Enum):
    PROVED = "proved"
    CONJECTURED = "conjectured"
    ESTIMATED = "estimated"

    @property
    def rank(self) -> int:
        return ["proved", "conjectured", "estimated"].index(self.value)


def weakest(*statuses: Status) -> Status:
    return max((Status(s) for s in statuses), key=lambda s: s.rank)


@dataclass(frozen=True)
class LossValue:
    value: float
    status: Status = Status.PROVED
    stderr: float | None = None

    def __post_init__(self):
        v = float(self.value)
        if not (-RANGE_TOL <= v <= 1 + RANGE_TOL):
            raise ValueError(f"relative loss must lie in [0, 1], got {v}")
        object.__setattr__(self, "value", min(1.0, max(0.0, v)))
        object.__setattr__(self, "status", Status(self.status))

    @property
    def transfer(self) -> float:
        return 1.0 - self.value

    def to_dict(self) -> dict:
        out = {"value": self.value, "status": self.status.value}
        if self.stderr is not None:
            out["stderr"] = self.stderr
        return out


# --------------------------------------------------------------------------
# dimension formulas
# --------------------------------------------------------------------------

def _as_dim(d) -> tuple[float, float | None]:
    if isinstance(d, DimensionEstimate):
        return d.value, d.slope_stderr
    return float(d), None


def loss_from_dims(d_x: float, d_x_given_y: float) -> LossValue:
    """Loss as the share of input dimension left undetermined by the output."""
    d_x, d_xy = float(d_x), float(d_x_given_y)
    if d_x <= 0:
        raise ValueError("input information dimension must be positive")
    if not 0 <= d_xy <= d_x:
        raise ValueError("conditional dimension must lie in [0, d_x]")
    return LossValue(d_xy / d_x, Status.PROVED)


def loss_from_output_dim(d_x, d_y) -> LossValue:
    """``1 - d_y / d_x``.

    Either argument may be a :class:`DimensionEstimate`; the result is then
    ``estimated`` with a first-order (delta-method) standard error.
    """
    (dx, sx), (dy, sy) = _as_dim(d_x), _as_dim(d_y)
    estimated = sx is not None or sy is not None
    if dx <= 0:
        raise ValueError("input information dimension must be positive")
    if not estimated:
        if not 0 <= dy <= dx:
            raise ValueError("output dimension must lie in [0, d_x]")
        return LossValue(1.0 - dy / dx, Status.PROVED)
    sx, sy = sx or 0.0, sy or 0.0
    stderr = math.hypot(sy / dx, dy * sx / dx**2)
    value = min(1.0, max(0.0, 1.0 - dy / dx))
    return LossValue(value, Status.ESTIMATED, stderr)


def cascade_compose(l1: LossValue, l2: LossValue, discrete: bool = False) -> LossValue:
    """Loss of two stages in series, ``l1 + l2 - l1 l2``.

    The identity is a theorem only for discrete variables; for anything else
    the result is at best ``conjectured``.
    """
    status = weakest(l1.status, l2.status)
    if not discrete:
        status = weakest(status, Status.CONJECTURED)
    value = l1.value + l2.value - l1.value * l2.value
    stderr = None
    if l1.stderr is not None or l2.stderr is not None:
        s1, s2 = l1.stderr or 0.0, l2.stderr or 0.0
        stderr = math.hypot((1 - l2.value) * s1, (1 - l1.value) * s2)
    return LossValue(value, status, stderr)


# --------------------------------------------------------------------------
# exact discrete losses
# --------------------------------------------------------------------------

def _entropy_bits(weights: dict) -> float:
    return -math.fsum(p * math.log2(p) for p in weights.values() if p > 0)


def _pushforward(points, pmf, g) -> dict:
    out: dict = {}
    for x, p in zip(points, pmf):
        z = g(x)
        out[z] = out.get(z, 0.0) + float(p)
    return out


def _discrete_entropies(pmf, g):
    support, probs = _support_probs(pmf)
    hx = _entropy_bits(_pushforward(support, probs, lambda x: x))
    hz = _entropy_bits(_pushforward(support, probs, g))
    return hx, hz, support, probs


def _support_probs(pmf):
    if isinstance(pmf, DiscreteFinite):
        pts = pmf.support
        support = [float(r[0]) if pts.shape[1] == 1 else tuple(float(v) for v in r) for r in pts]
        return support, list(pmf.pmf)
    support, probs = pmf
    return list(support), list(probs)


def discrete_relative_loss(pmf, g: Callable[[Hashable], Hashable]) -> LossValue:
    """``H(X|Z) / H(X)`` for ``Z = g(X)`` by exact enumeration.

    ``pmf`` is a :class:`~infoloss.dist.DiscreteFinite` or a
    ``(support, probabilities)`` pair with hashable support points.  Points
    of a one-dimensional ``DiscreteFinite`` reach ``g`` as floats, higher
    dimensional ones as tuples.
    """
    hx, hz, _, _ = _discrete_entropies(pmf, g)
    if hx <= 0:
        raise ValueError("input has zero entropy")
    return LossValue((hx - hz) / hx, Status.PROVED)


@dataclass(frozen=True)
class TransferCheck:
    t_xz: float
    t_xy: float
    t_yz: float
    product_gap: float


def discrete_transfer_product_check(pmf, g, h) -> TransferCheck:
    """Relative transfers along ``X -> Y = g(X) -> Z = h(Y)`` and the gap
    ``|t(X->Z) - t(X->Y) t(Y->Z)|``."""
    support, probs = _support_probs(pmf)
    hx = _entropy_bits(_pushforward(support, probs, lambda x: x))
    py = _pushforward(support, probs, g)
    hy = _entropy_bits(py)
    hz = _entropy_bits(_pushforward(support, probs, lambda x: h(g(x))))
    if hx <= 0:
        raise ValueError("input has zero entropy")
    if hy <= 0:
        raise ValueError("intermediate variable has zero entropy")
    t_xy, t_yz, t_xz = hy / hx, hz / hy, hz / hx
    return TransferCheck(t_xz, t_xy, t_yz, abs(t_xz - t_xy * t_yz))


# --------------------------------------------------------------------------
# transfer graph of sample-covariance PCA
# --------------------------------------------------------------------------

@dataclass(frozen=True)
class Edge:
    source: str
    target: str
    transfer: Fraction
    annotation: str = ""


@dataclass
class TransferGraph:
    nodes: list[str] = field(default_factory=list)
    edges: list[Edge] = field(default_factory=list)

    def add_edge(self, source: str, target: str, transfer, annotation: str = "") -> None:
        t = Fraction(transfer)
        if not 0 <= t <= 1:
            raise ValueError(f"transfer {t} outside [0, 1]")
        for node in (source, target):
            if node not in self.nodes:
                self.nodes.append(node)
        self.edges.append(Edge(source, target, t, annotation))

    def transfer(self, source: str, target: str) -> Fraction:
        for e in self.edges:
            if e.source == source and e.target == target:
                return e.transfer
        raise KeyError((source, target))

    def path_transfer(self, path: Sequence[str]) -> Fraction:
        t = Fraction(1)
        for a, b in zip(path, path[1:]):
            t *= self.transfer(a, b)
        return t

    def to_dict(self) -> dict:
        return {
            "nodes": list(self.nodes),
            "edges": [
                {"from": e.source, "to": e.target, "transfer": float(e.transfer),
                 "exact": str(e.transfer), "annotation": e.annotation}
                for e in self.edges
            ],
        }


def pca_transfer_graph(N: int, n: int) -> TransferGraph:
    """Transfers ``t(X -> .)`` from the data matrix to every PCA stage.

    All edges start at the data matrix ``X``; values are exact fractions.
    """
    if N < 2 or n < N:
        raise ValueError("transfer graph needs n >= N >= 2")
    half = Fraction(1, 2 * n)
    t_cov = (N + 1) * half
    t_eig = Fraction(1, n)
    t_rot = (N - 1) * half
    t_out = 1 - t_rot
    t_sph = (2 * n - N - 1) * half

    g = TransferGraph()
    g.add_edge("X", "C", t_cov, "sample covariance (1/n) X X^T")
    g.add_edge("X", "Sigma", t_eig, "eigenvalues")
    g.add_edge("X", "W", t_rot, "eigenvectors")
    g.add_edge("X", "Y", t_out, "rotated data W^T X")
    g.add_edge("X", "Y_sphered", t_sph, "Sigma^{-1/2} Y")
    # the joint (Y, Sigma, W) determines X
    g.add_edge("X", "(Y,Sigma,W)", 1, "joint output")

    if t_out + t_rot != 1:
        raise AssertionError("rotation and output transfers do not sum to one")
    if t_eig + t_rot != t_cov:
        raise AssertionError("eigen-decomposition does not split the covariance transfer")
    if t_eig + t_rot + t_out != 1 + Fraction(1, n):
        raise AssertionError("separate transfers should over-count by 1/n")
    return g


# --------------------------------------------------------------------------
# absolute loss witness for the dyadic folder
# --------------------------------------------------------------------------

def dyadic_absolute_loss_partial(K: int) -> float:
    """Entropy (bits) of the branch index truncated after ``K`` branches, with
    all remaining mass folded into one atom.  Non-decreasing in ``K`` and
    unbounded, it lower-bounds the (infinite) absolute loss of the folder."""
    K = int(K)
    if K < 1:
        raise ValueError("K must be >= 1")
    p = dyadic_piece_probs(np.arange(1, K + 1, dtype=float))
    r = float(dyadic_tail_mass(K))
    return math.fsum((-p * np.log2(p)).tolist()) - r * math.log2(r)


# --------------------------------------------------------------------------
# sample-based estimates
# --------------------------------------------------------------------------

@dataclass
class LossEstimate:
    loss: LossValue
    d_x: DimensionEstimate | float
    d_y: DimensionEstimate | float
    method: str
    pieces: list[dict] = field(default_factory=list)
    skipped_mass: float = 0.0

    @property
    def undersampled(self) -> bool:
        flags = [d.undersampled for d in (self.d_x, self.d_y) if isinstance(d, DimensionEstimate)]
        return any(flags)


def _dim_value(d) -> float:
    return d.value if isinstance(d, DimensionEstimate) else float(d)


def estimate_relative_loss(
    block,
    batch: SampleBatch,
    method: str = "global",
    resolutions=None,
    correction: str = "miller_madow",
    min_piece_samples: int = 1000,
) -> LossEstimate:
    """Estimate the loss of ``block`` on ``batch`` from information dimensions.

    ``global`` compares the dimension of the whole output with that of the
    whole input.  ``piecewise`` does the same on every cell of the block's
    estimation partition and averages with the empirical cell frequencies;
    cells with fewer than ``min_piece_samples`` draws are left out and their
    mass reported as ``skipped_mass``.
    """
    out = block.apply(batch)
    if method == "global":
        d_x = estimate_dimension(batch, resolutions, correction)
        d_y = estimate_dimension(out, resolutions, correction)
        return LossEstimate(loss_from_output_dim(d_x, d_y), d_x, d_y, "global")
    if method != "piecewise":
        raise ValueError(f"unknown method {method!r}")

    labels = block.estimation_labels(batch)
    S = batch.count
    total = 0.0
    var = 0.0
    used = 0.0
    dx_sum = dy_sum = 0.0
    pieces = []
    for lab in np.unique(labels):
        mask = labels == lab
        m = int(mask.sum())
        w = m / S
        if m < min_piece_samples:
            pieces.append({"label": str(lab), "count": m, "skipped": True})
            continue
        dx = estimate_dimension(SampleBatch(batch.values[:, mask]), resolutions, correction)
        dy = estimate_dimension(SampleBatch(out.values[:, mask]), resolutions, correction)
        lv = loss_from_output_dim(dx, dy) if dx.value > 1e-9 else LossValue(0.0, Status.ESTIMATED, 0.0)
        total += w * lv.value
        var += (w * (lv.stderr or 0.0)) ** 2
        used += w
        dx_sum += w * dx.value
        dy_sum += w * dy.value
        pieces.append({"label": str(lab), "count": m, "d_x": dx.value, "d_y": dy.value, "loss": lv.value})
    if used == 0:
        raise ValueError("no partition cell has enough samples for a piecewise estimate")
    loss = LossValue(total / used, Status.ESTIMATED, math.sqrt(var) / used)
    return LossEstimate(loss, dx_sum / used, dy_sum / used, "piecewise", pieces, 1.0 - used)
