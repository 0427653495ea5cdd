"""Reproducible experiments behind the command-line tool."""

from __future__ import annotations

from dataclasses import dataclass, field
from fractions import Fraction

import numpy as np

from . import blocks, dist, loss, pca
from .quant import estimate_dimension

FOLDER_SAMPLES = 10**5
FOLDER_TOL = 0.07
FOLDER_KS = (10**2, 10**3, 10**4, 10**5, 10**6)
FOLDER_MIN_GAP = 1e-4
TRIPLE_COUNT = 100
TRIPLE_MAX_SUPPORT = 64
PRODUCT_GAP_TOL = 1e-12
ROTATED_EXPERIMENTS = 2 * 10**5
ROTATED_DIM_TOL = 0.2
OFFDIAG_TOL = 1e-8
TWO_POINT_TOL = 1e-10


@dataclass
class ExperimentConfig:
    block: str
    spec: dist.DistributionSpec
    samples: int = 2 * 10**5
    resolutions: object = "auto"
    seed: int = 0
    tolerance: float = 0.1
    method: str = "auto"

    def __post_init__(self):
        if not self.tolerance > 0:
            raise ValueError("tolerance must be positive")
        if self.samples < 10**3:
            raise ValueError("need at least 1000 samples")
        if not isinstance(self.resolutions, str) and len(set(self.resolutions)) < 2:
            raise ValueError("resolution ladder needs at least two rungs")


@dataclass
class LossReport:
    block: str
    spec: dict
    analytic: loss.LossValue
    estimated: loss.LossValue
    d_x: float
    d_y: float
    tolerance: float
    method: str
    undersampled: bool = False
    pieces: list = field(default_factory=list)

    @property
    def passed(self) -> bool:
        return abs(self.analytic.value - self.estimated.value) <= self.tolerance

    def to_dict(self) -> dict:
        return {
            "block": self.block,
            "spec": self.spec,
            "analytic": {"value": self.analytic.value, "status": self.analytic.status.value},
            "estimated": {"value": self.estimated.value, "stderr": self.estimated.stderr},
            "d_x": self.d_x,
            "d_y": self.d_y,
            "pass": self.passed,
            "tolerance": self.tolerance,
            "method": self.method,
            "undersampled": self.undersampled,
            "pieces": self.pieces,
        }


def analyze(config: ExperimentConfig) -> LossReport:
    """Closed-form loss of a block against its sample-based estimate."""
    block = blocks.make_block(config.block, config.spec.dims)
    analytic, probs = blocks.analytic_relative_loss_detail(
        block, config.spec, seed=dist.derive_seed(config.seed, 0))
    batch = dist.sample(config.spec, config.samples, dist.derive_seed(config.seed, 1))
    method = config.method
    if method == "auto":
        method = "piecewise" if block.refine is not None else "global"
    est = loss.estimate_relative_loss(block, batch, method, config.resolutions)
    d_x = est.d_x.value if hasattr(est.d_x, "value") else est.d_x
    d_y = est.d_y.value if hasattr(est.d_y, "value") else est.d_y
    return LossReport(
        block=block.name,
        spec=dist.spec_to_dict(config.spec),
        analytic=analytic,
        estimated=est.loss,
        d_x=float(d_x),
        d_y=float(d_y),
        tolerance=config.tolerance,
        method=method,
        undersampled=est.undersampled,
        pieces=[vars(p) for p in probs],
    )


def pca_curve_rows(N: int, n_values) -> list[dict]:
    """Rows of the sample-PCA loss curve, both regime formulas included."""
    if N < 2:
        raise ValueError("N must be >= 2")
    rows = []
    for n in n_values:
        lv = pca.sample_pca_loss(N, n)
        rows.append({
            "n": n,
            "loss": lv.value,
            "status": lv.status.value,
            "N": N,
            "full_rank_formula": float(Fraction(N - 1, 2 * n)),
            "singular_formula": float(Fraction(2 * N - n - 1, 2 * N)),
        })
    return rows


def pca_demo(N: int, n: int, seed: int, center: bool = False) -> dict:
    """One sample-PCA run on standard Gaussian data."""
    spec = dist.GaussianVec.standard(N)
    X = dist.sample(spec, n, dist.derive_seed(seed, 0))
    Y, model = pca.sample_pca(X, center=center)
    Xc = X.values - X.values.mean(axis=1, keepdims=True) if center else X.values
    Cy = pca.sample_covariance(Y)
    off = Cy - np.diag(np.diag(Cy))
    return {
        "model": model.to_dict(),
        "ymat": {
            "shape": list(Y.values.shape),
            "max_offdiag_covariance": float(np.abs(off).max()) if N > 1 else 0.0,
            "column_norm_error": float(np.max(np.abs(
                np.linalg.norm(Y.values, axis=0) - np.linalg.norm(Xc, axis=0)))),
        },
        "loss": {
            "population": pca.truncation_loss(N, N).to_dict(),
            "sample": pca.sample_pca_loss(N, n).to_dict(),
        },
    }


# --------------------------------------------------------------------------
# worked-example checks
# --------------------------------------------------------------------------

def check_folder(seed: int, samples: int = FOLDER_SAMPLES) -> dict:
    """Folder: zero relative loss, yet the absolute-loss lower bound keeps growing."""
    folder = blocks.make_dyadic_folder()
    batch = dist.sample(dist.DyadicTail(), samples, dist.derive_seed(seed, 0))
    est = loss.estimate_relative_loss(folder, batch, "piecewise")
    d_y = estimate_dimension(folder.apply(batch))
    partial = [loss.dyadic_absolute_loss_partial(K) for K in FOLDER_KS]
    gaps = [b - a for a, b in zip(partial, partial[1:])]
    ok = (abs(est.loss.value) <= FOLDER_TOL and abs(d_y.value - 1) <= FOLDER_TOL
          and min(gaps) > FOLDER_MIN_GAP)
    return {
        "pass": bool(ok),
        "estimated_loss": est.loss.value,
        "skipped_mass": est.skipped_mass,
        "d_y": d_y.value,
        "partial_entropies": dict(zip(map(str, FOLDER_KS), partial)),
        "min_gap": min(gaps),
    }


def random_discrete_triple(rng: np.random.Generator, max_support: int = TRIPLE_MAX_SUPPORT):
    """Random pmf with support 0..m-1 and maps g, h on integer labels whose
    intermediate variable has positive entropy."""
    while True:
        m = int(rng.integers(2, max_support + 1))
        pmf = rng.dirichlet(np.ones(m))
        ky = int(rng.integers(2, m + 1))
        g_table = rng.integers(0, ky, size=m)
        kz = int(rng.integers(1, ky + 1))
        h_table = rng.integers(0, kz, size=ky)
        if len(set(g_table.tolist())) > 1:
            support = list(range(m))
            return (support, pmf.tolist()), (lambda x, t=g_table: int(t[x])), (lambda y, t=h_table: int(t[y]))


def check_transfer_product(seed: int, triples: int = TRIPLE_COUNT) -> dict:
    rng = np.random.default_rng(dist.derive_seed(seed, 1))
    gaps = []
    for _ in range(triples):
        pmf, g, h = random_discrete_triple(rng)
        gaps.append(loss.discrete_transfer_product_check(pmf, g, h).product_gap)
    return {"pass": bool(max(gaps) < PRODUCT_GAP_TOL), "triples": triples, "max_gap": max(gaps)}


def rotated_data_outputs(experiments: int, seed: int, N: int = 2, n: int = 2) -> tuple[np.ndarray, np.ndarray]:
    """Rotated data matrices of ``experiments`` independent Gaussian data sets,
    as a ``(experiments, N, n)`` stack, and the largest off-diagonal entry of
    each one's sample covariance."""
    X = dist.sample(dist.GaussianVec.standard(N), experiments * n, seed).values
    stack = X.T.reshape(experiments, n, N).transpose(0, 2, 1)
    Y, _, _ = pca.sample_pca_stack(stack)
    Cy = pca.sample_covariance(Y)
    off = np.abs(Cy * (1 - np.eye(N))).max(axis=(-2, -1))
    return Y, off


def check_rotated_dimension(seed: int, experiments: int = ROTATED_EXPERIMENTS) -> dict:
    N, n = 2, 2
    Y, off = rotated_data_outputs(experiments, dist.derive_seed(seed, 2), N, n)
    flat = dist.SampleBatch(Y.reshape(experiments, N * n).T)
    d = estimate_dimension(flat)
    target = pca.sample_pca_output_dim(N, n)
    ok = abs(d.value - target) <= ROTATED_DIM_TOL and off.max() < OFFDIAG_TOL
    return {"pass": bool(ok), "dimension": d.value, "target": target, "max_offdiag": float(off.max())}


def check_two_point() -> dict:
    results = {}
    ok = True
    for x, want in (((3.0, 4.0), (5.0, 0.0)), ((3.0, -4.0), (-5.0, 0.0))):
        Y, _ = pca.sample_pca(np.array(x)[:, None])
        got = Y.values[:, 0]
        err = float(np.max(np.abs(got - want)))
        ok &= err <= TWO_POINT_TOL
        results[str(x)] = {"y": got.tolist(), "error": err}
    ok &= pca.sample_pca_loss(2, 1).value == 0.5
    return {"pass": bool(ok), "cases": results, "loss": pca.sample_pca_loss(2, 1).to_dict()}


def verify_appendices(seed: int) -> dict:
    checks = {
        "folder": check_folder(seed),
        "transfer_product": check_transfer_product(seed),
        "rotated_dimension": check_rotated_dimension(seed),
        "two_point": check_two_point(),
    }
    failed = [k for k, v in checks.items() if not v["pass"]]
    return {"pass": not failed, "failed": failed, "checks": checks}


def estimate_dim_report(spec: dist.DistributionSpec, samples: int, seed: int, resolutions="auto") -> dict:
    batch = dist.sample(spec, samples, dist.derive_seed(seed, 1))
    return estimate_dimension(batch, resolutions).to_dict()

