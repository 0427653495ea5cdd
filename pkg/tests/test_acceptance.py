"""Acceptance criteria, one test per criterion.

Each test prints a single PASS/FAIL line; the full list is repeated in the
pytest terminal summary.  Tolerances below are the contractual ones.
"""

import time
from fractions import Fraction

import mpmath
import numpy as np

from infoloss import blocks, dist, experiments, loss, pca, quant
from infoloss.dist import DyadicTail, GaussianVec, SampleBatch
from infoloss.loss import LossValue

ADDER_SEEDS = (1, 2, 3)
ADDER_TOL = 0.1
FIXED_LADDER = [8, 16, 32, 64]
RUNTIME_LIMIT_S = 10.0
CLIP_LEVELS = ("0.1", "0.5", "1", "2")
CLIP_ORACLE_TOL = 1e-6
CLIP_EST_TOL = 0.1
ROUND_TRIP_TOL = 1e-10
MSE_REL_TOL = 0.05
TWO_POINT_TOL = 1e-10
ROTATED_DIM_TOL = 0.2
OFFDIAG_TOL = 1e-8
PRODUCT_GAP_TOL = 1e-12
FOLDER_TOL = 0.07
PLATEAU_GAP = 1e-4
EVD_ORTHO_TOL = 1e-10
EVD_RECON_TOL = 1e-8
NORM_TOL = 1e-10
GAUSS_DIM_TOL = 0.1
DISCRETE_DIM_TOL = 0.05
MIXTURE_DIM_TOL = 0.07


def _normal_mass_oracle(c: str) -> float:
    mpmath.mp.dps = 30
    return float(mpmath.erf(mpmath.mpf(c) / mpmath.sqrt(2)))


def test_criterion_01_adder(criterion, quiet):
    start = time.perf_counter()
    block = blocks.make_adder()
    spec = GaussianVec.standard(2)
    analytic = blocks.analytic_relative_loss(block, spec).value
    estimates = []
    for seed in ADDER_SEEDS:
        batch = dist.sample(spec, 200_000, seed)
        estimates.append(loss.estimate_relative_loss(block, batch, "global", FIXED_LADDER).loss.value)
    elapsed = time.perf_counter() - start
    ok = (analytic == 0.5 and all(abs(e - 0.5) <= ADDER_TOL for e in estimates)
          and elapsed < RUNTIME_LIMIT_S)
    criterion(1, "adder loss", ok,
              f"analytic {analytic}, estimates {', '.join(f'{e:.4f}' for e in estimates)}, {elapsed:.1f}s")


def test_criterion_02_clipper(criterion):
    start = time.perf_counter()
    spec = GaussianVec.standard(1)
    gaps = []
    for c in CLIP_LEVELS:
        value = blocks.analytic_relative_loss(blocks.make_center_clipper(float(c)), spec).value
        gaps.append(abs(value - _normal_mass_oracle(c)))
    report = experiments.analyze(experiments.ExperimentConfig("clipper:0.5", spec, seed=0))
    elapsed = time.perf_counter() - start
    est_gap = abs(report.estimated.value - report.analytic.value)
    ok = max(gaps) <= CLIP_ORACLE_TOL and est_gap <= CLIP_EST_TOL and elapsed < RUNTIME_LIMIT_S
    criterion(2, "center clipper", ok,
              f"max oracle gap {max(gaps):.1e}, c=0.5 estimate {report.estimated.value:.4f} "
              f"vs {report.analytic.value:.5f}, {elapsed:.1f}s")


def test_criterion_03_projection_cascade(criterion):
    proj = blocks.analytic_relative_loss(blocks.make_projection(1, 3), GaussianVec.standard(3)).value
    casc = loss.cascade_compose(LossValue(1 / 3), LossValue(1 / 2)).value
    exact = Fraction(1, 3) + Fraction(1, 2) - Fraction(1, 3) * Fraction(1, 2)
    ok = proj == 2 / 3 and abs(casc - 2 / 3) <= 1e-15 and exact == Fraction(2, 3)
    criterion(3, "projection and cascade", ok, f"projection {proj!r}, cascade {casc!r}")


def test_criterion_04_population_pca(criterion):
    exact = all(
        pca.truncation_loss(N, M).value == float(Fraction(N - M, N))
        for N in range(1, 11) for M in range(1, N + 1)
    )
    rng = np.random.default_rng(0)
    Q, _ = np.linalg.qr(rng.normal(size=(4, 4)))
    eig = np.array([4.0, 2.0, 1.0, 0.5])
    C = Q @ np.diag(eig) @ Q.T
    batch = dist.sample(GaussianVec(np.zeros(4), C), 100_000, 4)
    model = pca.population_pca(C)
    Y = pca.pca_transform(model, batch)
    worst_trip, worst_mse = 0.0, 0.0
    for M in range(1, 5):
        YM = pca.truncate(Y, M)
        Xt = pca.reconstruct(model, YM)
        again = pca.truncate(pca.pca_transform(model, Xt), M)
        worst_trip = max(worst_trip, float(np.max(np.abs(again.values - YM.values))))
        if M < 4:
            mse = float(np.mean(np.sum((Xt.values - batch.values) ** 2, axis=0)))
            worst_mse = max(worst_mse, abs(mse - eig[M:].sum()) / eig[M:].sum())
    ok = exact and worst_trip <= ROUND_TRIP_TOL and worst_mse <= MSE_REL_TOL
    criterion(4, "population PCA", ok,
              f"exact losses {exact}, round trip {worst_trip:.1e}, worst MSE rel. error {worst_mse:.3f}")


def test_criterion_05_sample_pca_curves(criterion):
    spots = {(5, 5): 0.4, (10, 20): 0.225, (2, 1): 0.5}
    spot_ok = all(pca.sample_pca_loss(N, n).value == v for (N, n), v in spots.items())
    continuity = all(
        Fraction(N - 1, 2 * N) == Fraction(2 * N - N - 1, 2 * N)
        and pca.sample_pca_loss(N, N).value == float(Fraction(N - 1, 2 * N))
        for N in range(2, 21)
    )
    criterion(5, "sample PCA loss curves", spot_ok and continuity,
              f"spot values {spot_ok}, boundary continuity {continuity}")


def test_criterion_06_two_point(criterion):
    y1, _ = pca.sample_pca(np.array([[3.0], [4.0]]))
    y2, _ = pca.sample_pca(np.array([[3.0], [-4.0]]))
    e1 = float(np.max(np.abs(y1.values[:, 0] - [5.0, 0.0])))
    e2 = float(np.max(np.abs(y2.values[:, 0] - [-5.0, 0.0])))
    criterion(6, "two-sample closed form", max(e1, e2) <= TWO_POINT_TOL,
              f"(3,4) error {e1:.1e}, (3,-4) error {e2:.1e}")


def test_criterion_07_dimension_accounting(criterion):
    experiments_count = 200_000
    Y, off = experiments.rotated_data_outputs(experiments_count, seed=7)
    flat = SampleBatch(Y.reshape(experiments_count, 4).T)
    d = quant.estimate_dimension(flat).value
    target = pca.sample_pca_output_dim(2, 2)
    ok = abs(d - target) <= ROTATED_DIM_TOL and float(off.max()) < OFFDIAG_TOL
    criterion(7, "rotated-data dimension", ok,
              f"estimated {d:.3f} vs {target}, max off-diagonal {off.max():.1e}")


def test_criterion_08_discrete_transfer(criterion):
    rng = np.random.default_rng(8)
    gaps = []
    for _ in range(100):
        pmf, g, h = experiments.random_discrete_triple(rng, max_support=64)
        gaps.append(loss.discrete_transfer_product_check(pmf, g, h).product_gap)
    criterion(8, "discrete transfer product", max(gaps) < PRODUCT_GAP_TOL,
              f"max gap {max(gaps):.1e} over {len(gaps)} triples")


def test_criterion_09_folder(criterion):
    batch = dist.sample(DyadicTail(), 100_000, 9)
    est = loss.estimate_relative_loss(blocks.make_dyadic_folder(), batch, "piecewise")
    Ks = [10**2, 10**3, 10**4, 10**5, 10**6]
    partial = [loss.dyadic_absolute_loss_partial(K) for K in Ks]
    min_gap = min(b - a for a, b in zip(partial, partial[1:]))
    ok = abs(est.loss.value) <= FOLDER_TOL and min_gap > PLATEAU_GAP
    criterion(9, "zero relative, unbounded absolute loss", ok,
              f"estimated loss {est.loss.value:.4f}, partial sums "
              f"{', '.join(f'{v:.3f}' for v in partial)}, min step {min_gap:.3f}")


def test_criterion_10_property_suites(criterion):
    rng = np.random.default_rng(10)
    ortho, recon = 0.0, 0.0
    for N in range(2, 11):
        A = rng.normal(size=(112, N, N))
        A = A + A.transpose(0, 2, 1)
        eig, V = pca.evd_symmetric(A)
        ortho = max(ortho, float(np.max(np.abs(V.transpose(0, 2, 1) @ V - np.eye(N)))))
        back = V @ (eig[:, :, None] * V.transpose(0, 2, 1))
        recon = max(recon, float(np.max(np.abs(back - A))))
    evd_ok = ortho <= EVD_ORTHO_TOL and recon <= EVD_RECON_TOL

    C = np.array([[3.0, 1.0, 0.2], [1.0, 2.0, 0.4], [0.2, 0.4, 1.0]])
    X = dist.sample(GaussianVec(np.zeros(3), C), 10_000, 1)
    Y = pca.pca_transform(pca.population_pca(C), X)
    norm_err = float(np.max(np.abs(np.linalg.norm(Y.values, axis=0) - np.linalg.norm(X.values, axis=0))))
    Ys, _ = pca.sample_pca(X)
    norm_err = max(norm_err, float(np.max(np.abs(
        np.linalg.norm(Ys.values, axis=0) - np.linalg.norm(X.values, axis=0)))))

    dims = {}
    for N, S in ((1, 200_000), (2, 200_000), (3, 1_000_000)):
        dims[N] = quant.estimate_dimension(dist.sample(GaussianVec.standard(N), S, 100 + N)).value
    atoms = dist.DiscreteFinite(rng.normal(size=(8, 2)).tolist(), (np.ones(8) / 8).tolist())
    d_disc = quant.estimate_dimension(dist.sample(atoms, 20_000, 11)).value
    mix_rng = np.random.default_rng(12)
    x = np.where(mix_rng.random(200_000) < 0.5, 0.0, mix_rng.random(200_000))
    d_mix = quant.estimate_dimension(SampleBatch(x[None, :])).value
    dim_ok = (all(abs(dims[N] - N) <= GAUSS_DIM_TOL for N in dims)
              and abs(d_disc) <= DISCRETE_DIM_TOL and abs(d_mix - 0.5) <= MIXTURE_DIM_TOL)

    graph_ok = True
    for N in range(2, 11):
        for n in range(N, 101):
            g = loss.pca_transfer_graph(N, n)
            t = {k: g.transfer("X", k) for k in ("C", "Sigma", "W", "Y", "Y_sphered")}
            graph_ok &= (t["C"] == t["Sigma"] + t["W"] and t["Y"] + t["W"] == 1
                         and t["Y"] + t["C"] == 1 + Fraction(1, n)
                         and t["Y_sphered"] == t["Y"] - t["Sigma"])

    ok = evd_ok and norm_err <= NORM_TOL and dim_ok and graph_ok
    criterion(10, "property suites", ok,
              f"EVD orth {ortho:.1e} recon {recon:.1e}; norm {norm_err:.1e}; "
              f"dims {dims[1]:.3f}/{dims[2]:.3f}/{dims[3]:.3f}, discrete {d_disc:.3f}, "
              f"mixture {d_mix:.3f}; transfer graph {graph_ok}")
