"""Input laws and deterministic samplers.

Every sampler draws in fixed-size chunks, each chunk seeded from its own child
of a ``numpy.random.SeedSequence``.  The output therefore depends only on
``(spec, count, seed)`` and not on how many threads produced the chunks.
"""

from __future__ import annotations

import csv
import json
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Sequence, Union

import numpy as np
from scipy import special

EIG_TOL = 1e-10
PMF_TOL = 1e-12
DYADIC_CAP = 60
CHUNK = 1 << 16


# --------------------------------------------------------------------------
# seeding
# --------------------------------------------------------------------------

def _check_seed(seed: int) -> int:
    seed = int(seed)
    if seed < 0 or seed >= 1 << 64:
        raise ValueError(f"seed must be an unsigned 64-bit integer, got {seed}")
    return seed


def derive_seed(seed: int, *path: int) -> int:
    """Child seed at ``path`` below ``seed`` in the spawn tree."""
    ss = np.random.SeedSequence(_check_seed(seed), spawn_key=tuple(int(p) for p in path))
    return int(ss.generate_state(1, dtype=np.uint64)[0])


def _chunk_rng(seed: int, chunk: int) -> np.random.Generator:
    return np.random.Generator(np.random.Philox(np.random.SeedSequence(seed, spawn_key=(chunk,))))


# --------------------------------------------------------------------------
# distribution specs
# --------------------------------------------------------------------------

@dataclass(frozen=True)
class GaussianVec:
    mean: np.ndarray
    covariance: np.ndarray

    def __post_init__(self):
        mean = np.atleast_1d(np.asarray(self.mean, dtype=float))
        cov = np.atleast_2d(np.asarray(self.covariance, dtype=float))
        if mean.ndim != 1 or cov.shape != (mean.size, mean.size):
            raise ValueError("covariance must be N x N for a length-N mean")
        if not np.allclose(cov, cov.T, rtol=0, atol=EIG_TOL):
            raise ValueError("covariance is not symmetric")
        if np.linalg.eigvalsh(cov).min() <= EIG_TOL:
            raise ValueError("covariance is not positive definite")
        object.__setattr__(self, "mean", mean)
        object.__setattr__(self, "covariance", cov)

    @property
    def dims(self) -> int:
        return self.mean.size

    @classmethod
    def standard(cls, n: int) -> "GaussianVec":
        return cls(np.zeros(n), np.eye(n))


@dataclass(frozen=True)
class UniformBox:
    lo: np.ndarray
    hi: np.ndarray

    def __post_init__(self):
        lo = np.atleast_1d(np.asarray(self.lo, dtype=float))
        hi = np.atleast_1d(np.asarray(self.hi, dtype=float))
        if lo.shape != hi.shape or lo.ndim != 1:
            raise ValueError("lo and hi must be vectors of equal length")
        if not np.all(lo < hi):
            raise ValueError("UniformBox requires lo < hi in every coordinate")
        object.__setattr__(self, "lo", lo)
        object.__setattr__(self, "hi", hi)

    @property
    def dims(self) -> int:
        return self.lo.size


@dataclass(frozen=True)
class DyadicTail:
    """Scalar law on (0, 1] with mass p_n spread uniformly over (2^-n, 2^-n+1]."""

    @property
    def dims(self) -> int:
        return 1


@dataclass(frozen=True)
class DiscreteFinite:
    support: np.ndarray
    pmf: np.ndarray

    def __post_init__(self):
        support = np.asarray(self.support, dtype=float)
        if support.ndim == 1:
            support = support[:, None]
        pmf = np.asarray(self.pmf, dtype=float)
        if pmf.ndim != 1 or pmf.size != support.shape[0] or pmf.size == 0:
            raise ValueError("pmf must have one entry per support point")
        if np.any(pmf < 0) or abs(math.fsum(pmf) - 1.0) > PMF_TOL:
            raise ValueError("pmf must be non-negative and sum to 1")
        object.__setattr__(self, "support", support)
        object.__setattr__(self, "pmf", pmf)

    @property
    def dims(self) -> int:
        return self.support.shape[1]


DistributionSpec = Union[GaussianVec, UniformBox, DyadicTail, DiscreteFinite]


def dyadic_piece_probs(n: np.ndarray | int) -> np.ndarray:
    """p_n = 1/log2(n+1) - 1/log2(n+2), evaluated without cancellation."""
    n = np.asarray(n, dtype=float)
    a = np.log2(n + 1.0)
    b = np.log2(n + 2.0)
    return np.log1p(1.0 / (n + 1.0)) / np.log(2.0) / (a * b)


def dyadic_tail_mass(n: np.ndarray | int) -> np.ndarray:
    """Mass of (0, 2^-n], i.e. of all pieces beyond n."""
    return 1.0 / np.log2(np.asarray(n, dtype=float) + 2.0)


def spec_to_dict(spec: DistributionSpec) -> dict:
    if isinstance(spec, GaussianVec):
        return {"kind": "gaussian", "mean": spec.mean.tolist(), "covariance": spec.covariance.tolist()}
    if isinstance(spec, UniformBox):
        return {"kind": "uniform_box", "lo": spec.lo.tolist(), "hi": spec.hi.tolist()}
    if isinstance(spec, DyadicTail):
        return {"kind": "dyadic_tail"}
    if isinstance(spec, DiscreteFinite):
        return {"kind": "discrete", "support": spec.support.tolist(), "pmf": spec.pmf.tolist()}
    raise TypeError(f"not a distribution spec: {spec!r}")


def spec_from_dict(obj: dict) -> DistributionSpec:
    kind = obj.get("kind")
    if kind == "gaussian":
        return GaussianVec(obj["mean"], obj["covariance"])
    if kind == "uniform_box":
        return UniformBox(obj["lo"], obj["hi"])
    if kind == "dyadic_tail":
        return DyadicTail()
    if kind == "discrete":
        return DiscreteFinite(obj["support"], obj["pmf"])
    raise ValueError(f"unknown distribution kind {kind!r}")


def spec_to_json(spec: DistributionSpec) -> str:
    return json.dumps(spec_to_dict(spec))


def spec_from_json(text: str) -> DistributionSpec:
    return spec_from_dict(json.loads(text))


# --------------------------------------------------------------------------
# sample batches
# --------------------------------------------------------------------------

@dataclass(frozen=True)
class SampleBatch:
    """``dims x count`` matrix; each column is one sample."""

    values: np.ndarray
    seed_record: dict = field(default_factory=dict)

    def __post_init__(self):
        values = np.asarray(self.values, dtype=float)
        if values.ndim == 1:
            values = values[None, :]
        if values.ndim != 2 or values.shape[0] < 1 or values.shape[1] < 1:
            raise ValueError(f"batch must be a non-empty 2-D array, got shape {values.shape}")
        if not np.all(np.isfinite(values)):
            raise ValueError("batch contains NaN or Inf")
        values.setflags(write=False)
        object.__setattr__(self, "values", values)

    @property
    def dims(self) -> int:
        return self.values.shape[0]

    @property
    def count(self) -> int:
        return self.values.shape[1]

    @property
    def samples(self) -> np.ndarray:
        """Samples as rows (``count x dims``), the layout scikit-learn expects."""
        return self.values.T

    @classmethod
    def from_samples(cls, X, seed_record: dict | None = None) -> "SampleBatch":
        X = np.asarray(X, dtype=float)
        if X.ndim == 1:
            X = X[:, None]
        return cls(X.T, seed_record or {})

    def to_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow([f"x{i + 1}" for i in range(self.dims)])
            for col in self.values.T:
                writer.writerow([f"{v:.17g}" for v in col])

    @classmethod
    def from_csv(cls, path) -> "SampleBatch":
        with open(path, newline="") as fh:
            rows = list(csv.reader(fh))
        return cls.from_samples(np.array(rows[1:], dtype=float))


def _draw_chunk(spec: DistributionSpec, rng: np.random.Generator, m: int, chol):
    if isinstance(spec, GaussianVec):
        z = rng.standard_normal((spec.dims, m))
        return chol @ z + spec.mean[:, None], 0
    if isinstance(spec, UniformBox):
        u = rng.random((spec.dims, m))
        return spec.lo[:, None] + u * (spec.hi - spec.lo)[:, None], 0
    if isinstance(spec, DyadicTail):
        probs = chol
        piece = rng.choice(DYADIC_CAP, size=m, p=probs) + 1
        u = rng.random(m)
        hi = np.ldexp(1.0, 1 - piece)
        # (a, b] via b - u (b - a), u in [0, 1)
        x = hi - u * (hi / 2)
        return x[None, :], int(np.count_nonzero(piece == DYADIC_CAP))
    if isinstance(spec, DiscreteFinite):
        idx = rng.choice(spec.pmf.size, size=m, p=spec.pmf)
        return spec.support[idx].T, 0
    raise TypeError(f"not a distribution spec: {spec!r}")


def sample(spec: DistributionSpec, count: int, seed: int, n_jobs: int = 1) -> SampleBatch:
    """Draw ``count`` i.i.d. samples; identical arguments give identical output."""
    seed = _check_seed(seed)
    count = int(count)
    if count < 1:
        raise ValueError("count must be >= 1")
    aux = None
    if isinstance(spec, GaussianVec):
        aux = np.linalg.cholesky(spec.covariance)
    elif isinstance(spec, DyadicTail):
        aux = dyadic_piece_probs(np.arange(1, DYADIC_CAP + 1))
        aux[-1] += dyadic_tail_mass(DYADIC_CAP)
        aux = aux / aux.sum()

    sizes = [min(CHUNK, count - start) for start in range(0, count, CHUNK)]

    def work(i):
        return _draw_chunk(spec, _chunk_rng(seed, i), sizes[i], aux)

    if n_jobs > 1 and len(sizes) > 1:
        with ThreadPoolExecutor(n_jobs) as pool:
            parts = list(pool.map(work, range(len(sizes))))
    else:
        parts = [work(i) for i in range(len(sizes))]
    values = np.concatenate([p[0] for p in parts], axis=1)
    record = {"seed": seed, "chunks": len(sizes), "chunk_size": CHUNK}
    if isinstance(spec, DyadicTail):
        record["dyadic_capped"] = sum(p[1] for p in parts)
    return SampleBatch(values, record)


# --------------------------------------------------------------------------
# analytic box masses
# --------------------------------------------------------------------------

def _normal_interval(lo: float, hi: float) -> float:
    # pick the tail that avoids cancellation
    if lo >= 0:
        return 0.5 * (special.erfc(lo / math.sqrt(2)) - special.erfc(hi / math.sqrt(2)))
    if hi <= 0:
        return 0.5 * (special.erfc(-hi / math.sqrt(2)) - special.erfc(-lo / math.sqrt(2)))
    return 0.5 * (special.erf(hi / math.sqrt(2)) - special.erf(lo / math.sqrt(2)))


def _dyadic_cdf(x: float) -> float:
    if x <= 0:
        return 0.0
    if x >= 1:
        return 1.0
    m, e = math.frexp(x)
    n = 2 - e if m == 0.5 else 1 - e
    below = float(dyadic_tail_mass(n))
    return below + float(dyadic_piece_probs(n)) * (math.ldexp(x, n) - 1.0)


def probability_mass(spec: DistributionSpec, box: Sequence[tuple[float, float]]) -> float:
    """Exact probability of an axis-aligned box ``[(lo_1, hi_1), ...]``.

    Boundaries only matter for ``DiscreteFinite``, where the box is closed.
    """
    box = [(float(lo), float(hi)) for lo, hi in box]
    if len(box) != spec.dims:
        raise ValueError(f"box has {len(box)} intervals for a {spec.dims}-dim spec")
    if any(lo > hi for lo, hi in box):
        raise ValueError("box intervals must satisfy lo <= hi")

    if isinstance(spec, GaussianVec):
        cov = spec.covariance
        if np.count_nonzero(cov - np.diag(np.diag(cov))):
            raise ValueError("box mass is only available for diagonal covariance; use Monte Carlo")
        sd = np.sqrt(np.diag(cov))
        p = 1.0
        for (lo, hi), mu, s in zip(box, spec.mean, sd):
            p *= _normal_interval((lo - mu) / s, (hi - mu) / s)
        return float(p)
    if isinstance(spec, UniformBox):
        p = 1.0
        for (lo, hi), a, b in zip(box, spec.lo, spec.hi):
            p *= max(0.0, min(hi, b) - max(lo, a)) / (b - a)
        return float(p)
    if isinstance(spec, DyadicTail):
        lo, hi = box[0]
        return _dyadic_cdf(hi) - _dyadic_cdf(lo)
    if isinstance(spec, DiscreteFinite):
        lo = np.array([b[0] for b in box])
        hi = np.array([b[1] for b in box])
        inside = np.all((spec.support >= lo) & (spec.support <= hi), axis=1)
        return float(math.fsum(spec.pmf[inside]))
    raise TypeError(f"not a distribution spec: {spec!r}")


# --------------------------------------------------------------------------
# named presets used by the CLI
# --------------------------------------------------------------------------

def named_spec(name: str) -> DistributionSpec:
    """Resolve a preset (``stdnormal``, ``gauss<N>``, ``uniform<N>``, ``dyadic``)
    or an inline JSON object."""
    name = name.strip()
    if name.startswith("{"):
        return spec_from_json(name)
    if name == "stdnormal":
        return GaussianVec.standard(1)
    if name == "dyadic":
        return DyadicTail()
    if name.startswith("gauss") and name[5:].isdigit():
        return GaussianVec.standard(int(name[5:]))
    if name.startswith("uniform") and name[7:].isdigit():
        n = int(name[7:])
        return UniformBox(np.zeros(n), np.ones(n))
    raise ValueError(f"unknown distribution preset {name!r}")
