"""Planted-cluster synthetic tensors with exact-count additive/destructive noise."""

from __future__ import annotations

from dataclasses import dataclass, asdict

import numpy as np

from .bintensor import BinaryMatrix, BinaryTensor3, FactorTriple, bcp_reconstruct

DENSITY_BAND = 0.2


@dataclass(frozen=True)
class SynthConfig:
    n: int = 70
    m: int = 50
    l: int = 20
    k: int = 5
    target_density: float = 0.05
    p_add: float = 0.10
    p_del: float = 0.10
    seed: int = 0

    def __post_init__(self):
        if min(self.n, self.m, self.l) < 1:
            raise ValueError(f"dimensions must be positive: {(self.n, self.m, self.l)}")
        if not 1 <= self.k <= self.l:
            raise ValueError(f"need 1 <= k <= l, got k={self.k}, l={self.l}")
        if not 0 < self.target_density < 1:
            raise ValueError(f"target density must lie in (0, 1), got {self.target_density}")
        for name in ("p_add", "p_del"):
            value = getattr(self, name)
            if not (np.isfinite(value) and value >= 0):
                raise ValueError(f"{name} must be a finite non-negative fraction, got {value}")

    def to_dict(self) -> dict:
        return asdict(self)


@dataclass(frozen=True, eq=False)
class SynthInstance:
    clean: BinaryTensor3
    noisy: BinaryTensor3
    factors: FactorTriple
    labels: np.ndarray         # 0-based planted cluster per slice
    bernoulli_p: float


def _planted_labels(rng: np.random.Generator, l: int, k: int, max_tries: int = 100_000) -> np.ndarray:
    if k == l:
        return np.arange(l)
    for _ in range(max_tries):
        labels = rng.integers(0, k, size=l)
        if len(np.unique(labels)) == k:
            return labels
    raise RuntimeError(f"could not draw {l} labels covering all {k} clusters")


def _density(ua: np.ndarray, ub: np.ndarray, labels: np.ndarray, p: float) -> float:
    a = (ua < p).sum(axis=0)
    b = (ub < p).sum(axis=0)
    n, m = ua.shape[0], ub.shape[0]
    return float((a * b)[labels].sum()) / (n * m * len(labels))


def gen_instance(cfg: SynthConfig, max_retries: int = 20, bisect_steps: int = 60) -> SynthInstance:
    """Draw ground-truth factors, build the clean tensor and add noise.

    Columns of ``A`` and ``B`` are Bernoulli(``p``) vectors. For a fixed draw
    of uniforms the realized density grows monotonically with ``p``, so ``p``
    is found by bisection; the draw is repeated until the density lands within
    20% of the target.
    """
    rng = np.random.default_rng(cfg.seed)
    labels = _planted_labels(rng, cfg.l, cfg.k)
    target = cfg.target_density
    for _ in range(max_retries):
        ua = rng.random((cfg.n, cfg.k))
        ub = rng.random((cfg.m, cfg.k))
        lo, hi = 0.0, 1.0
        for _ in range(bisect_steps):
            mid = 0.5 * (lo + hi)
            if _density(ua, ub, labels, mid) < target:
                lo = mid
            else:
                hi = mid
        # hi reaches or passes the target, lo stays below it; keep the closer one
        p = min((lo, hi), key=lambda x: abs(_density(ua, ub, labels, x) - target))
        if abs(_density(ua, ub, labels, p) - target) <= DENSITY_BAND * target:
            break
    else:
        raise ValueError(
            f"density {target} unreachable within {DENSITY_BAND:.0%} for "
            f"{cfg.n}x{cfg.m}x{cfg.l}, k={cfg.k} after {max_retries} draws"
        )

    A = ua < p
    B = ub < p
    C = np.zeros((cfg.l, cfg.k), dtype=bool)
    C[np.arange(cfg.l), labels] = True
    factors = FactorTriple(BinaryMatrix.from_dense(A), BinaryMatrix.from_dense(B),
                           BinaryMatrix.from_dense(C), clustering=True)
    clean = bcp_reconstruct(factors)
    noisy = apply_noise(clean, cfg.p_add, cfg.p_del, rng)
    return SynthInstance(clean, noisy, factors, labels, p)


def noise_counts(ones: int, p_add: float, p_del: float) -> tuple[int, int]:
    return int(round(p_add * ones)), int(round(p_del * ones))


def apply_noise(X: BinaryTensor3, p_add: float, p_del: float, rng=None) -> BinaryTensor3:
    """Flip exactly ``round(p_del*|X|)`` ones and ``round(p_add*|X|)`` zeros.

    Both counts are relative to the original number of ones; the flipped
    cells are drawn from the original ones and zeros respectively.
    """
    if p_add < 0 or p_del < 0:
        raise ValueError("noise fractions must be non-negative")
    rng = np.random.default_rng(rng)
    flat = X.x3.to_dense().reshape(-1)
    ones = np.flatnonzero(flat)
    n_add, n_del = noise_counts(len(ones), p_add, p_del)
    zeros_available = flat.size - len(ones)
    if n_del > len(ones):
        raise ValueError(f"cannot remove {n_del} ones from a tensor with {len(ones)}")
    if n_add > zeros_available:
        raise ValueError(f"cannot add {n_add} ones, only {zeros_available} zero cells")
    out = flat.copy()
    if n_del:
        out[rng.choice(ones, size=n_del, replace=False)] = False
    if n_add:
        picks = rng.choice(zeros_available, size=n_add, replace=False)
        zeros = np.flatnonzero(~flat)
        out[zeros[picks]] = True
    x3 = BinaryMatrix.from_dense(out.reshape(X.l, X.n * X.m))
    return BinaryTensor3(X.n, X.m, X.l, x3)
