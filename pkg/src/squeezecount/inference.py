"""Shot sampling and photon-number classification.

A detector run measures the coincidence product n_a * n_b shot by shot; the
sample mean of that product estimates <C>. A classifier holds the expected
post-channel means for N = 0..n_max (so it is scale-aware under loss and
dark counts by construction) and assigns the nearest level, breaking ties
at bin midpoints toward the smaller N.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import analytic
from .params import DeviceParams, InputState
from .fock import TwoModeState

__all__ = [
    "ShotRecord",
    "ClassifierModel",
    "ClassifyResult",
    "joint_distribution",
    "sample_shots",
    "save_shots",
    "load_shots",
    "build_classifier",
    "classify",
    "required_shots",
]

_SHOTS_MAGIC = "# squeezecount shots v1"


def joint_distribution(state: TwoModeState) -> np.ndarray:
    """Joint photon-number table P(n_a, n_b); sums to 1 - norm_deficit."""
    return state.joint_probabilities()


@dataclass(frozen=True)
class ShotRecord:
    """Per-shot photon-number readings on both arms."""

    seed: int
    na: np.ndarray
    nb: np.ndarray

    @property
    def shots(self) -> int:
        return int(self.na.size)

    @property
    def products(self) -> np.ndarray:
        return self.na * self.nb

    @property
    def product_mean(self) -> float:
        return float(np.mean(self.products))


def sample_shots(dist: np.ndarray, shots: int, seed: int) -> ShotRecord:
    """Draw i.i.d. (n_a, n_b) pairs from a joint table. The table is
    renormalized over its retained support, so keep the truncation deficit
    small before sampling. Bit-identical for a given seed."""
    dist = np.asarray(dist, dtype=float)
    if dist.ndim != 2:
        raise ValueError("distribution must be a 2-D table")
    if shots < 1:
        raise ValueError(f"shots must be >= 1, got {shots}")
    total = float(dist.sum())
    if not total > 0.0 or np.any(dist < -1e-12):
        raise ValueError("distribution must be non-negative with positive mass")
    p = np.clip(dist, 0.0, None).ravel()
    p /= p.sum()
    rng = np.random.default_rng(seed)
    idx = rng.choice(p.size, size=shots, p=p)
    na, nb = np.unravel_index(idx, dist.shape)
    return ShotRecord(seed=seed, na=na.astype(np.int64), nb=nb.astype(np.int64))


def save_shots(record: ShotRecord, path: str) -> None:
    with open(path, "w") as fh:
        fh.write(f"{_SHOTS_MAGIC}\n")
        fh.write(f"# seed: {record.seed}\n")
        fh.write(f"# shots: {record.shots}\n")
        for a, b in zip(record.na, record.nb):
            fh.write(f"{a} {b}\n")


def load_shots(path: str) -> ShotRecord:
    with open(path) as fh:
        lines = fh.read().splitlines()
    if not lines or lines[0] != _SHOTS_MAGIC:
        raise ValueError(f"{path}: not a shots file (missing '{_SHOTS_MAGIC}')")
    seed = 0
    pairs = []
    for ln in lines[1:]:
        if ln.startswith("# seed:"):
            seed = int(ln.split(":", 1)[1])
        elif ln.startswith("#") or not ln.strip():
            continue
        else:
            a, b = ln.split()
            pairs.append((int(a), int(b)))
    if not pairs:
        raise ValueError(f"{path}: no shots")
    na = np.array([p[0] for p in pairs], dtype=np.int64)
    nb = np.array([p[1] for p in pairs], dtype=np.int64)
    return ShotRecord(seed=seed, na=na, nb=nb)


@dataclass(frozen=True)
class ClassifierModel:
    """Expected product means per input occupation, under fixed device
    parameters (including losses and dark counts)."""

    params: DeviceParams
    levels: np.ndarray  # levels[N] = expected <C> for fock input N

    def __post_init__(self):
        if self.levels.size == 0:
            raise ValueError("classifier needs at least one level")
        if self.levels.size > 1 and not np.all(np.diff(self.levels) > 0):
            raise ValueError("classifier levels must be strictly increasing")

    @property
    def boundaries(self) -> np.ndarray:
        return (self.levels[:-1] + self.levels[1:]) / 2.0

    @property
    def n_max(self) -> int:
        return int(self.levels.size - 1)


@dataclass(frozen=True)
class ClassifyResult:
    n_hat: int
    margin: float
    saturated: bool


def build_classifier(params: DeviceParams, n_max: int) -> ClassifierModel:
    if n_max < 0:
        raise ValueError(f"n_max must be >= 0, got {n_max}")
    levels = np.array([
        analytic.channel_moments(params, InputState.fock(n))["nanb"]
        for n in range(n_max + 1)
    ])
    return ClassifierModel(params=params, levels=levels)


def classify(model: ClassifierModel, measured_mean: float) -> ClassifyResult:
    """Nearest-level decision on a measured product mean. Exactly on a bin
    midpoint the smaller N wins; means beyond the top level clamp to n_max
    with the saturation flag set."""
    if not math.isfinite(measured_mean):
        raise ValueError(f"measured mean must be finite, got {measured_mean}")
    bounds = model.boundaries
    n_hat = int(np.searchsorted(bounds, measured_mean, side="left"))
    margin = float(np.min(np.abs(bounds - measured_mean))) if bounds.size else math.inf
    saturated = bool(measured_mean > float(model.levels[-1]))
    return ClassifyResult(n_hat=n_hat, margin=margin, saturated=saturated)


def required_shots(model: ClassifierModel, N: int, confidence: float) -> int:
    """Smallest shot count M for which the standard error of the product
    mean at confidence `confidence` stays inside half the local level gap:
    z * sqrt(Var_C(N) / M) < gap / 2. Always at least 2."""
    if not 0 <= N <= model.n_max:
        raise ValueError(f"N={N} outside classifier range 0..{model.n_max}")
    if model.n_max == 0:
        raise ValueError("single-level classifier has no gap to resolve")
    z = analytic.confidence_z(confidence)
    mom = analytic.channel_moments(model.params, InputState.fock(N))
    var = mom["na2nb2"] - mom["nanb"] ** 2
    gaps = []
    if N > 0:
        gaps.append(model.levels[N] - model.levels[N - 1])
    if N < model.n_max:
        gaps.append(model.levels[N + 1] - model.levels[N])
    half_gap = min(gaps) / 2.0
    m = int(math.floor(z * z * var / (half_gap * half_gap))) + 1
    return max(m, 2)
