"""Seeded instance generators.

Model 1 draws ``tau ~ U{0..d_max}``; Model 2 draws ``tau`` from a two-peak
mixture, N(2, 0.5^2) with probability ``bimodal_p`` and N(8, 0.75^2) otherwise,
rounded half away from zero and clamped at 0. Weights are ``U{1..w_max}`` in
both models and arrivals per step are Poisson(``lam``).
"""
from __future__ import annotations

from dataclasses import asdict, dataclass, replace

import numpy as np

from .model import ConfigError, Instance, Packet

MODEL2_PEAKS = ((2.0, 0.5), (8.0, 0.75))


@dataclass(frozen=True)
class GenConfig:
    T: int = 200
    lam: float = 5.0
    w_max: int = 20
    d_max: int = 20
    model: str = "Model1"
    bimodal_p: float = 0.85
    kappa: int = 0
    seed: int | tuple[int, ...] = 0   # a tuple is a derived stream key

    def __post_init__(self):
        if self.T < 1:
            raise ConfigError(f"T must be >= 1, got {self.T}")
        if not self.lam > 0:
            raise ConfigError(f"lambda must be > 0, got {self.lam}")
        if self.w_max < 1:
            raise ConfigError(f"w_max must be >= 1, got {self.w_max}")
        if self.d_max < 0:
            raise ConfigError(f"d_max must be >= 0, got {self.d_max}")
        if self.model not in ("Model1", "Model2"):
            raise ConfigError(f"unknown model {self.model!r}")
        if not 0.0 <= self.bimodal_p <= 1.0:
            raise ConfigError(f"bimodal_p must be in [0, 1], got {self.bimodal_p}")
        if self.kappa < 0:
            raise ConfigError(f"kappa must be >= 0, got {self.kappa}")

    @property
    def horizon(self) -> int:
        return self.T + self.kappa

    def to_dict(self) -> dict:
        return asdict(self)

    def with_seed(self, seed) -> "GenConfig":
        return replace(self, seed=seed)


def make_rng(seed) -> np.random.Generator:
    """``seed`` may be an int or a tuple of ints (a derived stream key)."""
    if isinstance(seed, np.random.SeedSequence):
        return np.random.default_rng(seed)
    key = list(seed) if isinstance(seed, (tuple, list)) else [seed]
    return np.random.default_rng(np.random.SeedSequence([int(k) for k in key]))


def round_half_away(x: np.ndarray) -> np.ndarray:
    return np.sign(x) * np.floor(np.abs(x) + 0.5)


def draw_tau(rng: np.random.Generator, n: int, cfg: GenConfig) -> np.ndarray:
    if cfg.model == "Model1":
        return rng.integers(0, cfg.d_max + 1, size=n)
    (m1, s1), (m2, s2) = MODEL2_PEAKS
    first = rng.random(n) < cfg.bimodal_p
    x = np.where(first, rng.normal(m1, s1, n), rng.normal(m2, s2, n))
    return np.maximum(round_half_away(x), 0).astype(np.int64)


def arrival_arrays(cfg: GenConfig, rng: np.random.Generator | None = None):
    """Raw draws: (release, tau, weight) arrays in arrival order."""
    if rng is None:
        rng = make_rng(cfg.seed)
    counts = rng.poisson(cfg.lam, size=cfg.horizon)
    n = int(counts.sum())
    release = np.repeat(np.arange(1, cfg.horizon + 1), counts)
    weight = rng.integers(1, cfg.w_max + 1, size=n)
    tau = draw_tau(rng, n, cfg)
    return release, tau, weight


def _build(cfg: GenConfig, release, deadline, weight) -> Instance:
    packets = [Packet(i, int(r), int(d), float(w))
               for i, (r, d, w) in enumerate(zip(release.tolist(), deadline.tolist(), weight.tolist()))]
    return Instance(cfg.horizon, packets, meta=cfg)


def generate(cfg: GenConfig, rng: np.random.Generator | None = None) -> Instance:
    release, tau, weight = arrival_arrays(cfg, rng)
    return _build(cfg, release, release + tau, weight)


def scenario1(instance: Instance) -> Instance:
    """Multiply every weight by its packet's absolute deadline."""
    packets = [Packet(p.id, p.r, p.d, p.w * p.d) for p in instance.packets]
    return Instance(instance.horizon, packets, meta=instance.meta)


def generate_agreeable(cfg: GenConfig, rng: np.random.Generator | None = None) -> Instance:
    """Model-1 draws with the deadline multiset re-dealt in release order.

    Sorted deadlines are handed to packets in (r, id) order and clamped up to
    the release, which keeps deadlines weakly increasing in release time.
    """
    release, tau, weight = arrival_arrays(replace(cfg, model="Model1"), rng)
    deadline = np.maximum(np.sort(release + tau), release)
    return _build(cfg, release, deadline, weight)


def is_agreeable(instance: Instance) -> bool:
    ds = [p.d for p in instance.packets]
    return all(a <= b for a, b in zip(ds, ds[1:]))
