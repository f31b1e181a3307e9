"""Gaussian-puff odour plume on a 2-D rectangle, sensors and misfit.

Puffs leave the source at a fixed rate, drift with a spatially uniform wind
(a base vector plus an Ornstein-Uhlenbeck perturbation shared by all puffs)
and spread as ``sigma^2(age) = sigma0^2 + diffusion * age``.  A puff whose
centre leaves the domain is dropped.  The concentration at a point is the sum
of isotropic 2-D Gaussian kernels, each cut off beyond five radii.
"""
from __future__ import annotations

import csv
import dataclasses
import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterator

import numpy as np

from .errors import OutOfDomainSource, ShapeMismatch

KERNEL_CUTOFF = 5.0  # radii


@dataclass(frozen=True)
class PlumeConfig:
    width: float = 100.0
    height: float = 50.0
    source: tuple[float, float] = (20.0, 25.0)
    release_rate: float = 10.0
    puff_mass: float = 1.0
    sigma0: float = 0.5
    diffusion: float = 0.1
    wind: tuple[float, float] = (2.0, 0.0)
    wind_noise: float = 0.5
    wind_tau: float = 2.0
    dt: float = 0.1
    duration: float = 50.0
    seed: int = 0
    n_sensors: int = 20
    sensor_seed: int = 0

    def __post_init__(self):
        object.__setattr__(self, "source", tuple(float(v) for v in self.source))
        object.__setattr__(self, "wind", tuple(float(v) for v in self.wind))
        if self.dt <= 0:
            raise ValueError("dt must be positive")
        if self.sigma0 <= 0:
            raise ValueError("sigma0 must be positive")
        if self.wind_noise < 0:
            raise ValueError("wind_noise must be non-negative")
        if self.wind_tau <= 0:
            raise ValueError("wind_tau must be positive")
        if not self.in_domain(*self.source):
            raise OutOfDomainSource(f"source {self.source} outside [0, {self.width}] x [0, {self.height}]")

    def in_domain(self, x, y) -> bool:
        return 0.0 <= x <= self.width and 0.0 <= y <= self.height

    @property
    def n_steps(self) -> int:
        return int(round(self.duration / self.dt))

    def with_source(self, x: float, y: float) -> "PlumeConfig":
        return dataclasses.replace(self, source=(float(x), float(y)))

    def to_dict(self) -> dict:
        d = dataclasses.asdict(self)
        d["source"] = list(self.source)
        d["wind"] = list(self.wind)
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "PlumeConfig":
        known = {f.name for f in dataclasses.fields(cls)}
        return cls(**{k: (tuple(v) if isinstance(v, list) else v) for k, v in d.items() if k in known})


def sensor_positions(config: PlumeConfig) -> np.ndarray:
    rng = np.random.default_rng(config.sensor_seed)
    return np.column_stack([rng.uniform(0.0, config.width, config.n_sensors),
                            rng.uniform(0.0, config.height, config.n_sensors)])


@dataclass
class SensorArray:
    positions: np.ndarray  # (n_sensors, 2)
    series: np.ndarray  # (n_sensors, n_steps)
    config: PlumeConfig | None = None
    times: np.ndarray = field(default=None)

    def __post_init__(self):
        self.positions = np.asarray(self.positions, dtype=float)
        self.series = np.asarray(self.series, dtype=float)
        if self.times is None:
            dt = self.config.dt if self.config else 1.0
            self.times = dt * np.arange(1, self.series.shape[1] + 1)
        if self.series.shape[0] != len(self.positions):
            raise ShapeMismatch("one series per sensor position required")


def puff_concentration(points: np.ndarray, centers: np.ndarray, sigma2: np.ndarray, mass: float) -> np.ndarray:
    """Summed Gaussian puff kernels at ``points`` (n, 2) from puffs at ``centers`` (m, 2)."""
    points = np.atleast_2d(points)
    if len(centers) == 0:
        return np.zeros(len(points))
    diff = points[:, None, :] - centers[None, :, :]
    r2 = np.einsum("nmk,nmk->nm", diff, diff)
    s2 = np.asarray(sigma2, dtype=float)[None, :]
    kern = np.where(r2 <= KERNEL_CUTOFF**2 * s2, np.exp(-r2 / (2.0 * s2)) / (2.0 * math.pi * s2), 0.0)
    return mass * kern.sum(axis=1)


@dataclass
class PuffState:
    step: int
    time: float
    centers: np.ndarray
    sigma2: np.ndarray
    released: int
    dropped: int
    wind: np.ndarray


def iter_puffs(config: PlumeConfig) -> Iterator[PuffState]:
    """Step the puff ensemble, yielding its state after every time step."""
    rng = np.random.default_rng(config.seed)
    dt, n_steps = config.dt, config.n_steps
    per_step = config.release_rate * dt
    total = int(math.floor(per_step * n_steps + 1e-9))
    centers = np.empty((total + 1, 2))
    birth = np.empty(total + 1)
    alive = np.zeros(total + 1, dtype=bool)
    base = np.array(config.wind)
    decay = math.exp(-dt / config.wind_tau)
    kick = config.wind_noise * math.sqrt(1.0 - decay**2)
    noise = config.wind_noise * rng.standard_normal(2)
    released = dropped = 0
    src = np.array(config.source)
    for k in range(n_steps):
        t = (k + 1) * dt
        due = int(math.floor(per_step * (k + 1) + 1e-9))
        while released < due:
            centers[released] = src
            birth[released] = k * dt
            alive[released] = True
            released += 1
        wind = base + noise
        idx = np.flatnonzero(alive)
        centers[idx] += wind * dt
        out = ((centers[idx, 0] < 0.0) | (centers[idx, 0] > config.width)
               | (centers[idx, 1] < 0.0) | (centers[idx, 1] > config.height))
        alive[idx[out]] = False
        dropped += int(out.sum())
        idx = idx[~out]
        yield PuffState(k, t, centers[idx].copy(), config.sigma0**2 + config.diffusion * (t - birth[idx]),
                        released, dropped, wind)
        noise = decay * noise + kick * rng.standard_normal(2)


def simulate(config: PlumeConfig, positions: np.ndarray | None = None) -> SensorArray:
    if positions is None:
        positions = sensor_positions(config)
    positions = np.asarray(positions, dtype=float)
    series = np.empty((len(positions), config.n_steps))
    for state in iter_puffs(config):
        series[:, state.step] = puff_concentration(positions, state.centers, state.sigma2, config.puff_mass)
    return SensorArray(positions, series, config)


def mean_rmse(truth: SensorArray, candidate: SensorArray) -> float:
    a, b = np.asarray(truth.series), np.asarray(candidate.series)
    if a.shape != b.shape:
        raise ShapeMismatch(f"sensor series shapes differ: {a.shape} vs {b.shape}")
    return float(np.mean(np.sqrt(np.mean((a - b) ** 2, axis=1))))


def pompy_workflow(params: dict, reference: SensorArray) -> float:
    """Misfit of a candidate source location against a reference recording.

    The candidate run reuses the reference configuration, wind seed and
    sensor layout; only the source moves.
    """
    cfg = reference.config
    x, y = float(params["source_x"]), float(params["source_y"])
    if not cfg.in_domain(x, y):
        raise OutOfDomainSource(f"candidate source ({x}, {y}) is outside the domain")
    return mean_rmse(reference, simulate(cfg.with_source(x, y), reference.positions))


# -- CSV bundle --------------------------------------------------------------

def save_sensor_array(arr: SensorArray, directory) -> Path:
    """Write ``positions.csv``, ``series.csv`` and ``config.json`` into ``directory``."""
    d = Path(directory)
    d.mkdir(parents=True, exist_ok=True)
    with open(d / "positions.csv", "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["sensor", "x", "y"])
        for i, (x, y) in enumerate(arr.positions):
            w.writerow([i, repr(float(x)), repr(float(y))])
    with open(d / "series.csv", "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["time"] + [f"s{i}" for i in range(len(arr.positions))])
        for k, t in enumerate(arr.times):
            w.writerow([repr(float(t))] + [repr(float(v)) for v in arr.series[:, k]])
    if arr.config is not None:
        (d / "config.json").write_text(json.dumps(arr.config.to_dict(), indent=2))
    return d


def load_sensor_array(directory) -> SensorArray:
    d = Path(directory)
    with open(d / "positions.csv", newline="") as fh:
        rows = list(csv.reader(fh))[1:]
    positions = np.array([[float(r[1]), float(r[2])] for r in rows])
    with open(d / "series.csv", newline="") as fh:
        rows = list(csv.reader(fh))[1:]
    times = np.array([float(r[0]) for r in rows])
    series = np.array([[float(v) for v in r[1:]] for r in rows]).T.reshape(len(positions), len(rows))
    cfg_path = d / "config.json"
    config = PlumeConfig.from_dict(json.loads(cfg_path.read_text())) if cfg_path.exists() else None
    return SensorArray(positions, series, config, times)
