"""Frequency grid, configurations, and oracle-labelled datasets.

Dataset file format (one file per split)::

    qfreq-dataset v1, M, N, gate_count, grid{f_min,f_max,delta_f}
    <config 0 frequencies, CSV, GHz, 6 decimal places>
    <config 0 gate errors, CSV, scientific notation, 6 significant digits>
    <config 1 frequencies ...>

Frequencies are listed in gate-index order (single-qubit idles first, then
coupler interaction frequencies).  Labels are quantized to the file's six
significant digits when the dataset is generated, so serialization round
trips are exact.
"""
from __future__ import annotations

import hashlib
import re
from dataclasses import dataclass, field
from functools import cached_property

import numpy as np

from .chip import ChipTopology
from .physics import ChipPhysics, gate_error_oracle

GRID_SNAP_TOL = 1e-9  # GHz; canonical grid values only


@dataclass(frozen=True)
class FrequencyGrid:
    """Discrete control grid F = {f_min + k*delta_f}."""

    f_min: float = 4.0    # GHz
    f_max: float = 4.8    # GHz
    delta_f: float = 0.002  # GHz (2 MHz control precision)

    def __post_init__(self):
        if not self.f_max > self.f_min:
            raise ValueError("f_max must exceed f_min")
        if not self.delta_f > 0:
            raise ValueError("delta_f must be positive")

    @property
    def n_values(self) -> int:
        return int((self.f_max - self.f_min) / self.delta_f + GRID_SNAP_TOL) + 1

    @cached_property
    def values(self) -> np.ndarray:
        v = self.f_min + np.arange(self.n_values) * self.delta_f
        v.setflags(write=False)
        return v

    def value(self, index: int) -> float:
        if not 0 <= index < self.n_values:
            raise ValueError(f"grid index {index} outside [0, {self.n_values})")
        return float(self.values[index])

    def index_of(self, freq: float) -> int:
        """Index of an exact grid frequency; rejects off-grid values."""
        k = int(round((freq - self.f_min) / self.delta_f))
        if 0 <= k < self.n_values and abs(freq - self.values[k]) <= GRID_SNAP_TOL:
            return k
        raise ValueError(f"frequency {freq} GHz is not on the grid")

    def snap(self, freq: float) -> float:
        """Nearest canonical grid value (for parsing serialized frequencies)."""
        k = int(round((freq - self.f_min) / self.delta_f))
        if not 0 <= k < self.n_values or abs(freq - self.values[k]) > self.delta_f / 2:
            raise ValueError(f"frequency {freq} GHz is outside the grid band")
        return float(self.values[k])


@dataclass(frozen=True)
class FrequencyConfig:
    """One idle frequency per qubit, one interaction frequency per coupler."""

    omega_single: np.ndarray
    omega_two: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "omega_single",
                           np.asarray(self.omega_single, dtype=np.float64))
        object.__setattr__(self, "omega_two",
                           np.asarray(self.omega_two, dtype=np.float64))

    def vector(self) -> np.ndarray:
        """Concatenated frequencies in gate-index order."""
        return np.concatenate([self.omega_single, self.omega_two])

    def with_coord(self, coord: int, value: float) -> "FrequencyConfig":
        """Copy with one gate's frequency replaced."""
        nq = len(self.omega_single)
        singles = self.omega_single.copy()
        twos = self.omega_two.copy()
        if coord < nq:
            singles[coord] = value
        else:
            twos[coord - nq] = value
        return FrequencyConfig(singles, twos)

    def digest(self) -> str:
        h = hashlib.sha256()
        h.update(np.ascontiguousarray(self.omega_single).astype("<f8").tobytes())
        h.update(np.ascontiguousarray(self.omega_two).astype("<f8").tobytes())
        return h.hexdigest()

    def __eq__(self, other):
        return (isinstance(other, FrequencyConfig)
                and np.array_equal(self.omega_single, other.omega_single)
                and np.array_equal(self.omega_two, other.omega_two))

    def __hash__(self):
        return hash((self.omega_single.tobytes(), self.omega_two.tobytes()))


@dataclass
class Dataset:
    """Labelled frequency configurations for one split."""

    configs: list[FrequencyConfig]
    labels: np.ndarray  # (n_configs, gate_count), quantized oracle errors
    split: str
    provenance: dict = field(default_factory=dict)

    def __len__(self) -> int:
        return len(self.configs)


def sample_config(topology: ChipTopology, grid: FrequencyGrid, rng_seed) -> FrequencyConfig:
    """Uniform independent draw of every gate frequency from the grid."""
    rng = np.random.default_rng(rng_seed)
    idx = rng.integers(0, grid.n_values, size=topology.gate_count)
    vec = grid.values[idx]
    return FrequencyConfig(vec[: topology.n_qubits], vec[topology.n_qubits:])


def quantize_labels(errors: np.ndarray) -> np.ndarray:
    """Round to the dataset file's 6 significant digits (format round-trip)."""
    flat = np.asarray(errors, dtype=np.float64).ravel()
    out = np.array([float(f"{v:.5e}") for v in flat])
    return out.reshape(np.shape(errors))


def generate_dataset(
    topology: ChipTopology,
    physics: ChipPhysics,
    grid: FrequencyGrid,
    n_train: int,
    n_test: int,
    seed: int,
) -> tuple[Dataset, Dataset]:
    """Sample and oracle-label disjoint train/test splits.

    Seed streams are disjoint per split and per config index; test configs
    colliding with a train config (compared exactly) are redrawn.
    """
    if n_train < 1 or n_test < 1:
        raise ValueError("n_train and n_test must be >= 1")
    train_cfgs = [sample_config(topology, grid, (seed, 0, i)) for i in range(n_train)]
    seen = {cfg.digest() for cfg in train_cfgs}
    test_cfgs = []
    for i in range(n_test):
        cfg = sample_config(topology, grid, (seed, 1, i))
        retry = 0
        while cfg.digest() in seen:
            retry += 1
            cfg = sample_config(topology, grid, (seed, 1, i, retry))
        test_cfgs.append(cfg)

    def label(cfgs):
        rows = [gate_error_oracle(physics, topology, c, grid) for c in cfgs]
        return quantize_labels(np.vstack(rows))

    prov = {
        "physics_seed": physics.seed,
        "dataset_seed": seed,
        "rows": topology.rows,
        "cols": topology.cols,
        "grid": (grid.f_min, grid.f_max, grid.delta_f),
    }
    train = Dataset(train_cfgs, label(train_cfgs), "train", dict(prov))
    test = Dataset(test_cfgs, label(test_cfgs), "test", dict(prov))
    return train, test


def normalize_values(values: np.ndarray, grid: FrequencyGrid) -> np.ndarray:
    """Affine map of the grid band into (0, 1): endpoints land on 0.01/0.99."""
    span = grid.f_max - grid.f_min
    if span <= 0:
        raise ValueError("degenerate frequency band")
    x = (np.asarray(values, dtype=np.float64) - grid.f_min) / span
    return 0.01 + 0.98 * x


def normalize(config: FrequencyConfig, grid: FrequencyGrid) -> np.ndarray:
    """Normalized full-chip input vector in gate-index order."""
    return normalize_values(config.vector(), grid)


def denormalize_values(x: np.ndarray, grid: FrequencyGrid) -> np.ndarray:
    span = grid.f_max - grid.f_min
    return grid.f_min + (np.asarray(x, dtype=np.float64) - 0.01) / 0.98 * span


# ---------------------------------------------------------------------------
# File I/O.
# ---------------------------------------------------------------------------

_HEADER_RE = re.compile(
    r"^qfreq-dataset v1, (\d+), (\d+), (\d+), "
    r"grid\{([-0-9.]+),([-0-9.]+),([-0-9.]+)\}$"
)


def save_dataset(ds: Dataset, path) -> None:
    rows = int(ds.provenance["rows"])
    cols = int(ds.provenance["cols"])
    f_min, f_max, delta_f = ds.provenance["grid"]
    gate_count = ds.labels.shape[1]
    lines = [
        f"qfreq-dataset v1, {rows}, {cols}, {gate_count}, "
        f"grid{{{f_min:.6f},{f_max:.6f},{delta_f:.6f}}}"
    ]
    for cfg, lab in zip(ds.configs, ds.labels):
        lines.append(",".join(f"{w:.6f}" for w in cfg.vector()))
        lines.append(",".join(f"{e:.5e}" for e in lab))
    with open(path, "w") as fh:
        fh.write("\n".join(lines) + "\n")


def load_dataset(path, split: str = "unknown") -> Dataset:
    with open(path) as fh:
        lines = [ln.rstrip("\n") for ln in fh]
    m = _HEADER_RE.match(lines[0])
    if not m:
        raise ValueError(f"{path}: not a qfreq-dataset v1 file")
    rows, cols, gate_count = int(m[1]), int(m[2]), int(m[3])
    grid = FrequencyGrid(float(m[4]), float(m[5]), float(m[6]))
    nq = rows * cols
    configs = []
    labels = []
    body = [ln for ln in lines[1:] if ln]
    if len(body) % 2:
        raise ValueError(f"{path}: dangling record")
    for i in range(0, len(body), 2):
        freqs = np.array([grid.snap(float(tok)) for tok in body[i].split(",")])
        errs = np.array([float(tok) for tok in body[i + 1].split(",")])
        if len(freqs) != gate_count or len(errs) != gate_count:
            raise ValueError(f"{path}: record {i // 2} has wrong arity")
        configs.append(FrequencyConfig(freqs[:nq], freqs[nq:]))
        labels.append(errs)
    prov = {"rows": rows, "cols": cols, "grid": (grid.f_min, grid.f_max, grid.delta_f)}
    return Dataset(configs, np.array(labels), split, prov)
