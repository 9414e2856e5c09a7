"""Synthetic ground-truth gate-error oracle for a tunable-frequency chip.

Five error mechanisms feed every gate error:

* relaxation: ``1/T1(w)`` is a background rate plus Lorentzian dips at
  two-level-system (TLS) defect frequencies;
* dephasing: proportional to the flux slope ``|dw/dphi|`` of the transmon-like
  spectrum ``w(phi) = w_max * sqrt(|cos(pi*phi)|)``;
* distortion (two-qubit gates only): quadratic in the idle-to-interaction
  frequency excursion of each gate qubit;
* stray coupling: Lorentzian resonance penalties against neighbour and
  next-neighbour spectators parked at their idle frequencies;
* microwave crosstalk: Lorentzian penalties weighted by a sampled crosstalk
  matrix whose support reaches beyond next-neighbours.

Components combine as ``1 - prod(1 - e_k)`` after the decoherence term picks
up a multiplicative cross-term driven by the stray-coupling error, so the
total is deliberately not a linear function of the mechanisms.

Frequencies are GHz, times are carried in both ns (gate durations) and us
(T1); errors are dimensionless probabilities in ``[eps_floor, 1)``.
"""
from __future__ import annotations

import json
import math
from dataclasses import dataclass, field, asdict
from typing import TYPE_CHECKING

import numpy as np

from .chip import ChipTopology

if TYPE_CHECKING:  # pragma: no cover - import cycle guard, types only
    from .dataset import FrequencyConfig, FrequencyGrid

HALF_PI = math.pi / 2.0
DEFAULT_BAND = (4.0, 4.8)  # GHz
COMPONENT_CAP = 1.0 - 1e-9
ERROR_CEILING = 1.0 - 1e-6
STRAY_CROSS_SCALE = 1e-3  # saturation scale of the decoherence cross-term


@dataclass(frozen=True)
class OracleConstants:
    """Tuning constants of the synthetic oracle (defaults target a median
    random-configuration gate error inside [1e-3, 1e-1])."""

    t_1q: float = 25.0       # single-qubit gate duration, ns
    t_2q: float = 40.0       # two-qubit gate duration, ns
    alpha_phi: float = 1.2e-5  # dephasing scale per (GHz/flux unit) per ns
    alpha_dist: float = 2e-3
    a_nn: float = 3e-2
    a_nnn: float = 6e-3
    gamma_xt: float = 0.015  # GHz
    gamma_mw: float = 0.030  # GHz
    beta: float = 0.5
    eps_floor: float = 1e-4


@dataclass(frozen=True)
class QubitPhysics:
    """Flux spectrum and relaxation landscape of one qubit."""

    omega_max: float                 # sweet-spot frequency, GHz
    t1_base: float                   # background relaxation time, us
    tls: tuple[tuple[float, float, float], ...]  # (center GHz, width GHz, depth 1/us)


@dataclass(frozen=True)
class ChipPhysics:
    """Sampled per-qubit physics plus the microwave-crosstalk matrix."""

    seed: int
    qubits: tuple[QubitPhysics, ...]
    crosstalk: tuple[tuple[int, int, float], ...]  # (i, j, weight), i < j
    constants: OracleConstants = field(default_factory=OracleConstants)

    @property
    def crosstalk_pairs(self) -> tuple[tuple[int, int], ...]:
        return tuple((i, j) for i, j, _ in self.crosstalk)

    def crosstalk_matrix(self) -> np.ndarray:
        """Dense symmetric crosstalk matrix (zero diagonal)."""
        n = len(self.qubits)
        x = np.zeros((n, n))
        for i, j, w in self.crosstalk:
            x[i, j] = w
            x[j, i] = w
        return x


def sample_chip_physics(
    topology: ChipTopology,
    seed: int,
    band: tuple[float, float] = DEFAULT_BAND,
    constants: OracleConstants | None = None,
) -> ChipPhysics:
    """Draw a deterministic synthetic chip.

    Per qubit: sweet spot uniform in [f_max, f_max + 0.3] GHz and 2-4 TLS
    defects with centers uniform in the band, widths in [5, 20] MHz and
    depths in [0.05, 0.3] 1/us.  Crosstalk weights cover every neighbour and
    next-neighbour pair plus a seeded 5% of longer-range pairs, with
    magnitude falling off as 1/distance^2.
    """
    f_min, f_max = band
    rng = np.random.default_rng(seed)
    qubits = []
    for _ in range(topology.n_qubits):
        omega_max = float(rng.uniform(f_max, f_max + 0.3))
        n_tls = int(rng.integers(2, 5))
        tls = tuple(
            (
                float(rng.uniform(f_min, f_max)),
                float(rng.uniform(0.005, 0.020)),
                float(rng.uniform(0.05, 0.30)),
            )
            for _ in range(n_tls)
        )
        qubits.append(QubitPhysics(omega_max=omega_max, t1_base=80.0, tls=tls))

    short_range = sorted(set(topology.neighbor_pairs) | set(topology.next_neighbor_pairs))
    entries = []
    for a, b in short_range:
        entries.append((a, b, _decayed_weight(rng, topology, a, b)))
    short = set(short_range)
    nq = topology.n_qubits
    for a in range(nq):
        for b in range(a + 1, nq):
            if (a, b) in short:
                continue
            if rng.random() < 0.05:
                entries.append((a, b, _decayed_weight(rng, topology, a, b)))
    return ChipPhysics(
        seed=seed,
        qubits=tuple(qubits),
        crosstalk=tuple(sorted(entries)),
        constants=constants if constants is not None else OracleConstants(),
    )


def _decayed_weight(rng, topology: ChipTopology, a: int, b: int) -> float:
    ra, ca = topology.site(a)
    rb, cb = topology.site(b)
    dist_sq = (ra - rb) ** 2 + (ca - cb) ** 2
    return float(rng.uniform(5e-4, 2e-3)) / dist_sq


def dephasing_sensitivity(omega: float, omega_max: float) -> float:
    """Magnitude of dw/dphi along w(phi) = w_max*sqrt(|cos(pi*phi)|).

    Closed form: (pi/2) * (w_max^2 / w) * sqrt(1 - (w/w_max)^4).  Zero at the
    sweet spot and strictly decreasing in omega on (0, omega_max].
    """
    if omega <= 0.0 or omega > omega_max:
        raise ValueError(f"omega must lie in (0, {omega_max}], got {omega}")
    ratio = omega / omega_max
    r2 = ratio * ratio
    arg = 1.0 - r2 * r2
    if arg < 0.0:
        arg = 0.0
    return HALF_PI * ((omega_max * omega_max) / omega) * math.sqrt(arg)


# ---------------------------------------------------------------------------
# Flat tables consumed by the evaluation kernels (compiled or numpy).
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class OracleTables:
    """Topology + physics flattened into CSR-style arrays."""

    n_qubits: int
    n_couplers: int
    omega_max: np.ndarray      # f8[nq]
    inv_t1_base: np.ndarray    # f8[nq], 1/us
    tls_ptr: np.ndarray        # i4[nq+1]
    tls_w0: np.ndarray         # f8
    tls_gamma: np.ndarray      # f8
    tls_depth: np.ndarray      # f8
    nb_ptr: np.ndarray         # i4[nq+1]
    nb_idx: np.ndarray         # i4
    nnn_ptr: np.ndarray
    nnn_idx: np.ndarray
    xt_ptr: np.ndarray
    xt_idx: np.ndarray
    xt_w: np.ndarray           # f8, same layout as xt_idx
    cpl_a: np.ndarray          # i4[nc]
    cpl_b: np.ndarray          # i4[nc]
    # coordinate (gate index) -> gates whose error depends on it
    dep_ptr: np.ndarray        # i4[d+1]
    dep_idx: np.ndarray        # i4
    constants: OracleConstants

    @property
    def gate_count(self) -> int:
        return self.n_qubits + self.n_couplers

    def dependents(self, coord: int) -> np.ndarray:
        return self.dep_idx[self.dep_ptr[coord]:self.dep_ptr[coord + 1]]


def _csr(lists) -> tuple[np.ndarray, np.ndarray]:
    ptr = np.zeros(len(lists) + 1, dtype=np.int32)
    flat = []
    for i, items in enumerate(lists):
        flat.extend(items)
        ptr[i + 1] = len(flat)
    return ptr, np.asarray(flat, dtype=np.int32)


def build_oracle_tables(topology: ChipTopology, physics: ChipPhysics) -> OracleTables:
    nq = topology.n_qubits
    if len(physics.qubits) != nq:
        raise ValueError("physics does not match topology qubit count")

    tls_lists = [q.tls for q in physics.qubits]
    tls_ptr = np.zeros(nq + 1, dtype=np.int32)
    w0, gam, dep = [], [], []
    for i, tls in enumerate(tls_lists):
        for c, g, d in tls:
            w0.append(c)
            gam.append(g)
            dep.append(d)
        tls_ptr[i + 1] = len(w0)

    xt_lists: list[list[tuple[int, float]]] = [[] for _ in range(nq)]
    for i, j, w in physics.crosstalk:
        xt_lists[i].append((j, w))
        xt_lists[j].append((i, w))
    xt_lists = [sorted(lst) for lst in xt_lists]
    xt_ptr, xt_idx = _csr([[j for j, _ in lst] for lst in xt_lists])
    xt_w = np.asarray([w for lst in xt_lists for _, w in lst], dtype=np.float64)

    nb_ptr, nb_idx = _csr(topology.neighbors_of)
    nnn_ptr, nnn_idx = _csr(topology.next_neighbors_of)

    cpl_a = np.asarray([a for a, _ in topology.couplers], dtype=np.int32)
    cpl_b = np.asarray([b for _, b in topology.couplers], dtype=np.int32)

    # Dependency lists. The idle frequency of qubit q feeds its own
    # single-qubit gate, the single-qubit gates of everything that sees q as a
    # spectator or crosstalk aggressor, and every two-qubit gate with an
    # endpoint in that same set (plus q's own couplers via distortion).  A
    # coupler frequency feeds only its own gate.
    spectators: list[set[int]] = []
    for q in range(nq):
        s = set(topology.neighbors_of[q]) | set(topology.next_neighbors_of[q])
        s |= {j for j, _ in xt_lists[q]}
        spectators.append(s)

    dep_lists: list[list[int]] = []
    for q in range(nq):
        affected = {q} | spectators[q]
        gates = {g for g in affected}
        for k, (a, b) in enumerate(topology.couplers):
            if a in affected or b in affected:
                gates.add(nq + k)
        dep_lists.append(sorted(gates))
    for k in range(topology.n_couplers):
        dep_lists.append([nq + k])
    dep_ptr, dep_idx = _csr(dep_lists)

    return OracleTables(
        n_qubits=nq,
        n_couplers=topology.n_couplers,
        omega_max=np.asarray([q.omega_max for q in physics.qubits]),
        inv_t1_base=np.asarray([1.0 / q.t1_base for q in physics.qubits]),
        tls_ptr=tls_ptr,
        tls_w0=np.asarray(w0, dtype=np.float64),
        tls_gamma=np.asarray(gam, dtype=np.float64),
        tls_depth=np.asarray(dep, dtype=np.float64),
        nb_ptr=nb_ptr,
        nb_idx=nb_idx,
        nnn_ptr=nnn_ptr,
        nnn_idx=nnn_idx,
        xt_ptr=xt_ptr,
        xt_idx=xt_idx,
        xt_w=xt_w,
        cpl_a=cpl_a,
        cpl_b=cpl_b,
        dep_ptr=dep_ptr,
        dep_idx=dep_idx,
        constants=physics.constants,
    )


# ---------------------------------------------------------------------------
# Reference scalar implementation. This is the readable source of truth; the
# compiled and numpy kernels must reproduce it bit for bit.
# ---------------------------------------------------------------------------

def _combine(constants: OracleConstants, e_dec, e_dis, e_str, e_mw) -> float:
    parts = [min(v, COMPONENT_CAP) for v in (e_dec, e_dis, e_str, e_mw)]
    total = 1.0
    for p in parts:
        total *= 1.0 - p
    total = 1.0 - total
    if total < constants.eps_floor:
        total = constants.eps_floor
    if total > ERROR_CEILING:
        total = ERROR_CEILING
    return total


def _reference_components(tables: OracleTables, omega_s, omega_t, gate: int):
    """Combined components (e_dec with cross-term, e_dist, e_stray, e_mw)."""
    c = tables.constants
    nq = tables.n_qubits
    gx2 = c.gamma_xt * c.gamma_xt
    gm2 = c.gamma_mw * c.gamma_mw

    def inv_t1(q: int, w: float) -> float:
        acc = float(tables.inv_t1_base[q])
        for d in range(tables.tls_ptr[q], tables.tls_ptr[q + 1]):
            dw = w - tables.tls_w0[d]
            g2 = tables.tls_gamma[d] * tables.tls_gamma[d]
            acc += tables.tls_depth[d] * g2 / (dw * dw + g2)
        return acc

    def stray(q: int, w: float, exclude: tuple[int, ...]) -> float:
        acc = 0.0
        for d in range(tables.nb_ptr[q], tables.nb_ptr[q + 1]):
            j = int(tables.nb_idx[d])
            if j in exclude:
                continue
            dw = w - omega_s[j]
            acc += c.a_nn * gx2 / (dw * dw + gx2)
        for d in range(tables.nnn_ptr[q], tables.nnn_ptr[q + 1]):
            j = int(tables.nnn_idx[d])
            if j in exclude:
                continue
            dw = w - omega_s[j]
            acc += c.a_nnn * gx2 / (dw * dw + gx2)
        return acc

    def microwave(q: int, w: float, exclude: tuple[int, ...]) -> float:
        acc = 0.0
        for d in range(tables.xt_ptr[q], tables.xt_ptr[q + 1]):
            j = int(tables.xt_idx[d])
            if j in exclude:
                continue
            dw = omega_s[j] - w
            acc += tables.xt_w[d] * gm2 / (dw * dw + gm2)
        return acc

    if gate < nq:
        q = gate
        w = float(omega_s[q])
        e_dec = c.t_1q * 1e-3 * inv_t1(q, w) + c.alpha_phi * dephasing_sensitivity(
            w, float(tables.omega_max[q])) * c.t_1q
        e_dis = 0.0
        e_str = stray(q, w, (q,))
        e_mw = microwave(q, w, (q,))
    else:
        k = gate - nq
        a = int(tables.cpl_a[k])
        b = int(tables.cpl_b[k])
        w = float(omega_t[k])
        e_dec = 0.0
        e_dis = 0.0
        e_str = 0.0
        e_mw = 0.0
        for v in (a, b):
            e_dec += c.t_2q * 1e-3 * inv_t1(v, w) + c.alpha_phi * dephasing_sensitivity(
                w, float(tables.omega_max[v])) * c.t_2q
            excursion = (float(omega_s[v]) - w) / 0.5
            e_dis += c.alpha_dist * (excursion * excursion)
            e_str += stray(v, w, (a, b))
            e_mw += microwave(v, w, (a, b))
    e_dec = e_dec * (1.0 + c.beta * e_str / (e_str + STRAY_CROSS_SCALE))
    return e_dec, e_dis, e_str, e_mw


def reference_gate_error(tables: OracleTables, omega_s, omega_t, gate: int) -> float:
    return _combine(tables.constants, *_reference_components(tables, omega_s, omega_t, gate))


# ---------------------------------------------------------------------------
# Public oracle entry points.
# ---------------------------------------------------------------------------

def _tables_cache(physics: ChipPhysics, topology: ChipTopology) -> OracleTables:
    cache = getattr(physics, "_tables_cache", None)
    if cache is None:
        cache = {}
        object.__setattr__(physics, "_tables_cache", cache)
    key = (topology.rows, topology.cols, topology.couplers)
    if key not in cache:
        cache[key] = build_oracle_tables(topology, physics)
    return cache[key]


def validate_config(topology: ChipTopology, config: "FrequencyConfig",
                    grid: "FrequencyGrid | None") -> None:
    if len(config.omega_single) != topology.n_qubits:
        raise ValueError("config omega_single length does not match topology")
    if len(config.omega_two) != topology.n_couplers:
        raise ValueError("config omega_two length does not match topology")
    if grid is not None:
        for w in config.omega_single:
            grid.index_of(float(w))
        for w in config.omega_two:
            grid.index_of(float(w))


def gate_error_oracle(
    physics: ChipPhysics,
    topology: ChipTopology,
    config: "FrequencyConfig",
    grid: "FrequencyGrid | None" = None,
) -> np.ndarray:
    """Ground-truth error of every gate under one frequency configuration.

    Returns an array of length ``3MN - M - N`` with entries in
    ``[eps_floor, 1)``.  Deterministic; rejects off-grid or out-of-band
    frequencies when a grid is supplied.
    """
    from .kernels import make_kernel

    validate_config(topology, config, grid)
    tables = _tables_cache(physics, topology)
    kernel = getattr(physics, "_kernel_cache", None)
    if kernel is None or kernel.tables is not tables:
        kernel = make_kernel(tables)
        object.__setattr__(physics, "_kernel_cache", kernel)
    return kernel.eval_all(
        np.asarray(config.omega_single, dtype=np.float64),
        np.asarray(config.omega_two, dtype=np.float64),
    )


def oracle_components(
    physics: ChipPhysics,
    topology: ChipTopology,
    config: "FrequencyConfig",
    gate: int,
) -> dict[str, float]:
    """Per-mechanism combined components of one gate's error (diagnostics)."""
    tables = _tables_cache(physics, topology)
    e_dec, e_dis, e_str, e_mw = _reference_components(
        tables, config.omega_single, config.omega_two, gate)
    return {
        "decoherence": e_dec,
        "distortion": e_dis,
        "stray": e_str,
        "microwave": e_mw,
        "total": _combine(tables.constants, e_dec, e_dis, e_str, e_mw),
    }


# ---------------------------------------------------------------------------
# Serialization.
# ---------------------------------------------------------------------------

def physics_to_json(physics: ChipPhysics) -> str:
    doc = {
        "seed": physics.seed,
        "constants": asdict(physics.constants),
        "qubits": [
            {
                "omega_max": q.omega_max,
                "t1_base": q.t1_base,
                "tls": [{"w0": w0, "gamma": g, "depth": d} for w0, g, d in q.tls],
            }
            for q in physics.qubits
        ],
        "crosstalk": [[i, j, w] for i, j, w in physics.crosstalk],
    }
    return json.dumps(doc, indent=2) + "\n"


def physics_from_json(text: str) -> ChipPhysics:
    doc = json.loads(text)
    qubits = tuple(
        QubitPhysics(
            omega_max=float(q["omega_max"]),
            t1_base=float(q["t1_base"]),
            tls=tuple((float(t["w0"]), float(t["gamma"]), float(t["depth"]))
                      for t in q["tls"]),
        )
        for q in doc["qubits"]
    )
    return ChipPhysics(
        seed=int(doc["seed"]),
        qubits=qubits,
        crosstalk=tuple((int(i), int(j), float(w)) for i, j, w in doc["crosstalk"]),
        constants=OracleConstants(**doc["constants"]),
    )
