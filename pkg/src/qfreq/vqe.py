"""Noisy variational eigensolver harness on a transverse-field Ising line.

The ansatz follows the chip's coupler grouping patterns: each cycle
interleaves a parameterized single-qubit RY layer before every group layer
(A, B, C, D or E..H, empty groups acting as identity), and a final RY layer
closes the circuit.  Gates run on a density matrix; after every gate a
depolarizing channel applies the corresponding chip gate's error rate, so a
frequency configuration directly sets the circuit's noise.

Energies are measured against H = -sum Z_i Z_{i+1} - g * sum X_i on the line;
parameters are optimized by simultaneous-perturbation stochastic
approximation (SPSA) with seeded perturbations and a decaying schedule.
"""
from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np

from .chip import ChipTopology, GroupPattern, GROUP_FAMILIES

MAX_QUBITS = 8
ATOL_STATE = 1e-10
PSD_TOL = -1e-8


@dataclass(frozen=True)
class RotationLayer:
    """One RY rotation per line qubit; ``chip_gates[k]`` is the chip's
    single-qubit gate index supplying qubit k's noise rate."""

    param_offset: int
    chip_gates: tuple[int, ...]


@dataclass(frozen=True)
class EntanglingLayer:
    """CZ gates of one pattern group restricted to the line (a matching)."""

    group: str
    gates: tuple[tuple[int, int, int], ...]  # (local_i, local_j, chip_gate_index)


@dataclass(frozen=True)
class AnsatzCircuit:
    n_qubits: int
    qubit_line: tuple[int, ...]
    pattern_family: str
    depth_cycles: int
    layers: tuple[object, ...]
    n_params: int


def build_hea(
    topology: ChipTopology,
    qubit_line,
    pattern: GroupPattern,
    depth_cycles: int,
) -> AnsatzCircuit:
    """Hardware-efficient ansatz cycling through the pattern's four groups.

    Per cycle: RY, group0, RY, group1, RY, group2, RY, group3; a final RY
    layer ends the circuit, so the parameter count is
    ``n_qubits * (4 * depth_cycles + 1)``.  Group layers with no coupler on
    the line are kept as identity layers.  Rejects lines inducing no coupler.
    """
    qubit_line = tuple(int(q) for q in qubit_line)
    n = len(qubit_line)
    if n < 2 or n > MAX_QUBITS:
        raise ValueError(f"qubit line must have 2..{MAX_QUBITS} qubits, got {n}")
    if depth_cycles < 1:
        raise ValueError("depth_cycles must be >= 1")
    local = {q: k for k, q in enumerate(qubit_line)}
    nq = topology.n_qubits

    group_layers = {}
    n_line_couplers = 0
    for label, couplers in pattern.groups().items():
        gates = []
        for k in couplers:
            a, b = topology.couplers[k]
            if a in local and b in local:
                gates.append((local[a], local[b], nq + k))
                n_line_couplers += 1
        group_layers[label] = EntanglingLayer(group=label, gates=tuple(gates))
    if n_line_couplers == 0:
        raise ValueError("qubit line induces no coupler; nothing to entangle")

    chip_1q = tuple(qubit_line)
    layers: list[object] = []
    offset = 0
    for _ in range(depth_cycles):
        for label in GROUP_FAMILIES[pattern.family]:
            layers.append(RotationLayer(param_offset=offset, chip_gates=chip_1q))
            offset += n
            layers.append(group_layers[label])
    layers.append(RotationLayer(param_offset=offset, chip_gates=chip_1q))
    offset += n
    return AnsatzCircuit(
        n_qubits=n,
        qubit_line=qubit_line,
        pattern_family=pattern.family,
        depth_cycles=depth_cycles,
        layers=tuple(layers),
        n_params=offset,
    )


# ---------------------------------------------------------------------------
# Density-matrix simulation.
# ---------------------------------------------------------------------------

def _apply_unitary(rho: np.ndarray, u: np.ndarray, axes: tuple[int, ...], n: int) -> np.ndarray:
    """Conjugate rho (shape (2,)*2n) by a unitary acting on the given ket axes."""
    k = len(axes)
    u_t = u.reshape((2,) * (2 * k))
    in_axes = list(range(k, 2 * k))
    rho = np.tensordot(u_t, rho, axes=(in_axes, list(axes)))
    rho = np.moveaxis(rho, range(k), axes)
    bra_axes = [n + a for a in axes]
    rho = np.tensordot(u_t.conj(), rho, axes=(in_axes, bra_axes))
    return np.moveaxis(rho, range(k), bra_axes)

def _depolarize(rho: np.ndarray, rate: float, axes: tuple[int, ...], n: int) -> np.ndarray:
    """rho -> (1-p) rho + p * (I/2^k  x  tr_axes rho)."""
    if rate == 0.0:
        return rho
    if not 0.0 <= rate <= 1.0:
        raise ValueError(f"depolarizing rate {rate} outside [0, 1]")
    # Partial trace over the hit qubits (descending keeps lower axes stable).
    traced = rho
    m = n
    for a in sorted(axes, reverse=True):
        traced = np.trace(traced, axis1=a, axis2=m + a)
        m -= 1
    k = len(axes)
    srt = sorted(axes)
    rest = [q for q in range(n) if q not in axes]
    eye = np.eye(2 ** k).reshape((2,) * (2 * k)) / (2 ** k)
    mixed = np.tensordot(eye, traced, axes=0)
    # mixed axis order: eye kets, eye bras, remaining kets, remaining bras.
    dest = ([q for q in srt] + [n + q for q in srt]
            + [q for q in rest] + [n + q for q in rest])
    mixed = np.moveaxis(mixed, range(2 * n), dest)
    return (1.0 - rate) * rho + rate * mixed


def _ry(theta: float) -> np.ndarray:
    c, s = np.cos(theta / 2.0), np.sin(theta / 2.0)
    return np.array([[c, -s], [s, c]], dtype=complex)


_CZ = np.diag([1.0, 1.0, 1.0, -1.0]).astype(complex)


def check_state(rho_mat: np.ndarray, full: bool = True) -> None:
    """Density-matrix invariants: unit trace, Hermitian, PSD within tolerance."""
    tr = np.trace(rho_mat)
    if abs(tr - 1.0) > ATOL_STATE:
        raise ValueError(f"density matrix trace {tr} deviates from 1")
    if np.max(np.abs(rho_mat - rho_mat.conj().T)) > ATOL_STATE:
        raise ValueError("density matrix is not Hermitian")
    if full:
        min_eig = float(np.linalg.eigvalsh(rho_mat)[0])
        if min_eig < PSD_TOL:
            raise ValueError(f"density matrix has negative eigenvalue {min_eig}")


def simulate_noisy(
    circuit: AnsatzCircuit,
    params: np.ndarray,
    noise_rates: np.ndarray | None,
    validate: str = "final",
) -> np.ndarray:
    """Run the ansatz on a density matrix with per-gate depolarizing noise.

    ``noise_rates`` is the chip-wide gate-error vector (None means noiseless);
    each circuit gate looks up its chip gate's rate.  ``validate`` is
    "final", "steps" (check invariants after every gate and channel) or
    "none".  Returns the 2^n x 2^n density matrix.
    """
    params = np.asarray(params, dtype=float)
    if len(params) != circuit.n_params:
        raise ValueError(
            f"expected {circuit.n_params} parameters, got {len(params)}")
    n = circuit.n_qubits
    dim = 2 ** n
    rho = np.zeros((2,) * (2 * n), dtype=complex)
    rho[(0,) * (2 * n)] = 1.0

    def rate_of(chip_gate: int) -> float:
        if noise_rates is None:
            return 0.0
        return float(noise_rates[chip_gate])

    def step_check():
        if validate == "steps":
            check_state(rho.reshape(dim, dim), full=True)

    for layer in circuit.layers:
        if isinstance(layer, RotationLayer):
            for k in range(n):
                theta = params[layer.param_offset + k]
                rho = _apply_unitary(rho, _ry(theta), (k,), n)
                step_check()
                rho = _depolarize(rho, rate_of(layer.chip_gates[k]), (k,), n)
                step_check()
        else:
            for (i, j, chip_gate) in layer.gates:
                rho = _apply_unitary(rho, _CZ, (i, j), n)
                step_check()
                rho = _depolarize(rho, rate_of(chip_gate), (i, j), n)
                step_check()
    rho_mat = rho.reshape(dim, dim)
    if validate in ("final", "steps"):
        check_state(rho_mat, full=True)
    return rho_mat


# ---------------------------------------------------------------------------
# Hamiltonian and energy.
# ---------------------------------------------------------------------------

def tfim_hamiltonian(n: int, g: float) -> np.ndarray:
    """H = -sum_i Z_i Z_{i+1} - g sum_i X_i on an open line (dense, real)."""
    if n < 1 or n > MAX_QUBITS:
        raise ValueError(f"n must be in 1..{MAX_QUBITS}")
    dim = 2 ** n
    h = np.zeros((dim, dim))
    z = np.array([1.0, -1.0])
    for state in range(dim):
        bits = [(state >> (n - 1 - q)) & 1 for q in range(n)]
        diag = -sum(z[bits[i]] * z[bits[i + 1]] for i in range(n - 1))
        h[state, state] = diag
    for state in range(dim):
        for q in range(n):
            flipped = state ^ (1 << (n - 1 - q))
            h[state, flipped] += -g
    return h


def ground_energy(n: int, g: float) -> float:
    return float(np.linalg.eigvalsh(tfim_hamiltonian(n, g))[0])


def energy(rho_mat: np.ndarray, hamiltonian: np.ndarray) -> float:
    """tr(rho H); rejects dimension mismatches and non-real traces."""
    if rho_mat.shape != hamiltonian.shape:
        raise ValueError(
            f"dimension mismatch: state {rho_mat.shape} vs H {hamiltonian.shape}")
    val = complex(np.sum(rho_mat * hamiltonian.T))
    if abs(val.imag) > ATOL_STATE:
        raise ValueError(f"energy has non-negligible imaginary part {val.imag}")
    return float(val.real)


# ---------------------------------------------------------------------------
# SPSA minimization.
# ---------------------------------------------------------------------------

def run_vqe(
    circuit: AnsatzCircuit,
    hamiltonian: np.ndarray,
    noise_rates: np.ndarray | None,
    optimizer_seed: int = 0,
    budget: int = 500,
    first_step: float = 0.15,
    c: float = 0.1,
) -> dict:
    """Minimize the noisy circuit energy by SPSA.

    The gain sequence follows the standard (alpha, gamma) = (0.602, 0.101)
    schedule; the gain numerator is calibrated from a few initial gradient
    probes so the first update moves parameters by about ``first_step``
    radians.  ``budget`` counts energy evaluations.  Returns the best
    evaluated energy (not the last iterate), its parameters, and the
    evaluation trace.
    """
    if budget < 1:
        raise ValueError("budget must be >= 1")
    rng = np.random.default_rng(optimizer_seed)
    theta = rng.normal(0.0, 0.1, circuit.n_params)

    evals = 0
    trace: list[float] = []

    def f(p: np.ndarray) -> float:
        nonlocal evals
        evals += 1
        val = energy(simulate_noisy(circuit, p, noise_rates, validate="none"),
                     hamiltonian)
        trace.append(val)
        return val

    best_energy = f(theta)
    best_params = theta.copy()

    alpha, gamma = 0.602, 0.101
    n_iter = max(0, (budget - 1) // 2)
    big_a = 0.1 * n_iter

    # Calibrate the gain numerator from a few gradient-magnitude probes.
    n_cal = min(3, max(0, n_iter - 1))
    mags = []
    for _ in range(n_cal):
        delta = rng.choice((-1.0, 1.0), circuit.n_params)
        e_plus = f(theta + c * delta)
        e_minus = f(theta - c * delta)
        for val, point in ((e_plus, theta + c * delta), (e_minus, theta - c * delta)):
            if val < best_energy:
                best_energy, best_params = val, point.copy()
        mags.append(abs(e_plus - e_minus) / (2.0 * c))
    mean_mag = float(np.mean(mags)) if mags else 1.0
    a = first_step * (big_a + 1.0) ** alpha / max(mean_mag, 1e-8)

    k = 0
    while evals + 2 <= budget:
        a_k = a / (k + 1 + big_a) ** alpha
        c_k = c / (k + 1) ** gamma
        delta = rng.choice((-1.0, 1.0), circuit.n_params)
        e_plus = f(theta + c_k * delta)
        e_minus = f(theta - c_k * delta)
        for val, point in ((e_plus, theta + c_k * delta),
                           (e_minus, theta - c_k * delta)):
            if val < best_energy:
                best_energy = val
                best_params = point.copy()
        grad = (e_plus - e_minus) / (2.0 * c_k) * delta
        theta = theta - a_k * grad
        k += 1
    if evals < budget:
        final = f(theta)
        if final < best_energy:
            best_energy = final
            best_params = theta.copy()
    return {
        "best_params": best_params,
        "best_energy": best_energy,
        "trace": trace,
        "evaluations": evals,
    }


def vqe_report(
    circuit: AnsatzCircuit,
    g: float,
    noise_source: str,
    result: dict,
) -> dict:
    """JSON-ready summary of one VQE run."""
    return {
        "n": circuit.n_qubits,
        "g": g,
        "depth": circuit.depth_cycles,
        "pattern_family": circuit.pattern_family,
        "noise_source": noise_source,
        "best_energy": result["best_energy"],
        "exact_ground_energy": ground_energy(circuit.n_qubits, g),
        "evaluations": result["evaluations"],
    }


def save_vqe_reports(reports: list[dict], path) -> None:
    with open(path, "w") as fh:
        json.dump(reports, fh, indent=2)
        fh.write("\n")
