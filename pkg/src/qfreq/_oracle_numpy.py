"""Pure-numpy oracle kernels (fallback when the compiled extension is absent).

The arithmetic mirrors ``physics.reference_gate_error`` term by term so that
results are bit-identical to both the reference and the Cython kernel: every
sum is accumulated in the same order, only vectorized across the candidate
axis.
"""
from __future__ import annotations

import numpy as np

from .physics import (
    COMPONENT_CAP,
    ERROR_CEILING,
    HALF_PI,
    STRAY_CROSS_SCALE,
    OracleTables,
)


class NumpyOracle:
    """Evaluates gate errors for a batch of configurations at once."""

    name = "numpy"

    def __init__(self, tables: OracleTables):
        self.tables = tables

    # -- public API (matches the compiled kernel) ---------------------------

    def eval_all(self, omega_s: np.ndarray, omega_t: np.ndarray) -> np.ndarray:
        gates = np.arange(self.tables.gate_count, dtype=np.int32)
        return self.eval_gates(omega_s, omega_t, gates)

    def eval_gates(self, omega_s, omega_t, gates) -> np.ndarray:
        out = self._eval(omega_s[None, :], omega_t[None, :], np.asarray(gates))
        return out[0]

    def sweep(self, omega_s, omega_t, coord: int, candidates, gates) -> np.ndarray:
        """Errors of ``gates`` for every candidate value of one coordinate.

        Returns an array of shape (len(candidates), len(gates)).
        """
        candidates = np.asarray(candidates, dtype=np.float64)
        k = len(candidates)
        nq = self.tables.n_qubits
        om_s = np.repeat(omega_s[None, :], k, axis=0)
        om_t = np.repeat(omega_t[None, :], k, axis=0)
        if coord < nq:
            om_s[:, coord] = candidates
        else:
            om_t[:, coord - nq] = candidates
        return self._eval(om_s, om_t, np.asarray(gates))

    # -- internals -----------------------------------------------------------

    def _inv_t1(self, q: int, w: np.ndarray) -> np.ndarray:
        t = self.tables
        acc = np.full_like(w, t.inv_t1_base[q])
        for d in range(t.tls_ptr[q], t.tls_ptr[q + 1]):
            dw = w - t.tls_w0[d]
            g2 = t.tls_gamma[d] * t.tls_gamma[d]
            acc += t.tls_depth[d] * g2 / (dw * dw + g2)
        return acc

    def _dephasing(self, q: int, w: np.ndarray) -> np.ndarray:
        wmax = self.tables.omega_max[q]
        ratio = w / wmax
        r2 = ratio * ratio
        arg = 1.0 - r2 * r2
        np.maximum(arg, 0.0, out=arg)
        return HALF_PI * ((wmax * wmax) / w) * np.sqrt(arg)

    def _stray(self, q: int, w, omega_s, exclude) -> np.ndarray:
        t = self.tables
        c = t.constants
        gx2 = c.gamma_xt * c.gamma_xt
        acc = np.zeros_like(w)
        for d in range(t.nb_ptr[q], t.nb_ptr[q + 1]):
            j = int(t.nb_idx[d])
            if j in exclude:
                continue
            dw = w - omega_s[:, j]
            acc += c.a_nn * gx2 / (dw * dw + gx2)
        for d in range(t.nnn_ptr[q], t.nnn_ptr[q + 1]):
            j = int(t.nnn_idx[d])
            if j in exclude:
                continue
            dw = w - omega_s[:, j]
            acc += c.a_nnn * gx2 / (dw * dw + gx2)
        return acc

    def _microwave(self, q: int, w, omega_s, exclude) -> np.ndarray:
        t = self.tables
        c = t.constants
        gm2 = c.gamma_mw * c.gamma_mw
        acc = np.zeros_like(w)
        for d in range(t.xt_ptr[q], t.xt_ptr[q + 1]):
            j = int(t.xt_idx[d])
            if j in exclude:
                continue
            dw = omega_s[:, j] - w
            acc += t.xt_w[d] * gm2 / (dw * dw + gm2)
        return acc

    def _eval(self, omega_s, omega_t, gates) -> np.ndarray:
        t = self.tables
        c = t.constants
        nq = t.n_qubits
        k = omega_s.shape[0]
        out = np.empty((k, len(gates)))
        for col, gate in enumerate(gates):
            gate = int(gate)
            if gate < nq:
                q = gate
                w = omega_s[:, q]
                e_dec = (c.t_1q * 1e-3) * self._inv_t1(q, w) \
                    + (c.alpha_phi * self._dephasing(q, w)) * c.t_1q
                e_dis = np.zeros_like(w)
                e_str = self._stray(q, w, omega_s, (q,))
                e_mw = self._microwave(q, w, omega_s, (q,))
            else:
                kk = gate - nq
                a = int(t.cpl_a[kk])
                b = int(t.cpl_b[kk])
                w = omega_t[:, kk]
                e_dec = np.zeros_like(w)
                e_dis = np.zeros_like(w)
                e_str = np.zeros_like(w)
                e_mw = np.zeros_like(w)
                for v in (a, b):
                    e_dec += (c.t_2q * 1e-3) * self._inv_t1(v, w) \
                        + (c.alpha_phi * self._dephasing(v, w)) * c.t_2q
                    excursion = (omega_s[:, v] - w) / 0.5
                    e_dis += c.alpha_dist * (excursion * excursion)
                    e_str += self._stray(v, w, omega_s, (a, b))
                    e_mw += self._microwave(v, w, omega_s, (a, b))
            e_dec = e_dec * (1.0 + c.beta * e_str / (e_str + STRAY_CROSS_SCALE))
            total = 1.0 - (
                (1.0 - np.minimum(e_dec, COMPONENT_CAP))
                * (1.0 - np.minimum(e_dis, COMPONENT_CAP))
                * (1.0 - np.minimum(e_str, COMPONENT_CAP))
                * (1.0 - np.minimum(e_mw, COMPONENT_CAP))
            )
            np.clip(total, c.eps_floor, ERROR_CEILING, out=total)
            out[:, col] = total
        return out
