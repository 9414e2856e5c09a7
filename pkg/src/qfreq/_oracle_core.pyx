# cython: boundscheck=False, wraparound=False, cdivision=True, language_level=3
"""Compiled oracle kernels: the hot inner loops of dataset labelling and the
coordinate-descent frequency sweeps.

Arithmetic is kept term-for-term identical to ``physics.reference_gate_error``
(and the numpy fallback): same accumulation order, no FMA contraction (see
setup.py), so all three implementations agree bit for bit.
"""
from libc.math cimport sqrt, M_PI

import numpy as np
cimport numpy as cnp

cnp.import_array()

cdef double HALF_PI = M_PI / 2.0
cdef double COMPONENT_CAP = 1.0 - 1e-9
cdef double ERROR_CEILING = 1.0 - 1e-6
cdef double STRAY_CROSS_SCALE = 1e-3


cdef class CyOracle:
    """Gate-error evaluator bound to one chip's flattened tables."""

    cdef readonly object tables
    cdef double[::1] omega_max, inv_t1_base, tls_w0, tls_gamma, tls_depth, xt_w
    cdef cnp.int32_t[::1] tls_ptr, nb_ptr, nb_idx, nnn_ptr, nnn_idx
    cdef cnp.int32_t[::1] xt_ptr, xt_idx, cpl_a, cpl_b
    cdef int nq, nc
    cdef double t1q_us, t2q_us, t_1q, t_2q
    cdef double alpha_phi, alpha_dist, a_nn, a_nnn, gx2, gm2, beta, eps_floor

    name = "cython"

    def __init__(self, tables):
        self.tables = tables
        self.omega_max = np.ascontiguousarray(tables.omega_max, dtype=np.float64)
        self.inv_t1_base = np.ascontiguousarray(tables.inv_t1_base, dtype=np.float64)
        self.tls_ptr = np.ascontiguousarray(tables.tls_ptr, dtype=np.int32)
        self.tls_w0 = np.ascontiguousarray(tables.tls_w0, dtype=np.float64)
        self.tls_gamma = np.ascontiguousarray(tables.tls_gamma, dtype=np.float64)
        self.tls_depth = np.ascontiguousarray(tables.tls_depth, dtype=np.float64)
        self.nb_ptr = np.ascontiguousarray(tables.nb_ptr, dtype=np.int32)
        self.nb_idx = np.ascontiguousarray(tables.nb_idx, dtype=np.int32)
        self.nnn_ptr = np.ascontiguousarray(tables.nnn_ptr, dtype=np.int32)
        self.nnn_idx = np.ascontiguousarray(tables.nnn_idx, dtype=np.int32)
        self.xt_ptr = np.ascontiguousarray(tables.xt_ptr, dtype=np.int32)
        self.xt_idx = np.ascontiguousarray(tables.xt_idx, dtype=np.int32)
        self.xt_w = np.ascontiguousarray(tables.xt_w, dtype=np.float64)
        self.cpl_a = np.ascontiguousarray(tables.cpl_a, dtype=np.int32)
        self.cpl_b = np.ascontiguousarray(tables.cpl_b, dtype=np.int32)
        self.nq = tables.n_qubits
        self.nc = tables.n_couplers
        c = tables.constants
        self.t_1q = c.t_1q
        self.t_2q = c.t_2q
        self.t1q_us = c.t_1q * 1e-3
        self.t2q_us = c.t_2q * 1e-3
        self.alpha_phi = c.alpha_phi
        self.alpha_dist = c.alpha_dist
        self.a_nn = c.a_nn
        self.a_nnn = c.a_nnn
        self.gx2 = c.gamma_xt * c.gamma_xt
        self.gm2 = c.gamma_mw * c.gamma_mw
        self.beta = c.beta
        self.eps_floor = c.eps_floor

    # -- public API ----------------------------------------------------------

    def eval_all(self, omega_s, omega_t):
        cdef const double[::1] om_s = np.ascontiguousarray(omega_s, dtype=np.float64)
        cdef const double[::1] om_t = np.ascontiguousarray(omega_t, dtype=np.float64)
        cdef int d = self.nq + self.nc
        out = np.empty(d)
        cdef double[::1] o = out
        cdef int g
        with nogil:
            for g in range(d):
                o[g] = self._gate_error(g, &om_s[0], &om_t[0])
        return out

    def eval_gates(self, omega_s, omega_t, gates):
        cdef const double[::1] om_s = np.ascontiguousarray(omega_s, dtype=np.float64)
        cdef const double[::1] om_t = np.ascontiguousarray(omega_t, dtype=np.float64)
        cdef const cnp.int32_t[::1] gs = np.ascontiguousarray(gates, dtype=np.int32)
        cdef int n = gs.shape[0]
        out = np.empty(n)
        cdef double[::1] o = out
        cdef int i
        with nogil:
            for i in range(n):
                o[i] = self._gate_error(gs[i], &om_s[0], &om_t[0])
        return out

    def sweep(self, omega_s, omega_t, int coord, candidates, gates):
        """Errors of ``gates`` under every candidate value of one coordinate;
        shape (len(candidates), len(gates))."""
        buf_s = np.array(omega_s, dtype=np.float64)
        buf_t = np.array(omega_t, dtype=np.float64)
        cdef double[::1] om_s = buf_s
        cdef double[::1] om_t = buf_t
        cdef const double[::1] cand = np.ascontiguousarray(candidates, dtype=np.float64)
        cdef const cnp.int32_t[::1] gs = np.ascontiguousarray(gates, dtype=np.int32)
        cdef int k = cand.shape[0]
        cdef int n = gs.shape[0]
        out = np.empty((k, n))
        cdef double[:, ::1] o = out
        cdef int i, j
        cdef bint on_single = coord < self.nq
        cdef int local = coord if on_single else coord - self.nq
        with nogil:
            for i in range(k):
                if on_single:
                    om_s[local] = cand[i]
                else:
                    om_t[local] = cand[i]
                for j in range(n):
                    o[i, j] = self._gate_error(gs[j], &om_s[0], &om_t[0])
        return out

    # -- internals -------------------------------------------------------------

    cdef double _inv_t1(self, int q, double w) nogil:
        cdef double acc = self.inv_t1_base[q]
        cdef double dw, g2
        cdef int d
        for d in range(self.tls_ptr[q], self.tls_ptr[q + 1]):
            dw = w - self.tls_w0[d]
            g2 = self.tls_gamma[d] * self.tls_gamma[d]
            acc += self.tls_depth[d] * g2 / (dw * dw + g2)
        return acc

    cdef double _dephasing(self, int q, double w) nogil:
        cdef double wmax = self.omega_max[q]
        cdef double ratio = w / wmax
        cdef double r2 = ratio * ratio
        cdef double arg = 1.0 - r2 * r2
        if arg < 0.0:
            arg = 0.0
        return HALF_PI * ((wmax * wmax) / w) * sqrt(arg)

    cdef double _stray(self, int q, double w, const double* om_s, int ex1, int ex2) nogil:
        cdef double acc = 0.0
        cdef double dw
        cdef int d, j
        for d in range(self.nb_ptr[q], self.nb_ptr[q + 1]):
            j = self.nb_idx[d]
            if j == ex1 or j == ex2:
                continue
            dw = w - om_s[j]
            acc += self.a_nn * self.gx2 / (dw * dw + self.gx2)
        for d in range(self.nnn_ptr[q], self.nnn_ptr[q + 1]):
            j = self.nnn_idx[d]
            if j == ex1 or j == ex2:
                continue
            dw = w - om_s[j]
            acc += self.a_nnn * self.gx2 / (dw * dw + self.gx2)
        return acc

    cdef double _microwave(self, int q, double w, const double* om_s, int ex1, int ex2) nogil:
        cdef double acc = 0.0
        cdef double dw
        cdef int d, j
        for d in range(self.xt_ptr[q], self.xt_ptr[q + 1]):
            j = self.xt_idx[d]
            if j == ex1 or j == ex2:
                continue
            dw = om_s[j] - w
            acc += self.xt_w[d] * self.gm2 / (dw * dw + self.gm2)
        return acc

    cdef double _gate_error(self, int gate, const double* om_s, const double* om_t) nogil:
        cdef double e_dec = 0.0, e_dis = 0.0, e_str = 0.0, e_mw = 0.0
        cdef double w, excursion, total
        cdef int q, k, a, b, v, t
        if gate < self.nq:
            q = gate
            w = om_s[q]
            e_dec = self.t1q_us * self._inv_t1(q, w) \
                + (self.alpha_phi * self._dephasing(q, w)) * self.t_1q
            e_str = self._stray(q, w, om_s, q, -1)
            e_mw = self._microwave(q, w, om_s, q, -1)
        else:
            k = gate - self.nq
            a = self.cpl_a[k]
            b = self.cpl_b[k]
            w = om_t[k]
            for t in range(2):
                v = a if t == 0 else b
                e_dec += self.t2q_us * self._inv_t1(v, w) \
                    + (self.alpha_phi * self._dephasing(v, w)) * self.t_2q
                excursion = (om_s[v] - w) / 0.5
                e_dis += self.alpha_dist * (excursion * excursion)
                e_str += self._stray(v, w, om_s, a, b)
                e_mw += self._microwave(v, w, om_s, a, b)
        e_dec = e_dec * (1.0 + self.beta * e_str / (e_str + STRAY_CROSS_SCALE))
        if e_dec > COMPONENT_CAP:
            e_dec = COMPONENT_CAP
        if e_dis > COMPONENT_CAP:
            e_dis = COMPONENT_CAP
        if e_str > COMPONENT_CAP:
            e_str = COMPONENT_CAP
        if e_mw > COMPONENT_CAP:
            e_mw = COMPONENT_CAP
        total = 1.0
        total *= 1.0 - e_dec
        total *= 1.0 - e_dis
        total *= 1.0 - e_str
        total *= 1.0 - e_mw
        total = 1.0 - total
        if total < self.eps_floor:
            total = self.eps_floor
        if total > ERROR_CEILING:
            total = ERROR_CEILING
        return total
