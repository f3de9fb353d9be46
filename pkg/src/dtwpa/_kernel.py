"""Compiled inner loop of the transient solver.

Unknowns are node fluxes Phi (V = dPhi/dt).  The circuit obeys

    M Phi'' + G Phi' + K Phi + f(Phi) = u(t)

with M the capacitance matrix, G the port/resistor conductances, K the
inverse-inductance matrix and f the junction currents Ic sin(dPhi/phi0).
Trapezoidal integration of the first-order form gives, per step,

    (A0) x + f(x) = B0 Phi_k + M4 V_k + u_k + u_{k+1} - f(Phi_k)

with A0 = 4M/dt^2 + 2G/dt + K, B0 = 4M/dt^2 + 2G/dt - K, M4 = 4M/dt,
solved for x = Phi_{k+1} by Newton iteration.  All matrices are stored as
symmetric band arrays ``band[i, j - i + bw]``.
"""
from __future__ import annotations

import numpy as np
from numba import njit

STATUS_OK = 0
STATUS_NEWTON = 1
STATUS_RUNAWAY = 2
STATUS_PIVOT = 3


@njit(cache=True)
def _band_matvec(band, x, bw, out):
    n = x.size
    for i in range(n):
        acc = 0.0
        lo = max(0, i - bw)
        hi = min(n, i + bw + 1)
        for j in range(lo, hi):
            acc += band[i, j - i + bw] * x[j]
        out[i] = acc


@njit(cache=True)
def _band_lu(a, bw):
    """In-place LU without pivoting; returns the smallest |pivot|."""
    n = a.shape[0]
    smallest = np.inf
    for k in range(n):
        piv = a[k, bw]
        if abs(piv) < smallest:
            smallest = abs(piv)
        if piv == 0.0:
            return 0.0
        hi = min(n, k + bw + 1)
        for i in range(k + 1, hi):
            l = a[i, k - i + bw] / piv
            a[i, k - i + bw] = l
            if l != 0.0:
                for j in range(k + 1, hi):
                    a[i, j - i + bw] -= l * a[k, j - k + bw]
    return smallest


@njit(cache=True)
def _band_solve(a, bw, b):
    n = b.size
    for i in range(n):
        lo = max(0, i - bw)
        acc = b[i]
        for j in range(lo, i):
            acc -= a[i, j - i + bw] * b[j]
        b[i] = acc
    for i in range(n - 1, -1, -1):
        hi = min(n, i + bw + 1)
        acc = b[i]
        for j in range(i + 1, hi):
            acc -= a[i, j - i + bw] * b[j]
        b[i] = acc / a[i, bw]


@njit(cache=True)
def _source(t, node, amp, omega, phase, ramp_time, n, out):
    for i in range(n):
        out[i] = 0.0
    if ramp_time > 0.0 and t < ramp_time:
        r = 0.5 - 0.5 * np.cos(np.pi * t / ramp_time)
    else:
        r = 1.0
    for m in range(node.size):
        out[node[m]] += r * amp[m] * np.cos(omega[m] * t + phase[m])


@njit(cache=True)
def _junction_currents(x, ja, jb, ic, inv_phi0, out):
    for i in range(out.size):
        out[i] = 0.0
    for m in range(ja.size):
        a = ja[m]
        b = jb[m]
        d = 0.0
        if a >= 0:
            d += x[a]
        if b >= 0:
            d -= x[b]
        cur = ic[m] * np.sin(d * inv_phi0)
        if a >= 0:
            out[a] += cur
        if b >= 0:
            out[b] -= cur


@njit(cache=True, nogil=True)
def run(
    a0,
    b0,
    m4,
    bw,
    ja,
    jb,
    ic,
    inv_phi0,
    src_node,
    src_amp,
    src_omega,
    src_phase,
    ramp_time,
    dt,
    n_steps,
    rec_nodes,
    rec_start,
    rec_junctions,
    newton_tol,
    max_iter,
    max_phase_rate,
):
    """Integrate ``n_steps`` steps from rest.

    Returns (status, step, residual, rec_v, rec_phi_j, max_abs_phase, iterations).
    Node voltages of ``rec_nodes`` and phases of ``rec_junctions`` are stored
    for steps ``rec_start..n_steps`` inclusive.
    """
    n = a0.shape[0]
    nj = ja.size
    phi = np.zeros(n)
    v = np.zeros(n)
    x = np.zeros(n)
    rhs = np.zeros(n)
    tmp = np.zeros(n)
    fcur = np.zeros(n)
    u0 = np.zeros(n)
    u1 = np.zeros(n)
    r = np.zeros(n)
    jac = np.empty_like(a0)
    n_rec = n_steps - rec_start + 1
    rec_v = np.zeros((n_rec, rec_nodes.size))
    rec_pj = np.zeros((n_rec, rec_junctions.size))
    max_phase = np.zeros(nj)
    total_iter = 0
    linear = nj == 0
    if linear:
        # one factorisation serves every step
        for i in range(n):
            for j in range(2 * bw + 1):
                jac[i, j] = a0[i, j]
        if _band_lu(jac, bw) == 0.0:
            return STATUS_PIVOT, 0, 0.0, rec_v, rec_pj, max_phase, 0
    _source(0.0, src_node, src_amp, src_omega, src_phase, ramp_time, n, u0)
    for k in range(n_steps):
        t1 = (k + 1) * dt
        _source(t1, src_node, src_amp, src_omega, src_phase, ramp_time, n, u1)
        _band_matvec(b0, phi, bw, rhs)
        _band_matvec(m4, v, bw, tmp)
        _junction_currents(phi, ja, jb, ic, inv_phi0, fcur)
        for i in range(n):
            rhs[i] += tmp[i] + u0[i] + u1[i] - fcur[i]
        if linear:
            for i in range(n):
                x[i] = rhs[i]
            _band_solve(jac, bw, x)
            total_iter += 1
        else:
            for i in range(n):
                x[i] = phi[i] + dt * v[i]
            converged = False
            res = 0.0
            for it in range(max_iter):
                _band_matvec(a0, x, bw, r)
                _junction_currents(x, ja, jb, ic, inv_phi0, fcur)
                for i in range(n):
                    r[i] += fcur[i] - rhs[i]
                for i in range(n):
                    for j in range(2 * bw + 1):
                        jac[i, j] = a0[i, j]
                for m in range(nj):
                    a = ja[m]
                    b = jb[m]
                    d = 0.0
                    if a >= 0:
                        d += x[a]
                    if b >= 0:
                        d -= x[b]
                    g = ic[m] * inv_phi0 * np.cos(d * inv_phi0)
                    if a >= 0:
                        jac[a, bw] += g
                    if b >= 0:
                        jac[b, bw] += g
                    if a >= 0 and b >= 0:
                        jac[a, b - a + bw] -= g
                        jac[b, a - b + bw] -= g
                if _band_lu(jac, bw) == 0.0:
                    return STATUS_PIVOT, k + 1, 0.0, rec_v, rec_pj, max_phase, total_iter
                _band_solve(jac, bw, r)
                total_iter += 1
                step = 0.0
                scale = 0.0
                for i in range(n):
                    x[i] -= r[i]
                    if abs(r[i]) > step:
                        step = abs(r[i])
                    if abs(x[i]) > scale:
                        scale = abs(x[i])
                res = step
                # fluxes are compared against phi0 so that tiny signals converge
                if step <= newton_tol * max(scale, 1.0 / inv_phi0):
                    converged = True
                    break
            if not converged:
                return STATUS_NEWTON, k + 1, res, rec_v, rec_pj, max_phase, total_iter
        for i in range(n):
            v[i] = 2.0 * (x[i] - phi[i]) / dt - v[i]
            phi[i] = x[i]
            u0[i] = u1[i]
        for m in range(nj):
            a = ja[m]
            b = jb[m]
            d = 0.0
            dv = 0.0
            if a >= 0:
                d += phi[a]
                dv += v[a]
            if b >= 0:
                d -= phi[b]
                dv -= v[b]
            p = abs(d * inv_phi0)
            if p > max_phase[m]:
                max_phase[m] = p
            if abs(dv * inv_phi0) > max_phase_rate:
                return STATUS_RUNAWAY, k + 1, abs(dv * inv_phi0), rec_v, rec_pj, max_phase, total_iter
        if k + 1 >= rec_start:
            row = k + 1 - rec_start
            for c in range(rec_nodes.size):
                rec_v[row, c] = v[rec_nodes[c]]
            for c in range(rec_junctions.size):
                m = rec_junctions[c]
                d = 0.0
                if ja[m] >= 0:
                    d += phi[ja[m]]
                if jb[m] >= 0:
                    d -= phi[jb[m]]
                rec_pj[row, c] = d * inv_phi0
    return STATUS_OK, n_steps, 0.0, rec_v, rec_pj, max_phase, total_iter
