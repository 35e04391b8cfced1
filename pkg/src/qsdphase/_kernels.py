"""Hot loops: OU noise recursion, fixed-step RK4 propagation, fused ensemble sums.

Each kernel has a numba version (loops over trajectories, then time) and a
numpy version (loops over time, vectorized over the trajectory batch).  The
public wrappers at the bottom dispatch on :data:`qsdphase._backend.BACKEND`.
Both versions agree to rounding; tests run them against each other.
"""

import numpy as np

from ._backend import BACKEND, HAVE_NUMBA, njit

OVERFLOW_LIMIT = 1e100


# --------------------------------------------------------------------- numba

@njit(cache=True)
def _ou_recursion_nb(w, a, b, s0):
    nb, n1 = w.shape
    out = np.empty_like(w)
    for i in range(nb):
        z = s0 * w[i, 0]
        out[i, 0] = z
        for j in range(1, n1):
            z = a * z + b * w[i, j]
            out[i, j] = z
    return out


@njit(cache=True)
def _rk4_step_nb(A, L, K, u0, um, u1, f0, fm, f1, dt, p0, p1):
    # h(t) = A + u(t) L - f(t) K applied to (p0, p1)
    h00 = A[0, 0] + u0 * L[0, 0] - f0 * K[0, 0]
    h01 = A[0, 1] + u0 * L[0, 1] - f0 * K[0, 1]
    h10 = A[1, 0] + u0 * L[1, 0] - f0 * K[1, 0]
    h11 = A[1, 1] + u0 * L[1, 1] - f0 * K[1, 1]
    k10 = h00 * p0 + h01 * p1
    k11 = h10 * p0 + h11 * p1
    m00 = A[0, 0] + um * L[0, 0] - fm * K[0, 0]
    m01 = A[0, 1] + um * L[0, 1] - fm * K[0, 1]
    m10 = A[1, 0] + um * L[1, 0] - fm * K[1, 0]
    m11 = A[1, 1] + um * L[1, 1] - fm * K[1, 1]
    q0 = p0 + 0.5 * dt * k10
    q1 = p1 + 0.5 * dt * k11
    k20 = m00 * q0 + m01 * q1
    k21 = m10 * q0 + m11 * q1
    q0 = p0 + 0.5 * dt * k20
    q1 = p1 + 0.5 * dt * k21
    k30 = m00 * q0 + m01 * q1
    k31 = m10 * q0 + m11 * q1
    e00 = A[0, 0] + u1 * L[0, 0] - f1 * K[0, 0]
    e01 = A[0, 1] + u1 * L[0, 1] - f1 * K[0, 1]
    e10 = A[1, 0] + u1 * L[1, 0] - f1 * K[1, 0]
    e11 = A[1, 1] + u1 * L[1, 1] - f1 * K[1, 1]
    q0 = p0 + dt * k30
    q1 = p1 + dt * k31
    k40 = e00 * q0 + e01 * q1
    k41 = e10 * q0 + e11 * q1
    r0 = p0 + dt / 6.0 * (k10 + 2.0 * k20 + 2.0 * k30 + k40)
    r1 = p1 + dt / 6.0 * (k11 + 2.0 * k21 + 2.0 * k31 + k41)
    return r0, r1


@njit(cache=True)
def _propagate_nb(A, L, K, u, fh, dt, psi0):
    nb, n1 = u.shape
    out = np.zeros((nb, n1, 2), dtype=np.complex128)
    status = np.full(nb, -1, dtype=np.int64)
    for i in range(nb):
        p0 = psi0[i, 0]
        p1 = psi0[i, 1]
        out[i, 0, 0] = p0
        out[i, 0, 1] = p1
        for j in range(n1 - 1):
            u0 = u[i, j]
            u1 = u[i, j + 1]
            p0, p1 = _rk4_step_nb(A, L, K, u0, 0.5 * (u0 + u1), u1,
                                  fh[2 * j], fh[2 * j + 1], fh[2 * j + 2], dt, p0, p1)
            if not (abs(p0) + abs(p1) < OVERFLOW_LIMIT):
                status[i] = j + 1
                break
            out[i, j + 1, 0] = p0
            out[i, j + 1, 1] = p1
    return out, status


@njit(cache=True)
def _accumulate_nb(A, L, K, u, fh, dt, psi0s, want_rho):
    nb, n1 = u.shape
    nth = psi0s.shape[0]
    ov = np.zeros((nth, n1), dtype=np.complex128)
    link = np.zeros((nth, n1 - 1), dtype=np.complex128)
    link_sq = np.zeros((nth, n1 - 1))
    hexp = np.zeros((nth, n1), dtype=np.complex128)
    nrho = n1 if want_rho else 0
    rho = np.zeros((nth, nrho, 2, 2), dtype=np.complex128)
    status = np.full(nb, -1, dtype=np.int64)
    prev0 = np.zeros(nth, dtype=np.complex128)
    prev1 = np.zeros(nth, dtype=np.complex128)
    for i in range(nb):
        # propagator columns: Y = [[y00, y01], [y10, y11]]
        y00 = 1.0 + 0.0j
        y10 = 0.0j
        y01 = 0.0j
        y11 = 1.0 + 0.0j
        for j in range(n1):
            uj = u[i, j]
            fj = fh[2 * j]
            h00 = A[0, 0] + uj * L[0, 0] - fj * K[0, 0]
            h01 = A[0, 1] + uj * L[0, 1] - fj * K[0, 1]
            h10 = A[1, 0] + uj * L[1, 0] - fj * K[1, 0]
            h11 = A[1, 1] + uj * L[1, 1] - fj * K[1, 1]
            for k in range(nth):
                a0 = psi0s[k, 0]
                a1 = psi0s[k, 1]
                p0 = y00 * a0 + y01 * a1
                p1 = y10 * a0 + y11 * a1
                ov[k, j] += a0.conjugate() * p0 + a1.conjugate() * p1
                hp0 = h00 * p0 + h01 * p1
                hp1 = h10 * p0 + h11 * p1
                hexp[k, j] += p0.conjugate() * hp0 + p1.conjugate() * hp1
                if want_rho:
                    rho[k, j, 0, 0] += p0 * p0.conjugate()
                    rho[k, j, 0, 1] += p0 * p1.conjugate()
                    rho[k, j, 1, 0] += p1 * p0.conjugate()
                    rho[k, j, 1, 1] += p1 * p1.conjugate()
                if j > 0:
                    lk = prev0[k].conjugate() * p0 + prev1[k].conjugate() * p1
                    link[k, j - 1] += lk
                    link_sq[k, j - 1] += lk.real * lk.real + lk.imag * lk.imag
                prev0[k] = p0
                prev1[k] = p1
            if j == n1 - 1:
                break
            u1 = u[i, j + 1]
            um = 0.5 * (uj + u1)
            f0 = fh[2 * j]
            fm = fh[2 * j + 1]
            f1 = fh[2 * j + 2]
            y00, y10 = _rk4_step_nb(A, L, K, uj, um, u1, f0, fm, f1, dt, y00, y10)
            y01, y11 = _rk4_step_nb(A, L, K, uj, um, u1, f0, fm, f1, dt, y01, y11)
            if not (abs(y00) + abs(y01) + abs(y10) + abs(y11) < OVERFLOW_LIMIT):
                status[i] = j + 1
                return ov, link, link_sq, hexp, rho, status
    return ov, link, link_sq, hexp, rho, status


# --------------------------------------------------------------------- numpy

def _ou_recursion_np(w, a, b, s0):
    from scipy.signal import lfilter

    out = np.empty_like(w)
    out[:, 0] = s0 * w[:, 0]
    if w.shape[1] > 1:
        zi = (a * out[:, 0])[:, None]
        out[:, 1:] = lfilter([b], [1.0, -a], w[:, 1:], axis=1, zi=zi)[0]
    return out


def _generators_np(A, L, K, uj, fj):
    # (B, 2, 2) stack of h = A + u L - f K
    return A[None] + uj[:, None, None] * L[None] - fj * K[None]


def _rk4_step_np(A, L, K, u0, u1, f0, fm, f1, dt, y):
    um = 0.5 * (u0 + u1)
    h0 = _generators_np(A, L, K, u0, f0)
    hm = _generators_np(A, L, K, um, fm)
    h1 = _generators_np(A, L, K, u1, f1)
    k1 = h0 @ y
    k2 = hm @ (y + 0.5 * dt * k1)
    k3 = hm @ (y + 0.5 * dt * k2)
    k4 = h1 @ (y + dt * k3)
    return y + dt / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4)


def _propagate_np(A, L, K, u, fh, dt, psi0):
    nb, n1 = u.shape
    out = np.zeros((nb, n1, 2), dtype=np.complex128)
    status = np.full(nb, -1, dtype=np.int64)
    y = psi0[:, :, None].astype(np.complex128)
    out[:, 0] = psi0
    alive = np.ones(nb, dtype=bool)
    for j in range(n1 - 1):
        y = _rk4_step_np(A, L, K, u[:, j], u[:, j + 1], fh[2 * j], fh[2 * j + 1], fh[2 * j + 2], dt, y)
        mag = np.abs(y[:, 0, 0]) + np.abs(y[:, 1, 0])
        bad = alive & ~(mag < OVERFLOW_LIMIT)
        if bad.any():
            status[bad] = j + 1
            alive &= ~bad
            y[bad] = 0.0
        out[alive, j + 1] = y[alive, :, 0]
    return out, status


def _accumulate_np(A, L, K, u, fh, dt, psi0s, want_rho):
    nb, n1 = u.shape
    nth = psi0s.shape[0]
    ov = np.zeros((nth, n1), dtype=np.complex128)
    link = np.zeros((nth, n1 - 1), dtype=np.complex128)
    link_sq = np.zeros((nth, n1 - 1))
    hexp = np.zeros((nth, n1), dtype=np.complex128)
    rho = np.zeros((nth, n1 if want_rho else 0, 2, 2), dtype=np.complex128)
    status = np.full(nb, -1, dtype=np.int64)
    y = np.broadcast_to(np.eye(2, dtype=np.complex128), (nb, 2, 2)).copy()
    basis = psi0s.T  # (2, nth)
    prev = None
    for j in range(n1):
        psi = y @ basis  # (B, 2, nth)
        ov[:, j] = np.einsum("ak,bak->k", basis.conj(), psi)
        h = _generators_np(A, L, K, u[:, j], fh[2 * j])
        hexp[:, j] = np.einsum("bak,bak->k", psi.conj(), h @ psi)
        if want_rho:
            rho[:, j] = np.einsum("bak,bck->kac", psi, psi.conj())
        if prev is not None:
            lk = np.einsum("bak,bak->bk", prev.conj(), psi)
            link[:, j - 1] = lk.sum(axis=0)
            link_sq[:, j - 1] = (np.abs(lk) ** 2).sum(axis=0)
        prev = psi
        if j == n1 - 1:
            break
        y = _rk4_step_np(A, L, K, u[:, j], u[:, j + 1], fh[2 * j], fh[2 * j + 1], fh[2 * j + 2], dt, y)
        mag = np.abs(y).sum(axis=(1, 2))
        bad = ~(mag < OVERFLOW_LIMIT)
        if bad.any():
            status[np.argmax(bad)] = j + 1
            return ov, link, link_sq, hexp, rho, status
    return ov, link, link_sq, hexp, rho, status


# ------------------------------------------------------------------ dispatch

_IMPLS = {
    "numpy": (_ou_recursion_np, _propagate_np, _accumulate_np),
}
if HAVE_NUMBA:
    _IMPLS["numba"] = (_ou_recursion_nb, _propagate_nb, _accumulate_nb)


def _impl(backend):
    return _IMPLS[backend or BACKEND]


def ou_recursion(w, a, b, s0, backend=None):
    """``z_0 = s0 w_0``, ``z_{j+1} = a z_j + b w_{j+1}`` row by row."""
    w = np.ascontiguousarray(w, dtype=np.complex128)
    return _impl(backend)[0](w, complex(a), float(b), float(s0))


def propagate(ops, u, fh, dt, psi0, backend=None):
    A, L, K = (np.ascontiguousarray(m, dtype=np.complex128) for m in ops)
    u = np.ascontiguousarray(u, dtype=np.complex128)
    fh = np.ascontiguousarray(fh, dtype=np.complex128)
    psi0 = np.ascontiguousarray(psi0, dtype=np.complex128)
    return _impl(backend)[1](A, L, K, u, fh, float(dt), psi0)


def accumulate(ops, u, fh, dt, psi0s, want_rho=False, backend=None):
    A, L, K = (np.ascontiguousarray(m, dtype=np.complex128) for m in ops)
    u = np.ascontiguousarray(u, dtype=np.complex128)
    fh = np.ascontiguousarray(fh, dtype=np.complex128)
    psi0s = np.ascontiguousarray(psi0s, dtype=np.complex128)
    return _impl(backend)[2](A, L, K, u, fh, float(dt), psi0s, bool(want_rho))


def available_backends():
    return list(_IMPLS)
