"""Hot numerical kernels: cyclic-Jacobi eigensolver and the Dykstra loop.

The numba path compiles these with ``@njit``; the numpy fallback replaces
the Jacobi-based spectral steps with LAPACK ``eigh`` (see ``backend``).
Hermitian d-by-d complex matrices are handled through their real symmetric
2d-by-2d embedding [[A, -B], [B, A]] for H = A + iB; spectral functions
commute with the embedding, so PSD projection never needs complex
eigenvector extraction.
"""

import numpy as np

from .backend import USE_NUMBA

if USE_NUMBA:
    from numba import njit
else:  # no-op decorator so the same source runs as plain python

    def njit(*args, **kwargs):
        if args and callable(args[0]):
            return args[0]

        def deco(fn):
            return fn

        return deco


JACOBI_MAX_SWEEPS = 100
JACOBI_OFF_TOL = 1e-12


@njit(cache=True)
def jacobi_sym(mat, max_sweeps=JACOBI_MAX_SWEEPS, off_tol=JACOBI_OFF_TOL):
    """Cyclic Jacobi on a real symmetric matrix.

    Returns (eigenvalues, eigenvector columns, final off-diagonal Frobenius
    norm, sweeps used).  Converged when the off-diagonal norm drops below
    off_tol * (1 + ||mat||_F).
    """
    n = mat.shape[0]
    a = mat.copy()
    v = np.eye(n)
    norm_f = 0.0
    for i in range(n):
        for j in range(n):
            norm_f += a[i, j] * a[i, j]
    norm_f = np.sqrt(norm_f)
    stop = off_tol * (1.0 + norm_f)
    off = 0.0
    sweeps = 0
    for sweep in range(max_sweeps):
        off = 0.0
        for i in range(n - 1):
            for j in range(i + 1, n):
                off += 2.0 * a[i, j] * a[i, j]
        off = np.sqrt(off)
        sweeps = sweep
        if off <= stop:
            break
        for p in range(n - 1):
            for q in range(p + 1, n):
                apq = a[p, q]
                if abs(apq) <= 1e-300:
                    continue
                theta = (a[q, q] - a[p, p]) / (2.0 * apq)
                if theta >= 0.0:
                    t = 1.0 / (theta + np.sqrt(theta * theta + 1.0))
                else:
                    t = -1.0 / (-theta + np.sqrt(theta * theta + 1.0))
                c = 1.0 / np.sqrt(t * t + 1.0)
                s = t * c
                for k in range(n):
                    akp = a[k, p]
                    akq = a[k, q]
                    a[k, p] = c * akp - s * akq
                    a[k, q] = s * akp + c * akq
                for k in range(n):
                    apk = a[p, k]
                    aqk = a[q, k]
                    a[p, k] = c * apk - s * aqk
                    a[q, k] = s * apk + c * aqk
                for k in range(n):
                    vkp = v[k, p]
                    vkq = v[k, q]
                    v[k, p] = c * vkp - s * vkq
                    v[k, q] = s * vkp + c * vkq
    w = np.empty(n)
    for i in range(n):
        w[i] = a[i, i]
    return w, v, off, sweeps


@njit(cache=True)
def _embed_real(h):
    """Real symmetric embedding [[A, -B], [B, A]] of a Hermitian matrix."""
    d = h.shape[0]
    m = np.empty((2 * d, 2 * d))
    for i in range(d):
        for j in range(d):
            re = h[i, j].real
            im = h[i, j].imag
            m[i, j] = re
            m[i + d, j + d] = re
            m[i, j + d] = -im
            m[i + d, j] = im
    return m


@njit(cache=True)
def _unembed(m):
    """Extract the Hermitian matrix whose embedding is m (symmetrizing)."""
    d2 = m.shape[0]
    d = d2 // 2
    out = np.empty((d, d), dtype=np.complex128)
    for i in range(d):
        for j in range(d):
            re = 0.5 * (m[i, j] + m[i + d, j + d])
            im = 0.5 * (m[i + d, j] - m[i, j + d])
            out[i, j] = re + 1j * im
    for i in range(d):
        for j in range(i, d):
            z = 0.5 * (out[i, j] + np.conj(out[j, i]))
            out[i, j] = z
            out[j, i] = np.conj(z)
    return out


@njit(cache=True)
def psd_project_jacobi(h):
    """Frobenius-nearest PSD matrix to Hermitian h, plus its bottom eigenvalue."""
    m = _embed_real(h)
    w, v, off, sweeps = jacobi_sym(m)
    n = w.shape[0]
    lam_min = w[0]
    for i in range(1, n):
        if w[i] < lam_min:
            lam_min = w[i]
    wc = np.empty(n)
    for i in range(n):
        wc[i] = w[i] if w[i] > 0.0 else 0.0
    mp = (v * wc) @ v.T
    return _unembed(mp), lam_min


def psd_project_numpy(h):
    """eigh-based PSD projection (pure-numpy backend)."""
    w, v = np.linalg.eigh(h)
    proj = (v * np.clip(w, 0.0, None)) @ v.conj().T
    proj = 0.5 * (proj + proj.conj().T)
    return proj, float(w[0])


def psd_project_kernel(h):
    if USE_NUMBA:
        return psd_project_jacobi(h)
    return psd_project_numpy(h)


def lambda_min_kernel(h):
    if USE_NUMBA:
        m = _embed_real(h)
        w, _, _, _ = jacobi_sym(m)
        return float(w.min())
    return float(np.linalg.eigvalsh(h)[0])


# Dykstra verdict codes shared with conic.Certificate.
DYKSTRA_FEASIBLE = 0
DYKSTRA_INFEASIBLE = 1
DYKSTRA_INDETERMINATE = 2


@njit(cache=True)
def _affine_proj(r, qs):
    """Project r onto the orthogonal complement of span(qs), Frobenius metric."""
    out = r.copy()
    for t in range(qs.shape[0]):
        q = qs[t]
        ip = 0.0
        for i in range(q.shape[0]):
            for j in range(q.shape[1]):
                ip += (np.conj(q[i, j]) * out[i, j]).real
        out = out - ip * q
    return out


@njit(cache=True)
def dykstra_numba(a0, qs, xpart, tol, max_iter, gap_factor, stab_iters, stab_slack):
    """Dykstra alternating projections between the PSD cone and an affine set.

    qs: Frobenius-orthonormal Hermitian basis of the constraint span;
    the affine set is xpart + span(qs)^perp.  Returns
    (witness, code, gap, psd_residual, iterations).
    """
    x = xpart + _affine_proj(a0 - xpart, qs)
    p = np.zeros_like(x)
    q = np.zeros_like(x)
    gap = 1e300
    prev_gap = 1e300
    stable = 0
    it = 0
    for it in range(1, max_iter + 1):
        s = x + p
        y, lam = psd_project_jacobi(s)
        p = s - y
        s2 = y + q
        x_new = xpart + _affine_proj(s2 - xpart, qs)
        q = s2 - x_new
        dx = 0.0
        g = 0.0
        for i in range(x.shape[0]):
            for j in range(x.shape[1]):
                dz = x_new[i, j] - x[i, j]
                dx += (dz * np.conj(dz)).real
                gz = y[i, j] - x_new[i, j]
                g += (gz * np.conj(gz)).real
        dx = np.sqrt(dx)
        gap = np.sqrt(g)
        x = x_new
        if gap <= tol and dx <= tol:
            return x, DYKSTRA_FEASIBLE, gap, gap, it
        if gap > gap_factor * tol and abs(gap - prev_gap) <= stab_slack:
            stable += 1
            if stable >= stab_iters:
                return x, DYKSTRA_INFEASIBLE, gap, gap, it
        else:
            stable = 0
        prev_gap = gap
    return x, DYKSTRA_INDETERMINATE, gap, gap, it


def dykstra_numpy(a0, qs, xpart, tol, max_iter, gap_factor, stab_iters, stab_slack):
    """Pure-numpy Dykstra loop; mirrors dykstra_numba exactly."""

    def aff(r):
        out = r.copy()
        for t in range(qs.shape[0]):
            ip = np.real(np.vdot(qs[t], out))
            out -= ip * qs[t]
        return out

    x = xpart + aff(a0 - xpart)
    p = np.zeros_like(x)
    q = np.zeros_like(x)
    gap = np.inf
    prev_gap = np.inf
    stable = 0
    it = 0
    for it in range(1, max_iter + 1):
        s = x + p
        y, _ = psd_project_numpy(s)
        p = s - y
        s2 = y + q
        x_new = xpart + aff(s2 - xpart)
        q = s2 - x_new
        dx = float(np.linalg.norm(x_new - x))
        gap = float(np.linalg.norm(y - x_new))
        x = x_new
        if gap <= tol and dx <= tol:
            return x, DYKSTRA_FEASIBLE, gap, gap, it
        if gap > gap_factor * tol and abs(gap - prev_gap) <= stab_slack:
            stable += 1
            if stable >= stab_iters:
                return x, DYKSTRA_INFEASIBLE, gap, gap, it
        else:
            stable = 0
        prev_gap = gap
    return x, DYKSTRA_INDETERMINATE, gap, gap, it


def dykstra_kernel(a0, qs, xpart, tol, max_iter, gap_factor, stab_iters, stab_slack):
    if USE_NUMBA:
        return dykstra_numba(
            a0, qs, xpart, tol, max_iter, gap_factor, stab_iters, stab_slack
        )
    return dykstra_numpy(a0, qs, xpart, tol, max_iter, gap_factor, stab_iters, stab_slack)
