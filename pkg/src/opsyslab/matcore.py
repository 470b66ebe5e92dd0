"""Dense complex-Hermitian linear algebra primitives.

Matrices are plain ``numpy`` complex128 arrays.  Hermitian inputs are
validated (residual <= 1e-10) and symmetrized on entry.  The eigensolver
runs cyclic Jacobi on the real symmetric 2d-by-2d embedding when the numba
backend is active, LAPACK ``eigh`` otherwise; both return eigenvalues in
descending order with a unitary matrix of column eigenvectors.
"""

import numpy as np

from . import _kernels
from .backend import USE_NUMBA

HERM_TOL = 1e-10
EIG_RESIDUAL_TOL = 1e-8
AFFINE_RESIDUAL_TOL = 1e-7


class OpsysError(Exception):
    """Base class for all package-level numerical errors."""


class HermiticityError(OpsysError):
    pass


class EigConvergenceError(OpsysError):
    """Jacobi failed to converge; carries the final off-diagonal norm."""

    def __init__(self, off_norm):
        super().__init__(f"eigensolver did not converge; off-diagonal norm {off_norm:.3e}")
        self.off_norm = off_norm


class InfeasibleAffineError(OpsysError):
    pass


def herm(a, tol=HERM_TOL):
    """Validate and symmetrize a Hermitian matrix.

    Raises HermiticityError when max |a_ij - conj(a_ji)| exceeds tol
    relative to the matrix scale.
    """
    a = np.asarray(a, dtype=np.complex128)
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise HermiticityError(f"expected a square matrix, got shape {a.shape}")
    if not np.all(np.isfinite(a.view(np.float64))):
        raise HermiticityError("non-finite entries")
    scale = 1.0 + float(np.abs(a).max(initial=0.0))
    resid = float(np.abs(a - a.conj().T).max(initial=0.0))
    if resid > tol * scale:
        raise HermiticityError(f"hermiticity residual {resid:.3e} exceeds {tol:.1e}")
    return 0.5 * (a + a.conj().T)


def frob_inner(a, b):
    """Real Frobenius pairing Re tr(a^* b); real-valued on Hermitian pairs."""
    return float(np.real(np.vdot(a, b)))


def _extract_complex_eigs(w2, v2, d, scale):
    """Turn real embedded eigenpairs (2d of them) into d complex eigenpairs.

    Every embedded eigenvalue is doubled; each candidate column (x; y) maps
    to the unit complex vector x + iy.  Within (near-)degenerate groups the
    doubled candidates are complex-linearly dependent, so we keep half of
    each group by pivoted Gram-Schmidt against everything kept so far.
    """
    order = np.argsort(-w2, kind="stable")
    w2 = w2[order]
    v2 = v2[:, order]
    cand = v2[:d, :] + 1j * v2[d:, :]
    group_tol = 1e-7 * (1.0 + scale)

    kept_vecs = []
    kept_vals = []
    leftovers = []

    def residual(u):
        r = u.copy()
        for k in kept_vecs:
            r -= np.vdot(k, r) * k
        return r

    i = 0
    n2 = 2 * d
    while i < n2:
        j = i
        while j + 1 < n2 and w2[j] - w2[j + 1] <= group_tol:
            j += 1
        size = j - i + 1
        take = size // 2
        idx = list(range(i, j + 1))
        for _ in range(take):
            if len(kept_vecs) >= d:
                break
            best, best_norm = -1, -1.0
            for t in idx:
                nrm = float(np.linalg.norm(residual(cand[:, t])))
                if nrm > best_norm:
                    best, best_norm = t, nrm
            if best_norm < 1e-6:
                break
            u = residual(cand[:, best])
            kept_vecs.append(u / np.linalg.norm(u))
            kept_vals.append(w2[best])
            idx.remove(best)
        leftovers.extend(idx)
        i = j + 1

    # Borderline grouping can under-select; fill from leftovers by pivoting.
    while len(kept_vecs) < d:
        best, best_norm = -1, -1.0
        for t in leftovers:
            nrm = float(np.linalg.norm(residual(cand[:, t])))
            if nrm > best_norm:
                best, best_norm = t, nrm
        u = residual(cand[:, best])
        kept_vecs.append(u / np.linalg.norm(u))
        kept_vals.append(w2[best])
        leftovers.remove(best)

    w = np.array(kept_vals)
    v = np.column_stack(kept_vecs)
    order = np.argsort(-w, kind="stable")
    return w[order], v[:, order]


def eig_herm(a):
    """Spectral decomposition of a Hermitian matrix.

    Returns (eigenvalues descending, unitary eigenvector matrix V) with
    a = V diag(w) V^*.  Raises EigConvergenceError if the Jacobi sweep cap
    is hit before the off-diagonal norm is negligible.
    """
    a = herm(a)
    d = a.shape[0]
    norm_f = float(np.linalg.norm(a))
    if USE_NUMBA:
        m = _kernels._embed_real(a)
        w2, v2, off, _ = _kernels.jacobi_sym(m)
        if off > _kernels.JACOBI_OFF_TOL * (1.0 + np.linalg.norm(m)):
            raise EigConvergenceError(off)
        scale = float(np.abs(w2).max(initial=0.0))
        w, v = _extract_complex_eigs(w2, v2, d, scale)
    else:
        w, v = np.linalg.eigh(a)
        w = w[::-1].copy()
        v = v[:, ::-1].copy()
    resid = float(np.linalg.norm(a - (v * w) @ v.conj().T))
    if resid > EIG_RESIDUAL_TOL * (1.0 + norm_f):
        raise EigConvergenceError(resid)
    return w, v


def psd_project(a):
    """Frobenius-nearest PSD matrix: clip negative eigenvalues to zero."""
    a = herm(a)
    proj, _ = _kernels.psd_project_kernel(a)
    return 0.5 * (proj + proj.conj().T)


def lambda_min(a):
    """Bottom eigenvalue of a Hermitian matrix."""
    return _kernels.lambda_min_kernel(herm(a))


def affine_project(a, constraints):
    """Frobenius-nearest Hermitian x to a with <C_t, x> = b_t for all t.

    The pairing is the real Frobenius inner product; the correction lives in
    span{C_t}, solved through the constraint Gram matrix (pseudo-inverse for
    rank deficiency).  Inconsistent constraints raise InfeasibleAffineError.
    """
    a = herm(a)
    if not constraints:
        return a
    cs = [herm(c) for c, _ in constraints]
    bs = np.array([float(b) for _, b in constraints])
    n = len(cs)
    gram = np.empty((n, n))
    for s in range(n):
        for t in range(s, n):
            gram[s, t] = gram[t, s] = frob_inner(cs[s], cs[t])
    rhs = bs - np.array([frob_inner(c, a) for c in cs])
    lam = np.linalg.pinv(gram, rcond=1e-12) @ rhs
    x = a + sum(l * c for l, c in zip(lam, cs))
    x = 0.5 * (x + x.conj().T)
    viol = max(
        abs(frob_inner(c, x) - b) / (1.0 + abs(b)) for c, b in zip(cs, bs)
    )
    if viol > AFFINE_RESIDUAL_TOL:
        raise InfeasibleAffineError(f"constraint residual {viol:.3e} after least squares")
    return x


def orthonormal_constraints(constraints, dim):
    """Orthonormalize affine constraints for the Dykstra kernel.

    Returns (qs, xpart): a Frobenius-orthonormal Hermitian basis of
    span{C_t} stacked as a (t, dim, dim) array, and a particular point of
    the affine set.  Raises InfeasibleAffineError on inconsistency.
    """
    xpart = affine_project(np.zeros((dim, dim), dtype=np.complex128), constraints)
    qs = []
    for c, _ in constraints:
        q = herm(c)
        nrm0 = np.linalg.norm(q)
        for k in qs:
            q = q - frob_inner(k, q) * k
        nrm = np.linalg.norm(q)
        if nrm > 1e-10 * (1.0 + nrm0):
            qs.append(q / nrm)
    if qs:
        out = np.stack(qs).astype(np.complex128)
    else:
        out = np.zeros((0, dim, dim), dtype=np.complex128)
    return out, xpart


def op_norm(a):
    """Largest singular value via the Gram matrix a^* a."""
    a = np.asarray(a, dtype=np.complex128)
    if a.ndim != 2:
        a = a.reshape(1, -1)
    if a.shape[0] < a.shape[1]:
        g = a @ a.conj().T
    else:
        g = a.conj().T @ a
    if g.shape[0] == 0:
        return 0.0
    w, _ = eig_herm(g)
    return float(np.sqrt(max(w[0], 0.0)))


def op_norm_fast(a):
    """op_norm without validation overhead, for sampling-loop interiors."""
    a = np.asarray(a, dtype=np.complex128)
    if a.shape[0] < a.shape[1]:
        g = a @ a.conj().T
    else:
        g = a.conj().T @ a
    g = 0.5 * (g + g.conj().T)
    if USE_NUMBA:
        w, _, _, _ = _kernels.jacobi_sym(_kernels._embed_real(g))
        lam = float(w.max())
    else:
        lam = float(np.linalg.eigvalsh(g)[-1])
    return float(np.sqrt(max(lam, 0.0)))


# ---------------------------------------------------------------------------
# sampling helpers shared across modules (all driven by an explicit rng)


def rand_herm(rng, d, scale=1.0):
    g = rng.standard_normal((d, d)) + 1j * rng.standard_normal((d, d))
    return scale * 0.5 * (g + g.conj().T) / np.sqrt(d)


def haar_unitary(rng, d):
    """Haar-distributed unitary via QR of a complex Ginibre matrix."""
    g = rng.standard_normal((d, d)) + 1j * rng.standard_normal((d, d))
    q, r = np.linalg.qr(g)
    ph = np.diag(r).copy()
    ph /= np.abs(ph)
    return q * ph


def haar_isometry(rng, d_from, d_to):
    """Haar-random isometry: columns of a Haar unitary on the larger space."""
    if d_to < d_from:
        raise ValueError("isometry needs d_to >= d_from")
    u = haar_unitary(rng, d_to)
    return u[:, :d_from]


# ---------------------------------------------------------------------------
# JSON wire format: {"dim": n, "entries": [[re, im], ...]} row-major


def matrix_to_json(a):
    a = np.asarray(a, dtype=np.complex128)
    return {
        "dim": int(a.shape[0]),
        "entries": [[float(z.real), float(z.imag)] for z in a.ravel()],
    }


def matrix_from_json(obj):
    d = int(obj["dim"])
    flat = np.array([complex(re, im) for re, im in obj["entries"]], dtype=np.complex128)
    if flat.size != d * d:
        raise ValueError(f"expected {d * d} entries, got {flat.size}")
    return flat.reshape(d, d)
