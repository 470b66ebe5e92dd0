"""Operator systems as unital self-adjoint matrix subspaces.

Three cone regimes:

* ``concrete``  -- positivity of an element is PSD-ness of its ambient
  realization;
* ``dual``      -- elements are functionals on a predual system, stored by
  Frobenius--Riesz representatives; positivity at level k is feasibility of
  a completely positive extension to the full ambient algebra (a PSD Choi
  matrix matching the functional block data);
* ``quotient``  -- elements are cosets modulo a kernel subspace of the full
  algebra; positivity is liftability after adding a kernel correction, up
  to an explicit Archimedean tolerance.

All tolerances appear in the returned certificates; nothing is decided
silently.
"""

import warnings
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from . import conic, matcore

CONCRETE = "concrete"
DUAL = "dual"
QUOTIENT = "quotient"

GS_DROP_TOL = 1e-8


@dataclass
class KernelSpace:
    dim: int
    basis: list


@dataclass
class OperatorSystem:
    ambient_dim: int
    basis: list
    regime: str = CONCRETE
    kernel: Optional[KernelSpace] = None
    predual: Optional["OperatorSystem"] = None
    unit: Optional[np.ndarray] = None  # representative of the order unit
    unitaries: Optional[list] = None  # recorded by wn_concrete_rep

    def __post_init__(self):
        if self.unit is None:
            self.unit = self.basis[0]

    @property
    def dim(self):
        return len(self.basis)

    def unit_coords(self):
        """Coordinates of the order unit over the basis."""
        return coords_of(self, self.unit)

    def to_json(self):
        out = {
            "ambient_dim": self.ambient_dim,
            "regime": self.regime,
            "basis": [matcore.matrix_to_json(b) for b in self.basis],
        }
        if self.kernel is not None:
            out["kernel"] = [matcore.matrix_to_json(k) for k in self.kernel.basis]
        return out


@dataclass
class SystemElement:
    """Level-k element: a k-by-k block of coordinate vectors over the basis."""

    system: OperatorSystem
    coords: np.ndarray  # (k, k, dim) complex
    level: int = 1

    def __post_init__(self):
        self.coords = np.asarray(self.coords, dtype=np.complex128)
        if self.coords.ndim == 1:
            self.coords = self.coords.reshape(1, 1, -1)
        self.level = self.coords.shape[0]

    def is_hermitian(self, tol=1e-9):
        return (
            np.abs(self.coords - np.conj(self.coords.transpose(1, 0, 2))).max()
            <= tol * (1.0 + np.abs(self.coords).max(initial=0.0))
        )

    def ambient(self):
        """Realization in M_k tensor M_m (a lift, for the quotient regime)."""
        k = self.level
        m = self.system.ambient_dim
        out = np.zeros((k * m, k * m), dtype=np.complex128)
        for s, b in enumerate(self.system.basis):
            out += np.kron(self.coords[:, :, s], b)
        return out


def coords_of(system, mat):
    """Level-1 coordinates of an ambient matrix over the system basis."""
    cache = getattr(system, "_coords_cache", None)
    if cache is None:
        cols = np.stack([b.ravel() for b in system.basis], axis=1)
        cache = (cols, np.linalg.pinv(cols))
        system._coords_cache = cache
    cols, pinv = cache
    sol = pinv @ np.asarray(mat).ravel()
    resid = np.linalg.norm(cols @ sol - np.asarray(mat).ravel())
    if resid > 1e-9 * (1.0 + np.linalg.norm(mat)):
        raise ValueError(f"matrix is not in the system span (residual {resid:.2e})")
    return sol


def element_from_ambient(system, mat, level=1):
    """Inverse of SystemElement.ambient for matrices inside the span."""
    m = system.ambient_dim
    k = level
    coords = np.zeros((k, k, system.dim), dtype=np.complex128)
    for a in range(k):
        for b in range(k):
            block = mat[a * m : (a + 1) * m, b * m : (b + 1) * m]
            coords[a, b] = coords_of(system, block)
    return SystemElement(system=system, coords=coords)


def hermitian_basis(d):
    """Frobenius-orthonormal Hermitian basis of M_d (diagonals first)."""
    out = []
    for i in range(d):
        e = np.zeros((d, d), dtype=np.complex128)
        e[i, i] = 1.0
        out.append(e)
    s = 1.0 / np.sqrt(2.0)
    for i in range(d):
        for j in range(i + 1, d):
            e = np.zeros((d, d), dtype=np.complex128)
            e[i, j] = s
            e[j, i] = s
            out.append(e)
            e = np.zeros((d, d), dtype=np.complex128)
            e[i, j] = 1j * s
            e[j, i] = -1j * s
            out.append(e)
    return out


def make_system(ambient_dim, generators):
    """Concrete system spanned by the identity and Hermitian generators.

    Dependent generators are dropped with a warning (modified Gram-Schmidt,
    drop threshold 1e-8 on the residual norm).
    """
    if ambient_dim < 1:
        raise ValueError("ambient dimension must be positive")
    eye = np.eye(ambient_dim, dtype=np.complex128)
    basis = [eye]
    ortho = [eye / np.linalg.norm(eye)]
    dropped = 0
    for g in generators:
        g = matcore.herm(g)
        r = g.copy()
        for q in ortho:
            r = r - matcore.frob_inner(q, r) * q
        nrm = np.linalg.norm(r)
        if nrm <= GS_DROP_TOL * (1.0 + np.linalg.norm(g)):
            dropped += 1
            continue
        r = r / nrm
        basis.append(r)
        ortho.append(r)
    if dropped:
        warnings.warn(f"dropped {dropped} dependent generator(s)", stacklevel=2)
    return OperatorSystem(ambient_dim=ambient_dim, basis=basis, regime=CONCRETE)


def full_matrix_system(d):
    """The full algebra M_d as a concrete system (orthonormal basis after I)."""
    basis = [np.eye(d, dtype=np.complex128)]
    ortho = [basis[0] / np.sqrt(d)]
    for h in hermitian_basis(d):
        r = h.copy()
        for q in ortho:
            r = r - matcore.frob_inner(q, r) * q
        nrm = np.linalg.norm(r)
        if nrm > 1e-10:
            r /= nrm
            basis.append(r)
            ortho.append(r)
    sys = OperatorSystem(ambient_dim=d, basis=basis, regime=CONCRETE)
    sys.is_full = True
    return sys


def is_full_algebra(system):
    return system.regime == CONCRETE and system.dim == system.ambient_dim**2


def wn_quotient_system(n):
    """The quotient of M_{n+1} by the diagonal trace-zero matrices.

    Returns (system, kernel).  The system basis is the identity plus the
    off-diagonal Hermitian units; dimension (n+1)^2 - n.
    """
    if n < 1:
        raise ValueError("n must be >= 1")
    d = n + 1
    kern = []
    for i in range(n):
        k = np.zeros((d, d), dtype=np.complex128)
        k[i, i] = 1.0
        k[i + 1, i + 1] = -1.0
        kern.append(k)
    kernel = KernelSpace(dim=n, basis=kern)
    basis = [np.eye(d, dtype=np.complex128)]
    s = 1.0 / np.sqrt(2.0)
    for i in range(d):
        for j in range(i + 1, d):
            e = np.zeros((d, d), dtype=np.complex128)
            e[i, j] = s
            e[j, i] = s
            basis.append(e)
            e = np.zeros((d, d), dtype=np.complex128)
            e[i, j] = 1j * s
            e[j, i] = -1j * s
            basis.append(e)
    system = OperatorSystem(
        ambient_dim=d, basis=basis, regime=QUOTIENT, kernel=kernel
    )
    return system, kernel


def wn_concrete_rep(n, d, seed):
    """Concrete representation: span of u_i^* u_j for Haar unitaries u_i.

    u_{n+1} is the identity; the (n+1)^2 Hermitian generators are the real
    and imaginary parts of the products.  The sampled unitaries are recorded
    on the returned system.
    """
    if d < 2:
        raise ValueError("representation dimension must be >= 2")
    rng = np.random.default_rng(seed)
    us = [matcore.haar_unitary(rng, d) for _ in range(n)]
    us.append(np.eye(d, dtype=np.complex128))
    gens = []
    for i in range(n + 1):
        for j in range(i, n + 1):
            p = us[i].conj().T @ us[j]
            gens.append(0.5 * (p + p.conj().T))
            if j > i:
                gens.append((p - p.conj().T) / 2j)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        system = make_system(d, gens)
    system.unitaries = us
    return system


def dual_system(e):
    """Dual system of e: dual-basis functionals by Riesz representatives.

    The representative G_i lives in span(e.basis) with tr(G_i b_j) = delta_ij;
    the Archimedean unit is the normalized trace functional x -> tr(x)/m.
    """
    nb = e.dim
    gram = np.empty((nb, nb))
    for i in range(nb):
        for j in range(i, nb):
            gram[i, j] = gram[j, i] = matcore.frob_inner(e.basis[i], e.basis[j])
    ginv = np.linalg.inv(gram)
    duals = []
    for i in range(nb):
        g = sum(ginv[i, j] * e.basis[j] for j in range(nb))
        duals.append(0.5 * (g + g.conj().T))
    rhs = np.array([np.trace(b).real / e.ambient_dim for b in e.basis])
    c = ginv @ rhs
    unit = sum(c[j] * e.basis[j] for j in range(nb))
    unit = 0.5 * (unit + unit.conj().T)
    return OperatorSystem(
        ambient_dim=e.ambient_dim,
        basis=duals,
        regime=DUAL,
        predual=e,
        unit=unit,
    )


def quotient_coset(system, mat):
    """Coset element of an ambient matrix in a quotient system.

    Removes the kernel component (the basis span is the Frobenius-orthogonal
    complement of the kernel span) and returns the coordinate element.
    """
    if system.regime != QUOTIENT:
        raise ValueError("quotient_coset needs a quotient-regime system")
    r = matcore.herm(mat)
    ortho = []
    for k in system.kernel.basis:
        q = k.astype(np.complex128)
        for p in ortho:
            q = q - matcore.frob_inner(p, q) * p
        q = q / np.linalg.norm(q)
        ortho.append(q)
    for q in ortho:
        r = r - matcore.frob_inner(q, r) * q
    return SystemElement(system=system, coords=coords_of(system, r))


def pair_matrix(f, x):
    """Canonical pairing of a dual-side element f with a predual element x.

    For f at level l and x at level k the result is a (k*l)-by-(k*l)
    Hermitian matrix; the scalar pairing is its trace against the
    maximally-correlated pattern (equal levels: sum of blockwise values).
    """
    fc = f.coords
    xc = x.coords
    k, l = x.level, f.level
    p = np.einsum("abi,cdi->acbd", xc, fc).reshape(k * l, k * l)
    return 0.5 * (p + p.conj().T)


def pair_scalar(f, x):
    """Sum over matching blocks of f applied to x (levels must agree)."""
    if f.level != x.level:
        raise ValueError("scalar pairing needs equal levels")
    return float(np.real(np.einsum("abi,abi->", x.coords, f.coords)))


def _dual_membership_problem(x, tol):
    """CP-extension feasibility data for a dual-regime element."""
    e = x.system.predual
    m = e.ambient_dim
    k = x.level
    shifted = x.coords.copy()
    unit_c = x.system.unit_coords()
    for a in range(k):
        shifted[a, a] += tol * unit_c
    hb = hermitian_basis(k)
    cons = []
    for i, b in enumerate(e.basis):
        f_block = shifted[:, :, i]
        for h in hb:
            amat = np.kron(b.T, h)  # b^T stays Hermitian for Hermitian b
            amat = 0.5 * (amat + amat.conj().T)
            rhs = float(np.real(np.trace(h @ f_block)))
            cons.append((amat, rhs))
    return conic.ConeProblem(dim=m * k, affine=cons)


def cone_member(x, tol=1e-7, config=conic.DEFAULT_CONFIG):
    """Level-k positivity of a system element, dispatched on the regime.

    Concrete: eigenvalue check of the ambient realization.  Quotient:
    feasibility of a kernel correction D with lift(x) + D + tol*I PSD.
    Dual: feasibility of a PSD Choi matrix on the ambient algebra matching
    the functional block data.  The certificate always carries the residuals
    and the witness that produced the verdict.
    """
    if not x.is_hermitian():
        raise ValueError("cone membership is a question about Hermitian elements")
    system = x.system
    if system.regime == CONCRETE:
        amb = x.ambient()
        lam = matcore.lambda_min(amb)
        verdict = conic.FEASIBLE if lam >= -tol else conic.INFEASIBLE
        return conic.Certificate(
            verdict=verdict,
            witness=amb,
            affine_residual=0.0,
            psd_residual=max(0.0, -lam),
            detail={"lambda_min": lam, "tol": tol},
        )
    if system.regime == QUOTIENT:
        k = x.level
        m = system.ambient_dim
        lift = x.ambient() + tol * np.eye(k * m)
        dirs = [
            np.kron(h, kb)
            for h in hermitian_basis(k)
            for kb in system.kernel.basis
        ]
        _, comp = conic._complement_basis(dirs, k * m)
        cons = [(q, matcore.frob_inner(q, lift)) for q in comp]
        cert = conic.dykstra_feasible(
            conic.ConeProblem(dim=k * m, affine=cons), tol=min(tol * 0.1, 1e-8),
            config=config,
        )
        cert.detail["tol"] = tol
        if cert.feasible:
            cert.detail["kernel_correction"] = cert.witness - lift
        return cert
    if system.regime == DUAL:
        prob = _dual_membership_problem(x, tol)
        cert = conic.dykstra_feasible(prob, tol=min(tol * 0.1, 1e-8), config=config)
        cert.detail["tol"] = tol
        return cert
    raise ValueError(f"unknown regime {system.regime!r}")
