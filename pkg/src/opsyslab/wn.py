"""The covering map onto the unitary-generator system and its correction
algorithm.

W denotes the span of the products u_i^* u_j of n+1 unitaries with u_{n+1}
the identity; it is completely order isomorphic to the quotient of M_{n+1}
by the diagonal trace-zero matrices, with the covering map

    gamma(e_ij) = u_i^* u_j / (n+1).

The correction algorithm turns a map on W that is merely close to u.c.p.
into an exactly u.c.p. one: pull back through gamma, project to the
nearest u.c.p. map on the full algebra, renormalize the diagonal with an
operator congruence, and descend to the quotient again.  Every
intermediate distance is recorded so the contraction constants can be
inspected rather than assumed.
"""

from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from . import conic, cpmaps, matcore, opsys


class CorrectionError(matcore.OpsysError):
    """Raised when a diagonal image is not uniformly invertible."""

    def __init__(self, index, min_eig):
        self.index = index
        self.min_eig = min_eig
        super().__init__(
            f"diagonal image b_{index} is not invertible "
            f"(min eigenvalue {min_eig:.3e}); input too far from u.c.p."
        )


@dataclass
class WnContext:
    n: int
    quotient: opsys.OperatorSystem
    kernel: opsys.KernelSpace
    reps: list = field(default_factory=list)
    rep_dims: list = field(default_factory=list)
    rep_seeds: list = field(default_factory=list)

    def to_json(self):
        return {
            "n": self.n,
            "rep_dims": list(self.rep_dims),
            "rep_seeds": list(self.rep_seeds),
        }


def make_context(n, rep_dims=(), seed=0):
    """Quotient system plus sampled concrete representations.

    Each representation draws its Haar unitaries from a seed derived from
    (seed, position), so contexts are reproducible.
    """
    quotient, kernel = opsys.wn_quotient_system(n)
    reps, seeds = [], []
    for pos, d in enumerate(rep_dims):
        s = int(np.random.default_rng([seed, pos]).integers(0, 2**31 - 1))
        reps.append(opsys.wn_concrete_rep(n, d, s))
        seeds.append(s)
    return WnContext(
        n=n, quotient=quotient, kernel=kernel,
        reps=reps, rep_dims=list(rep_dims), rep_seeds=seeds,
    )


def _rep_isometry(rep):
    """Stacked unitaries V with V^* (x (x) I) V = sum x_ij u_i^* u_j."""
    us = rep.unitaries
    return np.concatenate(us, axis=0)


def gamma_n(ctx, rep_index=None):
    """The covering map e_ij -> u_i^* u_j / (n+1).

    With rep_index the codomain is the sampled concrete representation
    (a Stinespring compression, hence u.c.p. by construction); without it
    the images are the kernel-orthogonal coset representatives in quotient
    coordinates.
    """
    n = ctx.n
    domain = opsys.full_matrix_system(n + 1)
    if rep_index is None:
        images = [
            quotient_image_matrix(ctx, b) for b in domain.basis
        ]
        return cpmaps.CpMap(
            domain=domain, codomain_dim=n + 1, basis_images=images, choi=None
        )
    rep = ctx.reps[rep_index]
    v = _rep_isometry(rep) / np.sqrt(n + 1)
    d = rep.ambient_dim
    images = [
        v.conj().T @ np.kron(b, np.eye(d, dtype=np.complex128)) @ v
        for b in domain.basis
    ]
    return cpmaps.map_from_images(domain, images)


def quotient_image_matrix(ctx, x):
    """Coset representative of gamma(x): project the lift onto the
    Frobenius-orthocomplement of the kernel span."""
    return opsys.quotient_coset(ctx.quotient, x).ambient()


@dataclass
class CorrectionTrace:
    n: int
    delta: Optional[float]
    nearest_ucp_choi_dist: float
    cb_pullback_vs_projected: float
    min_diag_eig: float
    cb_congruence_step: float
    sup_generator_dev: float
    kernel_residual: float
    bound_16n4: Optional[float] = None
    bound_4n2: Optional[float] = None
    bound_2n2: Optional[float] = None
    within_16n4: Optional[bool] = None
    within_4n2: Optional[bool] = None
    within_2n2: Optional[bool] = None

    def to_json(self):
        return {k: v for k, v in self.__dict__.items()}


def _inv_sqrt(mat, floor):
    w, v = matcore.eig_herm(mat)
    if w[-1] <= floor:
        return None, float(w[-1])
    return (v * (1.0 / np.sqrt(w))) @ v.conj().T, float(w[-1])


def pullback(phi, ctx):
    """phi composed with the covering map, as a map on the full algebra."""
    n = ctx.n
    domain = opsys.full_matrix_system(n + 1)
    images = []
    for b in domain.basis:
        coset = opsys.quotient_coset(ctx.quotient, b)
        images.append(cpmaps._apply_coords(phi, coset.coords))
    return cpmaps.map_from_images(domain, images)


def correct_to_ucp(phi, ctx, delta=None, tol=1e-7, config=conic.DEFAULT_CONFIG):
    """Correct a near-u.c.p. map on the quotient system to an exact one.

    Steps: pull back through the covering map; replace by the
    Frobenius-nearest u.c.p. map on the full algebra; extract the diagonal
    images b_i and renormalize by the operator congruence with
    ((n+1) b_i)^{-1/2}, which makes every diagonal image exactly
    unit/(n+1) and the kernel annihilated; descend to quotient
    coordinates.  Returns the corrected map and a trace of every
    intermediate distance; when delta is given the proof-chain thresholds
    delta/16n^4, delta/4n^2, delta/2n^2 are evaluated as diagnostics.
    """
    n = ctx.n
    q = phi.codomain_dim
    phi_prime = pullback(phi, ctx)
    res = cpmaps.nearest_ucp(phi_prime, tol=tol, config=config)
    psi_prime = res.map
    cb_step1 = cpmaps.cb_upper(cpmaps.map_sub(psi_prime, phi_prime))
    # diagonal images and the congruence blocks
    eye_q = np.eye(q, dtype=np.complex128)
    bs, min_eig = [], np.inf
    floor = tol * (n + 1)
    units = [e for _, _, e in cpmaps._matrix_units(n + 1)]
    for i in range(n + 1):
        b_i = cpmaps.apply_map(psi_prime, units[i * (n + 1) + i])
        b_i = 0.5 * (b_i + b_i.conj().T)
        root, lam = _inv_sqrt((n + 1) * b_i, floor * (n + 1))
        if root is None:
            raise CorrectionError(i, lam / (n + 1))
        bs.append(root)
        min_eig = min(min_eig, lam / (n + 1))
    # psi''(e_ij) = B_i psi'(e_ij) B_j: a congruence of the Choi matrix,
    # so complete positivity is preserved and psi''(e_ii) = I/(n+1) exactly
    unit_images = [
        bs[i] @ cpmaps.apply_map(psi_prime, units[i * (n + 1) + j]) @ bs[j]
        for i in range(n + 1)
        for j in range(n + 1)
    ]
    domain = phi_prime.domain
    images2 = []
    for bmat in domain.basis:
        acc = np.zeros((q, q), dtype=np.complex128)
        for idx, (i, j) in enumerate(
            (i, j) for i in range(n + 1) for j in range(n + 1)
        ):
            acc += bmat[i, j] * unit_images[idx]
        images2.append(0.5 * (acc + acc.conj().T))
    psi_two = cpmaps.map_from_images(domain, images2)
    cb_step2 = cpmaps.cb_upper(cpmaps.map_sub(psi_two, psi_prime))
    # kernel annihilation residual (should be ~0: diagonals are all equal)
    kres = max(
        matcore.op_norm_fast(cpmaps.apply_map(psi_two, k.astype(np.complex128)))
        for k in ctx.kernel.basis
    )
    # descend: the corrected map on quotient coordinates
    out_images = [
        cpmaps.apply_map(psi_two, b) for b in ctx.quotient.basis
    ]
    psi = cpmaps.CpMap(
        domain=ctx.quotient, codomain_dim=q, basis_images=out_images, choi=None
    )
    # generator-wise deviation: sup over e_ij of (n+1) * |psi''-phi'| images
    sup_dev = 0.0
    for u in units:
        dev = (n + 1) * (
            cpmaps.apply_map(psi_two, u) - cpmaps.apply_map(phi_prime, u)
        )
        sup_dev = max(sup_dev, matcore.op_norm_fast(dev))
    trace = CorrectionTrace(
        n=n,
        delta=delta,
        nearest_ucp_choi_dist=float(res.choi_distance),
        cb_pullback_vs_projected=float(cb_step1),
        min_diag_eig=float(min_eig),
        cb_congruence_step=float(cb_step2),
        sup_generator_dev=float(sup_dev),
        kernel_residual=float(kres),
    )
    if delta is not None:
        trace.bound_16n4 = delta / (16.0 * n**4)
        trace.bound_4n2 = delta / (4.0 * n**2)
        trace.bound_2n2 = delta / (2.0 * n**2)
        trace.within_16n4 = cb_step1 < trace.bound_16n4
        trace.within_4n2 = cb_step2 < trace.bound_4n2
        trace.within_2n2 = sup_dev < trace.bound_2n2
    return psi, trace


# ---------------------------------------------------------------------------
# quotient vs concrete comparison
# ---------------------------------------------------------------------------


def circle_values(theta):
    """Values of the n=1 quotient basis functions on the unit circle.

    The coset basis [I, symmetric off-diagonal, antisymmetric off-diagonal]
    maps to [1, cos(theta)/sqrt(2), sin(theta)/sqrt(2)] under the covering
    identification (a global 1/(n+1) scale dropped: it does not affect
    positivity).
    """
    s = 1.0 / np.sqrt(2.0)
    return np.array([np.ones_like(theta), s * np.cos(theta), s * np.sin(theta)])


def circle_min_eig(coords, grid=720, refine=64):
    """min over the circle of lambda_min of a level-k element of the n=1
    quotient, evaluated in its exact function representation.

    coords has shape (k, k, 3); each eigenvalue branch is a degree-one
    trigonometric polynomial, so a dense grid with local refinement is
    accurate to well below the working tolerances.
    """
    coords = np.asarray(coords, dtype=np.complex128)

    def min_on(thetas):
        vals = circle_values(thetas)  # (3, len)
        mats = np.einsum("abs,st->tab", coords, vals)
        mats = 0.5 * (mats + np.conj(mats.transpose(0, 2, 1)))
        eigs = np.linalg.eigvalsh(mats)
        idx = int(np.argmin(eigs[:, 0]))
        return float(eigs[idx, 0]), thetas[idx]

    thetas = np.linspace(0.0, 2.0 * np.pi, grid, endpoint=False)
    best, arg = min_on(thetas)
    h = 2.0 * np.pi / grid
    fine = np.linspace(arg - h, arg + h, refine)
    best2, _ = min_on(fine)
    return min(best, best2)


def circle_positive(x, tol=1e-6):
    """Exact n=1 oracle: a level-k coset element is positive iff its circle
    representation is PSD at every point; at level 1 this is p+r >= 2|q|."""
    return circle_min_eig(x.coords) >= -tol


def quotient_vs_concrete(ctx, x, level=None, tol=1e-6, config=conic.DEFAULT_CONFIG):
    """Compare quotient-cone membership with spatial positivity in every
    sampled concrete representation (plus the exact circle oracle at n=1).

    The quotient verdict implies positivity in each representation; the
    converse can fail for unlucky representations and is logged, not
    asserted.
    """
    if x.system is not ctx.quotient and x.system.dim != ctx.quotient.dim:
        raise ValueError("element must live on the context quotient system")
    cert = opsys.cone_member(x, tol=tol, config=config)
    rep_pos = []
    for rep in ctx.reps:
        amb = _rep_image(ctx, rep, x)
        lam = matcore.lambda_min(amb)
        rep_pos.append(bool(lam >= -tol))
    report = {
        "quotient_verdict": cert.verdict,
        "rep_positive": rep_pos,
        "agreements": sum(
            1 for r in rep_pos if r == (cert.verdict == conic.FEASIBLE)
        ),
        "converse_exception": bool(
            rep_pos and all(rep_pos) and cert.verdict == conic.INFEASIBLE
        ),
    }
    if ctx.n == 1:
        report["circle_positive"] = circle_positive(x, tol=tol)
        report["circle_min_eig"] = circle_min_eig(x.coords)
    return report


def _rep_image(ctx, rep, x):
    """Spatial image of a quotient element under the covering map into a
    concrete representation (positivity-preserving global scale dropped)."""
    n = ctx.n
    us = rep.unitaries
    d = rep.ambient_dim
    k = x.level
    basis_imgs = []
    for b in ctx.quotient.basis:
        img = np.zeros((d, d), dtype=np.complex128)
        for i in range(n + 1):
            for j in range(n + 1):
                if b[i, j] != 0:
                    img += b[i, j] * (us[i].conj().T @ us[j])
        basis_imgs.append(img)
    out = np.zeros((k * d, k * d), dtype=np.complex128)
    for s, img in enumerate(basis_imgs):
        out += np.kron(x.coords[:, :, s], img)
    return 0.5 * (out + out.conj().T)
